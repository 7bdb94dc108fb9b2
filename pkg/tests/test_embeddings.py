import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asrnoise.embeddings import (CommonComponentModel, EmbeddingConfig, FrequencyModel,
                                 SentenceSubspace, SentenceVector, cosine_similarity,
                                 embed_average, embed_corpus, embed_subspace, embed_sif,
                                 fit_common_components, load_external_embeddings,
                                 principal_angle_similarity, remove_common_components,
                                 save_embeddings, save_subspaces, sif_weights, similarity,
                                 usif_parameter, usif_weights)
from asrnoise.resources import ResourceError, VectorLexicon, load_stopwords

from conftest import CORPUS

METHODS = ("avg", "avg-nostop", "sif", "usif", "subspace")


def power_iteration_components(x, k, iters=5000):
    """Top-k right singular vectors of x by power iteration with deflation."""
    g = x.T @ x
    out = []
    rng = np.random.default_rng(1)
    for _ in range(k):
        v = rng.normal(size=g.shape[0])
        for _ in range(iters):
            v = g @ v
            v /= np.linalg.norm(v)
        lam = v @ g @ v
        out.append(v)
        g = g - lam * np.outer(v, v)
    return np.array(out)


def _lex(rows):
    return VectorLexicon([f"w{i}" for i in range(len(rows))], np.array(rows, dtype=float))


class TestAverage:
    def test_single_word(self):
        lex = _lex([[1.0, 2.0]])
        assert np.array_equal(embed_average(lex, ["w0"]).values, [1.0, 2.0])

    def test_two_words(self):
        lex = _lex([[1, 0], [0, 1]])
        assert np.array_equal(embed_average(lex, ["w0", "w1"]).values, [0.5, 0.5])

    def test_stopword_fallback(self, lex):
        v = embed_average(lex, ["the", "the", "the"], stopwords={"the"})
        assert np.allclose(v.values, lex["the"], rtol=0, atol=1e-15)

    def test_all_oov_is_degenerate(self, lex):
        v = embed_average(lex, ["zyx", "qwerty"])
        assert v.degenerate and not np.any(v.values)


class TestSifWeights:
    def test_weight_values(self):
        freq = FrequencyModel({"x": 1, "y": 9, "z": 990})
        w = sif_weights(freq, a=0.001)
        assert w["x"] == pytest.approx(0.5, abs=1e-15)
        assert w["y"] == pytest.approx(0.1, abs=1e-15)
        assert w["never"] == 1.0

    def test_frequent_vs_rare(self):
        freq = FrequencyModel({"common": 500_000, "rare": 1, "rest": 499_999})
        w = sif_weights(freq)
        assert w["common"] == pytest.approx(0.002, abs=5e-6)
        assert w["rare"] == pytest.approx(0.999, abs=5e-4)

    def test_equal_frequencies_give_scaled_average(self, lex):
        toks = ["cat", "dog", "red"]
        freq = FrequencyModel({t: 3 for t in toks})
        s = embed_sif(lex, freq, toks)
        a = embed_average(lex, toks)
        assert cosine_similarity(s, a) == pytest.approx(1.0, abs=1e-12)


class TestUsifParameter:
    def test_hand_example(self):
        # V = 4, n = 2: threshold 1 - 0.75^2 = 0.4375, only "a" (p = 0.5) exceeds it
        freq = FrequencyModel({"a": 5, "b": 3, "c": 1, "d": 1})
        assert usif_parameter(freq, sentence_length=2) == pytest.approx(1.5, abs=1e-12)

    def test_weights(self):
        freq = FrequencyModel({"a": 5, "b": 3, "c": 1, "d": 1})
        w = usif_weights(freq, 1.5)
        assert w["a"] == pytest.approx(1.5 / (0.75 + 0.5))
        assert w["unseen"] == pytest.approx(1.5 / (0.75 + 0.1))


class TestCommonComponents:
    def test_power_iteration_oracle(self):
        x = np.random.default_rng(42).normal(size=(50, 10))
        ccm = fit_common_components(x, "usif", m=5)
        oracle = power_iteration_components(x, 5)
        for c, o in zip(ccm.components, oracle):
            assert abs(abs(c @ o) - 1.0) <= 1e-6
        sif = fit_common_components(x, "sif")
        assert abs(abs(sif.components[0] @ oracle[0]) - 1.0) <= 1e-6

    def test_rank_one_data(self):
        v = np.array([3.0, 4.0, 0.0])
        ccm = fit_common_components(np.tile(v, (6, 1)), "usif", m=3)
        assert abs(ccm.components[0] @ v / 5.0) == pytest.approx(1.0, abs=1e-12)
        assert np.all(ccm.singular_values[1:] < 1e-10)

    def test_usif_lambda_equal_singular_values(self):
        x = 3.0 * np.eye(5)
        ccm = fit_common_components(x, "usif", m=5)
        assert np.allclose(ccm.weights, 0.2, atol=1e-12)

    def test_usif_lambda_sum(self):
        x = np.random.default_rng(3).normal(size=(40, 8))
        ccm = fit_common_components(x, "usif", m=5)
        assert abs(ccm.weights.sum() - 1.0) <= 1e-9

    def test_too_few_vectors(self):
        with pytest.raises(ValueError):
            fit_common_components(np.ones((3, 4)), "usif", m=5)

    def test_removal_hand_example(self):
        ccm = CommonComponentModel(np.array([[1.0, 0, 0], [0, 1.0, 0]]), np.array([0.5, 0.5]),
                                   np.array([1.0, 1.0]), "usif")
        out = remove_common_components(SentenceVector(np.array([2.0, 4.0, 6.0])), ccm)
        assert np.array_equal(out.values, [1.0, 2.0, 6.0])

    def test_removal_of_orthogonal_vector(self):
        ccm = CommonComponentModel(np.array([[1.0, 0, 0]]), np.ones(1), np.ones(1), "sif")
        v = SentenceVector(np.array([0.0, 2.0, -1.0]))
        assert np.array_equal(remove_common_components(v, ccm).values, v.values)


class TestSubspace:
    def test_one_word(self):
        lex = _lex([[3.0, 4.0, 0.0]])
        s = embed_subspace(lex, ["w0"])
        assert s.rank == 1
        assert np.allclose(np.abs(s.basis[:, 0]), [0.6, 0.8, 0.0], atol=1e-12)

    def test_two_orthogonal_words(self):
        lex = _lex([[1.0, 0, 0], [0, 2.0, 0]])
        s = embed_subspace(lex, ["w0", "w1"], n_rank=4)
        assert s.rank == 2
        proj = s.basis @ s.basis.T
        assert np.allclose(proj @ [1, 0, 0], [1, 0, 0]) and np.allclose(proj @ [0, 1, 0], [0, 1, 0])

    def test_best_rank4_residual(self):
        rows = np.random.default_rng(5).normal(size=(6, 8))
        lex = _lex(rows)
        s = embed_subspace(lex, [f"w{i}" for i in range(6)], n_rank=4)
        m = rows.T
        resid = m - s.basis @ (s.basis.T @ m)
        sv = np.linalg.svd(m, compute_uv=False)
        assert abs(np.sum(resid ** 2) - np.sum(sv[4:] ** 2)) <= 1e-8

    def test_orthonormal_basis(self, lex, corpus_lines):
        for line in corpus_lines[:30]:
            s = embed_subspace(lex, line.lower().rstrip(".!?").split())
            assert np.allclose(s.basis.T @ s.basis, np.eye(s.rank), atol=1e-10)

    def test_degenerate(self, lex):
        s = embed_subspace(lex, ["zyx"])
        assert s.degenerate and s.rank == 0


class TestSimilarities:
    def test_cosine_examples(self):
        a = SentenceVector(np.array([1.0, 0.0]))
        assert cosine_similarity(a, a) == 1.0
        assert cosine_similarity(a, SentenceVector(np.array([0.0, 1.0]))) == 0.0
        assert cosine_similarity(a, SentenceVector(np.array([1.0, 1.0]))) == \
            pytest.approx(0.70711, abs=1e-5)
        assert cosine_similarity(a, SentenceVector(np.zeros(2))) == 0.0

    def _sub(self, cols):
        return SentenceSubspace(np.array(cols, dtype=float).T, len(cols))

    def test_principal_angles(self):
        q = np.linalg.qr(np.random.default_rng(0).normal(size=(10, 4)))[0]
        s = SentenceSubspace(q, 4)
        assert principal_angle_similarity(s, s) == pytest.approx(2.0, abs=1e-9)
        assert principal_angle_similarity(s, s, normalized=True) == pytest.approx(1.0, abs=1e-9)
        assert principal_angle_similarity(self._sub([[1, 0]]), self._sub([[0, 1]])) == 0.0
        r = 1 / math.sqrt(2)
        assert principal_angle_similarity(self._sub([[1, 0]]), self._sub([[r, r]])) == \
            pytest.approx(0.70711, abs=1e-5)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 4))
    def test_principal_angle_bounds_and_symmetry(self, seed, r1, r2):
        rng = np.random.default_rng(seed)
        a = SentenceSubspace(np.linalg.qr(rng.normal(size=(8, r1)))[0], r1)
        b = SentenceSubspace(np.linalg.qr(rng.normal(size=(8, r2)))[0], r2)
        sim = principal_angle_similarity(a, b)
        assert -1e-12 <= sim <= math.sqrt(min(r1, r2)) + 1e-12
        assert sim == pytest.approx(principal_angle_similarity(b, a), abs=1e-12)

    def test_unequal_ranks(self):
        big = self._sub([[1, 0, 0], [0, 1, 0]])
        small = self._sub([[1, 0, 0]])
        assert principal_angle_similarity(big, small) == pytest.approx(1.0)
        assert principal_angle_similarity(big, small, normalized=True) == pytest.approx(1.0)


@pytest.fixture(scope="module")
def corpus_tokens():
    from asrnoise.corruption import tokenize
    return [tokenize(line).cores for line in CORPUS.read_text().splitlines()]


def _config(method):
    stop = load_stopwords() if method in ("avg-nostop", "subspace") else None
    return EmbeddingConfig(method, stopwords=stop)


class TestCorpusEmbedding:
    @pytest.mark.parametrize("method", METHODS)
    def test_self_similarity(self, method, lex, corpus_tokens):
        emb = embed_corpus(corpus_tokens, lex, _config(method))
        for r in emb.reps:
            if r.degenerate:
                continue
            if method == "subspace":
                assert abs(similarity(r, r) - math.sqrt(r.rank)) <= 1e-8
                assert abs(similarity(r, r, normalized=True) - 1.0) <= 1e-8
            else:
                assert abs(similarity(r, r) - 1.0) <= 1e-8

    @pytest.mark.parametrize("method", ["sif", "usif"])
    def test_post_removal_orthogonality(self, method, lex, corpus_tokens):
        emb = embed_corpus(corpus_tokens, lex, _config(method))
        c1 = emb.ccm.components[0]
        for r in emb.reps:
            if method == "sif":
                assert abs(c1 @ r.values) <= 1e-8 * max(np.linalg.norm(r.values), 1e-300)
        assert abs(emb.ccm.weights.sum() - 1.0) <= 1e-9

    @pytest.mark.parametrize("method", METHODS)
    def test_word_order_invariance(self, method, lex, corpus_tokens):
        rng = np.random.default_rng(0)
        shuffled = [list(rng.permutation(t)) for t in corpus_tokens]
        a = embed_corpus(corpus_tokens, lex, _config(method))
        b = embed_corpus(shuffled, lex, _config(method))
        for x, y in zip(a.reps, b.reps):
            if method == "subspace":
                assert np.allclose(x.basis @ x.basis.T, y.basis @ y.basis.T, atol=1e-9)
            else:
                assert np.allclose(x.values, y.values, atol=1e-12)

    def test_degenerate_sentences_flagged(self, lex):
        emb = embed_corpus([["cat", "dog"], ["zyx"], ["red", "sun"]], lex, _config("sif"))
        assert emb.degenerate == [False, True, False]

    def test_avg_nostop_requires_stopwords(self):
        with pytest.raises(ValueError):
            EmbeddingConfig("avg-nostop")
        with pytest.raises(ValueError):
            EmbeddingConfig("bert")

    def test_usif_estimator_recorded(self, lex, corpus_tokens):
        emb = embed_corpus(corpus_tokens, lex, _config("usif"))
        assert emb.meta["a"] > 0 and "a_estimator" in emb.meta and emb.meta["m"] == 5


class TestExternalVectors:
    def test_round_trip(self, tmp_path, lex, corpus_tokens):
        emb = embed_corpus(corpus_tokens[:20], lex, _config("usif"))
        save_embeddings(emb.reps, tmp_path / "v.tsv")
        back = load_external_embeddings(tmp_path / "v.tsv")
        assert len(back) == 20
        for r in emb.reps:
            assert np.allclose(back[r.sid].values, r.values, rtol=1e-8, atol=1e-12)

    def test_two_lines(self, tmp_path):
        p = tmp_path / "v.tsv"
        p.write_text("a\t1 2\nb\t3 4\n")
        assert sorted(load_external_embeddings(p)) == ["a", "b"]

    def test_dimension_mismatch_names_line(self, tmp_path):
        p = tmp_path / "v.tsv"
        p.write_text("a\t1 2\nb\t3 4 5\n")
        with pytest.raises(ResourceError, match=":2:"):
            load_external_embeddings(p)

    def test_duplicate_id(self, tmp_path):
        p = tmp_path / "v.tsv"
        p.write_text("a\t1 2\na\t3 4\n")
        with pytest.raises(ResourceError, match="duplicate"):
            load_external_embeddings(p)

    def test_subspace_export(self, tmp_path, lex):
        s = embed_subspace(lex, ["cat", "dog", "sun"], n_rank=2)
        s = SentenceSubspace(s.basis, 2, "s0")
        save_subspaces([s], tmp_path / "s.tsv")
        sid, rank, flat = (tmp_path / "s.tsv").read_text().rstrip("\n").split("\t")
        basis = np.array(flat.split(), dtype=float).reshape((lex.dim, int(rank)), order="F")
        assert sid == "s0" and np.allclose(basis, s.basis, atol=1e-8)
