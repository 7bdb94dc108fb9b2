"""Command-line entry point: ``asrnoise <command> [options]``.

Commands: validate, subst-table {build,merge}, corrupt, embed, sweep, sts.
Every command accepts ``--config FILE`` (YAML or JSON mapping of option
names to values); options given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import yaml

from . import __version__
from .corruption import corrupt_corpus, tokenize, write_records
from .embeddings import (METHODS, EmbeddingConfig, FrequencyModel, SentenceVector, embed_corpus,
                         load_external_embeddings, save_embeddings, save_subspaces)
from .phonology import PhonemeCostModel, ZeroPolicy, format_dp_matrix, word_phono_distance
from .resources import (ResourceError, data_dir, file_id, load_cmudict, load_feature_table,
                        load_stopwords, load_vectors, validate_resources)
from .sts_eval import (STS_COLUMNS, SWEEP_COLUMNS, EvalResult, add_clean_ratios,
                       corrupted_pairs, external_similarities, external_sweep, load_pairs,
                       pair_key, robustness_sweep, score, sts_evaluate, wer_grid, write_csv)
from .substitution import (SigmaMode, TableConfig, TableFormatError, build_table, load_table,
                           merge_tables, save_table, table_report)

log = logging.getLogger("asrnoise")

# parameters that never change results and are left out of the digest; the
# shard selection is excluded so every shard carries the full build's digest
_NON_SEMANTIC = {"config", "out", "records", "workers", "log_level", "dump_corrupted",
                 "shard", "shards"}
_FILE_PARAMS = {"vectors", "cmudict", "features", "table", "corpus", "in_file", "file",
                "stopwords", "freq_file", "inputs"}


def _identity(value: str) -> str:
    """File content id for a path (or the path part of ``WER=PATH``)."""
    prefix, sep, path = value.rpartition("=") if "=" in value else ("", "", value)
    if value == "none" or not os.path.isfile(path):
        return value
    return prefix + sep + file_id(path)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)

    def canonical(self) -> dict:
        """Result-relevant parameters with file paths replaced by content ids."""
        out = {}
        for k, v in sorted(self.params.items()):
            if k in _NON_SEMANTIC or v is None:
                continue
            if k in _FILE_PARAMS or k == "external_vecs":
                v = [_identity(x) for x in v] if isinstance(v, list) else _identity(v)
            out[k] = v
        return {"command": self.command, "params": out}

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_REQUIRED: dict[str, tuple[str, ...]] = {
    "validate": ("vectors", "cmudict"),
    "subst-table build": ("cmudict",),
    "subst-table merge": ("inputs", "out"),
    "corrupt": ("table", "in_file", "out"),
    "embed": ("method", "vectors", "in_file", "out"),
    "sweep": ("corpus", "out"),
    "sts": ("dataset", "file", "out"),
}


def _default_features() -> str:
    return str(data_dir() / "hayes_features.csv")


def _unit_interval(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON file of option defaults")
    p.add_argument("--log-level", default="WARNING")


def _add_resources(p, vectors=True, cmudict=True):
    if vectors:
        p.add_argument("--vectors", help="word vector text file (GloVe / word2vec text)")
    if cmudict:
        p.add_argument("--cmudict", help="CMU pronouncing dictionary")
        p.add_argument("--features", default=None, help="phoneme feature CSV "
                       "(default: shipped Hayes table)")
        p.add_argument("--binary-features", action="store_true",
                       help="read unspecified (0) feature values as '-'")


def _add_embedding(p):
    p.add_argument("--stopwords", help="stopword list, or 'none' (default: shipped list)")
    p.add_argument("--a", type=float, default=None, help="SIF smoothing (default 0.001)")
    p.add_argument("--rank", type=int, default=4, help="subspace rank")
    p.add_argument("--m", type=int, default=5, help="uSIF common components")
    p.add_argument("--freq-file", help="'word count' file for p(w); default: the corpus")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="asrnoise", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    leaves: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("validate", help="check that the lexical resources fit together")
    _add_resources(p)
    p.add_argument("--corpus", nargs="+", help="restrict the eligible count to these corpora")
    leaves["validate"] = p

    st = sub.add_parser("subst-table", help="build or merge substitution tables")
    st_sub = st.add_subparsers(dest="action", required=True)
    p = st_sub.add_parser("build", help="build a substitution table for a corpus")
    _add_resources(p)
    p.add_argument("--corpus", nargs="+", help="corpus file(s), one sentence per line")
    p.add_argument("--top-n", type=int, default=1000, help="semantic neighbours per word")
    p.add_argument("--thresh", type=float, default=6.0, help="max phonological distance")
    p.add_argument("--thresh-quantile", type=_unit_interval, default=None,
                   help="set the threshold to this quantile of neighbour distances")
    p.add_argument("--sigma-mode", choices=[m.value for m in SigmaMode],
                   default=SigmaMode.MEAN_CLUSTER.value)
    p.add_argument("--semantic-weight", type=float, default=0.0,
                   help="add this multiple of cosine distance to the phonological one")
    p.add_argument("--zero-policy", choices=[z.value for z in ZeroPolicy],
                   default=ZeroPolicy.ZERO_COUNTS_AS_DIFFERENCE.value)
    p.add_argument("--indel-cost", type=float, default=None,
                   help="constant insertion/deletion cost (default: specified-feature count)")
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--shard", type=int, default=0)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--phono-debug", nargs=2, metavar=("W1", "W2"),
                   help="print the edit-distance table for two words and exit")
    p.add_argument("--out", help="output table file")
    leaves["subst-table build"] = p
    p = st_sub.add_parser("merge", help="merge shard tables")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--out")
    leaves["subst-table merge"] = p

    p = sub.add_parser("corrupt", help="inject substitution errors at a target WER")
    p.add_argument("--table")
    p.add_argument("--in", dest="in_file")
    p.add_argument("--wer", type=_unit_interval, default=0.3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--per-sentence", action="store_true",
                   help="apply the rate within each sentence instead of corpus-wide")
    p.add_argument("--out")
    p.add_argument("--records", help="TSV audit trail of substitutions")
    leaves["corrupt"] = p

    p = sub.add_parser("embed", help="embed sentences and export vectors")
    p.add_argument("--method", choices=METHODS)
    _add_resources(p, cmudict=False)
    _add_embedding(p)
    p.add_argument("--in", dest="in_file")
    p.add_argument("--out")
    leaves["embed"] = p

    p = sub.add_parser("sweep", help="self-similarity of clean vs corrupted sentences")
    p.add_argument("--table")
    p.add_argument("--corpus")
    _add_resources(p, cmudict=False)
    p.add_argument("--methods", default=",".join(METHODS),
                   help="comma-separated methods, or 'none' with --external-vecs")
    p.add_argument("--wer-grid", default="0:50:5", help="percent start:stop:step or a,b,c")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--per-sentence", action="store_true")
    p.add_argument("--external-vecs", nargs="+", metavar="WER=PATH",
                   help="precomputed vectors per WER (ids = line index); needs WER 0")
    _add_embedding(p)
    p.add_argument("--out")
    leaves["sweep"] = p

    p = sub.add_parser("sts", help="Pearson correlation on SICK / STS-benchmark")
    p.add_argument("--dataset", choices=["sick", "stsb"])
    p.add_argument("--file", nargs="+", help="one file per split (e.g. dev and test)")
    p.add_argument("--table")
    _add_resources(p, cmudict=False)
    p.add_argument("--method", choices=METHODS, default="avg")
    p.add_argument("--wer", type=_unit_interval, nargs="+", default=[0.0])
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--external-vecs", help="precomputed vectors keyed '<split>:<pair id>/a|b'")
    p.add_argument("--dump-corrupted", help="write the corrupted pair sentences here")
    _add_embedding(p)
    p.add_argument("--out")
    leaves["sts"] = p

    for leaf in leaves.values():
        _add_common(leaf)
    return parser, leaves


def _leaf_name(ns: argparse.Namespace) -> str:
    return f"{ns.command} {ns.action}" if getattr(ns, "action", None) else ns.command


def _read_config(path: str, leaf_name: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a mapping")
    section = data.get(leaf_name)
    if isinstance(section, dict):
        data = {k: v for k, v in data.items() if not isinstance(v, dict)} | section
    return {k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)}


def parse_args(argv: list[str] | None = None) -> RunConfig:
    """Parse a command line (plus any ``--config`` file) into a RunConfig.

    Usage errors exit with status 2.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    ns = parser.parse_args(argv)
    name = _leaf_name(ns)
    leaf = leaves[name]
    if ns.config:
        try:
            defaults = _read_config(ns.config, name)
        except (OSError, yaml.YAMLError, UsageError) as exc:
            leaf.error(f"cannot use config file: {exc}")
        known = {a.dest for a in leaf._actions}
        unknown = sorted(set(defaults) - known)
        if unknown:
            leaf.error(f"unknown option(s) in config file: {', '.join(unknown)}")
        leaf.set_defaults(**defaults)
        ns = parser.parse_args(argv)
    missing = [k for k in _REQUIRED[name] if getattr(ns, k, None) in (None, [])]
    if name == "subst-table build" and not ns.phono_debug:
        missing += [k for k in ("vectors", "corpus", "out") if getattr(ns, k) is None]
    if missing:
        leaf.error("missing required option(s): "
                   + ", ".join("--" + m.replace("_", "-").replace("in-file", "in")
                               for m in missing))
    params = {k: v for k, v in vars(ns).items() if k not in ("command", "action")}
    return RunConfig(name, params)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def _write_lines(lines, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(line + "\n" for line in lines))


def _write_sidecar(cfg: RunConfig, out: str, extra: dict | None = None) -> None:
    meta = {"command": cfg.command, "version": __version__, "config_digest": cfg.digest(),
            "config": cfg.canonical()["params"]}
    meta.update(extra or {})
    with open(f"{out}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _vocab(lines) -> set[str]:
    return {c for line in lines for c in tokenize(line).cores}


def _features(p: dict):
    return load_feature_table(p.get("features") or _default_features(),
                              binary=p.get("binary_features", False))


def _stopwords(p: dict, needed: bool):
    spec = p.get("stopwords")
    if spec == "none":
        return None
    if spec is None and not needed:
        return None
    return load_stopwords(spec)


def _embedding_config(p: dict, method: str) -> EmbeddingConfig:
    if p.get("a") is not None and method != "sif":
        log.warning("--a only applies to sif; ignored for %s", method)
    stop = _stopwords(p, needed=method in ("avg-nostop", "subspace"))
    return EmbeddingConfig(method, a=p.get("a") or 1e-3, rank=p.get("rank", 4),
                           m=p.get("m", 5), stopwords=stop)


def _freq(p: dict) -> FrequencyModel | None:
    return FrequencyModel.from_file(p["freq_file"]) if p.get("freq_file") else None


def cmd_validate(cfg: RunConfig) -> int:
    p = cfg.params
    vocab = None
    if p.get("corpus"):
        vocab = set()
        for path in p["corpus"]:
            vocab |= _vocab(_read_lines(path))
    vec = load_vectors(p["vectors"])
    plex = load_cmudict(p["cmudict"])
    report = validate_resources(vec, plex, _features(p))
    for line in report.lines():
        print(line)
    if vocab is not None:
        print(f"eligible_in_corpus: {len(report.eligible & vocab)}")
    print(f"config_digest: {cfg.digest()}")
    if not report.ok:
        raise ResourceError("pronouncing dictionary uses phonemes missing from the feature "
                            "table: " + " ".join(report.missing_phonemes))
    return 0


def cmd_table_build(cfg: RunConfig) -> int:
    p = cfg.params
    plex = load_cmudict(p["cmudict"])
    ftab = _features(p)
    table_cfg = TableConfig(
        n_semantic=p["top_n"], thresh=p["thresh"], thresh_quantile=p["thresh_quantile"],
        sigma_mode=p["sigma_mode"], semantic_weight=p["semantic_weight"],
        zero_policy=p["zero_policy"], indel_cost=p["indel_cost"])
    if p.get("phono_debug"):
        w1, w2 = (w.lower() for w in p["phono_debug"])
        cost = table_cfg.cost_model(ftab)
        for a in plex[w1]:
            for b in plex[w2]:
                print(f"{w1} /{' '.join(a)}/  ->  {w2} /{' '.join(b)}/")
                print(format_dp_matrix(cost, a, b))
                print()
        print(f"distance: {word_phono_distance(cost, plex, w1, w2):g}")
        return 0
    lines = [line for path in p["corpus"] for line in _read_lines(path)]
    vocab = _vocab(lines)
    vec = load_vectors(p["vectors"], vocabulary=vocab)
    report = validate_resources(vec, plex, ftab)
    if not report.ok:
        log.warning("feature table lacks phonemes %s", " ".join(report.missing_phonemes))
    meta = {
        "vector_file_id": file_id(p["vectors"]),
        "dict_file_id": file_id(p["cmudict"]),
        "features_file_id": file_id(p.get("features") or _default_features()),
        "corpus_id": ",".join(file_id(c) for c in p["corpus"]),
        "binary_features": str(bool(p.get("binary_features"))).lower(),
        "config_digest": cfg.digest(),
    }
    shard = (p["shard"], p["shards"]) if p["shards"] > 1 else None
    table = build_table(vocab, vec, plex, ftab, table_cfg, workers=p["workers"], shard=shard,
                        meta=meta)
    save_table(table, p["out"])
    print(json.dumps({"table": p["out"], "config_digest": cfg.digest(),
                      **table_report(table)}, sort_keys=True))
    return 0


def cmd_table_merge(cfg: RunConfig) -> int:
    p = cfg.params
    merged = merge_tables([load_table(t) for t in p["inputs"]])
    save_table(merged, p["out"])
    print(json.dumps({"table": p["out"], **table_report(merged)}, sort_keys=True))
    return 0


def cmd_corrupt(cfg: RunConfig) -> int:
    p = cfg.params
    table = load_table(p["table"])
    result = corrupt_corpus(_read_lines(p["in_file"]), table, p["wer"], p["seed"],
                            per_sentence=p["per_sentence"])
    _write_lines(result.lines, p["out"])
    if p.get("records"):
        write_records(result.records, p["records"])
    summary = result.summary()
    _write_sidecar(cfg, p["out"], {"summary": summary})
    print(json.dumps({**summary, "config_digest": cfg.digest()}, sort_keys=True))
    return 0


def cmd_embed(cfg: RunConfig) -> int:
    p = cfg.params
    lines = _read_lines(p["in_file"])
    tokens = [tokenize(line).cores for line in lines]
    vec = load_vectors(p["vectors"], vocabulary={t for s in tokens for t in s})
    ecfg = _embedding_config(p, p["method"])
    emb = embed_corpus(tokens, vec, ecfg, _freq(p))
    if p["method"] == "subspace":
        save_subspaces(emb.reps, p["out"])
    else:
        save_embeddings(emb.reps, p["out"])
    n_bad = sum(emb.degenerate)
    _write_sidecar(cfg, p["out"], {"embedding": emb.meta, "degenerate": n_bad})
    print(json.dumps({"sentences": len(lines), "degenerate": n_bad,
                      "config_digest": cfg.digest()}))
    return 0


def _parse_external(specs: list[str]) -> dict[float, str]:
    out = {}
    for spec in specs:
        wer, sep, path = spec.partition("=")
        if not sep:
            raise UsageError(f"--external-vecs expects WER=PATH, got {spec!r}")
        out[float(wer)] = path
    return out


def cmd_sweep(cfg: RunConfig) -> int:
    p = cfg.params
    digest = cfg.digest()
    methods = [] if p["methods"] == "none" else [m.strip() for m in p["methods"].split(",")]
    rows = []
    if methods:
        for key in ("table", "vectors"):
            if not p.get(key):
                raise UsageError(f"--{key} is required for internal methods")
        table = load_table(p["table"])
        lines = _read_lines(p["corpus"])
        vocab = _vocab(lines) | {c.token for cs in table.entries.values() for c in cs.candidates}
        vec = load_vectors(p["vectors"], vocabulary=vocab)
        configs = [_embedding_config(p, m) for m in methods]
        rows += robustness_sweep(lines, table, vec, configs, wer_grid(p["wer_grid"]), p["seed"],
                                 freq=_freq(p), per_sentence=p["per_sentence"], digest=digest)
    if p.get("external_vecs"):
        files = _parse_external(p["external_vecs"])
        if 0.0 not in files:
            raise UsageError("--external-vecs needs clean vectors given as 0=PATH")
        clean = load_external_embeddings(files.pop(0.0))
        noisy = {w: load_external_embeddings(f) for w, f in files.items()}
        rows += external_sweep(clean, {0.0: clean, **noisy}, p["seed"], digest)
    if not rows:
        raise UsageError("nothing to do: no methods and no external vectors")
    write_csv(rows, SWEEP_COLUMNS, p["out"])
    _write_sidecar(cfg, p["out"])
    for r in rows:
        print(f"{r['method']:>10}  wer={r['wer']:.2f}  sim={r['mean_similarity']:.4f}")
    return 0


def cmd_sts(cfg: RunConfig) -> int:
    p = cfg.params
    digest = cfg.digest()
    splits = {Path(f).stem: load_pairs(p["dataset"], f) for f in p["file"]}
    pooled = [(name, pair) for name, pairs in splits.items() for pair in pairs]
    wers = sorted(set(p["wer"]))
    table = load_table(p["table"]) if p.get("table") else None
    if any(w > 0 for w in wers) and table is None and not p.get("external_vecs"):
        raise UsageError("--table is required when --wer > 0")
    if p.get("dump_corrupted"):
        with open(p["dump_corrupted"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write("id\twer\tsentence\n")
            for wer in wers:
                noisy = corrupted_pairs([pr for _, pr in pooled], table, wer, p["seed"]) \
                    if wer > 0 else [pr for _, pr in pooled]
                for (name, _), pr in zip(pooled, noisy):
                    fh.write(f"{pair_key(name, pr.id, 'a')}\t{wer:g}\t{pr.sentence_a}\n")
                    fh.write(f"{pair_key(name, pr.id, 'b')}\t{wer:g}\t{pr.sentence_b}\n")
    if p.get("external_vecs"):
        if len(wers) != 1:
            raise UsageError("--external-vecs describes text at exactly one --wer")
        vectors = load_external_embeddings(p["external_vecs"])
        results: list[EvalResult] = []
        all_sims, all_bad, all_pairs = [], [], []
        for name, pairs in splits.items():
            sims, bad = external_similarities(pairs, vectors, name)
            results.append(score(pairs, sims, bad, method="external", dataset=p["dataset"],
                                 split=name, wer=wers[0], seed=p["seed"], digest=digest))
            all_sims.extend(sims)
            all_bad.extend(bad)
            all_pairs.extend(pairs)
        if len(splits) > 1:
            import numpy as np
            results.append(score(all_pairs, np.array(all_sims), np.array(all_bad),
                                 method="external", dataset=p["dataset"], split="pooled",
                                 wer=wers[0], seed=p["seed"], digest=digest))
        add_clean_ratios(results)
    else:
        if not p.get("vectors"):
            raise UsageError("--vectors is required")
        vocab = _vocab(s for _, pr in pooled for s in (pr.sentence_a, pr.sentence_b))
        if table is not None:
            vocab |= {c.token for cs in table.entries.values() for c in cs.candidates}
        vec = load_vectors(p["vectors"], vocabulary=vocab)
        ecfg = _embedding_config(p, p["method"])
        results = sts_evaluate(splits, table, vec, ecfg, wers, p["seed"], dataset=p["dataset"],
                               repeats=p["repeats"], freq=_freq(p), digest=digest)
    write_csv((r.row() for r in results), STS_COLUMNS, p["out"])
    _write_sidecar(cfg, p["out"])
    for r in results:
        print(f"{r.method:>10} {r.dataset} {r.split:>12} wer={r.wer:.2f} "
              f"PCCx100={r.pcc_x100:.2f} n={r.n_pairs}")
    return 0


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "validate": cmd_validate,
    "subst-table build": cmd_table_build,
    "subst-table merge": cmd_table_merge,
    "corrupt": cmd_corrupt,
    "embed": cmd_embed,
    "sweep": cmd_sweep,
    "sts": cmd_sts,
}


def _error_line(exc: BaseException) -> str:
    return json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}})


def run(cfg: RunConfig) -> int:
    """Execute a parsed command; returns the process exit code."""
    logging.basicConfig(level=str(cfg.params.get("log_level", "WARNING")).upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("run %s", json.dumps({"command": cfg.command, "params": cfg.params,
                                   "config_digest": cfg.digest()}, sort_keys=True, default=str))
    try:
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(_error_line(exc), file=sys.stderr)
        return 2
    except (ResourceError, TableFormatError, ValueError, KeyError, OSError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
