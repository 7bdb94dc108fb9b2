import csv
import json
import subprocess
import sys

import pytest

from asrnoise.cli import main, parse_args

from conftest import CMUDICT, CORPUS, FEATURES, STS_PAIRS, VECTORS

RES = ["--vectors", str(VECTORS), "--cmudict", str(CMUDICT)]


@pytest.fixture(scope="module")
def table_path(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "table.tsv"
    assert main(["subst-table", "build", *RES, "--corpus", str(CORPUS), "--out", str(out),
                 "--workers", "1"]) == 0
    return out


class TestParsing:
    def test_flag_order_does_not_change_digest(self, table_path):
        a = parse_args(["corrupt", "--table", str(table_path), "--in", str(CORPUS),
                        "--wer", "0.3", "--seed", "7", "--out", "x"])
        b = parse_args(["corrupt", "--seed", "7", "--out", "y", "--wer", "0.3",
                        "--in", str(CORPUS), "--table", str(table_path)])
        assert a.digest() == b.digest()
        c = parse_args(["corrupt", "--table", str(table_path), "--in", str(CORPUS),
                        "--wer", "0.3", "--seed", "8", "--out", "x"])
        assert c.digest() != a.digest()

    def test_missing_table_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            parse_args(["corrupt", "--in", str(CORPUS), "--out", "x"])
        assert exc.value.code == 2
        assert "--table" in capsys.readouterr().err

    def test_unknown_flag(self):
        assert main(["validate", *RES, "--bogus"]) == 2

    def test_wer_range_checked(self):
        assert main(["corrupt", "--table", "t", "--in", "i", "--out", "o", "--wer", "1.5"]) == 2

    def test_config_file_merges_and_flags_win(self, tmp_path, table_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text(f"table: {table_path}\nin: {CORPUS}\nwer: 0.1\nseed: 3\nout: o.txt\n")
        with pytest.raises(SystemExit):
            parse_args(["corrupt", "--config", str(cfg)])  # 'in' is not an option name
        cfg.write_text(f"table: {table_path}\nin_file: {CORPUS}\nwer: 0.1\nseed: 3\n"
                       "out: o.txt\n")
        rc = parse_args(["corrupt", "--config", str(cfg), "--seed", "9"])
        assert rc.params["wer"] == 0.1 and rc.params["seed"] == 9
        assert rc.params["table"] == str(table_path)

    def test_config_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"table": "t", "colour": "blue"}))
        with pytest.raises(SystemExit) as exc:
            parse_args(["corrupt", "--config", str(cfg), "--in", "a", "--out", "b"])
        assert exc.value.code == 2


class TestCommands:
    def test_validate(self, capsys):
        assert main(["validate", *RES, "--features", str(FEATURES)]) == 0
        out = capsys.readouterr().out
        assert "eligible: 191" in out and "missing_phonemes: -" in out

    def test_validate_reports_missing_phonemes(self, tmp_path, capsys):
        ft = tmp_path / "f.csv"
        ft.write_text("phoneme,voice\nK,-\nAE,+\nT,-\n")
        assert main(["validate", *RES, "--features", str(ft)]) == 1
        err = capsys.readouterr().err.strip().splitlines()[-1]
        assert json.loads(err)["error"]["type"] == "ResourceError"

    def test_phono_debug(self, capsys):
        assert main(["subst-table", "build", "--cmudict", str(CMUDICT),
                     "--phono-debug", "cat", "kit"]) == 0
        assert "distance: " in capsys.readouterr().out

    def test_table_build_is_worker_invariant(self, tmp_path, table_path):
        other = tmp_path / "t4.tsv"
        assert main(["subst-table", "build", *RES, "--corpus", str(CORPUS), "--out", str(other),
                     "--workers", "4"]) == 0
        assert other.read_bytes() == table_path.read_bytes()

    def test_shards_and_merge(self, tmp_path, table_path):
        parts = []
        for i in range(2):
            p = tmp_path / f"s{i}.tsv"
            assert main(["subst-table", "build", *RES, "--corpus", str(CORPUS), "--out", str(p),
                         "--shards", "2", "--shard", str(i), "--workers", "1"]) == 0
            parts.append(str(p))
        merged = tmp_path / "m.tsv"
        assert main(["subst-table", "merge", *parts, "--out", str(merged)]) == 0
        body = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("meta\t")]
        assert body(merged) == body(table_path)

    def test_corrupt_is_reproducible(self, tmp_path, table_path, capsys):
        outs = []
        for k in range(2):
            out = tmp_path / f"c{k}.txt"
            args = ["corrupt", "--table", str(table_path), "--in", str(CORPUS), "--wer", "0.3",
                    "--seed", "42", "--out", str(out), "--records", str(tmp_path / f"r{k}.tsv")]
            assert main(args) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        meta = json.loads((tmp_path / "c0.txt.meta.json").read_text())
        assert meta["config_digest"] == summary["config_digest"]
        assert meta["config"]["seed"] == 42

    def test_bad_table_gives_error_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.tsv"
        bad.write_text("nope\n")
        rc = main(["corrupt", "--table", str(bad), "--in", str(CORPUS), "--out",
                   str(tmp_path / "o")])
        assert rc == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"]["type"] == "TableFormatError"

    @pytest.mark.parametrize("method", ["avg", "sif", "subspace"])
    def test_embed(self, tmp_path, method):
        out = tmp_path / "v.tsv"
        assert main(["embed", "--method", method, "--vectors", str(VECTORS), "--in", str(CORPUS),
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == len(CORPUS.read_text().splitlines())

    def test_a_with_other_method_warns(self, tmp_path, caplog):
        assert main(["embed", "--method", "avg", "--a", "0.01", "--vectors", str(VECTORS),
                     "--in", str(CORPUS), "--out", str(tmp_path / "v.tsv")]) == 0
        assert any("ignored" in r.message for r in caplog.records)

    def test_sweep(self, tmp_path, table_path):
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--table", str(table_path), "--corpus", str(CORPUS),
                     "--vectors", str(VECTORS), "--methods", "avg,sif", "--wer-grid", "0:20:10",
                     "--out", str(out)]) == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 6 and float(rows[0]["mean_similarity"]) == pytest.approx(1.0)

    def test_sweep_with_external_vectors(self, tmp_path):
        clean, noisy = tmp_path / "c.tsv", tmp_path / "n.tsv"
        clean.write_text("0\t1 0\n1\t0 1\n")
        noisy.write_text("0\t1 1\n1\t0 1\n")
        out = tmp_path / "s.csv"
        assert main(["sweep", "--corpus", str(CORPUS), "--methods", "none", "--external-vecs",
                     f"0={clean}", f"0.3={noisy}", "--out", str(out)]) == 0
        rows = list(csv.DictReader(open(out)))
        assert [r["method"] for r in rows] == ["external", "external"]

    def test_sts(self, tmp_path, table_path):
        out = tmp_path / "sts.csv"
        dump = tmp_path / "dump.tsv"
        assert main(["sts", "--dataset", "sick", "--file", str(STS_PAIRS), "--table",
                     str(table_path), "--vectors", str(VECTORS), "--method", "avg",
                     "--wer", "0", "0.3", "--out", str(out), "--dump-corrupted", str(dump)]) == 0
        rows = list(csv.DictReader(open(out)))
        assert [float(r["wer"]) for r in rows] == [0.0, 0.3]
        assert rows[1]["ratio_to_clean"] != ""
        assert len(dump.read_text().splitlines()) == 1 + 2 * 2 * 50

    def test_sts_external(self, tmp_path):
        # vectors keyed '<split>:<id>/a|b' for the fixture pairs
        from asrnoise.sts_eval import load_sick
        vec = tmp_path / "ext.tsv"
        with open(vec, "w") as fh:
            for p in load_sick(STS_PAIRS):
                fh.write(f"sts_pairs:{p.id}/a\t1 0 {p.gold_score}\n")
                fh.write(f"sts_pairs:{p.id}/b\t1 0.5 {p.gold_score}\n")
        out = tmp_path / "o.csv"
        assert main(["sts", "--dataset", "sick", "--file", str(STS_PAIRS), "--external-vecs",
                     str(vec), "--out", str(out)]) == 0
        assert list(csv.DictReader(open(out)))[0]["method"] == "external"


def test_console_entry_point_exit_code():
    proc = subprocess.run([sys.executable, "-m", "asrnoise.cli", "corrupt", "--in", "x",
                           "--out", "y"], capture_output=True, text=True)
    assert proc.returncode == 2
