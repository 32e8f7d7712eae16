"""End-to-end CLI runs, in process via main(argv)."""

import numpy as np
import pytest

from helpers import AB_CHAIN, CD_CHAIN, markov_text
from typocf.cli import _coerce, main, parse_config_file
from typocf.embeddings import LanguageEmbeddingTable, export_table, import_table
from typocf.errors import ParseError
from typocf.harness import read_records
from typocf.kb import load_long, save_long

WIDE_HEADER = (
    "wals code,name,genus,family,macroarea,"
    '"81A Order of Subject, Object and Verb",83A Order of Object and Verb\n'
)


@pytest.fixture
def kb_path(tiny_kb, tmp_path):
    path = tmp_path / "kb.tsv"
    save_long(tiny_kb, path)
    return str(path)


def run_ok(capsys, argv):
    rc = main(argv)
    captured = capsys.readouterr()
    assert rc == 0, captured.err
    return captured.out


def run_fail(capsys, argv):
    rc = main(argv)
    captured = capsys.readouterr()
    assert rc == 1
    return captured.err


def stdout_value(out, key):
    for line in out.splitlines():
        name, _, value = line.partition("\t")
        if name == key:
            return value
    raise AssertionError(f"no {key!r} line in {out!r}")


class TestPipeline:
    def test_split_train_predict_evaluate(self, kb_path, tmp_path, capsys):
        split = str(tmp_path / "alpha.split")
        out = run_ok(capsys, [
            "split", "--kb", kb_path, "--branch", "alpha",
            "--fraction", "0.25", "--seed", "3", "--out", split,
        ])
        assert int(stdout_value(out, "eval_pairs")) == 6
        assert int(stdout_value(out, "train_pairs")) == 7  # 6 out-of-branch + 1 fed back

        model = str(tmp_path / "model.bin")
        trace = str(tmp_path / "trace.tsv")
        out = run_ok(capsys, [
            "train", "--kb", kb_path, "--split", split, "--out", model,
            "--trace", trace, "--d", "3", "--epochs", "2", "--seed", "1",
        ])
        assert stdout_value(out, "epochs") == "2"
        trace_lines = (tmp_path / "trace.tsv").read_text(encoding="utf-8").splitlines()
        assert trace_lines[0] == "epoch\tloss"
        assert len(trace_lines) == 3

        preds = str(tmp_path / "preds.tsv")
        out = run_ok(capsys, [
            "predict", "--kb", kb_path, "--model", model,
            "--split", split, "--out", preds,
        ])
        assert stdout_value(out, "predictions") == "6"
        pred_lines = (tmp_path / "preds.tsv").read_text(encoding="utf-8").splitlines()
        assert pred_lines[0] == "language_id\tfeature_id\tvalue_id"
        assert len(pred_lines) == 7

        report = str(tmp_path / "report.tsv")
        out = run_ok(capsys, [
            "evaluate", "--kb", kb_path, "--split", split,
            "--predictions", preds, "--out", report,
        ])
        micro = float(stdout_value(out, "micro_f1"))
        accuracy = float(stdout_value(out, "accuracy"))
        assert 0.0 <= micro <= 1.0
        assert micro == accuracy  # full argmax prediction set
        assert (tmp_path / "report.tsv").exists()

    def test_predict_single_cell(self, kb_path, tmp_path, capsys):
        split = str(tmp_path / "s.split")
        model = str(tmp_path / "m.bin")
        run_ok(capsys, ["split", "--kb", kb_path, "--branch", "alpha", "--out", split])
        run_ok(capsys, [
            "train", "--kb", kb_path, "--split", split, "--out", model,
            "--d", "2", "--epochs", "1",
        ])
        out = run_ok(capsys, [
            "predict", "--kb", kb_path, "--model", model,
            "--language", "eee", "--feature", "81A",
        ])
        lang, feat, value = out.strip().split("\t")
        assert (lang, feat) == ("eee", "81A")
        assert int(value) in (1, 2, 3)

    def test_predict_rejects_other_kb(self, kb_path, tiny_kb, tmp_path, capsys):
        split = str(tmp_path / "s.split")
        model = str(tmp_path / "m.bin")
        run_ok(capsys, ["split", "--kb", kb_path, "--branch", "alpha", "--out", split])
        run_ok(capsys, [
            "train", "--kb", kb_path, "--split", split, "--out", model,
            "--d", "2", "--epochs", "1",
        ])
        from typocf.kb import TypologicalKB

        shrunk = TypologicalKB(
            tiny_kb.languages[:-1],
            tiny_kb.features,
            frozenset(c for c in tiny_kb.cells if c[0] != "fff"),
        )
        other = tmp_path / "other.tsv"
        save_long(shrunk, other)
        err = run_fail(capsys, [
            "predict", "--kb", str(other), "--model", model,
            "--language", "eee", "--feature", "81A",
        ])
        assert err.startswith("error\tIntegrityError\t")


class TestBaselineCommand:
    def test_freq(self, kb_path, tmp_path, capsys):
        split = str(tmp_path / "s.split")
        preds = str(tmp_path / "p.tsv")
        run_ok(capsys, ["split", "--kb", kb_path, "--branch", "beta", "--out", split])
        out = run_ok(capsys, [
            "baseline", "--system", "freq", "--kb", kb_path,
            "--split", split, "--out", preds,
        ])
        assert int(stdout_value(out, "predictions")) > 0

    def test_knn_needs_embeddings(self, kb_path, tmp_path, capsys):
        split = str(tmp_path / "s.split")
        run_ok(capsys, ["split", "--kb", kb_path, "--branch", "beta", "--out", split])
        err = run_fail(capsys, [
            "baseline", "--system", "knn", "--kb", kb_path,
            "--split", split, "--out", str(tmp_path / "p.tsv"),
        ])
        assert err.startswith("error\tTypoCFError\t")
        assert "embeddings" in err

    def test_knn(self, kb_path, tiny_kb, tmp_path, capsys):
        rng = np.random.default_rng(4)
        table = LanguageEmbeddingTable(
            dim=3,
            vectors={l.id: rng.normal(size=3) for l in tiny_kb.languages},
        )
        emb = tmp_path / "emb.tsv"
        export_table(table, emb)
        split = str(tmp_path / "s.split")
        preds = str(tmp_path / "p.tsv")
        run_ok(capsys, ["split", "--kb", kb_path, "--branch", "beta", "--out", split])
        out = run_ok(capsys, [
            "baseline", "--system", "knn", "--k", "2", "--kb", kb_path,
            "--split", split, "--embeddings", str(emb), "--out", preds,
        ])
        assert int(stdout_value(out, "predictions")) > 0


class TestIngest:
    def test_wide_to_long(self, tmp_path, capsys):
        wide = tmp_path / "wals.csv"
        wide.write_text(
            WIDE_HEADER
            + "eng,English,Germanic,Indo-European,Eurasia,2 SVO,2 VO\n"
            + "nld,Dutch,Germanic,Indo-European,Eurasia,,1 OV\n",
            encoding="utf-8",
        )
        out_path = tmp_path / "kb.tsv"
        out = run_ok(capsys, ["ingest", "--wide", str(wide), "--out", str(out_path)])
        assert stdout_value(out, "languages") == "2"
        assert stdout_value(out, "cells") == "3"
        kb = load_long(out_path)
        assert kb.value_of("eng", "81A") == 2
        assert kb.value_of("nld", "83A") == 1
        assert kb.language("nld").family == "Indo-European"
        assert kb.feature("83A").value_name(2) == "VO"

    def test_long_round_trip(self, kb_path, tiny_kb, tmp_path, capsys):
        out_path = tmp_path / "copy.tsv"
        run_ok(capsys, ["ingest", "--long", kb_path, "--out", str(out_path)])
        assert load_long(out_path) == tiny_kb

    def test_missing_file_error_line(self, tmp_path, capsys):
        err = run_fail(capsys, [
            "ingest", "--long", str(tmp_path / "nope.tsv"),
            "--out", str(tmp_path / "o.tsv"),
        ])
        assert err.startswith("error\tFileNotFoundError\t")
        assert len(err.strip().splitlines()) == 1


class TestFilterBinarize:
    def test_filter_identity_at_zero(self, kb_path, tmp_path, capsys):
        out = run_ok(capsys, [
            "filter", "--kb", kb_path, "--out", str(tmp_path / "f.tsv"),
            "--min-value-count", "0", "--min-features-per-language", "0",
            "--min-branch-size", "0",
        ])
        assert stdout_value(out, "languages") == "6"
        assert stdout_value(out, "cells") == "14"

    def test_binarize(self, kb_path, tmp_path, capsys):
        dump = tmp_path / "matrix.tsv"
        out = run_ok(capsys, ["binarize", "--kb", kb_path, "--out", str(dump)])
        assert stdout_value(out, "languages") == "6"
        assert stdout_value(out, "columns") == "8"
        assert "?" in dump.read_text(encoding="utf-8")


class TestExperimentCommand:
    def test_config_file_and_flag_precedence(self, kb_path, tmp_path, capsys):
        cfg = tmp_path / "grid.cfg"
        cfg.write_text(
            "# tiny grid\n"
            "repeats = 2\n"
            "fractions = 0.0\n"
            "systems = freq\n"
            "epochs = 1\n",
            encoding="utf-8",
        )
        rec_a = tmp_path / "a.tsv"
        out = run_ok(capsys, [
            "experiment", "--kb", kb_path, "--config", str(cfg),
            "--out", str(rec_a),
        ])
        # 2 branches x 1 fraction x 2 repeats x 1 system
        assert stdout_value(out, "runs") == "4"
        assert stdout_value(out, "failed") == "0"
        assert len(read_records(rec_a)) == 4

        rec_b = tmp_path / "b.tsv"
        out = run_ok(capsys, [
            "experiment", "--kb", kb_path, "--config", str(cfg),
            "--repeats", "1", "--out", str(rec_b),
        ])
        assert stdout_value(out, "runs") == "2"

    def test_unknown_config_key(self, kb_path, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus = 1\n", encoding="utf-8")
        err = run_fail(capsys, [
            "experiment", "--kb", kb_path, "--config", str(cfg),
            "--out", str(tmp_path / "r.tsv"),
        ])
        assert err.startswith("error\tParseError\t")
        assert "bogus" in err

    def test_summarize(self, kb_path, tmp_path, capsys):
        rec = tmp_path / "r.tsv"
        run_ok(capsys, [
            "experiment", "--kb", kb_path, "--fractions", "0.0,0.2",
            "--repeats", "1", "--systems", "freq", "--epochs", "1",
            "--out", str(rec),
        ])
        prefix = str(tmp_path / "sum")
        out = run_ok(capsys, ["summarize", "--records", str(rec), "--out-prefix", prefix])
        for name in ("branches", "macroareas", "aggregate"):
            assert (tmp_path / f"sum.{name}.tsv").exists()
            assert f"sum.{name}.tsv" in out


class TestEmbedCommands:
    def test_embed_import_canonicalizes(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        table = LanguageEmbeddingTable(
            dim=4, vectors={f"l{i}": rng.normal(size=4) for i in range(3)}
        )
        raw = tmp_path / "raw.tsv"
        export_table(table, raw)
        out_path = tmp_path / "canon.tsv"
        out = run_ok(capsys, [
            "embed-import", "--table", str(raw), "--out", str(out_path),
        ])
        assert stdout_value(out, "dim") == "4"
        assert import_table(out_path).vectors.keys() == table.vectors.keys()

    def test_embed_train(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        rng = np.random.default_rng(2)
        (corpus / "aa1.txt").write_text(markov_text(rng, AB_CHAIN, 600), encoding="utf-8")
        (corpus / "cc1.txt").write_text(markov_text(rng, CD_CHAIN, 600), encoding="utf-8")
        out_path = tmp_path / "emb.tsv"
        trace = tmp_path / "trace.tsv"
        out = run_ok(capsys, [
            "embed-train", "--corpus", str(corpus), "--out", str(out_path),
            "--trace", str(trace),
            "--char-dim", "4", "--lang-dim", "3", "--hidden-dim", "6",
            "--layers", "1", "--bptt", "16", "--batch-size", "4",
            "--max-epochs", "1", "--seed", "0",
        ])
        assert stdout_value(out, "languages") == "2"
        assert stdout_value(out, "epochs") == "1"
        table = import_table(out_path)
        assert table.dim == 3
        assert set(table.vectors) == {"aa1", "cc1"}
        assert trace.read_text(encoding="utf-8").startswith("epoch\tdev_perplexity")


class TestExports:
    def test_correlations_by_feature(self, kb_path, tmp_path, capsys):
        out_path = tmp_path / "corr.tsv"
        out = run_ok(capsys, [
            "export-correlations", "--kb", kb_path,
            "--features", "81A,83A", "--out", str(out_path),
        ])
        assert stdout_value(out, "columns") == "4"
        lines = out_path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "\t81A:1\t81A:2\t81A:3\t83A:2"

    def test_correlations_by_column(self, kb_path, tmp_path, capsys):
        out_path = tmp_path / "corr.tsv"
        run_ok(capsys, [
            "export-correlations", "--kb", kb_path,
            "--columns", "81A:1,83A:2", "--out", str(out_path),
        ])
        text = out_path.read_text(encoding="utf-8")
        assert "-1.000000" in text  # 81A:1 and 83A:2 disagree on every common language

    def test_correlations_need_some_columns(self, kb_path, tmp_path, capsys):
        err = run_fail(capsys, [
            "export-correlations", "--kb", kb_path, "--out", str(tmp_path / "c.tsv"),
        ])
        assert err.startswith("error\tTypoCFError\t")

    def test_distributions(self, kb_path, tmp_path, capsys):
        out_path = tmp_path / "dist.tsv"
        out = run_ok(capsys, [
            "export-distributions", "--kb", kb_path,
            "--genus", "alpha", "--out", str(out_path),
        ])
        assert stdout_value(out, "rows") == "6"
        lines = out_path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "feature_id\tvalue_id\tcount\tshare"

    def test_distributions_need_filter(self, kb_path, tmp_path, capsys):
        err = run_fail(capsys, [
            "export-distributions", "--kb", kb_path, "--out", str(tmp_path / "d.tsv"),
        ])
        assert err.startswith("error\tValueError\t")


class TestGradcheckCommand:
    def test_mf_passes(self, capsys):
        out = run_ok(capsys, ["gradcheck", "--which", "mf", "--trials", "2"])
        kind, err, verdict = out.strip().split("\t")
        assert kind == "mf"
        assert verdict == "ok"
        assert float(err) < 1e-5


class TestConfigFile:
    def test_parse_basics(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(
            "# comment\n"
            "\n"
            "learning-rate = 0.5\n"
            "epochs=3\n",
            encoding="utf-8",
        )
        parsed = parse_config_file(cfg)
        assert parsed == {"learning_rate": "0.5", "epochs": "3"}

    def test_parse_rejects_bare_line(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("epochs\n", encoding="utf-8")
        with pytest.raises(ParseError):
            parse_config_file(cfg)

    def test_coerce_typed_by_default(self):
        assert _coerce("3", 10) == 3
        assert _coerce("0.25", 1.0) == 0.25
        assert _coerce("yes", False) is True
        assert _coerce("off", True) is False
        assert _coerce("0.0,0.2", (0.0, 0.1)) == (0.0, 0.2)
        assert _coerce("freq,tcf", ("a",)) == ("freq", "tcf")
        assert _coerce("", ()) == ()
        assert _coerce("plain", "x") == "plain"
        with pytest.raises(ValueError):
            _coerce("maybe", True)
