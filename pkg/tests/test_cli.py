"""Command-line workflows: exit codes, file layout, and report wiring."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from opgaze import write_session, write_step_labels
from opgaze.cli import main

from conftest import frame, make_session


def run(args):
    try:
        return main([str(a) for a in args])
    except SystemExit as exc:  # argparse rejections
        return int(exc.code or 0)


@pytest.fixture
def corpus(tmp_path):
    """Two clean sessions of one operator plus a ratings/pairs setup."""
    root = tmp_path / "data"
    sessions = root / "sessions"
    sessions.mkdir(parents=True)
    for ordinal in ("earlier", "later"):
        frames = []
        for i in range(61):
            t = i / 10.0
            touch = 3.0 <= t <= 5.0
            hand = touch or 2.0 <= t
            frames.append(frame(t, ax=30.0 - 5.0 * min(t, 5.0), ay=0.0,
                                hx=7.0 if hand else None, hy=1.0 if hand else None,
                                touch=touch))
        s = make_session(frames, session_id=f"op1_{ordinal}", operator="op1",
                         ordinal=ordinal)
        write_session(s, sessions / f"op1_{ordinal}.jsonl")
    (root / "pairs.json").write_text(json.dumps({
        "pairs": [{"operator": "op1", "earlier": "op1_earlier", "later": "op1_later"}]
    }))
    return root


class TestValidate:
    def test_clean_corpus_ok(self, corpus, tmp_path, capsys):
        out = tmp_path / "out"
        assert run(["validate", corpus / "sessions", "--out", out]) == 0
        text = capsys.readouterr().out
        assert "op1_earlier: OK" in text and "op1_later: OK" in text
        report = json.loads((out / "validation_report.json").read_text())
        assert len(report) == 2
        assert all(not e["errors"] for e in report)

    def test_malformed_line_reports_line_number(self, corpus, tmp_path, capsys):
        bad = corpus / "sessions" / "broken.jsonl"
        lines = (corpus / "sessions" / "op1_earlier.jsonl").read_text().splitlines()
        lines[3] = "{not json"
        bad.write_text("\n".join(lines) + "\n")
        assert run(["validate", corpus / "sessions", "--out", tmp_path / "o"]) == 1
        err = capsys.readouterr().err
        assert "broken.jsonl:4" in err

    def test_empty_directory_is_distinct_failure(self, tmp_path):
        empty = tmp_path / "nothing"
        empty.mkdir()
        assert run(["validate", empty, "--out", tmp_path / "o"]) == 2

    def test_missing_path_is_input_error(self, tmp_path):
        assert run(["validate", tmp_path / "absent", "--out", tmp_path / "o"]) == 1


class TestAnalyze:
    def test_happy_path_layout(self, corpus, tmp_path):
        out = tmp_path / "out"
        assert run(["analyze", corpus / "sessions", "--out", out]) == 0
        assert (out / "features.csv").is_file()
        assert (out / "summary.json").is_file()
        assert (out / "config_used.json").is_file()
        for sid in ("op1_earlier", "op1_later"):
            sdir = out / "sessions" / sid
            assert (sdir / "units.csv").is_file()
            assert (sdir / "hotspots.csv").is_file()
            assert (sdir / "features.csv").is_file()
            traces = list((sdir / "traces").glob("*.csv"))
            assert traces
        with (out / "features.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert {r["session_id"] for r in rows} == {"op1_earlier", "op1_later"}

    def test_partial_failure_keeps_good_session(self, corpus, tmp_path, capsys):
        (corpus / "sessions" / "bad.jsonl").write_text("{broken\n")
        out = tmp_path / "out"
        assert run(["analyze", corpus / "sessions", "--out", out]) == 3
        err = capsys.readouterr().err
        assert "bad" in err
        assert (out / "sessions" / "op1_earlier" / "features.csv").is_file()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["failures"] and "bad" in summary["failures"][0]["source"]

    def test_all_failed_is_input_error(self, tmp_path):
        d = tmp_path / "d"
        d.mkdir()
        (d / "only.jsonl").write_text("{broken\n")
        assert run(["analyze", d, "--out", tmp_path / "o"]) == 1

    def test_touchless_session_warns_and_emits_header_only(self, tmp_path, capsys):
        d = tmp_path / "d"
        d.mkdir()
        s = make_session([frame(i / 10.0) for i in range(20)], session_id="quiet")
        write_session(s, d / "quiet.jsonl")
        out = tmp_path / "out"
        assert run(["analyze", d, "--out", out]) == 0
        assert "no operation units" in capsys.readouterr().err
        units = (out / "sessions" / "quiet" / "units.csv").read_text().splitlines()
        assert len(units) == 1  # header only

    def test_jobs_must_be_positive(self, corpus, tmp_path):
        assert run(["analyze", corpus / "sessions", "--out", tmp_path / "o",
                    "--jobs", "0"]) == 1

    def test_unknown_config_key_rejected(self, corpus, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"cluster": {"bogus": 1}}))
        assert run(["analyze", corpus / "sessions", "--out", tmp_path / "o",
                    "--config", cfg]) == 1

    def test_config_echoed_in_output(self, corpus, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"cluster": {"spatial_eps": 4.0}}))
        out = tmp_path / "out"
        assert run(["analyze", corpus / "sessions", "--out", out, "--config", cfg]) == 0
        used = json.loads((out / "config_used.json").read_text())
        assert used["cluster"]["spatial_eps"] == 4.0

    def test_rerun_is_byte_identical(self, corpus, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run(["analyze", corpus / "sessions", "--out", out1]) == 0
        assert run(["analyze", corpus / "sessions", "--out", out2]) == 0
        files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel


class TestCompareAndCorrelate:
    @pytest.fixture
    def analyzed(self, corpus, tmp_path):
        out = tmp_path / "out"
        assert run(["analyze", corpus / "sessions", "--out", out]) == 0
        return out

    def test_compare_happy_path(self, corpus, analyzed, tmp_path):
        out = tmp_path / "cmp"
        code = run(["compare", analyzed / "features.csv", corpus / "pairs.json",
                    "--out", out])
        assert code == 0
        with (out / "comparison.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert {r["feature"] for r in rows} >= {"dur_gazing", "dur_operating"}
        plot = json.loads((out / "comparison_plot.json").read_text())
        assert "per_pair_deltas_pct" in plot

    def test_compare_accepts_features_directory(self, corpus, analyzed, tmp_path):
        code = run(["compare", analyzed, corpus / "pairs.json", "--out", tmp_path / "c"])
        assert code == 0

    def test_compare_missing_session_named(self, corpus, analyzed, tmp_path, capsys):
        manifest = tmp_path / "pairs.json"
        manifest.write_text(json.dumps({"pairs": [
            {"operator": "op1", "earlier": "ghost", "later": "op1_later"}]}))
        assert run(["compare", analyzed, manifest, "--out", tmp_path / "c"]) == 1
        assert "ghost" in capsys.readouterr().err

    def test_correlate_without_steps_is_empty(self, corpus, analyzed, tmp_path):
        ratings = tmp_path / "ratings.csv"
        ratings.write_text("step_id,rater_id,role,score\nstep_01,r1,expert,2\n")
        # the corpus has no step labels, so no labeled units exist
        assert run(["correlate", analyzed, ratings, "--out", tmp_path / "r"]) == 2


class TestSynthRoundTrip:
    def test_synth_then_full_pipeline(self, tmp_path, capsys):
        spec = tmp_path / "cohort.json"
        spec.write_text(json.dumps({"n_pairs": 2}))
        data = tmp_path / "data"
        assert run(["synth", "--config", spec, "--seed", "123", "--out", data]) == 0
        assert "wrote 4 sessions" in capsys.readouterr().out
        assert run(["validate", data / "sessions", "--out", tmp_path / "v"]) == 0

        out = tmp_path / "out"
        assert run(["analyze", data / "sessions", "--out", out]) == 0
        assert run(["compare", out, data / "pairs.json", "--out", tmp_path / "cmp"]) == 0
        assert run(["correlate", out, data / "ratings.csv", "--out", tmp_path / "cor"]) == 0

        with (tmp_path / "cor" / "correlation.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        by_feature = {r["feature"]: r for r in rows}
        assert int(by_feature["dur_gazing"]["n_steps"]) > 0
        plot = json.loads((tmp_path / "cor" / "correlation_plot.json").read_text())
        assert "by_role" in plot

    def test_synth_deterministic_across_runs(self, tmp_path):
        spec = tmp_path / "cohort.json"
        spec.write_text(json.dumps({"n_pairs": 1, "seed": 55}))
        d1, d2 = tmp_path / "a", tmp_path / "b"
        assert run(["synth", "--config", spec, "--out", d1]) == 0
        assert run(["synth", "--config", spec, "--out", d2]) == 0
        for rel in sorted(p.relative_to(d1) for p in d1.rglob("*") if p.is_file()):
            assert (d1 / rel).read_bytes() == (d2 / rel).read_bytes(), rel

    def test_synth_csv_format(self, tmp_path):
        spec = tmp_path / "cohort.json"
        spec.write_text(json.dumps({"n_pairs": 1, "seed": 9}))
        data = tmp_path / "data"
        assert run(["synth", "--config", spec, "--out", data, "--format", "csv"]) == 0
        files = list((data / "sessions").glob("*.csv"))
        assert any(not f.name.endswith(".steps.csv") for f in files)
        assert run(["validate", data / "sessions", "--out", tmp_path / "v"]) == 0


class TestStepLabelFlow:
    def test_labeled_units_survive_to_correlation(self, tmp_path):
        from opgaze import StepLabel
        d = tmp_path / "d"
        d.mkdir()
        frames = []
        for i in range(121):
            t = i / 10.0
            touch = (3.0 <= t <= 5.0) or (9.0 <= t <= 11.0)
            hand = touch or (2.0 <= t <= 5.0) or (8.0 <= t <= 11.0)
            frames.append(frame(t, ax=20.0, ay=0.0, hx=5.0 if hand else None,
                                hy=5.0 if hand else None, touch=touch))
        labels = [StepLabel(0.0, 6.0, "alpha"), StepLabel(6.0, 12.0, "beta")]
        s = make_session(frames, session_id="lab", step_labels=tuple(labels))
        write_session(s, d / "lab.jsonl")
        write_step_labels(labels, d / "lab.steps.csv")
        out = tmp_path / "out"
        assert run(["analyze", d, "--out", out]) == 0
        with (out / "features.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert [r["step_id"] for r in rows] == ["alpha", "beta"]
