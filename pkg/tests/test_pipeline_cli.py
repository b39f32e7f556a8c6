import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from dynpsn.cli import main
from dynpsn.evaluation import PredictionRow, PredictionSet, read_folds, write_predictions
from dynpsn.oracle import run_oracle
from dynpsn.pipeline import load_config


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One small corpus driven through every stage, shared by read-only tests."""
    root = tmp_path_factory.mktemp("pipeline")
    manifest = root / "manifest.json"
    assert main(["synth", "--out", str(manifest), "--seed", "11", "--classes", "3",
                 "--per-class", "30", "--length-min", "30", "--length-max", "42"]) == 0
    out = root / "run"
    base = ["--manifest", str(manifest), "--out", str(out), "--seed", "5"]
    for stage in ["build", "count", "featurize", "train-lr", "evaluate", "rank", "report"]:
        assert main([stage] + base) == 0, stage
    return root


def read_rates_map(path):
    rates = {}
    for ln in Path(path).read_text().splitlines()[1:]:
        ds, m, agg, avg = ln.split(",")
        rates[m] = float(agg)
    return rates


class TestStages:
    def test_build_outputs(self, workdir):
        out = workdir / "run"
        assert (out / "domains.jsonl").exists()
        assert (out / "labels.csv").exists()
        assert len(list((out / "events").glob("*.events"))) == 90
        folds = read_folds(out / "folds.csv")
        assert len(folds.fold_of) == 90

    def test_count_outputs(self, workdir):
        out = workdir / "run"
        assert (out / "orbits_dynamic.txt").read_text().splitlines()[0] == \
            "ORBITS v1 4 6 3727"
        assert len(list((out / "dgdvm").glob("*.dgdvm"))) == 90
        assert len(list((out / "sgdvm").glob("*.dgdvm"))) == 90

    def test_rates_and_baseline(self, workdir):
        rates = read_rates_map(workdir / "run" / "rates.csv")
        assert set(rates) == {"dynamic-lr", "static-lr", "majority"}
        assert rates["majority"] == pytest.approx(2 / 3, abs=1e-9)
        assert rates["dynamic-lr"] <= 0.10

    def test_rank_outputs(self, workdir):
        out = workdir / "run"
        strict = (out / "rank_strict.csv").read_text().splitlines()
        assert strict[0] == "dataset_id,method_id,rank"
        ranks = {ln.split(",")[1]: int(ln.split(",")[2]) for ln in strict[1:]}
        assert ranks["majority"] > ranks["dynamic-lr"]

    def test_report_files(self, workdir):
        rep = workdir / "run" / "report"
        assert (rep / "rates_table.csv").exists()
        assert (rep / "rank1_bar.svg").exists()
        assert (rep / "rates_box.svg").exists()
        svg = (rep / "rank1_bar.svg").read_text()
        assert svg.startswith("<svg ") and "<!--" in svg  # embedded data table

    def test_metadata_written(self, workdir):
        meta_dir = workdir / "run" / "metadata"
        stages = {p.stem for p in meta_dir.glob("*.json")}
        assert {"build", "count", "featurize", "train_lr", "evaluate"} <= stages
        meta = json.loads((meta_dir / "build.json").read_text())
        assert meta["config"]["seed"] == 5
        assert "wall_clock_seconds" in meta and "input_hashes" in meta

    def test_events_format(self, workdir):
        path = sorted((workdir / "run" / "events").glob("*.events"))[0]
        lines = path.read_text().splitlines()
        assert lines[0].startswith("EVENTS v1 ")
        assert lines[-1].startswith("COUNTS ")


class TestConnectivityFilter:
    def test_disconnected_domain_dropped_and_named(self, tmp_path, caplog):
        # two 20-residue clusters 100 A apart: length passes the floor but the
        # network is disconnected
        residues = []
        for i in range(20):
            residues.append({"index": i + 1, "aa": "A", "x": 3.8 * i, "y": 0.0, "z": 0.0})
        for i in range(20):
            residues.append({"index": i + 21, "aa": "A", "x": 3.8 * i, "y": 100.0, "z": 0.0})
        connected = [{"index": i + 1, "aa": "A", "x": 3.8 * i, "y": 0.0, "z": 0.0}
                     for i in range(40)]
        entries = [{"id": "broken", "label": "x", "residues": residues}]
        entries += [{"id": f"ok{i}", "label": "x", "residues": connected}
                    for i in range(4)]
        man = tmp_path / "m.json"
        man.write_text(json.dumps({"entries": entries}))
        out = tmp_path / "o"
        rc = main(["build", "--manifest", str(man), "--out", str(out),
                   "--class-floor", "2", "--folds", "2"])
        assert rc == 0
        kept = {ln.split(",")[0] for ln in (out / "labels.csv").read_text().splitlines()}
        assert kept == {"ok0", "ok1", "ok2", "ok3"}
        meta = json.loads((out / "metadata" / "build.json").read_text())
        assert meta["domains_dropped_disconnected"] == ["broken"]


class TestCliErrors:
    def test_missing_manifest_file(self, tmp_path):
        rc = main(["build", "--manifest", str(tmp_path / "nope.json"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_manifest_with_missing_structure_file(self, tmp_path, capsys):
        man = tmp_path / "m.json"
        man.write_text(json.dumps({"entries": [
            {"id": "a", "label": "x", "path": "missing.pdb", "chain": "A"}]}))
        rc = main(["build", "--manifest", str(man), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "missing.pdb" in capsys.readouterr().err

    def test_dependency_error_names_stage(self, tmp_path, capsys):
        rc = main(["count", "--out", str(tmp_path / "empty")])
        assert rc == 2
        assert "build" in capsys.readouterr().err

    def test_synth_floor_guard(self, tmp_path):
        rc = main(["synth", "--out", str(tmp_path / "m.json"), "--per-class", "5"])
        assert rc == 2

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 9, "k": 4}))
        merged = load_config(str(cfg), {"seed": 10, "out": None})
        assert merged.seed == 10  # flag wins
        assert merged.k == 4      # file beats default

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nope": 1}))
        with pytest.raises(Exception):
            load_config(str(cfg), {})


class TestDeterminismAndParallel:
    def test_rerun_and_parallel_byte_identical(self, workdir, tmp_path):
        manifest = workdir / "manifest.json"
        out1 = workdir / "run"
        out2 = tmp_path / "rerun"
        base = ["--manifest", str(manifest), "--out", str(out2), "--seed", "5"]
        for stage in ["build", "count", "featurize", "train-lr", "evaluate", "rank",
                      "report"]:
            assert main([stage] + base + (["--jobs", "3"] if stage == "count" else [])) == 0
        skip = {"metadata"}
        files1 = sorted(p.relative_to(out1) for p in out1.rglob("*")
                        if p.is_file() and not set(p.relative_to(out1).parts) & skip
                        and not p.name.startswith("runtime_"))
        files2 = sorted(p.relative_to(out2) for p in out2.rglob("*")
                        if p.is_file() and not set(p.relative_to(out2).parts) & skip
                        and not p.name.startswith("runtime_"))
        assert files1 == files2
        for rel in files1:
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel


class TestInterchange:
    def test_external_predictions_treated_identically(self, workdir, tmp_path):
        out_src = workdir / "run"
        out = tmp_path / "run"
        shutil.copytree(out_src, out)
        folds = read_folds(out / "folds.csv")
        labels = {}
        for ln in (out / "labels.csv").read_text().splitlines():
            did, lab = ln.rsplit(",", 1)
            labels[did] = lab
        rows = [PredictionRow(did, folds.fold_of[did], labels[did], "extended")
                for did in labels]
        ext = PredictionSet(method_id="always-extended", dataset_id="dataset", rows=rows)
        ext_path = tmp_path / "ext.csv"
        write_predictions(ext, ext_path)
        manifest = workdir / "manifest.json"
        rc = main(["evaluate", "--manifest", str(manifest), "--out", str(out),
                   "--seed", "5", "--pred", str(ext_path)])
        assert rc == 0
        rates = read_rates_map(out / "rates.csv")
        assert "always-extended" in rates
        assert rates["always-extended"] == pytest.approx(2 / 3, abs=1e-9)


class TestStats:
    def test_multi_dataset_stats_three_methods(self, tmp_path):
        # six datasets, three methods with a strict ordering good < mid < bad
        rng = np.random.default_rng(0)
        paths = []
        for i in range(6):
            p = tmp_path / f"rates{i}.csv"
            base = float(rng.uniform(0.1, 0.3))
            p.write_text("dataset_id,method_id,aggregate,average\n"
                         f"ds{i},good,{base - 0.05:.6f},{base - 0.05:.6f}\n"
                         f"ds{i},mid,{base - 0.02:.6f},{base - 0.02:.6f}\n"
                         f"ds{i},bad,{base:.6f},{base:.6f}\n")
            paths.append(str(p))
        out = tmp_path / "out"
        rc = main(["stats", "--out", str(out)] + sum((["--rates", p] for p in paths), []))
        assert rc == 0
        lines = (out / "stats.csv").read_text().splitlines()
        rows = {tuple(ln.split(",")[:2]): ln.split(",") for ln in lines[1:]}
        assert len(rows) == 6  # all ordered pairs of 3 methods
        p_good = float(rows[("good", "bad")][2])
        p_bad = float(rows[("bad", "good")][2])
        assert p_good == pytest.approx(1 / 64)
        assert p_bad == 1.0
        q = (out / "qvalues.csv").read_text().splitlines()
        assert q[0] == ",bad,good,mid"
        assert len(q) == 4  # 3x3 matrix plus header
        assert q[1].split(",")[1] == ""  # blank diagonal
        # Bonferroni divisor is the number of ordered pairs tested
        assert float(q[2].split(",")[1]) == pytest.approx(min(1.0, p_good * 6))
        meta = json.loads((out / "metadata" / "stats.json").read_text())
        assert meta["bonferroni_divisor"] == 6

    def test_rank_merges_multiple_rates(self, tmp_path):
        p1 = tmp_path / "r1.csv"
        p2 = tmp_path / "r2.csv"
        p1.write_text("dataset_id,method_id,aggregate,average\nd1,A,0.1,0.1\nd1,B,0.1,0.1\nd1,C,0.2,0.2\n")
        p2.write_text("dataset_id,method_id,aggregate,average\nd2,A,0.0,0.0\nd2,B,0.3,0.3\nd2,C,0.3,0.3\n")
        out = tmp_path / "out"
        rc = main(["rank", "--out", str(out), "--rates", str(p1), "--rates", str(p2)])
        assert rc == 0
        strict = (out / "rank_strict.csv").read_text().splitlines()[1:]
        ranks = {(ln.split(",")[0], ln.split(",")[1]): int(ln.split(",")[2])
                 for ln in strict}
        assert ranks[("d1", "A")] == 1 and ranks[("d1", "C")] == 3
        assert ranks[("d2", "B")] == 2


class TestOracleCommand:
    def test_cli_oracle_passes(self, capsys):
        assert main(["oracle", "--streams", "6", "--stream-events", "10"]) == 0
        out = capsys.readouterr().out
        assert "PASS orbits(4,6) == 3727" in out
        assert "FAIL" not in out

    def test_refusal_above_oracle_bounds(self):
        assert main(["oracle", "--stream-events", "40"]) == 2

    def test_fault_injection_reports_minimal_counterexample(self, dyn_table):
        from dynpsn.graphlets import count_dynamic_orbits

        def corrupted(stream, table, **kw):
            g = count_dynamic_orbits(stream, table, **kw)
            if len(stream.events) >= 2:
                g.counts[0, 0] += 1  # inject an off-by-one
            return g

        report = run_oracle(streams=10, max_stream_nodes=6, max_stream_events=8,
                            counter=corrupted)
        assert not report.ok
        fail = next(c for c in report.checks if not c.passed)
        assert "minimal counterexample" in fail.detail
        # shrinker reduced it to the smallest failing stream: 2 events
        assert fail.detail.count("(") == 2


class TestPcaScopeTrain:
    def test_leakage_free_mode_runs(self, workdir, tmp_path):
        manifest = workdir / "manifest.json"
        out = tmp_path / "run_scope"
        base = ["--manifest", str(manifest), "--out", str(out), "--seed", "5",
                "--pca-scope", "train"]
        for stage in ["build", "count", "featurize", "train-lr", "evaluate"]:
            assert main([stage] + base) == 0
        rates = read_rates_map(out / "rates.csv")
        assert rates["dynamic-lr"] <= 0.15
