import numpy as np
import pytest

from dynpsn_dl.cli import main as dl_main
from dynpsn_dl.interchange import (
    Prediction,
    derive_seed,
    read_event_stream,
    read_folds,
    read_gdvm,
    read_labels,
    snapshot_adjacencies,
    stratified_assignment,
    validation_split,
    write_event_stream,
    write_gdvm,
    write_predictions,
)


class TestRoundTrips:
    def test_gdvm_value_and_byte_exact(self, primary_run, tmp_path):
        _, out = primary_run
        src = sorted((out / "dgdvm").glob("*.dgdvm"))[0]
        m = read_gdvm(src)
        assert m.counts.dtype == np.int64
        dst = tmp_path / "copy.dgdvm"
        write_gdvm(m, dst)
        assert dst.read_bytes() == src.read_bytes()

    def test_event_stream_value_and_byte_exact(self, primary_run, tmp_path):
        _, out = primary_run
        src = sorted((out / "events").glob("*.events"))[0]
        s = read_event_stream(src)
        assert s.n == s.node_counts[-1]
        dst = tmp_path / "copy.events"
        write_event_stream(s, dst)
        assert dst.read_bytes() == src.read_bytes()

    def test_snapshot_reconstruction_is_nested(self, primary_run):
        _, out = primary_run
        s = read_event_stream(sorted((out / "events").glob("*.events"))[0])
        adjacencies = snapshot_adjacencies(s)
        assert len(adjacencies) == s.T
        assert adjacencies[-1].shape == (s.n, s.n)
        for a, b in zip(adjacencies, adjacencies[1:]):
            k = a.shape[0]
            assert np.all(b[:k, :k] >= a)  # earlier edges persist

    def test_labels_and_folds(self, primary_run):
        _, out = primary_run
        labels = read_labels(out / "labels.csv")
        folds = read_folds(out / "folds.csv")
        assert set(labels) == set(folds)
        assert len(labels) == 90
        assert set(folds.values()) == set(range(5))


class TestFoldAlgorithmParity:
    def test_matches_pipeline_assignment(self, primary_run):
        # the documented SplitMix64 shuffle must reproduce the pipeline's folds
        from dynpsn.evaluation import stratified_folds

        _, out = primary_run
        labels = read_labels(out / "labels.csv")
        ours = stratified_assignment(labels, 5, seed=13)
        theirs = stratified_folds(labels, 5, seed=13).fold_of
        assert ours == theirs
        assert ours == read_folds(out / "folds.csv")

    def test_validation_split_is_stratified_fifth(self, primary_run):
        _, out = primary_run
        labels = read_labels(out / "labels.csv")
        ids = sorted(labels)[:60]
        train, val = validation_split(ids, labels, derive_seed(13, 0))
        assert len(val) == 12 and len(train) == 48
        assert not set(train) & set(val)
        for lab in {labels[d] for d in ids}:
            assert sum(1 for d in val if labels[d] == lab) >= 1


@pytest.fixture(scope="module")
def trained(primary_run):
    manifest, out = primary_run
    assert dl_main(["train-regular", "--data", str(out), "--variant",
                    "cnn3-lstm1", "--epochs", "2", "--seed", "3"]) == 0
    assert dl_main(["train-graph", "--data", str(out), "--model", "sgcn",
                    "--features", "graphlets", "--epochs", "2",
                    "--seed", "3"]) == 0
    return manifest, out


class TestEmittedPredictions:
    def test_prediction_files_valid_for_primary(self, trained):
        from dynpsn.evaluation import read_predictions

        _, out = trained
        for method in ("cnn3-lstm1", "sgcn-graphlets"):
            preds = read_predictions(out / "predictions" / f"{method}.csv")
            assert preds.method_id == method
            assert len(preds.rows) == 90
            assert all(len(r.scores) == 3 for r in preds.rows)
            sums = [sum(r.scores) for r in preds.rows]
            assert all(abs(s - 1.0) <= 1e-6 for s in sums)

    def test_primary_evaluate_and_rank_consume_them(self, trained):
        from dynpsn.cli import main as primary_main

        manifest, out = trained
        args = ["--manifest", str(manifest), "--out", str(out), "--seed", "13"]
        assert primary_main(["evaluate"] + args) == 0
        assert primary_main(["rank"] + args) == 0
        rates = {}
        for ln in (out / "rates.csv").read_text().splitlines()[1:]:
            _, m, agg, _ = ln.split(",")
            rates[m] = float(agg)
        assert {"cnn3-lstm1", "sgcn-graphlets", "dynamic-lr", "majority"} <= set(rates)
        ranked = (out / "rank_strict.csv").read_text()
        assert "cnn3-lstm1" in ranked and "sgcn-graphlets" in ranked

    def test_epoch_logs_emitted(self, trained):
        _, out = trained
        logs = sorted((out / "epochs").glob("cnn3-lstm1_fold*.csv"))
        assert len(logs) == 5
        lines = logs[0].read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss,lr"

    def test_runtime_metadata_emitted(self, trained):
        import json

        _, out = trained
        meta = json.loads((out / "metadata" / "dl_cnn3-lstm1.json").read_text())
        assert "cnn3-lstm1" in meta["method_runtimes"]
        assert meta["method_runtimes"]["cnn3-lstm1"] > 0


class TestPredictionWriterGuards:
    def test_refuses_empty(self, tmp_path):
        from dynpsn_dl import InterchangeError
        with pytest.raises(InterchangeError):
            write_predictions("d", "m", [], tmp_path / "p.csv")

    def test_refuses_ragged_scores(self, tmp_path):
        from dynpsn_dl import InterchangeError
        rows = [Prediction("a", 0, "x", "x", [0.5, 0.5]),
                Prediction("b", 0, "x", "x", [1.0])]
        with pytest.raises(InterchangeError):
            write_predictions("d", "m", rows, tmp_path / "p.csv")
