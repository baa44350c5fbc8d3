import json
import re

import numpy as np
import pytest
import yaml

from adacsl.core import CostMatrix, EpochRecord, LambdaState
from adacsl.costmodel import empirical_cost, error_counts
from adacsl.errors import ConfigError, InvalidInputError
from adacsl.harness.cli import main
from adacsl.harness.config import (
    AdaptiveSettings,
    ExperimentConfig,
    TrainSettings,
    config_from_dict,
    config_to_dict,
    load_config,
    manifest_lines,
)
from adacsl.harness.data import (
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    split_dataset,
    split_indices,
    write_csv,
)
from adacsl.harness.experiment import (
    emit_series,
    format_table,
    resolve_rhos,
    run_experiment,
    subgroup_report,
)

TINY = SyntheticSpec(n_train=300, n_val=300, n_test=200, class_sep=1.5, seed=3)


def tiny_config(tmp_path, **kw):
    base = dict(
        synthetic=TINY,
        rhos=(4.0,),
        methods=("standard", "adacsl"),
        seeds=(0,),
        adacsl=AdaptiveSettings(max_epochs=3, min_epochs=1),
        train=TrainSettings(hidden=(8,)),
        output_dir=str(tmp_path / "out"),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestSynthetic:
    def test_exact_class_counts(self):
        train, val, test = generate_synthetic(SyntheticSpec(n_train=900, n_val=450, n_test=90, imbalance_ratio=8))
        for ds, n in ((train, 900), (val, 450), (test, 90)):
            assert len(ds) == n
            assert int(ds.labels.sum()) * 8 == n - int(ds.labels.sum())

    def test_same_seed_bitwise(self):
        a, b = generate_synthetic(TINY), generate_synthetic(TINY)
        for x, y in zip(a, b):
            assert x.features.tobytes() == y.features.tobytes()
            assert x.labels.tobytes() == y.labels.tobytes()

    def test_shift_moves_validation_positives_only(self):
        spec = SyntheticSpec(n_train=4000, n_val=4000, n_test=10, val_shift=2.0, seed=1)
        train, val, _ = generate_synthetic(spec)
        mean = lambda ds, c: ds.features[ds.labels == c, 0].mean()
        assert mean(val, 1) - mean(train, 1) == pytest.approx(2.0, abs=0.15)
        assert mean(val, 0) == pytest.approx(mean(train, 0), abs=0.1)

    def test_vector_shift_needs_d_entries(self):
        with pytest.raises(InvalidInputError):
            SyntheticSpec(d=3, val_shift=(1.0, 0.0))
        assert SyntheticSpec(d=2, val_shift=[0.5, -0.5]).shift_vector().tolist() == [0.5, -0.5]

    def test_degenerate_counts(self):
        with pytest.raises(InvalidInputError):
            SyntheticSpec(n_train=0)


class TestCsv:
    def test_parse(self, tmp_path):
        ds = load_csv(write(tmp_path / "a.csv", "f1,f2,label\n1,2,0\n3,4,1\n5,6,0\n"))
        assert len(ds) == 3 and ds.n_features == 2
        np.testing.assert_array_equal(ds.labels, [0, 1, 0])

    def test_missing_header(self, tmp_path):
        with pytest.raises(InvalidInputError, match="expected header row"):
            load_csv(write(tmp_path / "a.csv", "1,2,0\n3,4,1\n"))

    def test_bad_label_line(self, tmp_path):
        with pytest.raises(InvalidInputError, match="line 4"):
            load_csv(write(tmp_path / "a.csv", "a,b,y\n1,2,0\n3,4,1\n5,6,2\n"))

    def test_round_trip(self, tmp_path):
        train, _, _ = generate_synthetic(TINY)
        write_csv(train, tmp_path / "t.csv")
        assert load_csv(tmp_path / "t.csv").equals(train)


class TestSplit:
    def test_disjoint_partition(self):
        labels = np.r_[np.zeros(70, int), np.ones(30, int)]
        parts = split_indices(labels, (0.6, 0.2, 0.2), seed=2)
        allidx = np.concatenate(parts)
        assert np.array_equal(np.sort(allidx), np.arange(100))
        assert [p.size for p in parts] == [60, 20, 20]
        assert [int(labels[p].sum()) for p in parts] == [18, 6, 6]

    def test_dataset_split(self):
        train, _, _ = generate_synthetic(TINY)
        a, b, c = split_dataset(train, seed=1)
        assert len(a) + len(b) + len(c) == len(train)

    def test_bad_fractions(self):
        with pytest.raises(InvalidInputError):
            split_indices([0, 1], (0.5, 0.5, 0.5))


class TestConfig:
    def test_yaml_round_trip(self, tmp_path):
        cfg = tiny_config(tmp_path)
        path = write(tmp_path / "c.yaml", yaml.safe_dump(config_to_dict(cfg)))
        assert load_config(path) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            config_from_dict({"rhos": [2], "learning_rate": 0.1})
        with pytest.raises(ConfigError, match="config.train"):
            config_from_dict({"rhos": [2], "train": {"lr": 0.1}})

    @pytest.mark.parametrize(
        "kw",
        [dict(split=(0.5, 0.5, 0.1)), dict(rhos=(0.0,)), dict(methods=()), dict(methods=("boost",)), dict(seeds=())],
    )
    def test_invalid(self, tmp_path, kw):
        with pytest.raises(ConfigError):
            tiny_config(tmp_path, **kw)

    def test_csv_source_excludes_synthetic(self):
        cfg = config_from_dict({"csv": "data.csv", "rhos": [2]})
        assert cfg.synthetic is None
        with pytest.raises(ConfigError):
            ExperimentConfig(csv="x.csv", rhos=(2,))

    def test_manifest_sorted_without_timestamps(self, tmp_path):
        lines = manifest_lines(tiny_config(tmp_path), {"resolved.rhos": [4.0]})
        keys = [ln.split(" = ")[0] for ln in lines]
        assert keys == sorted(keys)
        assert "adacsl.t_prime = 0.5" in lines
        assert not any(re.search(r"\d{4}-\d{2}-\d{2}|\d{2}:\d{2}:\d{2}", ln) for ln in lines)


class TestSubgroupReport:
    def test_bin_of_32(self):
        p = np.full(32, 0.35)
        y = np.zeros(32, int)
        y[:2] = 1
        rows = subgroup_report(p, y, p, p, CostMatrix(2, 2), num_bins=10)
        row = rows[3]
        assert row["size"] == 32
        assert row["epoch1_cost"] == 4.0
        assert row["epoch1_acc"] == pytest.approx(30 / 32)
        assert row["high_cost"]

    def test_empty_bins_blank(self):
        rows = subgroup_report([0.05, 0.95], [0, 1], [0.1, 0.9], [0.1, 0.9], CostMatrix(1, 1))
        assert rows[4]["size"] == 0
        assert rows[4]["epoch1_cost"] is None and rows[4]["a_acc"] is None
        assert not rows[4]["high_cost"]

    def test_bins_sum_to_whole(self):
        rng = np.random.default_rng(0)
        p1, pa, pb = rng.random((3, 400))
        y = rng.integers(0, 2, 400)
        cm = CostMatrix(1, 7)
        rows = subgroup_report(p1, y, pa, pb, cm, num_bins=10, tau=0.5)
        for tag, p in (("epoch1", p1), ("a", pa), ("b", pb)):
            assert sum(r[f"{tag}_cost"] for r in rows if r["size"]) == empirical_cost(p, y, 0.5, cm)
        assert sum(r["size"] for r in rows) == 400


def record(epoch, lam_used, lam_next, t=0.5):
    return EpochRecord(epoch, lam_used, lam_next / lam_used, lam_next, (t,), (10,), 3.0, 4.0)


class TestSeries:
    def test_row_counts(self, tmp_path):
        traj = tuple(record(i, 1.0, 1.0) for i in range(1, 8))
        paths = emit_series(LambdaState(1.0, 7, traj), tmp_path)
        for p in paths:
            assert len(p.read_text().splitlines()) == 8

    def test_fixed_point_lambda_column(self, tmp_path):
        traj = tuple(record(i, 1.0, 1.0) for i in range(1, 4))
        emit_series(LambdaState(1.0, 3, traj), tmp_path)
        lines = (tmp_path / "series_lambda.csv").read_text().splitlines()
        assert lines[0] == "epoch,lambda_used,factor,lambda,clamped"
        assert [ln.split(",")[3] for ln in lines[1:]] == ["1.0"] * 3

    def test_empty_trajectory(self, tmp_path):
        with pytest.raises(InvalidInputError):
            emit_series(LambdaState(), tmp_path)


class TestExperiment:
    def test_standard_symmetric_cost_is_error_count(self, tmp_path):
        cfg = tiny_config(tmp_path, rhos=(1.0,), methods=("standard",))
        report = run_experiment(cfg)
        cell = report.cells[0]
        _, _, test = generate_synthetic(TINY)
        assert cell.test_cost == sum(error_counts(cell.test_preds, test.labels, 0.5))

    def test_rho_family(self):
        cfg = ExperimentConfig(synthetic=SyntheticSpec(n_train=900, imbalance_ratio=8))
        train, _, _ = generate_synthetic(cfg.synthetic)
        assert resolve_rhos(cfg, train) == (8.0, 24.0, 40.0)

    def test_outputs(self, tmp_path):
        cfg = tiny_config(tmp_path, methods=("standard", "ta", "wce", "resample", "smote", "adacsl"))
        report = run_experiment(cfg)
        out = tmp_path / "out"
        for name in ("report.csv", "subgroups.csv", "results.json", "manifest.txt"):
            assert (out / name).is_file()
        assert (out / "series" / "rho4_seed0" / "series_lambda.csv").is_file()
        doc = json.loads((out / "results.json").read_text())
        assert len(doc["cells"]) == 6
        assert all(c["error"] is None for c in doc["cells"])
        ta = next(c for c in report.cells if c.method == "ta")
        assert ta.decision_threshold == 1 / 5
        assert "resolved.rhos = [4.0]" in (out / "manifest.txt").read_text()
        table = format_table(report.summary(), cfg.methods)
        assert table.count("\n") == 2

    def test_failed_cell_is_recorded(self, tmp_path):
        # SMOTE needs k + 1 minority rows; the split here has fewer
        cfg = tiny_config(tmp_path, methods=("smote", "standard"), smote_k=500)
        report = run_experiment(cfg)
        errs = {c.method: c.error for c in report.cells}
        assert "k=500" in errs["smote"]
        assert errs["standard"] is None


class TestCli:
    def test_generate_train_evaluate_report(self, tmp_path, capsys):
        data = tmp_path / "data"
        assert main(["generate", "--out", str(data), "--n-train", "300", "--n-val", "200",
                     "--n-test", "100", "--data-seed", "1"]) == 0
        assert {p.name for p in data.iterdir()} == {"train.csv", "val.csv", "test.csv"}
        capsys.readouterr()

        run = tmp_path / "run"
        assert main(["train", "--train", str(data / "train.csv"), "--val", str(data / "val.csv"),
                     "--rho", "4", "--out", str(run), "--epochs", "3", "--min-epochs", "1",
                     "--hidden", "8"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["method"] == "adacsl" and summary["epochs"] <= 3
        assert (run / "checkpoint.json").is_file() and (run / "series_lambda.csv").is_file()

        assert main(["evaluate", "--checkpoint", str(run / "checkpoint.json"),
                     "--data", str(data / "test.csv"), "--rho", "4", "--threshold", "optimal"]) == 0
        ev = json.loads(capsys.readouterr().out)
        assert ev["n"] == 100 and ev["threshold"] == 0.2

    def test_sweep_from_config_with_overrides(self, tmp_path, capsys):
        cfg = tiny_config(tmp_path, methods=("standard",))
        path = write(tmp_path / "c.yaml", yaml.safe_dump(config_to_dict(cfg)))
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(path), "--out", str(out), "--rhos", "2", "3"]) == 0
        assert "| rho |" in capsys.readouterr().out
        doc = json.loads((out / "results.json").read_text())
        assert doc["config"]["rhos"] == [2.0, 3.0]
        assert main(["report", "--results", str(out / "results.json"), "--format", "csv"]) == 0
        header = capsys.readouterr().out.splitlines()[0].split(",")
        assert header[0] == "rho" and "standard_cost_mean" in header

    def test_exit_codes(self, tmp_path, capsys):
        bad = write(tmp_path / "bad.csv", "a,y\n1,0\n2,5\n")
        assert main(["train", "--train", str(bad), "--val", str(bad), "--rho", "2", "--out", str(tmp_path)]) == 1
        assert "line 3" in capsys.readouterr().err
        missing = str(tmp_path / "nope.csv")
        assert main(["evaluate", "--checkpoint", missing, "--data", missing, "--rho", "2"]) == 3
        cfgfile = write(tmp_path / "c.yaml", "rhos: [2]\nbogus: 1\n")
        assert main(["sweep", "--config", str(cfgfile)]) == 1

    def test_usage_error_is_invalid_input(self, capsys):
        # 2 belongs to divergence, so argparse's own code must not leak through
        with pytest.raises(SystemExit) as exc:
            main(["train", "--no-such-flag"])
        assert exc.value.code == 1
        assert "error:" in capsys.readouterr().err
