import json

import pandas as pd
import pytest

from hopper_est.cli import run_command
from hopper_est.models import EstimatorParams
from hopper_est.services.config import parse_run_config


def _config(tmp_path, **sections):
    sections.setdefault("cli", {})
    sections["cli"] = {"out_dir": str(tmp_path / "out"), **sections["cli"]}
    return parse_run_config(sections)


@pytest.fixture
def log_dir(make_log, write_logs) -> str:
    return write_logs(
        make_log(n_hops=2, height=1.0, name="h1_trial000"),
        make_log(n_hops=2, height=1.5, name="h1.5_trial000"),
    )


def test_evaluate_reports_overall_and_per_height(tmp_path, log_dir) -> None:
    cfg = _config(tmp_path, metrics={"dataset": [log_dir]})

    summary = run_command("evaluate", cfg)

    assert not summary.get("error"), summary
    assert summary["n_hops"] == 4
    payload = json.loads((tmp_path / "out" / "evaluation.json").read_text())
    assert sorted(payload["per_height"]) == ["1", "1.5"]
    assert set(payload["baselines"]) <= {"ba1", "dr1", "kf3"}
    hops = pd.read_csv(tmp_path / "out" / "hops.csv")
    assert len(hops) == 4


def test_evaluate_height_filter(tmp_path, log_dir) -> None:
    cfg = _config(tmp_path, metrics={"dataset": [log_dir], "heights": [1.5], "baselines": False})

    summary = run_command("evaluate", cfg)

    assert summary["n_hops"] == 2


def test_evaluate_filter_without_match_is_a_data_error(tmp_path, log_dir) -> None:
    cfg = _config(tmp_path, metrics={"dataset": [log_dir], "heights": [3.0]})

    summary = run_command("evaluate", cfg)

    assert summary["error"] is True
    assert summary["code"] == "data_error"


def test_missing_dataset_path_is_a_config_error(tmp_path) -> None:
    cfg = _config(tmp_path, metrics={"dataset": [str(tmp_path / "nowhere")]})

    summary = run_command("evaluate", cfg)

    assert summary["code"] == "config_error"
    assert summary["details"] == {"field": "metrics.dataset"}


def test_subset_writes_hops_and_manifest(tmp_path, log_dir) -> None:
    cfg = _config(tmp_path, subset={"dataset": [log_dir], "per_height": 1}, cli={"seed": 2})

    summary = run_command("subset", cfg)

    assert not summary.get("error"), summary
    assert len(summary["hops"]) == 2
    manifest = json.loads((tmp_path / "out" / "subset.json").read_text())
    assert manifest["per_height"] == {"1": 1, "1.5": 1}
    assert manifest["seed"] == 2


def test_subset_shortfall_is_reported(tmp_path, log_dir) -> None:
    cfg = _config(tmp_path, subset={"dataset": [log_dir], "per_height": 5})

    summary = run_command("subset", cfg)

    assert summary["error"] is True
    assert summary["code"] == "data_error"


@pytest.mark.slow
def test_train_is_reproducible(tmp_path, log_dir) -> None:
    runs = []
    for k in range(2):
        cfg = _config(
            tmp_path / f"run{k}",
            trainer={"dataset": [log_dir], "ga": {"population": 4, "generations": 2, "seed": 1}},
        )
        summary = run_command("train", cfg)
        assert not summary.get("error"), summary
        assert summary["generations"] == 2
        runs.append((tmp_path / f"run{k}" / "out" / "best_params.json").read_text())

    assert runs[0] == runs[1]
    EstimatorParams.model_validate_json(runs[0])


@pytest.mark.slow
def test_trained_params_load_as_params_file(tmp_path, log_dir) -> None:
    cfg = _config(
        tmp_path,
        trainer={"dataset": [log_dir], "ga": {"population": 4, "generations": 1}},
    )
    summary = run_command("train", cfg)

    reloaded = parse_run_config({"hvse": {"params_file": summary["best_params"]}})

    assert reloaded.hvse.params.model_dump() == json.loads(
        (tmp_path / "out" / "best_params.json").read_text()
    )


@pytest.mark.slow
def test_sensitivity_writes_one_row_per_parameter_and_fraction(tmp_path, log_dir) -> None:
    cfg = _config(
        tmp_path,
        hvse={"filter": "eskf1"},
        trainer={"dataset": [log_dir], "sensitivity_fractions": [-0.1, 0.1]},
    )

    summary = run_command("sensitivity", cfg)

    assert not summary.get("error"), summary
    table = pd.read_csv(tmp_path / "out" / "sensitivity.csv")
    assert len(table) == summary["rows"]
    assert summary["rows"] % 2 == 0


@pytest.mark.slow
def test_sweep_runs_noisy_and_clean_per_frequency(tmp_path) -> None:
    cfg = _config(
        tmp_path,
        sweep={"frequencies": [840, 100], "h_ch": 1.0, "duration": 0.5, "tail": 0.2},
    )

    summary = run_command("sweep-freq", cfg)

    assert not summary.get("error"), summary
    assert summary["frequencies"] == 2
    table = pd.read_csv(tmp_path / "out" / "sweep.csv")
    assert table["frequency"].tolist() == [840.0, 840.0, 100.0, 100.0]
    assert table["noise"].tolist() == [True, False, True, False]


@pytest.mark.slow
def test_sweep_separates_bounded_and_degraded_rates(tmp_path) -> None:
    cfg = _config(
        tmp_path,
        sweep={"frequencies": [840, 10], "h_ch": 3.0, "duration": 10.0, "tail": 2.0},
        cli={"threads": 2},
    )

    summary = run_command("sweep-freq", cfg)

    assert not summary.get("error"), summary
    table = pd.read_csv(tmp_path / "out" / "sweep.csv")
    table["fault"] = table["fault"].fillna("")
    fast = table[table["frequency"] == 840.0]
    assert (fast["fault"] == "").all()
    assert not fast["unbounded"].any()
    slow = table[(table["frequency"] == 10.0) & table["noise"]].iloc[0]
    fast_noisy = fast[fast["noise"]].iloc[0]
    assert slow["fault"] != "" or float(slow["tail_std_z"]) > float(fast_noisy["tail_std_z"])
    assert 840.0 not in summary["unbounded"]
