import pytest

from models import FitConfig, FitHistory, KernelManifest, SampleReport


def test_fit_config_defaults_and_validation():
    cfg = FitConfig()
    assert cfg.step_size == 1.0
    assert cfg.mode == "batch"
    with pytest.raises(ValueError):
        FitConfig(step_size=0)
    with pytest.raises(ValueError):
        FitConfig(mode="online")
    with pytest.raises(ValueError):
        FitConfig(minibatch_size=0)


def test_history_counts_completed_iterations():
    history = FitHistory(initial_loglik=-2.0, initial_min_eig=0.5)
    assert len(history) == 0
    assert history.final_loglik() == -2.0
    history.append(1, 0.1, -1.5, 0.4)
    history.append(2, 0.3, -1.25, 0.4)
    assert len(history) == 2
    assert history.logliks() == [-1.5, -1.25]
    assert history.trajectory() == [-2.0, -1.5, -1.25]
    assert history.final_loglik() == -1.25
    assert history.trace_rows() == [(0, 0.0, -2.0), (1, 0.1, -1.5), (2, 0.3, -1.25)]


def test_history_without_start_has_no_row_zero():
    history = FitHistory()
    history.append(1, 0.1, -1.5, 0.4)
    assert history.trace_rows() == [(1, 0.1, -1.5)]
    assert FitHistory().final_loglik() is None


def test_manifest_ground_size():
    manifest = KernelManifest(factors=[{"rows": 3, "path": "a.csv"}, {"rows": 4, "path": "b.csv"}])
    assert manifest.ground_size() == 12
    with pytest.raises(ValueError):
        KernelManifest(factors=[])
    with pytest.raises(ValueError):
        KernelManifest(version=2, factors=[{"rows": 1, "path": "a.csv"}])


def test_sample_report_sizes_must_agree():
    assert SampleReport(subset=[1, 4], selected=[0, 3]).subset == [1, 4]
    with pytest.raises(ValueError):
        SampleReport(subset=[1], selected=[])
