import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from dpp_model import KronKernel
from errors import DataFormatError, KernelStoreError
from kernel_store import KernelStore
from models import FitHistory, PartitionPlan


@pytest.fixture
def store():
    return KernelStore()


def test_kernel_files_round_trip_bit_exactly(store, tmp_path, make_spd, rng):
    K = KronKernel([make_spd(3, rng), make_spd(4, rng) / 3.0])
    path = tmp_path / "kernel.json"
    manifest = store.save_kernel(K, str(path))
    assert [f.rows for f in manifest.factors] == [3, 4]
    assert manifest.ground_size() == 12

    data = json.loads(path.read_text())
    assert data["version"] == 1
    assert data["factors"][0] == {"rows": 3, "path": "kernel_factor1.csv"}
    assert len((tmp_path / "kernel_factor2.csv").read_text().splitlines()) == 4

    loaded = store.load_kernel(str(path))
    for original, restored in zip(K.factors, loaded.factors):
        assert_array_equal(original, restored)


def test_kernel_load_errors(store, tmp_path):
    path = tmp_path / "kernel.json"
    with pytest.raises(KernelStoreError):
        store.load_kernel(str(path))

    store.save_kernel(KronKernel([np.eye(2), np.eye(2)]), str(path))
    factor = tmp_path / "kernel_factor2.csv"
    factor.write_text("1.0,0.0\n")
    with pytest.raises(KernelStoreError):
        store.load_kernel(str(path))
    factor.write_text("1.0,0.0\n0.0,abc\n")
    with pytest.raises(DataFormatError, match=":2:"):
        store.load_kernel(str(path))
    factor.unlink()
    with pytest.raises(KernelStoreError):
        store.load_kernel(str(path))

    path.write_text(json.dumps({"version": 2, "factors": [{"rows": 2, "path": "kernel_factor1.csv"}]}))
    with pytest.raises(KernelStoreError):
        store.load_kernel(str(path))
    path.write_text("{not json")
    with pytest.raises(KernelStoreError):
        store.load_kernel(str(path))


def test_load_subsets_skips_comments_and_blank_lines(store, tmp_path):
    path = tmp_path / "data.txt"
    path.write_text("# training data\n3 1\n\n   \n0 2 5\n# empty_count=2\n")
    T = store.load_subsets(str(path), 6)
    assert [s.tolist() for s in T.subsets] == [[1, 3], [0, 2, 5]]
    assert T.ground_size == 6
    assert store.load_subsets(str(path)).ground_size == 6
    assert store.read_empty_count(str(path)) == 2


@pytest.mark.parametrize("content, line", [
    ("0 1\n1 x\n", ":2:"),
    ("0 1\n\n2 2\n", ":3:"),
    ("0 9\n", ":1:"),
    ("# c\n-1\n", ":2:"),
])
def test_load_subsets_reports_line_numbers(store, tmp_path, content, line):
    path = tmp_path / "data.txt"
    path.write_text(content)
    with pytest.raises(DataFormatError, match=line):
        store.load_subsets(str(path), 4)


def test_missing_subsets_file(store, tmp_path):
    with pytest.raises(KernelStoreError):
        store.load_subsets(str(tmp_path / "absent.txt"))


def test_save_subsets_counts_empty_draws(store, tmp_path):
    path = tmp_path / "samples.txt"
    assert store.save_subsets(str(path), [[0, 2], [], [1], []]) == 2
    assert path.read_text() == "0 2\n1\n# empty_count=2\n"
    assert store.read_empty_count(str(path)) == 2


def test_trace_file_format(store, tmp_path):
    history = FitHistory(initial_loglik=-3.5, initial_min_eig=0.1)
    history.append(1, 0.25, -3.25, 0.1)
    path = tmp_path / "trace.csv"
    store.save_trace(str(path), history)
    assert path.read_text().splitlines() == ["iter,seconds,loglik", "0,0.0,-3.5", "1,0.25,-3.25"]
    assert store.load_trace(str(path))[1] == {"iter": 1, "seconds": 0.25, "loglik": -3.25}


def test_bench_file_format(store, tmp_path):
    path = tmp_path / "bench.csv"
    store.save_bench(str(path), [("krk", 1, 0.5, -2.0), ("picard", 1, 4.0, -1.5)])
    assert path.read_text().splitlines() == ["algo,iter,seconds,loglik", "krk,1,0.5,-2.0", "picard,1,4.0,-1.5"]


def test_plan_file(store, tmp_path):
    plan = PartitionPlan(z=4, groups=[[0, 1], [2]], unions=[[0, 1, 2], [5, 6]])
    path = tmp_path / "plan.json"
    store.save_plan(str(path), plan)
    assert json.loads(path.read_text())["groups"] == [[0, 1], [2]]
    assert store.load_plan(str(path)) == plan
    path.write_text(json.dumps({"z": 2, "groups": [[0]], "unions": [[0, 1]]}))
    with pytest.raises(KernelStoreError):
        store.load_plan(str(path))
