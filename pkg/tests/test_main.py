import numpy as np
import pytest
from numpy.testing import assert_array_equal

from dpp_model import KronKernel
from errors import ConvergenceError, DataFormatError, KernelStoreError, NotPositiveDefiniteError
from kernel_store import KernelStore
from main import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, exit_code_for, main


def synth(directory, n1=3, n2=3, samples=25, seed=7, extra=()):
    directory.mkdir(exist_ok=True)
    kernel, subsets = directory / "truth.json", directory / "data.txt"
    code = main(["synth", "--n1", str(n1), "--n2", str(n2), "--n-samples", str(samples), "--seed", str(seed),
                 "--out-kernel", str(kernel), "--out-subsets", str(subsets), *extra])
    assert code == EXIT_OK
    return kernel, subsets


def train(tmp_path, data, tag="", algo="krk", iters=10, extra=()):
    kernel, trace = tmp_path / f"learned{tag}.json", tmp_path / f"trace{tag}.csv"
    code = main(["train", "--data", str(data), "--n1", "3", "--n2", "3", "--algo", algo, "--iters", str(iters),
                 "--out-kernel", str(kernel), "--trace", str(trace), *extra])
    assert code == EXIT_OK
    return kernel, trace


def test_synth_is_byte_identical_per_seed(tmp_path):
    for name in ("a", "b"):
        synth(tmp_path / name, n1=2, n2=2, samples=1)
    for name in ("truth.json", "truth_factor1.csv", "truth_factor2.csv", "data.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_respects_size_window(tmp_path):
    _, subsets = synth(tmp_path / "synth", extra=("--min-size", "2", "--max-size", "3"))
    T = KernelStore().load_subsets(str(subsets), 9)
    assert T.n == 25
    assert all(2 <= len(s) <= 3 for s in T.subsets)


def test_synth_uniform_sizes(tmp_path):
    _, subsets = synth(tmp_path / "synth", samples=60, extra=("--min-size", "2", "--max-size", "4",
                                                              "--size-mode", "uniform"))
    sizes = {len(s) for s in KernelStore().load_subsets(str(subsets), 9).subsets}
    assert sizes == {2, 3, 4}


def test_train_trace_and_eval_agree(tmp_path, capsys):
    _, data = synth(tmp_path / "synth")
    kernel, trace = train(tmp_path, data, extra=("--tol", "0"))
    store = KernelStore()
    rows = store.load_trace(str(trace))
    assert [r["iter"] for r in rows] == list(range(11))
    logliks = [r["loglik"] for r in rows]
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(logliks, logliks[1:]))
    seconds = [r["seconds"] for r in rows]
    assert all(b > a for a, b in zip(seconds, seconds[1:]))

    capsys.readouterr()
    assert main(["eval", "--kernel", str(kernel), "--data", str(data)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == f"{logliks[-1]:.12f}"


def test_zero_iterations_keep_the_initial_kernel(tmp_path):
    truth, data = synth(tmp_path / "synth")
    kernel, trace = train(tmp_path, data, iters=0, extra=("--init", "file", "--kernel-in", str(truth)))
    store = KernelStore()
    for a, b in zip(store.load_kernel(str(truth)).factors, store.load_kernel(str(kernel)).factors):
        assert_array_equal(a, b)
    assert len(store.load_trace(str(trace))) == 1


def test_picard_output_can_seed_krk(tmp_path):
    _, data = synth(tmp_path / "synth")
    dense, _ = train(tmp_path, data, tag="p", algo="picard", iters=3)
    store = KernelStore()
    assert store.load_kernel(str(dense)).dims == (9,)
    learned, _ = train(tmp_path, data, tag="k", iters=2, extra=("--init", "file", "--kernel-in", str(dense)))
    assert store.load_kernel(str(learned)).dims == (3, 3)


def test_stochastic_and_joint_training(tmp_path):
    _, data = synth(tmp_path / "synth")
    _, trace = train(tmp_path, data, tag="s", iters=5, extra=("--mode", "stochastic", "--minibatch", "4"))
    assert len(KernelStore().load_trace(str(trace))) == 6
    _, trace = train(tmp_path, data, tag="j", algo="joint", iters=3)
    assert len(KernelStore().load_trace(str(trace))) >= 2


def test_pipeline_is_deterministic(tmp_path, capsys):
    outputs = []
    for tag in ("a", "b"):
        _, data = synth(tmp_path / tag)
        learned, _ = train(tmp_path / tag, data, iters=5)
        capsys.readouterr()
        assert main(["eval", "--kernel", str(learned), "--data", str(data)]) == EXIT_OK
        outputs.append((data.read_text(), (tmp_path / tag / "learned_factor1.csv").read_text(),
                        (tmp_path / tag / "learned_factor2.csv").read_text(), capsys.readouterr().out))
    assert outputs[0] == outputs[1]


def test_eval_identity_kernel(tmp_path, capsys):
    kernel, data = tmp_path / "identity.json", tmp_path / "data.txt"
    KernelStore().save_kernel(KronKernel([np.eye(2), np.eye(2)]), str(kernel))
    data.write_text("0 1\n2\n")
    assert main(["eval", "--kernel", str(kernel), "--data", str(data)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "-2.772588722240"


def test_sample_command(tmp_path):
    kernel = tmp_path / "identity.json"
    KernelStore().save_kernel(KronKernel([np.eye(2), np.eye(2)]), str(kernel))
    outputs = []
    for tag in ("a", "b"):
        out = tmp_path / f"samples{tag}.txt"
        assert main(["sample", "--kernel", str(kernel), "--count", "200", "--seed", "3", "--out", str(out)]) == EXIT_OK
        outputs.append(out.read_text())
    assert outputs[0] == outputs[1]

    lines = outputs[0].splitlines()
    assert lines[-1].startswith("# empty_count=")
    empty = int(lines[-1].split("=")[1])
    assert len(lines) - 1 + empty == 200


def test_bench_writes_every_algorithm(tmp_path):
    _, data = synth(tmp_path / "synth")
    out = tmp_path / "bench.csv"
    code = main(["bench", "--data", str(data), "--n1", "3", "--n2", "3", "--algos", "krk,picard,krk-stochastic",
                 "--iters", "3", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "algo,iter,seconds,loglik"
    algos = [line.split(",")[0] for line in lines[1:]]
    assert algos == ["krk"] * 3 + ["picard"] * 3 + ["krk-stochastic"] * 3
    assert [int(line.split(",")[1]) for line in lines[1:4]] == [1, 2, 3]


def test_partition_command(tmp_path, capsys):
    data, out = tmp_path / "data.txt", tmp_path / "plan.json"
    data.write_text("0 1\n1 2\n5 6\n")
    assert main(["partition", "--data", str(data), "--z", "4", "--out", str(out)]) == EXIT_OK
    printed = capsys.readouterr().out
    assert "groups: 2" in printed
    assert "union sizes: 3 2" in printed
    plan = KernelStore().load_plan(str(out))
    assert plan.groups == [[0, 1], [2]]

    assert main(["partition", "--data", str(data), "--z", "2", "--out", str(out)]) == EXIT_USAGE


def test_usage_errors_exit_with_one(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["train", "--data", "x"])
    assert info.value.code == EXIT_USAGE

    data = tmp_path / "data.txt"
    data.write_text("0 1\n0 99\n")
    code = main(["train", "--data", str(data), "--n1", "3", "--n2", "3",
                 "--out-kernel", str(tmp_path / "k.json"), "--trace", str(tmp_path / "t.csv")])
    assert code == EXIT_USAGE


def test_missing_kernel_is_an_io_error(tmp_path):
    data = tmp_path / "data.txt"
    data.write_text("0\n")
    assert main(["eval", "--kernel", str(tmp_path / "absent.json"), "--data", str(data)]) == EXIT_IO


def test_exit_code_mapping():
    assert exit_code_for(NotPositiveDefiniteError(-1.0)) == EXIT_NUMERICAL
    assert exit_code_for(ConvergenceError("stuck")) == EXIT_NUMERICAL
    assert exit_code_for(KernelStoreError("gone")) == EXIT_IO
    assert exit_code_for(FileNotFoundError("gone")) == EXIT_IO
    assert exit_code_for(DataFormatError("f", 3, "bad")) == EXIT_USAGE


@pytest.mark.slow
def test_picard_and_krk_reach_similar_likelihoods(tmp_path):
    _, data = synth(tmp_path / "synth", samples=300, extra=("--max-size", "9"))
    store = KernelStore()
    finals = []
    for algo in ("krk", "picard"):
        _, trace = train(tmp_path, data, tag=algo, algo=algo, iters=500, extra=("--tol", "1e-4"))
        finals.append(store.load_trace(str(trace))[-1]["loglik"])
    krk, picard = finals
    assert abs(krk - picard) <= 0.05 * abs(picard)
