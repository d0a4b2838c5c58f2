import os
import sys
import argparse
import logging
from typing import List, Optional

from config_manager import ConfigManager
from errors import NUMERICAL_ERRORS, KernelStoreError
from krondpp_app import ALGORITHMS, BENCH_ALGORITHMS, KronDppApp

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class KronDppArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2, which is taken by numerical failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = KronDppArgumentParser(prog="krondpp", description="Kronecker-structured DPP learning and sampling")
    parser.add_argument("--config", help="JSON settings file (written with defaults if missing)")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a ground-truth kernel and sampled training data")
    synth.add_argument("--n1", type=int, required=True)
    synth.add_argument("--n2", type=int, required=True)
    synth.add_argument("--n-samples", type=int, required=True)
    synth.add_argument("--min-size", type=int, default=1)
    synth.add_argument("--max-size", type=int, default=sys.maxsize)
    synth.add_argument("--size-mode", choices=("reject", "uniform"), default="reject",
                       help="redraw samples outside the size window, or draw each at a uniform size from it")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out-kernel", required=True)
    synth.add_argument("--out-subsets", required=True)

    train = commands.add_parser("train", help="learn a kernel by maximum likelihood")
    train.add_argument("--data", required=True)
    train.add_argument("--n1", type=int, required=True)
    train.add_argument("--n2", type=int, required=True)
    train.add_argument("--algo", choices=ALGORITHMS, default="krk")
    train.add_argument("--mode", choices=("batch", "stochastic"), default="batch")
    train.add_argument("--minibatch", type=int, default=1)
    train.add_argument("--iters", type=int, default=100)
    train.add_argument("--step", type=float, help="step size a (settings default when omitted)")
    train.add_argument("--tol", type=float, help="relative log-likelihood change for convergence")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--init", choices=("random", "file"), default="random")
    train.add_argument("--kernel-in")
    train.add_argument("--out-kernel", required=True)
    train.add_argument("--trace", required=True)

    sample = commands.add_parser("sample", help="draw exact samples from a kernel")
    sample.add_argument("--kernel", required=True)
    sample.add_argument("--count", type=int, required=True)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--out", required=True)

    evaluate = commands.add_parser("eval", help="print the mean log-likelihood of data under a kernel")
    evaluate.add_argument("--kernel", required=True)
    evaluate.add_argument("--data", required=True)

    bench = commands.add_parser("bench", help="time learning algorithms per iteration")
    bench.add_argument("--data", required=True)
    bench.add_argument("--n1", type=int, required=True)
    bench.add_argument("--n2", type=int, required=True)
    bench.add_argument("--algos", default="krk,picard",
                       help=f"comma-separated subset of {','.join(BENCH_ALGORITHMS)}")
    bench.add_argument("--iters", type=int, default=10)
    bench.add_argument("--minibatch", type=int, default=1)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", required=True)

    partition = commands.add_parser("partition", help="group training subsets by bounded item union")
    partition.add_argument("--data", required=True)
    partition.add_argument("--z", type=int, help="union size bound (default 2 * largest subset size)")
    partition.add_argument("--ground-size", type=int)
    partition.add_argument("--out", required=True)

    return parser


def dispatch(app: KronDppApp, args: argparse.Namespace):
    if args.command == "synth":
        app.cmd_synth(args.n1, args.n2, args.n_samples, args.min_size, args.max_size, args.seed,
                      args.out_kernel, args.out_subsets, size_mode=args.size_mode)
    elif args.command == "train":
        app.cmd_train(args.data, args.n1, args.n2, args.out_kernel, args.trace, algo=args.algo, mode=args.mode,
                      minibatch=args.minibatch, iters=args.iters, step=args.step, tol=args.tol,
                      seed=args.seed, init=args.init, kernel_in=args.kernel_in)
    elif args.command == "sample":
        app.cmd_sample(args.kernel, args.count, args.seed, args.out)
    elif args.command == "eval":
        app.cmd_eval(args.kernel, args.data)
    elif args.command == "bench":
        algos = [a.strip() for a in args.algos.split(",") if a.strip()]
        app.cmd_bench(args.data, args.n1, args.n2, algos, args.iters, args.seed, args.out,
                      minibatch=args.minibatch)
    elif args.command == "partition":
        app.cmd_partition(args.data, args.out, z=args.z, ground_size=args.ground_size)


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, NUMERICAL_ERRORS):
        return EXIT_NUMERICAL
    if isinstance(error, (KernelStoreError, OSError)):
        return EXIT_IO
    return EXIT_USAGE


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    debug_mode = os.environ.get('DEBUG', 'False').lower() == 'true'
    args = build_parser().parse_args(argv)

    try:
        settings = ConfigManager(args.config).load_config()
        logging.getLogger().setLevel(logging.DEBUG if debug_mode else settings.log_level)
        dispatch(KronDppApp(settings, debug_mode=debug_mode), args)
    except Exception as e:
        code = exit_code_for(e)
        if code == EXIT_USAGE and not isinstance(e, ValueError):
            raise
        print(f"krondpp: error: {str(e)}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
