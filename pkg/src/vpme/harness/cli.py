import argparse
import logging
import sys
from ..errors import ConfigError, VPMEError
from ..stability.stability import EXACT_W2_CAP
from . import harness

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _int_list(text: str) -> tuple:
    return tuple(int(p) for p in text.split(",") if p.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vpme", description="Particle simulation of the Vlasov-Poisson system with "
                                                              "massless electrons, with its diagnostics.")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write its snapshots")
    run.add_argument("config")
    run.add_argument("--out", required=True)

    solve = sub.add_parser("solve-field", help="solve the split field of a density and an electron profile")
    solve.add_argument("config", nargs="?", default=None, help="scenario whose initial data is solved")
    solve.add_argument("--rho", default=None, help="ion density field file, used with --g")
    solve.add_argument("--g", default=None, help="electron profile field file, used with --rho")
    solve.add_argument("--mode", choices=("variable", "fixed"), default=None)
    solve.add_argument("--tol", type=float, default=None, help="screening tolerance")
    solve.add_argument("--out", required=True)
    solve.add_argument("--method", choices=("fft", "direct"), default="fft")

    diagnose = sub.add_parser("diagnose", help="energy, moment and interpolation diagnostics of a run")
    diagnose.add_argument("--run", required=True)
    diagnose.add_argument("--orders", type=_int_list, default=None)

    stability = sub.add_parser("stability", help="compare two runs along the identity coupling")
    stability.add_argument("--run-a", required=True)
    stability.add_argument("--run-b", required=True)
    stability.add_argument("--exact-w2-cap", type=int, default=EXACT_W2_CAP)
    stability.add_argument("--no-terms", action="store_true", help="skip the field-difference integrals")

    bench = sub.add_parser("bench", help="time Poisson solves and particle pushes")
    bench.add_argument("--sizes", type=_int_list, default=(32, 48, 64))
    bench.add_argument("--particles", type=_int_list, default=(10 ** 4, 10 ** 5, 10 ** 6))
    bench.add_argument("--repeats", type=int, default=3)
    bench.add_argument("--out", default="bench.csv")

    verify = sub.add_parser("verify", help="run the acceptance battery")
    verify.add_argument("--out", required=True)
    verify.add_argument("--full", action="store_true", help="use the reference sizes instead of the quick ones")
    return parser


def _check_arguments(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if args.command != "solve-field":
        return
    if (args.rho is None) != (args.g is None):
        parser.error("solve-field: --rho and --g go together")
    if args.rho is None and args.config is None:
        parser.error("solve-field: give a config or --rho and --g")
    if args.tol is not None and not args.tol > 0:
        parser.error("solve-field: --tol must be positive")


def _dispatch(args: argparse.Namespace) -> bool:
    if args.command == "run":
        manifest = harness.cmd_run(args.config, args.out)
        print(f"{len(manifest.snapshots)} snapshots written to {args.out} (config {manifest.config_hash[:12]})")
        return True
    if args.command == "solve-field":
        report = harness.cmd_solve_field(args.config, args.out, args.method, rho_path=args.rho, g_path=args.g,
                                         mode=args.mode, tol=args.tol)
        print(f"residual {report['screening_residual']:.2e} after {report['iterations']} sweeps")
        return report["passed"]
    if args.command == "diagnose":
        result = harness.cmd_diagnose(args.run, args.orders)
        print(f"{len(result.rows)} snapshots diagnosed, envelope constant {result.envelope.constant:.3g}")
        return result.passed
    if args.command == "stability":
        report = harness.cmd_stability(args.run_a, args.run_b, args.exact_w2_cap, not args.no_terms)
        print(f"fitted C {report.constant:.4g}, switch time {report.switch_time:.4g}")
        return report.holds
    if args.command == "bench":
        for row in harness.cmd_bench(args.sizes, args.particles, args.repeats, args.out):
            print("{0:8s} {1:>9} {2:10.4g}s cv={3:.2f} {4}".format(*row))
        return True
    verdicts = harness.cmd_verify(args.out, quick=not args.full)
    for v in verdicts:
        print(f"{'PASS' if v.passed else 'FAIL'}  {v.name:24s} {v.detail}")
    return all(v.passed for v in verdicts)


def main(argv: list = None) -> int:
    """
    Entry point of the vpme console script.
    :return: 0 when every verdict passes, 1 when one fails, 2 on usage or config errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_arguments(parser, args)
    except SystemExit as stop:
        return EXIT_USAGE if stop.code else EXIT_PASS
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        return EXIT_PASS if _dispatch(args) else EXIT_FAIL
    except (ConfigError, FileNotFoundError) as error:
        print(f"vpme: {error}", file=sys.stderr)
        return EXIT_USAGE
    except VPMEError as error:
        logger.error("%s", error)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
