"""Command-line entry point: ``lindbundle run|converge|scale|validate``.

Exit status is 0 on success, 2 when the configuration is invalid, 3 on a
numerical failure and 1 for any other package error.  Failures are
reported on stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import MODES, SCENARIOS, ScenarioConfig
from .errors import (
    ConfigError,
    HermiticityDriftError,
    IntegrationError,
    LindbundleError,
    ParameterError,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return v


def _csv_list(conv):
    def parse(text):
        try:
            return [conv(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def _assignment(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        return key.strip(), value


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", metavar="PATH", help="JSON scenario config (or a run manifest)")
    g.add_argument("--scenario", choices=SCENARIOS, help="preset to start from")
    g.add_argument("--set", dest="overrides", metavar="KEY=VALUE", action="append",
                   type=_assignment, default=[], help="override any config field (JSON value)")
    g.add_argument("--seed", type=_u64, metavar="U64")
    g.add_argument("--realizations", type=int, metavar="R")
    g.add_argument("--mode", choices=MODES)
    g.add_argument("--bundles", type=int, metavar="M")
    g.add_argument("--out", metavar="DIR", help="output directory")
    g.add_argument("--threads", type=int, default=1, metavar="K",
                   help="worker processes across realizations")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lindbundle",
        description="Lindblad propagation with full or stochastically bundled Davies dissipators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="propagate one scenario and write trajectories")
    _common(p)

    p = sub.add_parser("converge", help="max-RMSE versus bundle count M")
    _common(p)
    p.add_argument("--m-values", type=_csv_list(int), default=[4, 8, 16, 32], metavar="M1,M2,...")
    p.add_argument("--modes", type=_csv_list(str), default=["bundled", "jk2"], metavar="MODE,...")
    p.add_argument("--observables", type=_csv_list(str), default=["energy", "position"])

    p = sub.add_parser("scale", help="wall time per step versus N, full and bundled")
    _common(p)
    p.add_argument("--spins", type=_csv_list(float), default=[0.0, 0.5, 1.0, 1.5], metavar="S,...")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--kernel", choices=("dense", "sparse"), default="dense",
                   help="full-dissipator kernel to time")

    p = sub.add_parser("validate", help="run the analytic-identity self-tests")
    p.add_argument("--seed", type=_u64, default=12345, metavar="U64")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args) -> ScenarioConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError([("config", f"cannot read {args.config}: {exc.strerror}")]) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError([("config", f"{args.config} is not valid JSON: {exc}")]) from exc
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
    else:
        data = {}
    if args.scenario:
        data = {**data, "scenario": args.scenario}
    data = {**data, **dict(args.overrides)}
    flags = {"seed": args.seed, "realizations": args.realizations, "mode": args.mode,
             "bundles": args.bundles, "output_dir": args.out}
    data.update({k: v for k, v in flags.items() if v is not None})
    return ScenarioConfig.from_dict(data)


def _cmd_run(args) -> int:
    from .runner import run_scenario

    cfg = config_from_args(args)
    res = run_scenario(cfg, threads=args.threads)
    summary = {"out": str(res.out_dir), "files": len(res.files), "derived": res.manifest["derived"]}
    if "max_rmse" in res.manifest:
        summary["max_rmse"] = res.manifest["max_rmse"]
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_converge(args) -> int:
    from .runner import run_convergence_study

    cfg = config_from_args(args)
    res = run_convergence_study(cfg, args.m_values, args.modes, threads=args.threads,
                                out_dir=cfg.output_dir, observables=args.observables)
    for r in res.rows:
        print(f"M={r['M']:<4d} {r['mode']:<8s} {r['observable']:<9s} max_rmse={r['max_rmse']:.4e} "
              f"t={r['t_max']:g}")
    for f in res.fits:
        print(f"fit {f['mode']:<8s} {f['observable']:<9s} exponent={f['exponent']:+.3f} "
              f"r2={f['r_squared']:.3f}")
    return EXIT_OK


def _cmd_scale(args) -> int:
    from .runner import run_scaling_benchmark

    cfg = config_from_args(args)
    res = run_scaling_benchmark(args.spins, m=cfg.bundles, base_cfg=cfg, repeats=args.repeats,
                                steps=args.steps, kernel=args.kernel, out_dir=cfg.output_dir)
    for r in res.rows:
        print(f"N={r['N']:<5d} N_B={r['N_B']:<6d} {r['mode']:<12s} {r['seconds_per_step']:.4e} s/step")
    for label, f in res.fits.items():
        print(f"fit {label:<12s} exponent={f.exponent:.3f} r2={f.r_squared:.3f}")
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .selftest import format_table, run_all

    results = run_all(seed=args.seed)
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        _diagnose("validation", "self-test failures", failed=failed)
        return EXIT_NUMERIC
    return EXIT_OK


def _diagnose(kind: str, message: str, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)


COMMANDS = {"run": _cmd_run, "converge": _cmd_converge, "scale": _cmd_scale, "validate": _cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        _diagnose("config", str(exc), fields=[{"field": f, "problem": m} for f, m in exc.problems])
        return EXIT_CONFIG
    except IntegrationError as exc:
        _diagnose("numerical", str(exc), step=exc.step, time=exc.time)
        return EXIT_NUMERIC
    except (HermiticityDriftError, ArithmeticError) as exc:
        _diagnose("numerical", str(exc))
        return EXIT_NUMERIC
    except ParameterError as exc:
        _diagnose("parameter", str(exc))
        return EXIT_CONFIG
    except LindbundleError as exc:
        _diagnose(type(exc).__name__, str(exc))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
