"""Command-line entry point ``nhh``.

Exit codes: 0 all tolerances met, 1 tolerance failure, 2 config error,
3 physics error (broken phase, singular map, ...), 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import runner
from .errors import ConfigError


def _execute(config_path, scenario=None, output=None, dt=None, root=None):
    """Run one config and write its outputs.

    Returns ``(exit code, status line, report or None)``.
    """
    start = time.perf_counter()
    try:
        cfg = runner.load_config(config_path, scenario=scenario, output=output, dt=dt)
        report = runner.run(cfg)
    except ConfigError as e:
        return runner.EXIT_CONFIG, f"{config_path}: config error: {e}", None
    stem = runner.output_stem(cfg, root)
    try:
        csv_path, json_path = runner.write_outputs(report, stem)
    except OSError as e:
        return runner.EXIT_IO, f"{config_path}: cannot write outputs under {stem.parent}: {e.strerror}", report
    elapsed = time.perf_counter() - start
    s = report.summary
    if report.status == "physics_error":
        msg = f"{config_path}: physics error: {s['error']['type']}: {s['error']['message']}"
    else:
        failed = [c["name"] for c in s["invariants"] if not c["passed"]]
        msg = f"{config_path}: {report.status} ({len(s['invariants'])} invariants"
        msg += f"; failed: {', '.join(failed)})" if failed else ")"
    return report.exit_code, f"{msg} -> {csv_path}, {json_path} [{elapsed:.2f} s]", report


def _report(code, msg, quiet):
    if code != runner.EXIT_OK:
        print(msg, file=sys.stderr)
    elif not quiet:
        print(msg)


def _single(scenario):
    def cmd(args) -> int:
        code, msg, report = _execute(args.config, scenario, args.output, args.dt)
        if report is not None and not args.quiet:
            for c in report.summary.get("invariants", []):
                flag = "PASS" if c["passed"] else "FAIL"
                m = "non-finite" if c["measured"] is None else f"{c['measured']:.3e}"
                print(f"  {flag}  {c['name']:<40s} {m} {c['comparison']} {c['threshold']:.1e}")
            results = report.summary.get("results", {})
            if scenario == "spectrum" and "eigenvalues" in results:
                for re_, im in results["eigenvalues"]:
                    print(f"  {re_:+.15g} {im:+.15g}j")
        _report(code, msg, args.quiet)
        return code

    return cmd


def _sweep(args) -> int:
    configs = sorted(Path(args.directory).glob("*.json"))
    if not configs:
        print(f"no *.json configs in {args.directory}", file=sys.stderr)
        return runner.EXIT_CONFIG
    seen = {}
    for c in configs:
        try:
            stem = runner.output_stem(runner.load_config(c, dt=args.dt), args.output)
        except ConfigError as e:
            print(f"{c}: config error: {e}", file=sys.stderr)
            return runner.EXIT_CONFIG
        if stem in seen:
            print(f"{c}: output path collides with {seen[stem]}", file=sys.stderr)
            return runner.EXIT_CONFIG
        seen[stem] = c
    with ThreadPoolExecutor(max_workers=min(4, len(configs))) as pool:
        results = list(pool.map(lambda c: _execute(c, dt=args.dt, root=args.output), configs))
    for code, msg, _ in results:
        _report(code, msg, args.quiet)
    return max(code for code, _, _ in results)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nhh", description="Non-Hermitian Heisenberg-representation runs and checks")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", help="output stem (run/verify/spectrum) or output root directory (sweep)")
    common.add_argument("--quiet", action="store_true", help="only report failures")
    common.add_argument("--dt", type=float, help="override integrator_dt")
    sub = p.add_subparsers(dest="command", required=True)
    for name, scenario, help_ in (
        ("run", None, "run the scenario named in the config"),
        ("verify", "verify", "run the full invariant suite on the configured model"),
        ("spectrum", "spectrum", "report the spectrum of H(t0)"),
    ):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("config", help="JSON config file")
        sp.set_defaults(func=_single(scenario))
    sp = sub.add_parser("sweep", parents=[common], help="run every *.json config in a directory concurrently")
    sp.add_argument("directory")
    sp.set_defaults(func=_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
