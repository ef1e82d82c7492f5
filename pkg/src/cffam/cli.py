"""Command line entry point ``cfq``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import family, harness
from .config import DEFAULT


def _int(text: str) -> int:
    """Integers also written as 1e7 or 10**7."""
    text = text.strip()
    if "**" in text:
        base, exp = text.split("**")
        return int(base) ** int(exp)
    value = float(text)
    if value != int(value):
        raise argparse.ArgumentTypeError(f"{text} is not an integer")
    return int(value)


def _ints(text: str) -> list[int]:
    return [_int(t) for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", required=True, help="family JSON file, JSON text, or a reference name")
    common.add_argument("--out", help="output path; .csv for scan tables, otherwise JSON")
    common.add_argument("--cache", help="JSON-lines record cache")
    common.add_argument("--prime-bound", type=_int, default=None, help="Euler product truncation P")
    common.add_argument("--timing", action="store_true", help="include wall time in JSON output")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cfq", description="Class numbers in continued fraction families")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="admissibility and polynomial of a symmetric word")
    s = sub.add_parser("scan", parents=[common], help="class number table up to x")
    s.add_argument("--x", type=_int, required=True)
    s.add_argument("--workers", type=int, default=1)
    sub.add_parser("verify", parents=[common], help="brute-force identity suites")
    s = sub.add_parser("density", parents=[common], help="counts and character averages")
    s.add_argument("--x", type=_ints, default=list(DEFAULT.density_x))
    s = sub.add_parser("moments", parents=[common], help="moments of L(1, chi_d) against the model")
    s.add_argument("--x", type=_int, default=DEFAULT.moment_x)
    s.add_argument("--z", type=_floats, default=list(DEFAULT.moment_z))
    s = sub.add_parser("dist", parents=[common], help="tail frequencies against the model")
    s.add_argument("--x", type=_int, default=DEFAULT.moment_x)
    s.add_argument("--tau", type=_floats, default=list(DEFAULT.tau_grid))
    s.add_argument("--samples", type=_int, default=DEFAULT.mc_samples)
    s.add_argument("--seed", type=int, default=DEFAULT.seed)
    s = sub.add_parser("census", parents=[common], help="sum of F(h) for h <= H against C2 H log H")
    s.add_argument("--H", type=_int, default=None, help="default: largest H with H^2 (log H)^8 <= x")
    s.add_argument("--x", type=_int, default=DEFAULT.census_x_cap, help="cap on scanned d")
    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    kw = {} if args.prime_bound is None else {"P": args.prime_bound}
    try:
        if args.command == "synth":
            spec = args.family
            if Path(spec).exists():
                spec = Path(spec).read_text()
            _emit(json.dumps(harness.cmd_synth(spec), indent=2, sort_keys=True) + "\n", args.out)
            return 0
        fam = family.load_family(args.family)
        if args.command == "scan":
            text, rep = harness.cmd_scan(fam, args.x, args.cache, args.workers)
            if args.out and not args.out.endswith(".csv"):
                _emit(rep.dumps(args.timing) + "\n", args.out)
            else:
                _emit(text, args.out)
            for line in _failures(rep):
                print(line, file=sys.stderr)
            return 0 if rep.ok else 1
        if args.command == "verify":
            rep = harness.cmd_verify(fam)
        elif args.command == "density":
            rep = harness.cmd_density(fam, args.x, **kw)
        elif args.command == "moments":
            rep = harness.cmd_moments(fam, args.x, args.z, args.cache, **kw)
        elif args.command == "dist":
            rep = harness.cmd_dist(fam, args.x, args.tau, args.samples, args.seed, args.cache, **kw)
        else:
            H = args.H or harness.largest_census_H(args.x)
            rep = harness.cmd_census(fam, H, args.x, args.cache, **kw)
    except family.InadmissibleWord as exc:
        print(f"inadmissible word: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(rep.dumps(args.timing) + "\n", args.out)
    for line in _failures(rep):
        print(line, file=sys.stderr)
    return 0 if rep.ok else 1


def _failures(rep: harness.ExperimentReport) -> list[str]:
    return [f"FAIL {rep.experiment}: {name}" for name, ok in rep.passed.items() if not ok]


if __name__ == "__main__":
    sys.exit(main())
