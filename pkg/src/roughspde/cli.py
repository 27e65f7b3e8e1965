"""Command-line front end: check suites, convergence studies, CSV reports.

Exit code is 0 only when every tolerance asserted by the requested run passes,
so the tool can sit directly in CI pipelines.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import kernels
from .harness import (
    CONVERGE_KINDS,
    ExperimentConfig,
    check_report,
    default_config,
    run_fem_convergence,
    run_h1_scaling,
    run_lemma_checks,
    run_noise_checks,
    run_norm_scaling,
    run_spectral_convergence,
    run_wz_convergence,
)


def _parse_override(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _build_config(kind: str, args) -> ExperimentConfig:
    """defaults(kind) <- --config file <- --seed/--samples/--threads <- --override."""
    base = default_config(kind).to_dict()
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        if file_cfg.get("kind", kind) != kind:
            raise SystemExit(f"config file is for kind {file_cfg['kind']!r}, not {kind!r}")
        base.update(file_cfg)
    base["kind"] = kind
    for flag in ("seed", "samples", "threads"):
        val = getattr(args, flag, None)
        if val is not None:
            base[flag] = val
    for key, value in getattr(args, "override", None) or []:
        if key not in base:
            raise SystemExit(f"unknown config key {key!r}")
        base[key] = value
    return ExperimentConfig.from_dict(base)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (fields as in ExperimentConfig)")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output CSV path (reports also get a .meta.json sidecar)")
    p.add_argument(
        "--override",
        type=_parse_override,
        action="append",
        metavar="KEY=VALUE",
        help="set any config field; value parsed as JSON when possible",
    )


def _print_checks(name: str, results: dict) -> int:
    print(json.dumps(results, indent=2, sort_keys=True, default=float))
    status = "PASS" if results.get("passed") else "FAIL"
    print(f"{name}: {status}", file=sys.stderr)
    return 0 if results.get("passed") else 1


def _cmd_noise_check(args) -> int:
    cfg = _build_config("noise-check", args)
    results = run_noise_checks(cfg)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
    return _print_checks("noise-check", results)


def _cmd_lemma_check(args) -> int:
    cfg = _build_config("lemma-check", args)
    results = run_lemma_checks(cfg)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
    return _print_checks("lemma-check", results)


def _cmd_norm_scaling(args) -> int:
    cfg = _build_config("norm-scaling", args)
    results = run_norm_scaling(cfg)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
    return _print_checks("norm-scaling", results)


def _cmd_converge(args) -> int:
    cfg = _build_config(args.study, args)
    if args.study == "she-wz" or args.study == "swe-wz":
        reports = [run_wz_convergence(cfg)]
    elif args.study == "she-fem":
        reports = [run_fem_convergence(cfg)]
    else:
        reports = list(run_spectral_convergence(cfg)) + [run_h1_scaling(cfg)]
    suffixes = ["", "_h", "_h1"]
    ok = True
    for idx, report in enumerate(reports):
        print(report.summary())
        passed = check_report(report)
        report.extras["passed"] = passed
        ok = ok and passed
        if args.out:
            path = args.out
            if idx > 0:  # spectral studies: N-axis, h-axis, then the H^1 scaling
                stem, dot, ext = path.rpartition(".")
                path = f"{stem}{suffixes[idx]}.{ext}" if dot else f"{path}{suffixes[idx]}"
            report.write_csv(path)
            print(f"wrote {path}", file=sys.stderr)
        print(
            f"{report.kind} [{report.axis}]: rate {report.fit.rate:+.4f}"
            f" target {report.extras.get('target_rate'):+.4f}"
            f" +- {report.extras.get('rate_tol')}: {'PASS' if passed else 'FAIL'}",
            file=sys.stderr,
        )
    return 0 if ok else 1


def _cmd_report(args) -> int:
    import csv as _csv

    with open(args.csv, newline="") as fh:
        rows = list(_csv.DictReader(fh))
    if not rows:
        print("empty CSV", file=sys.stderr)
        return 1
    cols = list(rows[0].keys())
    widths = {c: max(len(c), *(len(r[c]) for r in rows)) for c in cols}
    print("  ".join(c.ljust(widths[c]) for c in cols))
    for r in rows:
        print("  ".join(r[c].ljust(widths[c]) for c in cols))
    stem, dot, _ = args.csv.rpartition(".")
    meta_path = (stem if dot else args.csv) + ".meta.json"
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
        fit = meta.get("fit", {})
        print(
            f"fitted rate {fit.get('rate'):+.4f} +- {fit.get('half_width'):.4f}"
            f"  (kind {meta.get('kind')}, axis {meta.get('axis')}, backend {meta.get('backend')})"
        )
    except FileNotFoundError:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughspde",
        description="Stochastic heat/wave solvers with white-in-time, fractional-in-space noise.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s (kernel backend: {kernels.BACKEND})"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("noise-check", help="sampler statistics and isometry oracle equivalence")
    _add_common(p)
    p.set_defaults(func=_cmd_noise_check)

    p = sub.add_parser("lemma-check", help="eigenfunction-sum and slab-sum scaling oracles")
    _add_common(p)
    p.set_defaults(func=_cmd_lemma_check)

    p = sub.add_parser("norm-scaling", help="E||xi~||^2 growth exponents vs the closed form")
    _add_common(p)
    p.set_defaults(func=_cmd_norm_scaling)

    p = sub.add_parser("converge", help="Monte Carlo convergence studies")
    p.add_argument("study", choices=list(CONVERGE_KINDS))
    _add_common(p)
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("report", help="pretty-print a harness CSV (+ sidecar fit if present)")
    p.add_argument("csv")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
