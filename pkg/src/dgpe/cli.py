"""Command-line front end.

Exit codes: 0 success, 2 configuration or input error, 3 convergence
failure, 4 numerical-health failure, 5 suite assertion failure, 6 identity
verification failure, 7 regime error, 8 resolution error, 1 other errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import DGPEError


def _dump(obj) -> None:
    from .dynamics import _json_default

    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _with_output(cfg, out):
    return replace(cfg, output_dir=out) if out else cfg


def cmd_ground_state(args) -> int:
    from .config import load_config
    from .ground_state import verify_identities
    from .pipeline import run_scenario

    cfg = _with_output(load_config(args.config), args.output)
    summary = run_scenario(replace(cfg, pipeline="ground_state_only"))
    report = json.loads((Path(cfg.output_dir) / "ground_state.json").read_text())
    if args.verify:
        from .functionals import invariants
        from .ground_state import GroundState
        from .spectral import read_checkpoint

        prof, _ = read_checkpoint(Path(cfg.output_dir) / "ground_state.dgpe")
        inv = invariants(prof, cfg.params)
        q = GroundState(profile=prof, mu=report["mu"], invariants=inv, cgn=report["C_GN"],
                        residual=report["residual"], params=cfg.params)
        tq = verify_identities(q, tol=args.tol)
        report["verified_chain"] = list(tq.chain())
    _dump({"summary": summary.to_json(), "ground_state": report})
    return 0


def cmd_classify(args) -> int:
    from .config import load_config
    from .pipeline import run_scenario

    cfg = _with_output(load_config(args.config), args.output)
    summary = run_scenario(replace(cfg, pipeline="classify_only"))
    _dump(summary.to_json())
    return 0


def cmd_evolve(args) -> int:
    from .config import load_config
    from .pipeline import run_scenario

    cfg = _with_output(load_config(args.config), args.output)
    if args.evolve_only:
        cfg = replace(cfg, pipeline="evolve_only")
    summary = run_scenario(cfg)
    _dump(summary.to_json())
    if args.check_expected:
        expected = json.loads(Path(args.check_expected).read_text())
        mismatches = _compare_expected(summary.to_json(), expected)
        if mismatches:
            from .errors import SuiteFailure

            raise SuiteFailure("expected-verdict mismatch: " + "; ".join(mismatches))
    return 0


def _compare_expected(summary: dict, expected: dict) -> list:
    got = {
        "regime": summary["regime"],
        "class": (summary["verdict"] or {}).get("class"),
        "trajectory": (summary["trajectory"] or {}).get("verdict"),
        "concordant": summary["concordant"],
    }
    return [f"{k}: expected {v!r}, got {got.get(k)!r}" for k, v in expected.items()
            if k in got and got[k] != v]


def cmd_virial_check(args) -> int:
    from .dynamics import read_timeseries_csv, virial_consistency_series

    data = read_timeseries_csv(args.csv)
    localized = {float(k[3:]): v for k, v in data.items() if k.startswith("VR_")}
    t = data["t"]
    if args.t_min is not None:
        keep = t >= args.t_min
        data = {k: v[keep] for k, v in data.items()}
        localized = {k: v[keep] for k, v in localized.items()}
    rep = virial_consistency_series(data["t"], data["V"], data["G"], localized)
    rep["tolerance"] = args.tol
    rep["passed"] = bool(rep["max_rel_deviation"] <= args.tol)
    _dump(rep)
    if not rep["passed"]:
        from .errors import VerificationError

        raise VerificationError(f"virial deviation {rep['max_rel_deviation']:.3e} exceeds {args.tol}")
    return 0


def cmd_riesz_suite(args) -> int:
    from .pipeline import RieszSuiteConfig, load_riesz_config, run_riesz_suite

    cfg = load_riesz_config(args.config) if args.config else RieszSuiteConfig()
    if args.output:
        cfg = replace(cfg, output_dir=args.output)
    if args.slack is not None:
        cfg = replace(cfg, slack=args.slack)
    _dump(run_riesz_suite(cfg))
    return 0


def cmd_phase_table(args) -> int:
    from .pipeline import emit_phase_table, load_phase_config

    cfg = load_phase_config(args.config)
    if args.output:
        cfg = replace(cfg, output=args.output)
    rows = emit_phase_table(cfg)
    sys.stdout.write(f"{len(rows)} rows written to {cfg.output}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dgpe", description="Dipolar GPE spectral laboratory.")
    ap.add_argument("--version", action="version", version=f"dgpe {__version__}")
    ap.add_argument("--workers", type=int, default=1,
                    help="FFT worker threads (results do not depend on it; default 1)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground-state", help="solve and store the ground state of a scenario")
    p.add_argument("config", help="scenario INI file")
    p.add_argument("-o", "--output", help="output directory (default from config)")
    p.add_argument("--verify", action="store_true", help="check the Pohozaev identities at mu = 1")
    p.add_argument("--tol", type=float, default=1e-3, help="identity tolerance (default 1e-3)")
    p.set_defaults(func=cmd_ground_state)

    p = sub.add_parser("classify", help="classify the scenario datum against the threshold")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evolve", help="run the full scenario pipeline")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("--evolve-only", action="store_true", help="skip the classifier")
    p.add_argument("--check-expected", metavar="JSON",
                   help="compare against an expected-verdict file; exit 5 on mismatch")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("virial-check", help="virial consistency of a time-series CSV")
    p.add_argument("csv")
    p.add_argument("--tol", type=float, default=2e-2, help="relative tolerance (default 2e-2)")
    p.add_argument("--t-min", type=float, default=None, help="ignore samples before this time")
    p.set_defaults(func=cmd_virial_check)

    p = sub.add_parser("riesz-suite", help="run the Riesz-transform verification suite")
    p.add_argument("config", nargs="?", help="suite INI file (default suite when omitted)")
    p.add_argument("-o", "--output")
    p.add_argument("--slack", type=float, default=None, help="override the bounded-ratio slack")
    p.set_defaults(func=cmd_riesz_suite)

    p = sub.add_parser("phase-table", help="tabulate regimes and verdicts over a parameter sweep")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="CSV path (default from config)")
    p.set_defaults(func=cmd_phase_table)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    from .spectral import set_fft_workers

    try:
        set_fft_workers(args.workers)
        return int(args.func(args) or 0)
    except DGPEError as err:
        sys.stderr.write(f"dgpe: {type(err).__name__}: {err}\n")
        return err.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
