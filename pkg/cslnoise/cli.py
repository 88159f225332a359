from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import yaml
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from cslnoise import __version__
from cslnoise.audit import AuditTrail
from cslnoise.budget import NoiseBudget, budget_table, build_budget
from cslnoise.campaign import run_campaign
from cslnoise.config import ToolkitConfig, load_config
from cslnoise.constants import convert_units
from cslnoise.errors import CSLNoiseError, PreconditionError, require
from cslnoise.fitting import LineFit, LorentzFit, QEstimate, chi2_gate, fit_q_vs_gain
from cslnoise.io import read_json, read_ringdown_table, write_exclusion_csv, write_json, write_table_csv
from cslnoise.manifest import RunManifest
from cslnoise.pipeline import (
    exclusion_for_budget,
    fit_homogeneity,
    fit_spectrum,
    offset_frame,
    pair_fits_with_q,
    regress,
    run_pipeline,
    write_campaign,
    write_pipeline,
)
from cslnoise.readers import read_spectrum
from cslnoise.utils_logging import setup_logging
from cslnoise.utils_warnings import suppress_common_warnings

console = Console()

DEFAULT_CONFIG = "config.json"


def _config(args) -> ToolkitConfig:
    path = Path(args.config)
    if not path.exists():
        if args.config == DEFAULT_CONFIG:
            return ToolkitConfig()
        raise PreconditionError("config file not found", details={"path": str(path)})
    return load_config(path)


def _config_path(args) -> Optional[Path]:
    p = Path(args.config)
    return p if p.exists() else None


def _out_dir(args, cfg: Optional[ToolkitConfig], command: str) -> Path:
    if args.out:
        return Path(args.out)
    base = cfg.output_dir if cfg is not None else "runs"
    return Path(base) / command


def _summary_table(title: str, rows: Dict[str, Any]) -> None:
    table = Table(title=title, show_header=False)
    table.add_column("key", style="bold")
    table.add_column("value")
    for k, v in rows.items():
        table.add_row(k, f"{v:.6g}" if isinstance(v, float) else str(v))
    console.print(table)


def _load_list(path: Path) -> List[Dict[str, Any]]:
    data = read_json(path)
    return data if isinstance(data, list) else [data]


# ------------------------------------------------------------------ commands


def cmd_simulate_campaign(args) -> Dict[str, Any]:
    """Synthesise spectra and ringdown tables."""
    cfg = _config(args)
    out = _out_dir(args, cfg, "campaign")
    manifest = RunManifest.start("simulate-campaign", args.argv, _config_path(args), cfg.campaign.seed if args.seed is None else args.seed)
    res, squid = cfg.resonator_params(), cfg.squid_readout()
    with console.status("[bold green]Simulating campaign...[/bold green]"):
        campaign = run_campaign(res, squid, cfg.campaign_plan(args.seed), progress=args.progress)
    write_campaign(campaign, out)
    manifest.finish(out)
    summary = {"out": str(out), "temperatures": len(campaign.points), "seed": campaign.plan.seed}
    _summary_table("Campaign", summary)
    return summary


def cmd_fit_spectrum(args) -> Dict[str, Any]:
    """Fit one spectrum file."""
    cfg = _config(args)
    if args.band:
        cfg.fit.band_hz = tuple(args.band)
    if args.exclude_peak_bins is not None:
        cfg.fit.exclude_peak_bins = args.exclude_peak_bins
    for item in args.hold or []:
        name, _, value = item.partition("=")
        require(name in ("A", "B", "C") and value, "--hold expects NAME=VALUE with NAME in A, B, C", hold=item)
        cfg.fit.hold_phi0sq_per_hz[name] = float(value)
    if args.f0 is not None:
        cfg.resonator.f0_hz = args.f0
    res, squid = cfg.resonator_params(), cfg.squid_readout()

    spec = read_spectrum(Path(args.spectrum))
    q_a = args.q_a if args.q_a is not None else spec.meta.get("q_a")
    require(q_a is not None, "Q_a is neither given (--q-a) nor stored in the spectrum metadata")
    if args.temperature_mk is not None:
        spec = spec.with_meta(temperature_k=args.temperature_mk * 1e-3)

    fit = fit_spectrum(spec, res, squid, cfg.fit, float(q_a))
    gate = chi2_gate(fit.chi2, fit.dof, cfg.fit.n_sigma)
    out = Path(args.out) if args.out else Path(args.spectrum).with_suffix(".fit.json")
    write_json(fit.to_dict(), out)
    summary = {
        "out": str(out),
        "B_phi0sq_per_hz": convert_units(fit.B, "Wb^2/Hz", "phi0^2/Hz"),
        "sigma_B_phi0sq_per_hz": convert_units(fit.sigma_B, "Wb^2/Hz", "phi0^2/Hz"),
        "chi2": fit.chi2,
        "dof": fit.dof,
        "within_band": gate.within_band,
        "flags": ",".join(fit.flags) or "-",
    }
    _summary_table("Lorentzian fit", summary)
    return summary


def cmd_estimate_q(args) -> Dict[str, Any]:
    """1/Q from a Q_a-vs-gain table; one estimate per temperature group."""
    df = read_ringdown_table(Path(args.table))
    if args.temperature_mk is not None:
        df["temperature_k"] = args.temperature_mk * 1e-3
    groups = df.groupby("temperature_k", sort=True) if "temperature_k" in df.columns else [(None, df)]
    estimates = []
    for temp, g in groups:
        pts = list(zip(g["inv_gain"], g["inv_q_a"], g["sigma_inv_q_a"]))
        estimates.append(fit_q_vs_gain(pts, temperature=None if temp is None else float(temp)))
    out = Path(args.out) if args.out else Path(args.table).with_suffix(".q.json")
    write_json([e.to_dict() for e in estimates] if len(estimates) > 1 else estimates[0].to_dict(), out)
    table = Table(title="Intrinsic Q")
    for col in ("T (mK)", "Q", "sigma_Q", "c"):
        table.add_column(col)
    for e in estimates:
        t = "-" if e.temperature is None else f"{e.temperature * 1e3:.1f}"
        table.add_row(t, f"{e.q:.4g}", f"{e.sigma_q:.2g}", f"{e.slope:.4g}")
    console.print(table)
    return {"out": str(out), "estimates": len(estimates)}


def cmd_regress_noise(args) -> Dict[str, Any]:
    """B vs T/Q regression and offset scan from stored fits and Q estimates."""
    cfg = _config(args)
    fits = [LorentzFit.from_dict(d) for p in args.fits for d in _load_list(Path(p))]
    qs = [QEstimate.from_dict(d) for p in args.q for d in _load_list(Path(p))]
    points = pair_fits_with_q(fits, qs)
    report = regress(
        points,
        cfg.regression.offset_grid(),
        cfg.regression.delta_chi2,
        cfg.fit.n_sigma,
        fit_homogeneity(fits, cfg.fit.n_sigma),
    )
    out = _out_dir(args, cfg, "regression")
    manifest = RunManifest.start("regress-noise", args.argv, _config_path(args), inputs=[Path(p) for p in args.fits + args.q])
    write_json(report.to_dict(), out / "regression.json")
    if report.scan is not None:
        write_table_csv(offset_frame(report.scan), out / "offset_scan.csv")
    manifest.finish(out)
    line = report.line
    summary = {
        "out": str(out),
        "B0": line.intercept,
        "B1": line.slope,
        "chi2": line.chi2,
        "dof": line.dof,
        "within_band": report.gate.within_band,
        "best_inv_q0": report.scan.best_inv_q0 if report.scan else None,
    }
    _summary_table("B vs T/Q", summary)
    return summary


def cmd_budget(args) -> Dict[str, Any]:
    """Coupling, S_F0 and estimators from a regression report."""
    cfg = _config(args)
    data = read_json(Path(args.regression))
    require("line" in data, "regression JSON lacks a 'line' entry", path=args.regression)
    budget = build_budget(args.label or cfg.label, LineFit.from_dict(data["line"]), cfg.resonator_params(), cfg.squid_readout())
    out = _out_dir(args, cfg, "budget")
    manifest = RunManifest.start("budget", args.argv, _config_path(args), inputs=[Path(args.regression)])
    write_json(budget.to_dict(), out / "budget.json")
    write_table_csv(budget_table([budget]), out / "budget.csv")
    manifest.finish(out)
    d = budget.to_dict()
    summary = {
        "out": str(out),
        "coupling_fh": d["coupling_fh"],
        "s_f0_an2_per_hz": d["s_f0_an2_per_hz"],
        "sigma_stat_an2_per_hz": d["sigma_stat_an2_per_hz"],
        "sigma_sys_an2_per_hz": d["sigma_sys_an2_per_hz"],
        "flags": ",".join(budget.flags) or "-",
    }
    _summary_table("Noise budget", summary)
    return summary


def cmd_csl_exclude(args) -> Dict[str, Any]:
    """lambda_max(r_C) from a budget JSON or an explicit S_F0."""
    cfg = _config(args)
    inputs = []
    if args.s_f0 is not None:
        s_f0 = convert_units(args.s_f0, "aN^2/Hz", "N^2/Hz")
    elif args.budget:
        s_f0 = NoiseBudget.from_dict(read_json(Path(args.budget))).s_f0
        inputs.append(Path(args.budget))
    elif cfg.exclusion.s_f0_an2_per_hz is not None:
        s_f0 = convert_units(cfg.exclusion.s_f0_an2_per_hz, "aN^2/Hz", "N^2/Hz")
    else:
        raise PreconditionError("give --s-f0, --budget or exclusion.s_f0_an2_per_hz in the config")
    require(s_f0 > 0, "s_f0 must be positive", s_f0=s_f0)
    if args.n_points is not None:
        cfg.exclusion.n_points = args.n_points

    out = _out_dir(args, cfg, "exclusion")
    manifest = RunManifest.start("csl-exclude", args.argv, _config_path(args), inputs=inputs)
    curve = exclusion_for_budget(s_f0, cfg.mass_model(), cfg, progress=args.progress)
    write_json(curve.to_dict(), out / "exclusion.json")
    write_exclusion_csv(curve, out / "exclusion.csv")
    manifest.finish(out)
    summary = {
        "out": str(out),
        "s_f0_an2_per_hz": convert_units(s_f0, "N^2/Hz", "aN^2/Hz"),
        "points": len(curve.points),
        "flagged": sum(p.flagged for p in curve.points),
        "lambda_at_1e-7_m": curve.lambda_at(1e-7),
    }
    _summary_table("CSL exclusion", summary)
    return summary


def cmd_pipeline(args) -> Dict[str, Any]:
    """Campaign, fits, regression, budget and exclusion from one config."""
    cfg = _config(args)
    out = _out_dir(args, cfg, "pipeline")
    seed = args.seed if args.seed is not None else cfg.campaign.seed
    manifest = RunManifest.start("pipeline", args.argv, _config_path(args), seed)
    console.print(Panel("[bold blue]cslnoise pipeline[/bold blue]", subtitle=f"seed {seed}"))
    result = run_pipeline(cfg, seed=seed, with_exclusion=not args.no_exclusion, progress=args.progress)
    write_pipeline(result, out)
    manifest.finish(out)
    summary = {"out": str(out), **result.summary()}
    _summary_table("Pipeline", summary)
    return summary


def cmd_validate(args) -> Dict[str, Any]:
    """Reference-row checks plus a seeded coverage study."""
    from cslnoise.eval import REFERENCE_ROWS, CampaignEvaluator, ReferenceSet

    cfg = _config(args)
    res = cfg.resonator_params()
    ref = ReferenceSet.from_json(Path(args.reference)) if args.reference else ReferenceSet(REFERENCE_ROWS)
    table = Table(title="Reference rows")
    for col in ("label", "coupling dev", "S_F0 dev", "ok"):
        table.add_column(col)
    ref_ok = True
    for row in ref:
        dev = row.check(res.k, res.f0, res.dk_rel)
        ref_ok &= bool(dev["passed"])
        table.add_row(row.label, f"{dev['coupling']:+.2%}", f"{dev['s_f0']:+.2%}", "yes" if dev["passed"] else "NO")
    console.print(table)

    summary: Dict[str, Any] = {"reference_ok": ref_ok}
    if args.seeds > 0:
        evaluator = CampaignEvaluator(cfg)
        evaluator.run(range(args.first_seed, args.first_seed + args.seeds), progress=args.progress)
        console.print(evaluator.generate_report())
        summary.update(evaluator.aggregates())
        if args.out:
            write_json(
                {"aggregates": evaluator.aggregates(), "outcomes": [vars(o) for o in evaluator.outcomes]},
                Path(args.out),
            )
    return summary


def cmd_audit(args) -> Dict[str, Any]:
    """Summarise the audit log."""
    trail = AuditTrail()
    summary = trail.summary(args.last)
    table = Table(title=f"Audit log ({summary['log']})")
    for col in ("time", "operation", "status", "summary"):
        table.add_column(col)
    for e in trail.entries(args.last):
        table.add_row(e["timestamp"][:19], e["operation"], e["status"], (e["summary"] or "")[:60])
    console.print(table)
    return {k: v for k, v in summary.items() if k != "recent"}


# ------------------------------------------------------------------ parser


def _add_common(p: argparse.ArgumentParser, config: bool = True, out: bool = True) -> None:
    if config:
        p.add_argument("--config", default=DEFAULT_CONFIG, help="JSON or YAML config (default: built-in values)")
    if out:
        p.add_argument("--out", help="output file or directory")
    p.add_argument("--progress", action="store_true", help="show progress bars")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cslnoise", description="Noninterferometric CSL test: noise analysis toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate-campaign", help="Synthesise spectra and ringdowns.")
    _add_common(s)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate_campaign)

    s = sub.add_parser("fit-spectrum", help="Lorentzian fit of one averaged spectrum.")
    _add_common(s)
    s.add_argument("spectrum")
    s.add_argument("--q-a", type=float, help="apparent Q (default: from spectrum metadata)")
    s.add_argument("--f0", type=float, help="resonance frequency in Hz (default: config)")
    s.add_argument("--band", type=float, nargs=2, metavar=("FMIN", "FMAX"))
    s.add_argument("--exclude-peak-bins", type=int)
    s.add_argument("--hold", action="append", metavar="NAME=PHI0SQ_PER_HZ", help="hold A, B or C fixed")
    s.add_argument("--temperature-mk", type=float, help="override the spectrum temperature")
    s.set_defaults(func=cmd_fit_spectrum)

    s = sub.add_parser("estimate-q", help="Intrinsic Q from a Q_a-vs-gain table.")
    _add_common(s, config=False)
    s.add_argument("table")
    s.add_argument("--temperature-mk", type=float)
    s.set_defaults(func=cmd_estimate_q)

    s = sub.add_parser("regress-noise", help="B vs T/Q regression and 1/Q offset scan.")
    _add_common(s)
    s.add_argument("--fits", nargs="+", required=True, help="fit JSON files (single fits or lists)")
    s.add_argument("--q", nargs="+", required=True, help="Q estimate JSON files")
    s.set_defaults(func=cmd_regress_noise)

    s = sub.add_parser("budget", help="Coupling and residual force noise from a regression.")
    _add_common(s)
    s.add_argument("regression")
    s.add_argument("--label")
    s.set_defaults(func=cmd_budget)

    s = sub.add_parser("csl-exclude", help="CSL exclusion curve.")
    _add_common(s)
    s.add_argument("--budget", help="budget JSON")
    s.add_argument("--s-f0", type=float, help="force noise in aN^2/Hz")
    s.add_argument("--n-points", type=int)
    s.set_defaults(func=cmd_csl_exclude)

    s = sub.add_parser("pipeline", help="Run every stage from one config.")
    _add_common(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--no-exclusion", action="store_true")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("validate", help="Reference checks and seeded coverage study.")
    _add_common(s)
    s.add_argument("--seeds", type=int, default=0, help="number of synthetic campaigns")
    s.add_argument("--first-seed", type=int, default=1)
    s.add_argument("--reference", help="reference rows JSON (default: built-in)")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("audit", help="View the audit log.")
    s.add_argument("--last", type=int, default=20)
    s.set_defaults(func=cmd_audit)
    return p


def _fail(payload: Dict[str, Any]) -> None:
    sys.stderr.write(json.dumps(payload, sort_keys=True, default=str) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    setup_logging(args.verbose)
    suppress_common_warnings()

    func: Callable[[Any], Dict[str, Any]] = args.func
    trail = AuditTrail() if args.cmd != "audit" else None
    try:
        summary = func(args)
    except CSLNoiseError as e:
        _fail(e.to_dict())
        if trail:
            trail.failure(args.cmd, e.message, type(e).__name__)
        return e.exit_code
    except ValidationError as e:
        err = PreconditionError(
            "config schema violation",
            details={"errors": [{"loc": list(x["loc"]), "msg": x["msg"]} for x in e.errors()]},
        )
        _fail(err.to_dict())
        if trail:
            trail.failure(args.cmd, err.message, "ValidationError")
        return err.exit_code
    except yaml.YAMLError as e:
        err = PreconditionError("unparseable config", details={"reason": str(e)})
        _fail(err.to_dict())
        return err.exit_code
    if trail:
        trail.success(args.cmd, " ".join(argv)[:200], json.dumps(summary, sort_keys=True, default=str)[:300])
    return 0


if __name__ == "__main__":
    sys.exit(main())
