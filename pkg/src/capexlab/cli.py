"""Command line entry point: ``capexlab <command> ...``.

Exit codes: 0 success, 1 a finding check failed, 2 invalid input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import fields
from pathlib import Path

import yaml

from . import __version__
from .features import Backend, PRESETS
from .formulation import FormulationError, build_lp, extract_result
from .harness import VARIANTS, finding_checks, read_comparison, resolve_profile, run_matrix, write_comparison
from .heuristic import ESParams, HeuristicConfigError, evolve_capacities
from .instances import BUNDLED, bundled
from .lp import Status
from .lpfile import write_lp
from .metrics import characteristics_rows
from .scenario_io import (
    ScenarioFileError,
    ScenarioValidationError,
    fmt,
    load_scenario,
    save_scenario,
    write_result,
)
from .solver import solve
from .synthetic import DemandShape, RegionShape, SyntheticSpec, VREShape, generate_synthetic
from .usecases import use_case_template

EXIT_FINDING, EXIT_INVALID, EXIT_SOLVER = 1, 2, 3


class SolverFailure(RuntimeError):
    pass


def _scenario(ref: str):
    if ref.startswith("bundled:"):
        return bundled(ref.split(":", 1)[1])
    return load_scenario(ref)


def _es_params(args) -> ESParams:
    values = {}
    if args.es_config:
        values.update(yaml.safe_load(Path(args.es_config).read_text()) or {})
    for name in ("mu", "lam", "generations", "sigma0", "workers"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    known = {f.name for f in fields(ESParams)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown ES parameters {sorted(unknown)}")
    return ESParams(**values)


def _spec_from_yaml(path: Path, seed: int | None) -> SyntheticSpec:
    cfg = yaml.safe_load(path.read_text()) or {}
    shapes = tuple(
        RegionShape(DemandShape(**s.get("demand", {})), VREShape(**s.get("vre", {})))
        for s in cfg.pop("shapes", [{}])
    )
    for key in ("line_capacity", "susceptance"):
        if isinstance(cfg.get(key), list):
            cfg[key] = tuple(cfg[key])
    if seed is not None:
        cfg["seed"] = seed
    return SyntheticSpec(shapes=shapes, **cfg)


def cmd_gen_data(args) -> int:
    if args.spec in BUNDLED:
        scenario = bundled(args.spec)
    else:
        scenario = generate_synthetic(_spec_from_yaml(Path(args.spec), args.seed))
    path = save_scenario(scenario, Path(args.out) / "scenario.yaml")
    print(f"wrote {path} ({len(scenario.regions)} regions, {scenario.hours} h)")
    return 0


def _print_result(res) -> None:
    print(f"status {res.status}  system_cost {res.costs.system_cost:.6g}")
    for k, v in res.costs.as_rows():
        print(f"  {k:<24} {v:.6g}")
    exp = res.expansion
    for (r, t), v in sorted(exp.generation.items()):
        print(f"  expand {r:<6} {t:<10} {v:12.4f} MW")
    for (r, s), e in sorted(exp.storage_energy.items()):
        print(f"  expand {r:<6} {s:<10} {e:12.4f} MWh  discharge {exp.storage_discharge[(r, s)]:.4f} MW"
              f"  charge {exp.storage_charge[(r, s)]:.4f} MW")
    for lid, v in sorted(exp.lines.items()):
        print(f"  expand {lid:<17} {v:12.4f} MW")


def cmd_run(args) -> int:
    scenario = _scenario(args.scenario)
    profile = resolve_profile(args.profile)
    use_case = use_case_template(args.use_case, scenario)
    if profile.backend is Backend.LP:
        lp, index = build_lp(scenario, use_case, profile.features)
        if args.lp_out:
            write_lp(lp, args.lp_out)
        sol = solve(lp)
        if sol.status is not Status.OPTIMAL:
            raise SolverFailure(f"LP ended with status {sol.status.value} after {sol.iterations} iterations")
        res = extract_result(sol, index, scenario)
    else:
        _, res = evolve_capacities(scenario, use_case, profile.features, _es_params(args), args.seed)
        res.status = "Heuristic"
    _print_result(res)
    if args.out:
        write_result(res, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_compare(args) -> int:
    scenario = _scenario(args.scenario)
    profiles = [p.strip() for p in args.profiles.split(",") if p.strip()]
    use_cases = [u.strip() for u in args.use_cases.split(",") if u.strip()]
    report = run_matrix(scenario, use_cases, profiles, _es_params(args), args.seed)
    write_comparison(report, args.out)
    for (uc, p), c in report.cells.items():
        suffix = f"  {c.message}" if c.message else ""
        cost = f"{c.fitness:.6g}" if c.ok else "-"
        print(f"{uc:<4} {p:<18} {c.status:<10} {cost}{suffix}")
    print(f"wrote {args.out}")
    failed = [c for c in report.cells.values() if c.status not in ("Optimal", "Heuristic", "skipped")]
    return EXIT_SOLVER if failed else 0


def cmd_metrics(args) -> int:
    scenario = _scenario(args.scenario)
    rows = characteristics_rows(scenario)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["region", "metric", "value"])
        for r, m, v in rows:
            w.writerow([r, m, fmt(v)])
    finally:
        if args.out:
            out.close()
    return 0


def cmd_check_findings(args) -> int:
    report = read_comparison(args.report)
    checks = finding_checks(report, hhi_margin=args.hhi_margin, require_all=False)
    for c in checks:
        print(c.line())
    missing = sorted(set(("F1", "F2", "F3", "F4", "F5", "F6")) - {c.id for c in checks})
    if missing:
        print(f"not evaluated (missing cells): {', '.join(missing)}")
    return 0 if all(c.passed for c in checks) else EXIT_FINDING


def _add_es(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("evolution strategy")
    g.add_argument("--es-config", help="YAML file with mu, lam, generations, sigma0, workers")
    g.add_argument("--mu", type=int)
    g.add_argument("--lam", type=int)
    g.add_argument("--generations", type=int)
    g.add_argument("--sigma0", type=float)
    g.add_argument("--workers", type=int)
    g.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="capexlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"capexlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    profiles = ", ".join(sorted(VARIANTS) + sorted(PRESETS))
    scen_help = "scenario YAML path or bundled:NAME (" + ", ".join(sorted(BUNDLED)) + ")"

    p = sub.add_parser("gen-data", help="write a synthetic scenario")
    p.add_argument("--spec", required=True, help="synthetic spec YAML, or a bundled instance name")
    p.add_argument("--seed", type=int, help="override the seed from the generator config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("run", help="solve one use case with one profile")
    p.add_argument("--scenario", required=True, help=scen_help)
    p.add_argument("--use-case", required=True, choices=["I", "II", "III", "IV"])
    p.add_argument("--profile", required=True, help=f"one of: {profiles}")
    p.add_argument("--out", help="write result CSVs here")
    p.add_argument("--lp-out", help="also export the LP in text form")
    _add_es(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run a profile x use-case matrix")
    p.add_argument("--scenario", required=True, help=scen_help)
    p.add_argument("--profiles", required=True, help=f"comma separated: {profiles}")
    p.add_argument("--use-cases", default="I,II,III,IV")
    p.add_argument("--out", required=True)
    _add_es(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("metrics", help="regional characteristic ratios")
    p.add_argument("--scenario", required=True, help=scen_help)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("check-findings", help="evaluate finding checks on a written comparison")
    p.add_argument("--report", required=True, help="directory written by compare")
    p.add_argument("--hhi-margin", type=float, default=0.0)
    p.set_defaults(func=cmd_check_findings)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (ScenarioFileError, FormulationError, HeuristicConfigError, KeyError, ValueError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except SolverFailure as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
