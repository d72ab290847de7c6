"""Command-line front end: ``reljacobi {check,integrate,canonize,count,sweep}``.

Exit codes: 0 pass, 1 usage or malformed input, 2 residual failure, 3 domain exit.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from importlib import metadata

import numpy as np

from . import _kernels
from .brackets import CurvedBracket, FlatEMBracket, MultiparticleBracket
from .dynamics import DomainExit, derive_eom, integrate, invariant_drift
from .errors import DomainError, NumericError
from .jacobi import curved_fourth_identity_split, maxwell_residual, sample_phase_points, verify_jacobi
from .scenario import Runtime, ScenarioError, build_runtime, load_scenario, with_override
from .structure import canonize_curved, canonize_flat, count_components_and_conditions

EXIT_OK, EXIT_USAGE, EXIT_RESIDUAL, EXIT_DOMAIN = 0, 1, 2, 3


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _clean(obj):
    # JSON-safe, deterministic: numpy -> python, non-finite floats -> strings
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def _emit(report: dict, out: str | None) -> None:
    text = dump_report(report)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


def _load(args) -> Runtime:
    scenario = load_scenario(args.scenario)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["sampling.seed"] = args.seed
    if getattr(args, "tol", None) is not None:
        overrides["tolerances.analytic"] = args.tol
    for path, value in overrides.items():
        scenario = with_override(scenario, path, value)
    return build_runtime(scenario)


def _base_report(rt: Runtime, command: str) -> dict:
    return {
        "command": command,
        "tool_version": tool_version(),
        "kernel_backend": _kernels.BACKEND,
        "scenario": rt.scenario.model_dump(mode="json"),
        "seed": rt.scenario.sampling.seed,
    }


def _samples(rt: Runtime):
    s = rt.scenario.sampling
    return sample_phase_points(rt.box, s.count, s.seed, metric=rt.metric, max_speed=s.max_speed,
                               n_particles=len(rt.scenario.particles), domain=rt.check_position)


def _maxwell_stats(rt: Runtime, points) -> dict | None:
    spec = rt.spec
    if isinstance(spec, MultiparticleBracket):
        per = spec.particle_fields
    elif isinstance(spec, (FlatEMBracket, CurvedBracket)) and spec.field is not None:
        per = [spec.field]
    else:
        return None
    metric = rt.metric if isinstance(spec, CurvedBracket) else None
    stats = {}
    for i, F in enumerate(per):
        vals = [float(np.max(np.abs(maxwell_residual(F, z[8 * i: 8 * i + 4], metric)))) for z in points]
        stats[f"particle{i}"] = {"max_abs": max(vals), "mean_abs": float(np.mean(vals))}
    return stats


def run_check(rt: Runtime) -> tuple[dict, int]:
    tol = rt.scenario.tolerances
    points = _samples(rt)
    jac = verify_jacobi(rt.spec, points, rt.scenario.sampling.seed, tol.analytic, tol.finite_difference)
    report = {"jacobi": jac.to_dict()}
    failing = sorted(k for k, ok in jac.verdicts.items() if not ok)
    if isinstance(rt.spec, CurvedBracket):
        mx = rp = 0.0
        for z in points:
            split = curved_fourth_identity_split(rt.spec, z)
            mx = max(mx, float(np.max(np.abs(split.maxwell_part))))
            rp = max(rp, float(np.max(np.abs(split.riemann_part))))
        report["curved_split"] = {"maxwell_part_max_abs": mx, "riemann_part_max_abs": rp}
    stats = _maxwell_stats(rt, points)
    if stats is not None:
        report["maxwell_residual"] = stats
    report["failing"] = failing
    report["passed"] = not failing
    return report, EXIT_OK if not failing else EXIT_RESIDUAL


def cmd_check(args) -> int:
    rt = _load(args)
    t0 = time.perf_counter()
    body, code = run_check(rt)
    report = {**_base_report(rt, "check"), **body}
    if args.timing:
        report["wall_clock_seconds"] = time.perf_counter() - t0
    _emit(report, args.out)
    if body["failing"]:
        _say(args, "FAIL: " + ", ".join(body["failing"]))
    else:
        _say(args, "PASS: all Jacobi identities within tolerance")
    return code


def cmd_integrate(args) -> int:
    rt = _load(args)
    integ = rt.scenario.integration
    if integ is None:
        raise ScenarioError(f"{args.scenario}: field integration: required for the integrate command")
    eom = derive_eom(rt.spec, rt.hamiltonian)
    code = EXIT_OK
    try:
        traj = integrate(eom, rt.p0, integ.tau_end, integ.dt, integ.method, rt.scenario.tolerances.shell_tol)
    except DomainExit as exc:
        traj, code = exc.trajectory, EXIT_DOMAIN
        _say(args, f"domain exit: {exc}")
    traj.to_csv(args.out, args.particle)
    dH, dN = invariant_drift(traj)
    _say(args, f"steps={len(traj) - 1} max|dH|={dH:.3e} max|d(U.U)|={dN:.3e} completed={traj.completed}")
    if args.report is not None:
        report = {
            **_base_report(rt, "integrate"),
            "samples": len(traj),
            "completed": traj.completed,
            "message": traj.message,
            "max_abs_dH": dH,
            "max_abs_dUU": dN,
            "final_state": traj.states[-1],
        }
        _emit(report, args.report)
    return code


def run_canonize(rt: Runtime) -> tuple[dict, int]:
    kind = rt.scenario.kind
    if kind not in ("flat_EM", "curved"):
        raise ScenarioError(f"canonize applies to kinds flat_EM and curved, not {kind!r}")
    A = rt.canonize_potential()
    tol = rt.scenario.tolerances.canonical or (1e-8 if kind == "flat_EM" else 1e-6)
    worst = {"plus": {"XP": 0.0, "PP": 0.0}, "minus": {"XP": 0.0, "PP": 0.0}}
    points = [rt.p0] + _samples(rt)
    first = None
    for z in points:
        if kind == "flat_EM":
            pair = canonize_flat(z, A, rt.q_over_m, tol)
        else:
            pair = canonize_curved(z, A, rt.metric, rt.q_over_m, tol)
        first = first or pair
        for label, r in pair.residuals.items():
            for key in ("XP", "PP"):
                worst[label][key] = max(worst[label][key], r[key])
    passing = sorted(k for k, r in worst.items() if r["XP"] <= tol and r["PP"] <= tol)
    body = {
        "canonization": {
            "case": "flat" if kind == "flat_EM" else "curved",
            "potential": A.name,
            "tolerance": tol,
            "points": len(points),
            "max_residuals": worst,
            "passing_conventions": passing,
            "exactly_one_convention_passes": len(passing) == 1,
            "initial_pair": first.to_dict(),
        }
    }
    return body, EXIT_OK if passing else EXIT_RESIDUAL


def cmd_canonize(args) -> int:
    rt = _load(args)
    body, code = run_canonize(rt)
    _emit({**_base_report(rt, "canonize"), **body}, args.out)
    _say(args, f"passing conventions: {body['canonization']['passing_conventions'] or 'none'}")
    return code


def cmd_count(args) -> int:
    report = {"command": "count", "tool_version": tool_version()}
    if args.scenario is not None:
        report["scenario"] = load_scenario(args.scenario).model_dump(mode="json")
    counts = count_components_and_conditions()
    report["counts"] = counts.to_dict()
    _emit(report, args.out)
    _say(args, f"components={counts.total_components} conditions={counts.total_conditions} "
               f"overdetermined={counts.overdetermined}")
    return EXIT_OK


def _parse_values(raw: str) -> list:
    try:
        values = json.loads(raw)
    except json.JSONDecodeError:
        values = [json.loads(v) if v.strip()[:1] in "-0123456789[{\"tfn" else v for v in raw.split(",")]
    if not isinstance(values, list) or not values:
        raise ScenarioError("--values must be a non-empty JSON list or a comma-separated list")
    return values


def cmd_sweep(args) -> int:
    base = load_scenario(args.scenario)
    if args.seed is not None:
        base = with_override(base, "sampling.seed", args.seed)
    if args.tol is not None:
        base = with_override(base, "tolerances.analytic", args.tol)
    values = _parse_values(args.values)
    entries, code = [], EXIT_OK
    for v in values:
        rt = build_runtime(with_override(base, args.param, v))
        try:
            body, c = run_check(rt)
        except DomainError as exc:
            entries.append({"value": v, "error": str(exc)})
            code = max(code, EXIT_DOMAIN)
            continue
        entries.append({
            "value": v,
            "passed": body["passed"],
            "failing": body["failing"],
            "max_abs_residual": {k: v["max_abs_residual"] for k, v in body["jacobi"]["identities"].items()},
        })
        code = max(code, c)
    report = {
        "command": "sweep",
        "tool_version": tool_version(),
        "scenario": base.model_dump(mode="json"),
        "param": args.param,
        "results": entries,
    }
    _emit(report, args.out)
    _say(args, f"swept {len(values)} values of {args.param}; exit {code}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reljacobi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        if scenario_required:
            p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--out", help="output path (report JSON; trajectory CSV for integrate)")
        p.add_argument("--seed", type=int, help="override sampling.seed")
        p.add_argument("--tol", type=float, help="override tolerances.analytic")
        p.add_argument("--quiet", action="store_true", help="suppress the summary on stderr")
        return p

    p = common(sub.add_parser("check", help="verify the basis Jacobi identities"))
    p.add_argument("--timing", action="store_true", help="add wall-clock seconds (breaks byte-identity)")
    p.set_defaults(func=cmd_check)

    p = common(sub.add_parser("integrate", help="integrate the equations of motion to CSV"))
    p.add_argument("--report", help="also write a JSON summary here")
    p.add_argument("--particle", type=int, default=0, help="particle written to the CSV")
    p.set_defaults(func=cmd_integrate)

    p = common(sub.add_parser("canonize", help="Darboux momentum and canonical-bracket residuals"))
    p.set_defaults(func=cmd_canonize)

    p = common(sub.add_parser("count", help="coefficient and condition counts for polynomial [U,U]"), False)
    p.add_argument("scenario", nargs="?", help="optional scenario echoed into the report")
    p.set_defaults(func=cmd_count)

    p = common(sub.add_parser("sweep", help="run check over a grid of one scenario parameter"))
    p.add_argument("--param", required=True, help="dotted path, e.g. particles.0.charges.0")
    p.add_argument("--values", required=True, help="JSON list or comma-separated values")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command == "integrate" and args.out is None:
        print("error: integrate needs --out <csv path>", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_RESIDUAL


if __name__ == "__main__":
    sys.exit(main())
