"""Acceptance criteria 1-11. Each check prints one PASS/FAIL line.

Run under pytest (lines appear in the terminal summary) or directly:
``python3 tests/test_acceptance.py``.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

from reljacobi.brackets import (
    CurvedBracket,
    FlatEMBracket,
    PolynomialBracket,
    build_bracket,
)
from reljacobi.cli import main as cli_main
from reljacobi.dynamics import derive_eom, integrate, invariant_drift, orthogonality_residual
from reljacobi.fields import CombinedField, DualField, preset_field, preset_mass, preset_metric, preset_potential
from reljacobi.jacobi import (
    IDENTITIES,
    basis_jacobi_residual,
    boost_velocity,
    christoffel,
    closed_form_residual,
    curved_fourth_identity_split,
    maxwell_residual,
    permuted_L,
    quadratic_force_exclusion,
    raised_cyclic,
    sample_phase_points,
)
from reljacobi.structure import canonize_curved, canonize_flat, count_components_and_conditions, dual_tensor, \
    total_field
from reljacobi.tensor_core import ETA

SCEN = Path(__file__).resolve().parents[1] / "scenarios"
POTENTIALS = [
    ("uniform_B", {"b": 0.8}),
    ("polynomial", {"seed": 11}),
    ("plane_wave", {}),
    ("coulomb", {"k": 1.2}),
    ("gaussian", {}),
]
METRICS = ["minkowski", "spherical_flat", "schwarzschild", "polynomial_perturbation"]
FLAT_BOX = (np.full(4, -1.0), np.full(4, 1.0))


def _pot_field(preset, params, metric=None):
    return preset_field("from_potential", {"potential": {"preset": preset, "params": params}}, metric=metric)


def _box(spec_or_metric, field=None):
    metric = getattr(spec_or_metric, "metric", spec_or_metric)
    if metric is not None and not metric.is_constant:
        return metric.box
    return field.box if field is not None else FLAT_BOX


def check_1():
    qm, worst = 1.7, 0.0
    for name, params in POTENTIALS:
        F = _pot_field(name, params)
        spec = FlatEMBracket(F, qm)
        assert spec.has_analytic_grad
        for z in sample_phase_points(F.box, 100, 1, domain=F.check):
            worst = max(worst, float(np.max(np.abs(basis_jacobi_residual(spec, z, 4)))))
    div = FlatEMBracket(preset_field("divergent_B", {"s": 1.0}), 2.0)
    low, diff = np.inf, 0.0
    for z in sample_phase_points(FLAT_BOX, 100, 2):
        R = basis_jacobi_residual(div, z, 4)
        T = 2.0 * raised_cyclic(maxwell_residual(div.field, z[:4]), ETA)
        low = min(low, float(np.max(np.abs(R))))
        diff = max(diff, float(np.max(np.abs(R - T))))
    ok = worst <= 1e-8 and low >= 1e-3 and diff <= 1e-8
    return ok, f"potential fields max {worst:.2e} <= 1e-8; divergent_B min {low:.3g} >= 1e-3, |R - (q/m)T| {diff:.1e}"


def _crossval_scenarios():
    sch, sph, pp = (preset_metric(n) for n in ("schwarzschild", "spherical_flat", "polynomial_perturbation"))
    rng = np.random.default_rng(5)
    out = {
        "flat_EM/potential": FlatEMBracket(_pot_field("polynomial", {"seed": 2}), 1.3),
        "flat_EM/divergent_B": FlatEMBracket(preset_field("divergent_B", {}), 2.0),
        "flat_EM/coulomb": FlatEMBracket(preset_field("coulomb", {}), -1.0),
        "flat_EM/custom_F": FlatEMBracket(preset_field("custom_polynomial", {"seed": 3}), 0.9),
        "monopole": build_bracket("monopole", field=_pot_field("gaussian", {}), q_e=1.0, q_m=0.4),
        "multiparticle_block": build_bracket("multiparticle_block", charges=[[1.0, 0.5], [0.0, -2.0]],
                                             masses=[1.0, 2.0],
                                             fields=[_pot_field("plane_wave", {}), preset_field("divergent_B", {})]),
        "custom_polynomial": PolynomialBracket(rng.normal(size=(4, 4)), 0.3 * rng.normal(size=(4, 4, 4)),
                                               0.1 * rng.normal(size=(4, 4, 4, 4))),
    }
    for m in (sch, sph, pp):
        out[f"curved/{m.name}/potential"] = CurvedBracket(m, _pot_field("plane_wave", {}, m), 0.6)
        out[f"curved/{m.name}/divergent_B"] = CurvedBracket(m, preset_field("divergent_B", {}, box=m.box), 0.6)
    for mname, params in (("constant", {"m": 2.0}), ("linear_gradient", {"m0": 2.0, "k": [0, 0.2, 0.1, 0]}),
                          ("gaussian_well", {})):
        out[f"variable_mass/{mname}"] = build_bracket("variable_mass", mass=preset_mass(mname, params))
    return out


def check_2():
    worst, where = 0.0, ""
    for name, spec in _crossval_scenarios().items():
        box = _box(spec)
        for z in sample_phase_points(box, 20, 3, metric=spec.metric, n_particles=spec.n_particles):
            for i in range(spec.n_particles):
                for which in IDENTITIES:
                    d = float(np.max(np.abs(basis_jacobi_residual(spec, z, which, i)
                                            - closed_form_residual(spec, z, which, i))))
                    if d > worst:
                        worst, where = d, f"{name} identity {which}"
    return worst <= 1e-5, f"max discrepancy {worst:.2e} <= 1e-5 over {len(_crossval_scenarios())} scenarios" + (
        f" (worst: {where})" if where else "")


def check_3():
    worst, qm = 0.0, 0.5
    for name in ("minkowski", "spherical_flat", "schwarzschild"):
        m = preset_metric(name)
        F = _pot_field("plane_wave", {}, m)
        eom = derive_eom(CurvedBracket(m, F, qm))
        for z in sample_phase_points(_box(m), 100, 4, metric=m):
            x, u = z[:4], z[4:]
            printed = -np.einsum("msl,s,l->m", christoffel(m, x), u, u) + qm * F.F(x) @ (m.g(x) @ u)
            worst = max(worst, float(np.max(np.abs(eom.udot(z) - printed))))
    return worst <= 1e-6, f"|udot_bracket - (-Gamma U U + (q/m) F U)| max {worst:.2e} <= 1e-6"


def check_4():
    riem = maxw = sumd = 0.0
    for name in METRICS:
        m = preset_metric(name)
        for F in (None, _pot_field("gaussian", {}, m)):
            spec = CurvedBracket(m, F, 0.8)
            for z in sample_phase_points(_box(m), 20, 5, metric=m):
                split = curved_fourth_identity_split(spec, z)
                riem = max(riem, float(np.max(np.abs(split.riemann_part))))
                maxw = max(maxw, float(np.max(np.abs(split.maxwell_part))))
                sumd = max(sumd, float(np.max(np.abs(split.total - basis_jacobi_residual(spec, z, 4)))))
    ok = riem <= 1e-6 and maxw <= 1e-6 and sumd <= 1e-5
    return ok, f"riemann part {riem:.1e} <= 1e-6, maxwell part {maxw:.1e} <= 1e-6, sum vs nested {sumd:.1e} <= 1e-5"


def check_5():
    worst = 0.0
    for params in ({"m0": 2.0, "k": [0.05, 0.1, -0.2, 0.3]}, None):
        mass = preset_mass("linear_gradient", params) if params else preset_mass("gaussian_well", {})
        eom = derive_eom(build_bracket("variable_mass", mass=mass), "variable_mass")
        for z in sample_phase_points(FLAT_BOX, 50, 6):
            m, dm, _ = mass.jet(z[:4])
            u = z[4:]
            printed = (ETA @ dm * (u @ ETA @ u) - (dm @ u) * u) / m
            worst = max(worst, float(np.max(np.abs(eom.udot(z) - printed))))
    free = derive_eom(build_bracket("variable_mass", mass=preset_mass("constant", {"m": 3.0})), "variable_mass")
    exact = all(not free.udot(z).any() and np.max(np.abs(free.xdot(z) - z[4:])) <= 1e-15
                for z in sample_phase_points(FLAT_BOX, 50, 7))
    return worst <= 1e-8 and exact, f"gradient force max {worst:.1e} <= 1e-8; constant mass udot == 0 exactly: {exact}"


def check_6():
    flat_res, flat_one, curv_res, curv_one = 0.0, True, 0.0, True
    for name, params in POTENTIALS:
        A = preset_potential(name, params)
        for z in sample_phase_points(A.box, 10, 8, domain=A.check):
            pair = canonize_flat(z, A, 1.3)
            flat_one &= pair.passing_labels == ["plus"]
            r = pair.residuals["plus"]
            flat_res = max(flat_res, r["XP"], r["PP"])
    for mname in ("schwarzschild", "spherical_flat", "polynomial_perturbation"):
        m = preset_metric(mname)
        A = preset_potential("plane_wave")
        for z in sample_phase_points(m.box, 5, 9, metric=m):
            pair = canonize_curved(z, A, m, 0.7)
            curv_one &= pair.passing_labels == ["plus"]
            r = pair.residuals["plus"]
            curv_res = max(curv_res, r["XP"], r["PP"])
    ok = flat_res <= 1e-8 and curv_res <= 1e-6 and flat_one and curv_one
    return ok, (f"flat {flat_res:.1e} <= 1e-8, curved {curv_res:.1e} <= 1e-6; exactly one convention ('plus': "
                f"P = U + (q/m)A, P_mu = g U + (q/m)A_mu) passes: flat {flat_one}, curved {curv_one}")


def check_7():
    F = _pot_field("polynomial", {"seed": 4})
    accel = 0.0
    for alpha, beta, q_e in ((0.5, 2.0, 1.0), (1.0, 1.0, -2.0), (-3.0, 0.7, 0.4)):
        H, q = total_field(F, alpha, beta, q_e)
        for z in sample_phase_points(FLAT_BOX, 20, 10):
            x, u_low = z[:4], ETA @ z[4:]
            lhs = q_e * (F.F(x) - (alpha / beta) * DualField(F).F(x)) @ u_low
            accel = max(accel, float(np.max(np.abs(lhs - q * H.F(x) @ u_low))))
    rng = np.random.default_rng(12)
    dual = 0.0
    for _ in range(20):
        M = rng.normal(size=(4, 4))
        M = M - M.T
        dual = max(dual, float(np.max(np.abs(dual_tensor(dual_tensor(M).components).components + M))))
    return accel <= 1e-12 and dual <= 1e-12, f"acceleration identity {accel:.1e} <= 1e-12; dual(dual F) + F {dual:.1e}"


def check_8():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(10):
        L = rng.normal(size=(4, 4, 4))
        L = 0.5 * (L + L.transpose(0, 2, 1))  # symmetric in the last two indices
        z = sample_phase_points(FLAT_BOX, 1, int(rng.integers(1 << 30)))[0]
        worst = max(worst, float(np.max(np.abs(quadratic_force_exclusion(L, z) - permuted_L(L)))))
    return worst <= 1e-8, f"|residual - L^(nu lambda mu)| max {worst:.1e} <= 1e-8 for 10 random L ([f,[g,h]] ordering)"


def check_9():
    rep = count_components_and_conditions()
    comps = tuple(rep.components[k] for k in ("A", "L", "Q"))
    conds = tuple(rep.conditions[k] for k in range(4))
    ok = comps == (6, 24, 60) and conds == (4, 16, 40, 80) and rep.overdetermined
    return ok, (f"components {comps}, conditions {conds}, {rep.total_conditions} > {rep.total_components}: "
                f"{rep.overdetermined}")


def _force_kinds():
    sch = preset_metric("schwarzschild")
    return {
        "flat_EM": (FlatEMBracket(preset_field("divergent_B", {}), 1.5), "quadratic"),
        "curved": (CurvedBracket(sch, _pot_field("plane_wave", {}, sch), 0.5), "quadratic"),
        "variable_mass": (build_bracket("variable_mass", mass=preset_mass("gaussian_well", {})), "variable_mass"),
        "monopole": (build_bracket("monopole", field=preset_field("uniform_EB", {"E": [0.3, 0, 0], "B": [0, 0, 1]}),
                                   q_m=0.5), "quadratic"),
        "multiparticle_block": (build_bracket("multiparticle_block", charges=[[1.0], [-2.0]], masses=[1.0, 1.5],
                                              fields=[_pot_field("gaussian", {})]), "quadratic"),
    }


def check_10():
    gyro = derive_eom(FlatEMBracket(preset_field("uniform_EB", {"E": [0, 0, 0], "B": [0, 0, 1.0]}), 1.0))
    p0 = np.concatenate([np.zeros(4), boost_velocity([0.5, 0, 0])])
    per = integrate(gyro, p0, 2 * np.pi, 2 * np.pi / 2000)
    closure = float(np.max(np.abs(per.states[-1, 1:4] - per.states[0, 1:4])))
    long = integrate(gyro, p0, 10.0, 1e-3)
    steps = len(long) - 1
    drift = invariant_drift(long)[1]
    coarse = invariant_drift(integrate(gyro, p0, 8 * np.pi, 0.1))[1]
    fine = invariant_drift(integrate(gyro, p0, 8 * np.pi, 0.05))[1]
    ratio = coarse / fine
    orth = 0.0
    for spec, ham in _force_kinds().values():
        eom = derive_eom(spec, ham)
        box = _box(spec)
        if spec.kind == "multiparticle_block":
            box = (np.array([-1.0, 0.3, 0.3, 0.3]), np.ones(4))
        for z in sample_phase_points(box, 30, 14, metric=spec.metric, n_particles=spec.n_particles):
            for i in range(spec.n_particles):
                orth = max(orth, abs(orthogonality_residual(eom, z, i)))
    ok = closure <= 1e-4 and steps == 10_000 and drift <= 1e-9 and ratio >= 8.0 and orth <= 1e-8
    return ok, (f"closure {closure:.1e} <= 1e-4; |d(U.U)| {drift:.1e} <= 1e-9 over {steps} steps at dt=1e-3; "
                f"drift ratio dt 0.1 -> 0.05: {ratio:.1f} >= 8; max |U.a| {orth:.1e} <= 1e-8")


def check_11():
    outs = []
    with tempfile.TemporaryDirectory() as tmp:
        for scen in ("curved_potential.json", "multiparticle.json"):
            for k in range(2):
                out = Path(tmp) / f"{scen}.{k}.json"
                code = cli_main(["check", str(SCEN / scen), "--out", str(out), "--seed", "42", "--quiet"])
                outs.append((scen, code, out.read_bytes()))
        # a fresh interpreter must produce the same bytes
        out = Path(tmp) / "proc.json"
        subprocess.run([sys.executable, "-m", "reljacobi.cli", "check", str(SCEN / "curved_potential.json"),
                        "--out", str(out), "--seed", "42", "--quiet"], check=True)
        fresh = out.read_bytes()
    same = outs[0][2] == outs[1][2] == fresh and outs[2][2] == outs[3][2]
    json.loads(fresh)
    return same, f"repeated runs (in-process and fresh process) byte-identical: {same}"


CRITERIA = {
    1: ("Maxwell <=> Jacobi (flat)", check_1),
    2: ("closed-form vs nested cross-validation", check_2),
    3: ("geodesic emergence", check_3),
    4: ("curved identity-4 split", check_4),
    5: ("gradient force", check_5),
    6: ("Darboux canonization", check_6),
    7: ("monopole rotation", check_7),
    8: ("quadratic exclusion", check_8),
    9: ("counting", check_9),
    10: ("dynamics quality", check_10),
    11: ("determinism", check_11),
}


def run_criterion(n):
    title, fn = CRITERIA[n]
    ok, detail = fn()
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {title}: {detail}"
    return ok, line


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_acceptance(n):
    from conftest import ACCEPTANCE_LINES

    ok, line = run_criterion(n)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
