"""Acceptance criteria 1-10 at their stated tolerances.

Each test prints one line per criterion; the lines are also collected in
RESULTS and repeated in the pytest terminal summary. Run standalone with
``python3 tests/test_acceptance.py``.
"""

import sys
from decimal import Decimal

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import AX1, N0, example_spec, example_state
from ncihf.cli import initial_state, lax_report
from ncihf.config import load_config
from ncihf.constraints import SolitonSpec, orthonormal_frame, rotate_frame, solve_constraints
from ncihf.dynamics import RTOL, conserved_monitors, detect_collisions, integrate, integrate_window, newtonian_residual, pole_velocity, states_at
from ncihf.fields import (
    energy_density,
    eval_fields,
    eval_Ut,
    one_soliton_diagnostics,
    profile_f,
    total_energy,
    total_spin,
)
from ncihf.kernels import DEFAULT
from ncihf.spectral import (
    Grid,
    cotlar_residual,
    eigen_relation_residual,
    expansion_order,
    multiplier_identities,
    square_residual,
)
from ncihf.state import CMState
from ncihf.verification import grid_for_state, pde_residual_analytic, spin_conservation_check

RESULTS = {}
XS = np.linspace(-20, 20, 801)
T_START, T_END = -5.0, 17.5


def record(num, title, checks):
    """Print and store one criterion line; ``checks`` are (label, value, tol)."""
    rows = [(label, float(v), float(tol), bool(np.isfinite(v) and v <= tol)) for label, v, tol in checks]
    ok = all(r[3] for r in rows)
    worst = [f"{lbl}={v:.3g}/{tol:.0e}" for lbl, v, tol, good in rows if not good] or [
        f"{lbl}={v:.3g}" for lbl, v, _, _ in rows[:3]
    ]
    line = f"criterion {num:2d} {title}: {'PASS' if ok else 'FAIL'} ({', '.join(worst)})"
    RESULTS[num] = line
    print(line)
    assert ok, line


def digits_tol(text):
    """Half a unit in the last printed digit of a decimal literal."""
    return float(Decimal(1).scaleb(Decimal(text).as_tuple().exponent) / 2)


@pytest.fixture(scope="module")
def trajectories():
    return {n: integrate_window(example_state(n), T_START, T_END, 2251) for n in (1, 2, 3)}


def test_c01_constraint_reproduction():
    checks = []
    r = np.sqrt(2)
    d1 = solve_constraints(example_spec(1))
    checks.append(("X1[N=1]", np.abs(d1.X[0] - [-1j / r, 0.5, 0.5]).max(), 1e-12))
    checks.append(("m[N=1]", abs(d1.m - np.sqrt(2 / 3)), 1e-12))
    d2 = solve_constraints(example_spec(2))
    X1 = np.array([8, 10, 10]) / 7 + 1j * r * np.array([-10, 4, 4]) / 7
    X2 = -np.array([10, 8, 10]) / 7 - 1j * r * np.array([4, -10, 4]) / 7
    checks.append(("X[N=2]", np.abs(d2.X - [X1, X2]).max(), 1e-12))
    checks.append(("m[N=2]", abs(d2.m - 1 / np.sqrt(17)), 1e-12))
    d3 = solve_constraints(example_spec(3))
    # reference values, real and imaginary parts, to their printed digits
    re = [["-0.618461", "0.738925", "0.738925"], ["0.774004", "1.10235", "0.774004"],
          ["-0.195438", "-1.03355", "-0.614496"]]
    im = [["-1.04500", "-0.437318", "-0.437318"], ["0.779477", "-1.09461", "0.779477"],
          ["-1.09476", "0.410442", "-0.342159"]]
    worst = 0.0
    for j in range(3):
        for c in range(3):
            for got, txt in ((d3.X[j, c].real, re[j][c]), (d3.X[j, c].imag, im[j][c])):
                worst = max(worst, abs(got - float(txt)) / digits_tol(txt))
    checks.append(("X[N=3]/last-digit", worst, 1.0))
    checks.append(("m[N=3]", abs(d3.m - 0.493378), 5e-7))
    record(1, "constraint reproduction", checks)


def test_c02_one_soliton_velocity():
    k = DEFAULT.kappa
    m = np.sqrt(2 / 3)
    st = CMState.from_physical([0.75j], [m / (4 * k) * np.array([-np.sqrt(2) * 1j, 1, 1])], [0, 0, m])
    v = pole_velocity(st, 0)
    record(2, "one-soliton velocity", [("|v-sqrt(1/3)|", abs(v.real - np.sqrt(1 / 3)), 1e-12),
                                       ("|Im v|", abs(v.imag), 1e-14)])


def test_c03_exact_solution_gate(trajectories):
    checks = []
    for n, tr in trajectories.items():
        checks.append((f"t0[N={n}]", pde_residual_analytic(example_state(n), XS), 1e-10))
        checks.append((f"traj[N={n}]", max(pde_residual_analytic(st, XS) for st in tr.states()[::5]), 1e-8))
    record(3, "exact-solution gate", checks)


def test_c04_norm_constraint(trajectories):
    checks = []
    for n, tr in trajectories.items():
        worst = 0.0
        for st in tr.states()[::5]:
            u, v = eval_fields(st, XS)
            worst = max(worst, np.abs(np.einsum("xi,xi->x", u, u) - 1).max(), np.abs(np.einsum("xi,xi->x", v, v) - 1).max())
        checks.append((f"N={n}", worst, 1e-10))
    record(4, "norm constraint", checks)


def test_c05_conservation(trajectories):
    tr = trajectories[3]
    mon = conserved_monitors(tr)
    S = np.array([total_spin(st) for st in tr.states()])
    sts = tr.states()[::125]
    quadS = spin_conservation_check(sts, [grid_for_state(s, 8192, min_window=40.0) for s in sts])
    record(5, "conservation", [
        ("E_rel", mon["energy_rel_drift"], 1e-8),
        ("sum s+", mon["spin_sum_plus_drift"], 1e-8),
        ("sum s-", mon["spin_sum_minus_drift"], 1e-8),
        ("S closed", np.abs(S - S[0]).max(), 1e-8),
        ("S quadrature", quadS["drift"], 1e-8),
    ])


def test_c06_collision_times(trajectories):
    ev = detect_collisions(trajectories[3])
    times = sorted(e["t"] for e in ev)
    reference = [(1.03, 0.05), (3.30, 0.05), (15.01, 0.10)]
    checks = []
    for t_ref, tol in reference:
        gap = min((abs(t - t_ref) for t in times), default=np.inf)
        checks.append((f"t={t_ref}", gap, tol))
    print(f"  detected events: {[(e['pair'], round(e['t'], 3)) for e in ev]}")
    record(6, "collision times", checks)


def _quad_line(f, lo, hi):
    return quad(f, lo, hi, limit=500, epsabs=1e-13, epsrel=1e-13)[0]


def test_c07_energy_consistency():
    checks = []
    for n in (1, 2, 3):
        st = example_state(n)
        c = st.a_plus.real.mean()
        cuts = np.unique(np.concatenate([[c - 30, c + 30], st.a_plus.real]))
        f = lambda x: float(np.sum(energy_density(st, x)))  # noqa: E731
        Eq = sum(_quad_line(f, lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]))
        E = total_energy(st)
        checks.append((f"quad[N={n}]", abs(Eq - E) / abs(E), 1e-6))
    worst_f, worst_r, worst_split = 0.0, 0.0, 0.0
    for aI in (0.6, 0.75, 1.25):
        g = lambda x: float(profile_f(x, aI, DEFAULT))  # noqa: E731
        worst_f = max(worst_f, abs(_quad_line(g, -60, 0) + _quad_line(g, 0, 60) - 1))
        spec = SolitonSpec(N0, [1j * aI], [AX1])
        d = one_soliton_diagnostics(solve_constraints(spec).to_state(spec))
        worst_r = max(worst_r, abs(d["energy"] - np.pi * d["radius"] ** 2))
        worst_split = max(worst_split, abs(d["channel_split"] - 2 * (1 - aI)))
    checks += [("int f", worst_f, 1e-8), ("E1-piR^2", worst_r, 1e-10), ("split", worst_split, 1e-10)]
    record(7, "energy consistency", checks)


def test_c08_operator_identities():
    rng = np.random.default_rng(8)
    g = Grid(40.0, 4096)
    F = rng.standard_normal((g.n, 2))
    eig = 0.0
    for _ in range(10):
        r = int(rng.choice([-1, 1]))
        a, b = (rng.uniform(-12, 12) + 1j * r * rng.uniform(0.6, 1.4) for _ in range(2))
        eig = max(eig, eigen_relation_residual(a, b, r, DEFAULT, g))
    P = rng.uniform(-10, 10, (1000, 2))
    cot = cotlar_residual(P[:, 0], P[:, 1])
    y = rng.uniform(-20, 20, 1000)
    ids = multiplier_identities(y, DEFAULT, dps=50)
    orders = expansion_order()
    record(8, "operator identities", [
        ("T^2+I", square_residual(F[:, 0], F[:, 1], DEFAULT, g), 1e-10),
        ("eigen", eig, 1e-6),
        *((f"cotlar{i + 1}", np.max(c), 1e-12) for i, c in enumerate(cot)),
        ("ihf", max(ids["ihf_sum"].max(), ids["ihf_difference"].max()), 1e-13),
        ("order deficit", max(3.0 - min(orders["T_expansion"], orders["Tt_expansion"]), 0.0), 0.01),
    ])


@pytest.mark.slow
def test_c09_lax_structure():
    sc = load_config("three_soliton")
    _, _, state = initial_state(sc)
    rep = lax_report(sc, state)
    print(f"  lax grid n={rep['n_points']}, times {rep['times']}")
    record(9, "Lax structure", [
        ("pseudo-adjoint", rep["pseudo_adjoint"]["value"], 1e-8),
        ("I2 identity", rep["I2_identity_rel"]["value"], 1e-3),
        ("I2 drift", rep["I2_drift"]["value"], 1e-3),
        ("I3 drift", rep["I3_drift"]["value"], 1e-3),
        ("eig drift", rep["eigenvalue_drift"]["value"], 1e-3),
    ])


def test_c10_properties():
    rng = np.random.default_rng(10)
    gauge = 0.0
    for n in (1, 2, 3):
        spec = example_spec(n)
        base = solve_constraints(spec)
        frames = [rotate_frame(*orthonormal_frame(ax), rng.uniform(0, 2 * np.pi)) for ax in spec.axes]
        gauge = max(gauge, np.abs(solve_constraints(spec, frames=frames).s - base.s).max())
    two = example_state(2)
    back = integrate(integrate(two, 5.0).state(1), 0.0)
    scale = np.maximum(np.abs(np.concatenate([two.a, two.s.ravel()])), 1.0)
    gap = np.abs(np.concatenate([back.a[-1] - two.a, (back.s[-1] - two.s).ravel()]))
    fd = 0.0
    for n in (1, 2, 3):
        st = example_state(n)
        h = 1e-5
        b, a = states_at(st, [-h, h])
        (ub, vb), (ua, va) = eval_fields(b, XS), eval_fields(a, XS)
        ut, vt = eval_Ut(st, XS)
        fd = max(fd, np.abs((ua - ub) / (2 * h) - ut).max(), np.abs((va - vb) / (2 * h) - vt).max())
    three = example_state(3)
    res = [newtonian_residual(integrate(three, 8 * h, t_eval=np.arange(9) * h)) for h in (4e-2, 2e-2)]
    ratio = res[0] / res[1]
    record(10, "property checks", [
        ("gauge", gauge, 1e-12),
        ("reverse/10tol", np.max(gap / scale) / (10 * RTOL), 1.0),
        ("Ut fd", fd, 1e-7),
        # halving h should quarter the residual
        ("newton |ratio-4|", abs(ratio - 4), 0.5),
    ])


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
