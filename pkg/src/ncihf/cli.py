"""Batch front end: solve, simulate, verify, diagnose and limits subcommands.

Exit codes: 0 pass, 1 config error, 2 singular system, 3 strip exit,
4 verification failure.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .constraints import SolitonSpec, solve_constraints
from .dynamics import conserved_monitors, detect_collisions, integrate_window, states_at
from .errors import ConfigError, ConjugacyViolation, DegenerateArguments, NcihfError, SingularSystem, StripExit
from .fields import (
    asymptotic_diagnostics,
    energy_density,
    eval_fields,
    one_soliton_diagnostics,
    total_energy,
    total_spin,
    trapezoid_integral,
    _quad_step,
)
from .kernels import Params
from .spectral import (
    Grid,
    coth_multiplier,
    cotlar_residual,
    csch_multiplier,
    eigen_relation_residual,
    expansion_order,
    hilbert,
    multiplier_identities,
    sign_multiplier,
    square_residual,
    transform_T,
)
from .state import CMState, constraint_residuals_state
from .verification import (
    LAX_MAX_N,
    build_lax_matrix,
    compress,
    grid_for_state,
    hamiltonian_equivalence,
    i2_identity,
    isospectrality_drift,
    lax_traces,
    pde_residual_analytic,
    pde_residual_spectral,
    pseudo_adjoint_residual,
    spin_conservation_check,
)

log = logging.getLogger("ncihf")

EXIT_OK, EXIT_CONFIG, EXIT_SINGULAR, EXIT_STRIP, EXIT_VERIFY = 0, 1, 2, 3, 4
RESIDUAL_SPAN = 20.0  # analytic residuals are sampled on x/delta in [-SPAN, SPAN]
RESIDUAL_POINTS = 801


# ---------------------------------------------------------------- serialisation


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else repr(x)
    return obj


def write_json(path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def write_table(path, header, rows, fmt):
    """Write rows as CSV or as a JSON object of columns (``fmt`` in csv|json)."""
    path = path.with_suffix("." + fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [[float(v) for v in row] for row in rows]
    if fmt == "json":
        cols = {h: [row[i] for row in rows] for i, h in enumerate(header)}
        write_json(path, {"columns": header, "data": cols})
        return path
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) for v in row])
    return path


def gate(value, tol):
    """Residual entry with its tolerance and pass flag."""
    value = float(value)
    return {"value": value, "tol": float(tol), "pass": bool(np.isfinite(value) and value <= tol)}


def _all_pass(tree):
    if isinstance(tree, dict):
        if set(tree) == {"value", "tol", "pass"}:
            return tree["pass"]
        return all(_all_pass(v) for v in tree.values())
    if isinstance(tree, list):
        return all(_all_pass(v) for v in tree)
    return True


def _rel(a, b):
    scale = max(abs(b), 1e-300)
    return abs(a - b) / scale if b else abs(a)


# ------------------------------------------------------------------- pipeline


def build_spec(sc):
    return SolitonSpec(sc.n0, sc.poles, sc.axes, sc.params)


def initial_state(sc):
    """Dressed data, spec and the (possibly perturbed) initial state."""
    spec = build_spec(sc)
    data = solve_constraints(spec)
    state = data.to_state(spec, t=sc.t0)
    if sc.perturbation:
        s = state.s_plus.copy()
        pert = sc.perturbation
        s[pert["soliton"], pert["component"]] += pert["magnitude"]
        state = CMState.from_physical(state.a_plus, s, state.m0, state.params, t=sc.t0)
    return spec, data, state


def residual_xs(sc):
    d = sc.params.delta
    return np.linspace(-RESIDUAL_SPAN * d, RESIDUAL_SPAN * d, RESIDUAL_POINTS)


def _grid(sc, state, n=None):
    return grid_for_state(state, n or sc.n_points, min_window=sc.window)


def _trajectory(sc, state):
    return integrate_window(state, sc.t_start, sc.t_end, sc.n_outputs)


def _state_rows(t, state):
    row = [t]
    for a, s in zip(state.a_plus, state.s_plus):
        row += [a.real, a.imag]
        for c in s:
            row += [c.real, c.imag]
    row += list(state.m0.real)
    return row


def _state_header(n):
    head = ["t"]
    for j in range(n):
        head += [f"re_a{j}", f"im_a{j}"]
        for c in "xyz":
            head += [f"re_s{j}_{c}", f"im_s{j}_{c}"]
    return head + ["m0_x", "m0_y", "m0_z"]


def _state_dict(state):
    return {
        "t": state.t,
        "poles": list(state.a_plus),
        "spins": list(state.s_plus),
        "m0": state.m0.real,
        "delta": state.params.delta,
    }


# ------------------------------------------------------------------- commands


def cmd_solve(sc, out, fmt, seed):
    spec, data, state = initial_state(sc)
    res = constraint_residuals_state(state)
    tol = sc.tol("constraint")
    report = {
        "scenario": sc.name,
        "delta": sc.params.delta,
        "n0": sc.n0,
        "m": data.m,
        "m0": data.m0,
        "condition_number": data.condition_number,
        "solitons": [
            {"index": j, "pole": spec.poles[j], "n1": data.n1[j], "n2": data.n2[j], "n3": spec.axes[j],
             "X": data.X[j], "s": state.s_plus[j]}
            for j in range(spec.n)
        ],
        "residuals": {
            "null": gate(res["null"].max(initial=0.0), tol),
            "bracket": gate(res["bracket"].max(initial=0.0), tol),
            "norm": gate(res["norm"], tol),
        },
        "perturbed": bool(sc.perturbation),
    }
    report["pass"] = _all_pass(report["residuals"])
    write_json(out / "constraints.json", report)
    return EXIT_OK if report["pass"] else EXIT_VERIFY


def cmd_simulate(sc, out, fmt, seed):
    _, _, state = initial_state(sc)
    try:
        traj = _trajectory(sc, state)
    except StripExit as exc:
        write_json(out / "last_state.json", {"error": str(exc), "state": _state_dict(exc.last_state)})
        raise
    n = state.n_solitons
    write_table(out / "trajectory", _state_header(n), [_state_rows(traj.t[i], traj.state(i)) for i in range(len(traj))], fmt)
    events = detect_collisions(traj)
    write_json(out / "collisions.json", {"scenario": sc.name, "events": events})
    if sc.snapshot_times:
        snaps = states_at(state, sc.snapshot_times)
        for t, st in zip(sc.snapshot_times, snaps):
            _write_snapshot(out, sc, st, t, fmt)
    return EXIT_OK


def _write_snapshot(out, sc, st, t, fmt):
    g = _grid(sc, st, min(sc.n_points, 4096))
    u, v = eval_fields(st, g.x)
    head = ["x", "u_x", "u_y", "u_z", "v_x", "v_y", "v_z"]
    rows = np.column_stack([g.x, u.real, v.real])
    if st.physical and st.size:
        eu, ev = energy_density(st, g.x)
        head += ["eps_u", "eps_v"]
        rows = np.column_stack([rows, eu, ev])
    write_table(out / "snapshots" / f"t_{t / sc.params.delta:+09.3f}".replace(".", "p"), head, rows, fmt)


def verification_report(sc, seed=0):
    """All verification gates for one scenario; every entry carries its tolerance."""
    spec, data, state = initial_state(sc)
    tol = sc.tol
    rep = {"scenario": sc.name, "seed": seed}
    xs = residual_xs(sc)
    res = constraint_residuals_state(state)
    rep["constraints"] = {
        "null": gate(res["null"].max(initial=0.0), tol("constraint")),
        "bracket": gate(res["bracket"].max(initial=0.0), tol("constraint")),
        "norm": gate(res["norm"], tol("constraint")),
    }
    rep["pde_residual_analytic_t0"] = gate(pde_residual_analytic(state, xs), tol("residual_analytic_t0"))
    g0 = _grid(sc, state)
    rep["pde_residual_spectral_t0"] = gate(pde_residual_spectral(state, g0), tol("residual_spectral"))

    traj = _trajectory(sc, state)
    states = traj.states()
    worst_res, worst_norm = 0.0, 0.0
    for st in states:
        worst_res = max(worst_res, pde_residual_analytic(st, xs))
        u, v = eval_fields(st, xs)
        nu = np.abs(np.einsum("mi,mi->m", u, u) - 1).max()
        nv = np.abs(np.einsum("mi,mi->m", v, v) - 1).max()
        worst_norm = max(worst_norm, nu, nv)
    rep["trajectory"] = {
        "t_range": [sc.t_start, sc.t_end],
        "samples": len(traj),
        "pde_residual_analytic": gate(worst_res, tol("residual_analytic_traj")),
        "norm_constraint": gate(worst_norm, tol("norm")),
        "pairing": gate(traj.pairing_error(), tol("pairing")),
    }
    mon = conserved_monitors(traj)
    S = np.array([total_spin(st) for st in states]) if state.size else np.zeros((len(states), 3))
    rep["conservation"] = {
        "energy_rel_drift": gate(mon.get("energy_rel_drift", 0.0), tol("energy_drift")),
        "spin_sum_drift": gate(max(mon["spin_sum_plus_drift"], mon["spin_sum_minus_drift"]), tol("spin_sum_drift")),
        "total_spin_drift": gate(np.abs(S - S[0]).max(), tol("total_spin_drift")),
        "constraint_residual_max": gate(mon["constraint_residual_max"], tol("constraint")),
    }
    if state.size:
        h = _quad_step(state)
        d = sc.params.delta
        lo = state.a_plus.real.min() - 20 * d
        hi = state.a_plus.real.max() + 20 * d
        eq = trapezoid_integral(lambda x: np.sum(energy_density(state, x), axis=0), lo, hi, h)
        E = total_energy(state)
        rep["energy_quadrature_rel"] = gate(_rel(eq, E), tol("energy_quadrature"))
        heq = hamiltonian_equivalence(state, _grid(sc, state, min(sc.n_points, 1024)))
        rep["hamiltonian"] = {
            "closed_form": heq["closed_form"],
            "bilinear_vs_closed_rel": gate(heq["bilinear_vs_closed_rel"], tol("hamiltonian_closed")),
            "bilinear_vs_double_rel": gate(heq["bilinear_vs_double_rel"], tol("hamiltonian_double")),
        }
    spin_states = [state] + (states_at(state, [sc.t_start, sc.t_end]) if state.size else [])
    spin = spin_conservation_check(spin_states, [_grid(sc, st) for st in spin_states])
    rep["total_spin_quadrature"] = gate(spin["closed_vs_quadrature"], tol("total_spin_quadrature"))
    rep["lax"] = lax_report(sc, state, seed)
    rep["pass"] = _all_pass({k: v for k, v in rep.items() if k != "pass"})
    return rep, traj


def lax_report(sc, state, seed=0):
    tol = sc.tol
    times = sc.lax_times or [sc.t0]
    n = min(sc.lax_n_points, LAX_MAX_N)
    sts = states_at(state, times)
    grids = [_grid(sc, st, n) for st in sts]
    L0 = build_lax_matrix(sts[0], grids[0])
    out = {"times": times, "n_points": n, "pseudo_adjoint": gate(pseudo_adjoint_residual(L0), tol("lax_adjoint"))}
    I2 = lax_traces(L0, 2)[2]
    ref = i2_identity(sts[0]) if state.size else 0.0
    del L0
    out["I2"] = I2
    out["I2_closed_form"] = ref
    out["I2_identity_rel"] = gate(_rel(I2.real, ref) + abs(I2.imag) / max(abs(ref), 1.0), tol("i2_identity"))
    iso = isospectrality_drift(sts, grids, seed=seed)
    out["eigenvalues_t0"] = iso["spectra"][0]
    out["eigenvalue_drift"] = gate(iso["eigenvalue_drift"], tol("isospectral"))
    out["I2_drift"] = gate(iso["I2_drift"], tol("trace_drift"))
    out["I3_drift"] = gate(iso["I3_drift"], tol("trace_drift"))
    return out


def cmd_verify(sc, out, fmt, seed):
    rep, _ = verification_report(sc, seed)
    write_json(out / "verification.json", rep)
    return EXIT_OK if rep["pass"] else EXIT_VERIFY


def diagnostics_report(sc):
    _, _, state = initial_state(sc)
    times = sc.diagnose_times or [sc.t0]
    sts = states_at(state, times)
    snaps = []
    for t, st in zip(times, sts):
        entry = {"t": t}
        if not st.size:
            entry["vacuum"] = True
            snaps.append(entry)
            continue
        asym = asymptotic_diagnostics(st)
        entry.update(asym)
        Esum = sum(s["energy"] for s in asym["solitons"])
        entry["energy_partition_rel"] = gate(_rel(Esum, asym["total_energy"]), sc.tol("energy_quadrature"))
        if st.n_solitons == 1:
            one = one_soliton_diagnostics(st)
            entry["one_soliton"] = one
            entry["one_soliton_checks"] = {
                "energy_formula_rel": gate(_rel(one["energy"], one["energy_formula"]), 1e-10),
                "channel_split": gate(abs(one["channel_split"] - one["channel_split_formula"]), 1e-8),
            }
        snaps.append(entry)
    rep = {"scenario": sc.name, "snapshots": snaps}
    if len(snaps) >= 2 and all(s.get("separated") for s in (snaps[0], snaps[-1])):
        rep["asymptotic_match"] = _match_tables(snaps[0]["solitons"], snaps[-1]["solitons"])
    return rep, sts


def _match_tables(before, after, tol=1e-3):
    """Compare (v, E, R) tables up to relabelling; rows are matched by velocity."""
    key = lambda s: (s["velocity"], s["energy"], s["radius"])  # noqa: E731
    b = sorted(key(s) for s in before)
    a = sorted(key(s) for s in after)
    diff = float(np.abs(np.array(a) - np.array(b)).max()) if len(a) == len(b) else float("inf")
    return {"before": b, "after": a, "max_abs_difference": gate(diff, tol)}


def cmd_diagnose(sc, out, fmt, seed):
    rep, sts = diagnostics_report(sc)
    write_json(out / "diagnostics.json", rep)
    rows = []
    for t, st in zip(sc.diagnose_times or [sc.t0], sts):
        if not st.size:
            continue
        g = _grid(sc, st, min(sc.n_points, 4096))
        eu, ev = energy_density(st, g.x)
        rows += [[t, x, a, b] for x, a, b in zip(g.x, eu, ev)]
    write_table(out / "energy_profile", ["t", "x", "eps_u", "eps_v"], rows, fmt)
    return EXIT_OK


def limits_report(seed=0, window=40.0, n=4096):
    """Residual tables for the multiplier-level reductions and identities."""
    rng = np.random.default_rng(seed)
    rep = {"seed": seed}
    # decoupled half-wave limit: T -> Hilbert as delta grows
    g = Grid(window, n)
    f = np.sin(2 * np.pi * 3 * g.x / window) + 0.5 * np.cos(2 * np.pi * 7 * g.x / window)
    sweep = []
    for mult in (1.0, 10.0, 100.0, 1000.0):
        p = Params(mult * window)
        nz = g.k != 0
        m_gap = float(np.abs(coth_multiplier(g.k, p) - sign_multiplier(g.k))[nz].max())
        op_gap = float(np.abs(transform_T(f, p, g, check_edges=False) - hilbert(f, g, check_edges=False)).max())
        sweep.append({"delta_over_window": mult, "multiplier_gap": m_gap, "operator_gap": op_gap,
                      "csch_max": float(np.abs(csch_multiplier(g.k, p)).max())})
    last = sweep[-1]
    rep["hwm_limit"] = {
        "sweep": sweep,
        "multiplier_gap": gate(last["multiplier_gap"], 1e-9),
        "operator_gap": gate(last["operator_gap"], 1e-9),
        "coupling_multiplier": gate(last["csch_max"], 1e-9),
    }
    y = rng.uniform(-20, 20, 1000)
    y = y[y != 0]
    ids = multiplier_identities(y, Params(1.0), dps=50)
    rep["ihf_reduction"] = {
        "coth_plus_csch": gate(ids["ihf_sum"].max(), 1e-13),
        "coth_minus_csch": gate(ids["ihf_difference"].max(), 1e-13),
    }
    orders = expansion_order()
    rep["small_delta_expansion"] = {
        "deltas": [0.1, 0.05, 0.025],
        "T_order": orders["T_expansion"],
        "Tt_order": orders["Tt_expansion"],
        "T_order_deficit": gate(max(3.0 - orders["T_expansion"], 0.0), 0.05),
        "Tt_order_deficit": gate(max(3.0 - orders["Tt_expansion"], 0.0), 0.05),
    }
    P = rng.uniform(-10, 10, (1000, 2))
    P = P[(P[:, 0] != 0) & (P[:, 1] != 0) & (P[:, 0] != P[:, 1])]
    cot = cotlar_residual(P[:, 0], P[:, 1])
    rep["cotlar"] = {f"identity_{i + 1}": gate(np.max(c), 1e-12) for i, c in enumerate(cot)}
    p1 = Params(1.0)
    F = rng.standard_normal((n, 2))
    rep["square_minus_identity"] = gate(square_residual(F[:, 0], F[:, 1], p1, g), 1e-10)
    worst = 0.0
    for _ in range(20):
        r = int(rng.choice([-1, 1]))
        a, b = (rng.uniform(-10, 10) + 1j * r * rng.uniform(0.6, 1.4) for _ in range(2))
        worst = max(worst, eigen_relation_residual(a, b, r, p1, g))
    rep["eigen_relation"] = gate(worst, 1e-6)
    rep["pass"] = _all_pass({k: v for k, v in rep.items() if k != "pass"})
    return rep


def cmd_limits(sc, out, fmt, seed):
    rep = limits_report(seed)
    write_json(out / "limits.json", rep)
    return EXIT_OK if rep["pass"] else EXIT_VERIFY


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "diagnose": cmd_diagnose,
    "limits": cmd_limits,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="ncihf", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="scenario JSON file or bundled name (e.g. three_soliton)")
    ap.add_argument("--out", help="output directory (default: config outputs.directory or out/<name>)")
    ap.add_argument("--format", choices=["csv", "json"], help="table format")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized checks (UINT)")
    ap.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance by this factor")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed < 0:
        print("error: --seed must be a non-negative integer", file=sys.stderr)
        return EXIT_CONFIG
    if not args.tol_scale > 0:
        print("error: --tol-scale must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "limits" and not args.config:
            sc, name = None, "limits"
            out = Path(args.out or "out/limits")
            fmt = args.format or "csv"
        else:
            if not args.config:
                print("error: --config is required", file=sys.stderr)
                return EXIT_CONFIG
            sc = load_config(args.config, tol_scale=args.tol_scale)
            out = Path(args.out or sc.out_dir or f"out/{sc.name}")
            fmt = args.format or sc.fmt
        code = COMMANDS[args.command](sc, out, fmt, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateArguments, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularSystem, ConjugacyViolation) as exc:
        print(f"singular system: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except StripExit as exc:
        print(f"strip exit: {exc}", file=sys.stderr)
        return EXIT_STRIP
    except NcihfError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    status = "pass" if code == EXIT_OK else "FAIL"
    print(f"{args.command}: {status} (exit {code}) -> {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
