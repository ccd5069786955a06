"""Hyperbolic spin Calogero-Moser flow for the pole/spin data."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .errors import DegenerateSpin, StepFailure, StripExit
from .kernels import alpha, pair_shift, pot_V, pot_V_prime
from .state import CMState, constraint_residuals_state

log = logging.getLogger(__name__)

RTOL = 1e-12
ATOL = 1e-14
METHOD = "DOP853"
STRIP_SLACK = 1e-6
SPIN_TOL = 1e-14


def _pair_args(a, r, p):
    z = a[:, None] - a[None, :] + pair_shift(r[:, None], r[None, :], p)
    np.fill_diagonal(z, p.delta)  # dummy, off the pole lattice of alpha and V
    return z


def _velocities(a, s, r, m0, p):
    P = len(a)
    if P == 0:
        return np.zeros(0, complex), np.zeros((0, 3), complex)
    z = _pair_args(a, r, p)
    al = alpha(z, p)
    V = pot_V(z, p)
    np.fill_diagonal(al, 0.0)
    np.fill_diagonal(V, 0.0)
    coupling = (1 + np.outer(r, r)) * V
    sdot = -np.cross(s, coupling @ s)
    W = 1j * m0[None, :] - al @ (r[:, None] * s)
    norm = np.einsum("ji,ji->j", s.conj(), s)
    if np.any(np.abs(norm) < SPIN_TOL):
        raise DegenerateSpin("a spin has s*.s below 1e-14")
    adot = -r * np.einsum("ji,ji->j", np.cross(s.conj(), s), W) / norm
    return adot, sdot


def pole_velocity(state, j):
    """Velocity of pole j: -r_j (s*_j x s_j) . bracket_j / (s*_j . s_j)."""
    adot, _ = _velocities(state.a, state.s, state.r, state.m0, state.params)
    return adot[j]


def rhs_first_order(state):
    """Return (adot, sdot) for every particle."""
    return _velocities(state.a, state.s, state.r, state.m0, state.params)


def newtonian_acceleration(state):
    """-sum_{k != j} (1 + r_j r_k) s_j . s_k V'(a_j - a_k)."""
    a, s, r, p = state.a, state.s, state.r, state.params
    same = np.outer(r, r) > 0
    np.fill_diagonal(same, False)
    z = a[:, None] - a[None, :]
    z = np.where(same, z, p.delta)
    Vp = np.where(same, pot_V_prime(z, p), 0.0)
    return -2.0 * np.einsum("jk,jk->j", s @ s.T, Vp)


@dataclass
class Trajectory:
    """States sampled at increasing times."""

    t: np.ndarray
    a: np.ndarray  # (T, P)
    s: np.ndarray  # (T, P, 3)
    template: CMState
    collisions: list = None

    def __len__(self):
        return len(self.t)

    def state(self, i):
        return self.template.with_(t=float(self.t[i]), a=self.a[i], s=self.s[i])

    def states(self):
        return [self.state(i) for i in range(len(self))]

    def pairing_error(self):
        """Max deviation from the conjugate-pair layout (physical states only)."""
        if not self.template.physical:
            return 0.0
        n = self.template.n_solitons
        da = np.abs(self.a[:, n:] - self.a[:, :n].conj()).max(initial=0.0)
        ds = np.abs(self.s[:, n:] - self.s[:, :n].conj()).max(initial=0.0)
        return float(max(da, ds))


def _pack(a, s):
    return np.concatenate([a, s.ravel()])


def _unpack(y, P):
    return y[:P], y[P:].reshape(P, 3)


def _strip_margin(a, r, p):
    y = r * a.imag
    return np.minimum(y - 0.5 * p.delta, 1.5 * p.delta - y)


def _solve(state, t_end, t_eval, rtol, atol, method):
    P = state.size
    p = state.params
    r, m0 = state.r, state.m0

    def f(t, y):
        a, s = _unpack(y, P)
        adot, sdot = _velocities(a, s, r, m0, p)
        return _pack(adot, sdot)

    def exit_event(t, y):
        a = y[:P]
        return float(np.min(_strip_margin(a, r, p))) + STRIP_SLACK * p.delta

    exit_event.terminal = True
    exit_event.direction = -1

    y0 = _pack(state.a, state.s)
    sol = solve_ivp(
        f,
        (state.t, t_end),
        y0,
        method=method,
        t_eval=t_eval,
        rtol=rtol,
        atol=atol,
        events=exit_event if P else None,
        dense_output=True,
    )
    if sol.status == -1:
        raise StepFailure(f"integration failed at t={sol.t[-1] if len(sol.t) else state.t}: {sol.message}")
    if sol.status == 1:
        t_hit = float(sol.t_events[0][0])
        a, s = _unpack(sol.y_events[0][0], P)
        raise StripExit(
            f"a pole left its strip by more than {STRIP_SLACK}*delta at t={t_hit:.6g}",
            last_state=state.with_(t=t_hit, a=a, s=s),
        )
    return sol


def integrate(state, t_end, t_eval=None, rtol=RTOL, atol=ATOL, method=METHOD):
    """Advance ``state`` to ``t_end`` (either direction) and sample at ``t_eval``.

    ``t_eval`` defaults to [state.t, t_end]. Returns a :class:`Trajectory`.
    """
    if t_eval is None:
        t_eval = np.array([state.t, t_end])
    t_eval = np.asarray(t_eval, dtype=float)
    if t_end == state.t or state.size == 0:
        T = len(t_eval)
        return Trajectory(t_eval, np.tile(state.a, (T, 1)), np.tile(state.s, (T, 1, 1)), state)
    sol = _solve(state, t_end, t_eval, rtol, atol, method)
    P = state.size
    a = sol.y[:P].T
    s = sol.y[P:].T.reshape(len(sol.t), P, 3)
    return Trajectory(sol.t, a, s, state)


def integrate_window(state, t_start, t_end, n_outputs, rtol=RTOL, atol=ATOL, method=METHOD):
    """Integrate backward to ``t_start`` and forward to ``t_end`` from ``state.t``.

    Output times are ``n_outputs`` uniform points on [t_start, t_end].
    """
    times = np.linspace(t_start, t_end, n_outputs)
    t0 = state.t
    parts = []
    back = times[times < t0]
    fwd = times[times >= t0]
    if len(back):
        tr = integrate(state, back[0], t_eval=back[::-1], rtol=rtol, atol=atol, method=method)
        parts.append((tr.t[::-1], tr.a[::-1], tr.s[::-1]))
    if len(fwd):
        if fwd[-1] == t0:
            tr = integrate(state, t0, t_eval=fwd)
        else:
            tr = integrate(state, fwd[-1], t_eval=fwd, rtol=rtol, atol=atol, method=method)
        parts.append((tr.t, tr.a, tr.s))
    t = np.concatenate([q[0] for q in parts])
    a = np.concatenate([q[1] for q in parts])
    s = np.concatenate([q[2] for q in parts])
    return Trajectory(t, a, s, state)


def detect_collisions(traj, refine=True):
    """Local minima of the smallest pairwise |Re a_j - Re a_k| over physical poles.

    Returns a list of dicts with time, pair and separation. When ``refine``
    is set the minimum is located on a cubic interpolant of the samples.
    """
    tmpl = traj.template
    n = tmpl.n_solitons
    idx = np.arange(n) if tmpl.physical else np.flatnonzero(tmpl.r > 0)
    if len(idx) < 2:
        return []
    re = traj.a[:, idx].real
    pairs = [(i, j) for i in range(len(idx)) for j in range(i + 1, len(idx))]
    seps = np.stack([np.abs(re[:, i] - re[:, j]) for i, j in pairs], axis=1)
    dmin = seps.min(axis=1)
    events = []
    for m in range(1, len(dmin) - 1):
        if dmin[m] < dmin[m - 1] and dmin[m] <= dmin[m + 1]:
            q = int(np.argmin(seps[m]))
            i, j = pairs[q]
            t_c, d_c = traj.t[m], dmin[m]
            if refine:
                lo, hi = max(m - 2, 0), min(m + 3, len(dmin))
                tt = traj.t[lo:hi]
                coef = np.polyfit(tt - traj.t[m], seps[lo:hi, q], min(3, len(tt) - 1))
                res = minimize_scalar(
                    lambda u: np.polyval(coef, u),
                    bounds=(tt[0] - traj.t[m], tt[-1] - traj.t[m]),
                    method="bounded",
                )
                t_c, d_c = traj.t[m] + res.x, max(float(res.fun), 0.0)
            events.append(
                {"t": float(t_c), "pair": (int(idx[i]), int(idx[j])), "separation": float(d_c)}
            )
    return events


def newtonian_residual(traj):
    """Max |finite-difference a_jj - Newtonian acceleration| at interior samples."""
    if len(traj) < 5:
        raise ValueError("need at least 5 states")
    h = np.diff(traj.t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("newtonian_residual needs uniformly spaced samples")
    h = h[0]
    acc_fd = (traj.a[2:] - 2 * traj.a[1:-1] + traj.a[:-2]) / h**2
    worst = 0.0
    for i in range(1, len(traj) - 1):
        acc = newtonian_acceleration(traj.state(i))
        worst = max(worst, float(np.max(np.abs(acc_fd[i - 1] - acc), initial=0.0)))
    return worst


def conserved_monitors(traj):
    """Per-sample spin sums, energy and constraint residuals with their max drifts."""
    from .fields import total_energy

    r = traj.template.r
    plus = traj.s[:, r > 0].sum(axis=1)
    minus = traj.s[:, r < 0].sum(axis=1)
    out = {
        "t": traj.t,
        "spin_sum_plus": plus,
        "spin_sum_minus": minus,
        "spin_sum_plus_drift": float(np.abs(plus - plus[0]).max()),
        "spin_sum_minus_drift": float(np.abs(minus - minus[0]).max()),
    }
    cres = [constraint_residuals_state(st) for st in traj.states()]
    out["constraint_residual"] = np.array(
        [max(c["null"].max(initial=0), c["bracket"].max(initial=0), c["norm"]) for c in cres]
    )
    out["constraint_residual_max"] = float(out["constraint_residual"].max())
    if traj.template.physical:
        E = np.array([total_energy(st) for st in traj.states()])
        out["energy"] = E
        out["energy_rel_drift"] = float(np.abs(E - E[0]).max() / max(abs(E[0]), 1e-300))
    return out


def states_at(state, times, rtol=RTOL, atol=ATOL, method=METHOD):
    """States at arbitrary ``times`` (any order, either side of ``state.t``)."""
    times = np.asarray(times, dtype=float)
    out = [None] * len(times)
    t0 = state.t
    for side in (times < t0, times >= t0):
        idx = np.flatnonzero(side)
        if not len(idx):
            continue
        order = idx[np.argsort(np.abs(times[idx] - t0), kind="stable")]
        tt = times[order]
        tr = integrate(state, tt[-1], t_eval=tt, rtol=rtol, atol=atol, method=method)
        for q, i in enumerate(order):
            out[i] = tr.state(q)
    return out
