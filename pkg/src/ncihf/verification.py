"""Independent correctness gates for exact solutions.

PDE residuals (closed form and FFT), two routes to the Hamiltonian, the
discretised Lax operator with its trace invariants and spectrum, and
quadrature of the total spin.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import WindowTooSmall
from .fields import (
    eval_fields,
    eval_scriptT_Ux_closed,
    eval_Ut,
    eval_Ux,
    total_energy,
    total_spin,
)
from .kernels import alpha, alpha_tilde, pot_V, pot_Vt
from .spectral import Grid, transform_script_T

log = logging.getLogger(__name__)

EDGE_PAD = 10.0
LAX_MAX_N = 2048


def _real_poles(state):
    return state.a_plus.real if state.size else np.zeros(0)


def check_window(state, grid, pad=EDGE_PAD):
    """Raise WindowTooSmall unless every pole sits ``pad`` delta inside the grid."""
    re = _real_poles(state)
    if not len(re):
        return
    d = state.params.delta
    lo, hi = grid.x[0], grid.x[-1]
    if re.min() - lo < pad * d or hi - re.max() < pad * d:
        raise WindowTooSmall(
            f"poles span [{re.min():.3f}, {re.max():.3f}] but the grid covers "
            f"[{lo:.3f}, {hi:.3f}]; need {pad} delta of room"
        )


def grid_for_state(state, n, pad=EDGE_PAD, min_window=0.0):
    re = _real_poles(state)
    if not len(re):
        re = np.zeros(1)
    return Grid.around(re, pad * state.params.delta + 1e-9, n, min_window)


def _wedge_residual(u, v, ut, vt, tu, tv):
    ru = ut - np.cross(u, tu)
    rv = vt - np.cross(v, tv)
    return float(max(np.abs(ru).max(initial=0.0), np.abs(rv).max(initial=0.0)))


def pde_residual_analytic(state, xs):
    """Sup-norm of U_t - U x (matrix operator) U_x with every term in closed form."""
    u, v = eval_fields(state, xs)
    ut, vt = eval_Ut(state, xs)
    tu, tv = eval_scriptT_Ux_closed(state, xs)
    return _wedge_residual(u, v, ut, vt, tu, tv)


def spectral_scriptT_Ux(state, grid):
    """Matrix operator applied to sampled U_x by FFT, anchored to vanish at the window edge."""
    ux, vx = eval_Ux(state, grid.x)
    tu, tv = transform_script_T(ux, vx, state.params, grid)
    return tu - tu[0], tv - tv[0]


def pde_residual_spectral(state, grid, pad=EDGE_PAD):
    """Like :func:`pde_residual_analytic` but with the operator applied by FFT."""
    check_window(state, grid, pad)
    u, v = eval_fields(state, grid.x)
    ut, vt = eval_Ut(state, grid.x)
    tu, tv = spectral_scriptT_Ux(state, grid)
    return _wedge_residual(u, v, ut, vt, tu, tv)


def hamiltonian_bilinear(state, grid):
    """-1/2 integral of U . (matrix operator) U_x using the closed-form transform."""
    u, v = eval_fields(state, grid.x)
    tu, tv = eval_scriptT_Ux_closed(state, grid.x)
    dens = -0.5 * (np.einsum("mi,mi->m", u, tu) - np.einsum("mi,mi->m", v, tv))
    return complex(dens.sum() * grid.dx)


def hamiltonian_double_integral(state, grid):
    """Double-integral form of the Hamiltonian on the grid (trapezoid in both variables).

    The V-weighted differences have the removable limit u_x^2 + v_x^2 on
    the diagonal; the Vt term is regular there.
    """
    x = grid.x
    p = state.params
    u, v = eval_fields(state, x)
    ux, vx = eval_Ux(state, x)
    d = x[None, :] - x[:, None]
    np.fill_diagonal(d, p.delta)
    V = pot_V(d, p).real
    np.fill_diagonal(V, 0.0)
    Vt = pot_Vt(x[None, :] - x[:, None], p).real
    uu, vv, uv = u @ u.T, v @ v.T, u @ v.T
    nu = np.einsum("mi,mi->m", u, u)
    nv = np.einsum("mi,mi->m", v, v)
    # (w(x') - w(x))^2 = |w'|^2 + |w|^2 - 2 w'.w ; index [x, x']
    same = (nu[None, :] + nu[:, None] - 2 * uu) + (nv[None, :] + nv[:, None] - 2 * vv)
    # (u(x') - v(x))^2 + (v(x') - u(x))^2
    cross = (nu[None, :] + nv[:, None] - 2 * uv.T) + (nv[None, :] + nu[:, None] - 2 * uv)
    integrand = V * same - Vt * cross
    diag = np.einsum("mi,mi->m", ux, ux) + np.einsum("mi,mi->m", vx, vx)
    integrand[np.diag_indices_from(integrand)] = diag - np.diag(Vt) * np.diag(cross)
    return complex(integrand.sum() * grid.dx**2 / (4 * np.pi))


def hamiltonian_equivalence(state, grid, pad=EDGE_PAD):
    """Both Hamiltonian routes, the closed-form energy and their discrepancies."""
    check_window(state, grid, pad)
    h1 = hamiltonian_bilinear(state, grid)
    h2 = hamiltonian_double_integral(state, grid)
    e = total_energy(state) if state.physical else float("nan")
    scale = max(abs(e), 1e-300) if state.physical else 1.0
    return {
        "bilinear": h1.real,
        "bilinear_imag": abs(h1.imag),
        "double_integral": h2.real,
        "closed_form": e,
        "bilinear_vs_double_rel": abs(h1 - h2) / max(abs(h1), 1e-300) if abs(h1) else abs(h2),
        "bilinear_vs_closed_rel": abs(h1.real - e) / scale,
        "nonnegative": bool(h1.real >= -1e-12 and h2.real >= -1e-12),
    }


def pauli(w):
    """Map 3-vectors (..., 3) to 2x2 matrices w . sigma."""
    w = np.asarray(w)
    out = np.empty(w.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = w[..., 2]
    out[..., 0, 1] = w[..., 0] - 1j * w[..., 1]
    out[..., 1, 0] = w[..., 0] + 1j * w[..., 1]
    out[..., 1, 1] = -w[..., 2]
    return out


@dataclass
class LaxMatrix:
    """Dense discretisation of the Lax operator.

    Index layout: channel (u, v) x grid point x spinor component, so the
    grading is diag(I, -I) over the two channel halves.
    """

    matrix: np.ndarray
    grid: Grid

    @property
    def grading(self):
        n2 = self.matrix.shape[0] // 2
        return np.concatenate([np.ones(n2), -np.ones(n2)])


def build_lax_matrix(state, grid, pad=EDGE_PAD):
    """Assemble (dx/pi) K(x_m, x_m') with the removable diagonal limit."""
    if grid.n > LAX_MAX_N:
        raise ValueError(f"Lax matrix limited to n <= {LAX_MAX_N} grid points")
    check_window(state, grid, pad)
    n, x, p = grid.n, grid.x, state.params
    u, v = eval_fields(state, x)
    ux, vx = eval_Ux(state, x)
    U, Vm, Ux, Vx = pauli(u), pauli(v), pauli(ux), pauli(vx)
    d = x[None, :] - x[:, None]  # x' - x, index [m, m']
    np.fill_diagonal(d, p.delta)
    A = alpha(d, p).real
    np.fill_diagonal(A, 0.0)
    At = alpha_tilde(x[None, :] - x[:, None], p).real

    M = np.empty((2, n, 2, 2, n, 2), dtype=complex)
    # block[m, s, m', t] = coef[m, m'] * (F[m'][s, t] - G[m][s, t])
    Fp = lambda F: F.transpose(1, 0, 2)[None, :, :, :]  # noqa: E731  -> [1, s, m', t]
    Gm = lambda G: G[:, :, None, :]  # noqa: E731  -> [m, s, 1, t]
    cf = lambda C: C[:, None, :, None]  # noqa: E731
    np.multiply(cf(A), Fp(U) - Gm(U), out=M[0, :, :, 0])
    np.multiply(cf(-A), Fp(Vm) - Gm(Vm), out=M[1, :, :, 1])
    np.multiply(cf(At), Gm(U) - Fp(Vm), out=M[0, :, :, 1])
    np.multiply(cf(At), Fp(U) - Gm(Vm), out=M[1, :, :, 0])
    idx = np.arange(n)
    M[0, idx, :, 0, idx, :] = Ux
    M[1, idx, :, 1, idx, :] = -Vx
    M *= grid.dx / np.pi
    return LaxMatrix(M.reshape(4 * n, 4 * n), grid)


def _row_blocks(N, size=512):
    for lo in range(0, N, size):
        yield slice(lo, min(lo + size, N))


def _adjoint_gap(M, g):
    """max |conj-transpose(M) - g M g| / max |M|, row block by row block."""
    top = float(np.abs(M).max(initial=0.0))
    if top == 0.0:
        return 0.0
    gap = 0.0
    for b in _row_blocks(M.shape[0]):
        blk = M[:, b].conj().T - g[b, None] * M[b, :] * g[None, :]
        gap = max(gap, float(np.abs(blk).max()))
    return gap / top


def pseudo_adjoint_residual(L):
    """Relative residual of conj-transpose(L) = Lambda L Lambda."""
    return _adjoint_gap(L.matrix, L.grading)


def plain_adjoint_residual(L):
    """Relative residual of conj-transpose(L) = L (expected to be large)."""
    return _adjoint_gap(L.matrix, np.ones(L.matrix.shape[0]))


def compress(L, rank_tol=1e-13, seed=0, block=64):
    """Orthonormal basis Q of the numerical range of L plus B = Q^H L Q.

    Nonzero eigenvalues of L coincide with those of B when L = Q Q^H L,
    which the adaptive randomized range finder enforces to ``rank_tol``
    relative accuracy.
    """
    M = L.matrix
    N = M.shape[0]
    rng = np.random.default_rng(seed)
    scale = np.linalg.norm(M, 2) if N <= 512 else max(
        float(np.abs(M[b]).sum(axis=1).max()) for b in _row_blocks(N)
    )
    if scale == 0.0:
        return np.zeros((N, 0), dtype=complex), np.zeros((0, 0), dtype=complex)
    Q = np.zeros((N, 0), dtype=complex)
    while Q.shape[1] < N:
        k = min(block, N - Q.shape[1])
        Om = rng.standard_normal((N, k)) + 1j * rng.standard_normal((N, k))
        Y = M @ Om
        Y -= Q @ (Q.conj().T @ Y)
        Y -= Q @ (Q.conj().T @ Y)
        if np.linalg.norm(Y, 2) <= rank_tol * scale * np.sqrt(N):
            break
        Qk, _ = np.linalg.qr(Y)
        Q = np.hstack([Q, Qk])
        block = min(2 * block, 512)
    B = Q.conj().T @ (M @ Q)
    return Q, B


def lax_traces(L, n_max=4, compressed=None):
    """I_n = tr(L^n) for n = 2..n_max (n_max <= 4).

    I_2 is computed directly as sum(L * L^T); higher traces use the
    compressed matrix. Returns {n: complex}.
    """
    if n_max > 4:
        raise ValueError("n_max must be <= 4")
    M = L.matrix
    out = {2: complex(sum(np.sum(M[b, :] * M[:, b].T) for b in _row_blocks(M.shape[0])))}
    if n_max >= 3:
        B = compressed[1] if compressed is not None else compress(L)[1]
        P = B @ B
        for k in range(3, n_max + 1):
            P = P @ B
            out[k] = complex(np.trace(P))
    return out


def leading_eigenvalues(L, count=20, compressed=None):
    """``count`` eigenvalues of largest modulus (zero-padded if the rank is smaller)."""
    B = compressed[1] if compressed is not None else compress(L)[1]
    ev = np.linalg.eigvals(B) if B.size else np.zeros(0, complex)
    ev = ev[np.argsort(-np.abs(ev), kind="stable")]
    if len(ev) < count:
        ev = np.concatenate([ev, np.zeros(count - len(ev), complex)])
    return ev[:count]


def i2_identity(state):
    """Closed-form value (8/pi) H - (4/pi^2) kappa^2 S^2."""
    k = state.params.kappa
    S = total_spin(state)
    return 8.0 / np.pi * total_energy(state) - 4.0 / np.pi**2 * k**2 * float(S @ S)


def match_spectra(ref, other):
    """Greedy nearest-neighbour pairing of ``other`` onto ``ref`` (ties by modulus)."""
    ref = np.asarray(ref)
    other = list(np.asarray(other))
    out = np.empty_like(ref)
    for i in np.argsort(-np.abs(ref), kind="stable"):
        dist = [abs(ref[i] - z) for z in other]
        best = min(range(len(other)), key=lambda q: (dist[q], -abs(other[q])))
        out[i] = other.pop(best)
    return out


def isospectrality_drift(states, grids, count=20, seed=0):
    """Track the ``count`` leading eigenvalues across snapshots.

    Drift is measured relative to the spectral radius of the first snapshot.
    Returns a dict with the per-snapshot spectra, traces and drifts.
    """
    spectra, traces = [], []
    for st, g in zip(states, grids):
        L = build_lax_matrix(st, g)
        comp = compress(L, seed=seed)
        spectra.append(leading_eigenvalues(L, count, comp))
        traces.append(lax_traces(L, 3, comp))
        del L, comp
    ref = spectra[0]
    radius = max(np.abs(ref).max(initial=0.0), 1e-300)
    matched = [match_spectra(ref, sp) for sp in spectra]
    drift = max((np.abs(m - ref).max(initial=0.0) for m in matched), default=0.0) / radius
    I2 = np.array([t[2] for t in traces])
    I3 = np.array([t[3] for t in traces])
    scale2 = max(abs(I2[0]), 1e-300)
    return {
        "spectra": np.array(matched),
        "eigenvalue_drift": float(drift) if np.abs(ref).max(initial=0.0) > 0 else 0.0,
        "spectral_radius": float(np.abs(ref).max(initial=0.0)),
        "I2": I2,
        "I3": I3,
        "I2_drift": float(np.abs(I2 - I2[0]).max() / scale2) if abs(I2[0]) else float(np.abs(I2).max()),
        # I_3 can vanish identically (spectrum symmetric under sign flip);
        # measure it on the natural scale |I_2|^(3/2)
        "I3_drift": float(np.abs(I3 - I3[0]).max() / max(scale2**1.5, 1e-300))
        if abs(I2[0])
        else float(np.abs(I3).max()),
    }


def spin_quadrature(state, grid):
    """Trapezoid integral of u - v over the grid."""
    u, v = eval_fields(state, grid.x)
    return (u - v).real.sum(axis=0) * grid.dx


def spin_conservation_check(states, grids, pad=EDGE_PAD):
    """Quadrature of the total spin at each snapshot against the closed form."""
    quad, closed = [], []
    for st, g in zip(states, grids):
        check_window(st, g, pad)
        quad.append(spin_quadrature(st, g))
        closed.append(total_spin(st) if st.physical else np.zeros(3))
    quad, closed = np.array(quad), np.array(closed)
    return {
        "quadrature": quad,
        "closed_form": closed,
        "drift": float(np.abs(quad - quad[0]).max()),
        "closed_vs_quadrature": float(np.abs(quad - closed).max()),
    }
