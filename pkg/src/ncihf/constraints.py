"""Admissible multi-soliton initial data from the linear constraint system.

Given a reference direction ``n0`` and, per soliton, a pole in the upper
strip and an axis ``n3``, the null spins and background vector are fixed by
one self-adjoint 2N x 2N complex linear solve.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConjugacyViolation, DegenerateArguments, SingularSystem
from .kernels import DEFAULT, Params, alpha_tilde, in_strip
from .state import CMState, constraint_residuals_state

log = logging.getLogger(__name__)

UNIT_TOL = 1e-12
COND_BOUND = 1e12
CONJ_TOL = 1e-10


@dataclass(frozen=True)
class SolitonSpec:
    """Free data: unit vector ``n0``, poles ``poles`` (N,), unit axes ``axes`` (N, 3)."""

    n0: np.ndarray
    poles: np.ndarray
    axes: np.ndarray
    params: Params = DEFAULT

    def __post_init__(self):
        n0 = np.asarray(self.n0, dtype=float).reshape(3)
        poles = np.asarray(self.poles, dtype=complex).reshape(-1)
        axes = np.asarray(self.axes, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "n0", n0)
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "axes", axes)
        if len(poles) != len(axes):
            raise ValueError("need one axis per pole")
        if abs(np.linalg.norm(n0) - 1) > UNIT_TOL:
            raise ValueError(f"n0 must be a unit vector, |n0| = {np.linalg.norm(n0)!r}")
        for j, ax in enumerate(axes):
            if abs(np.linalg.norm(ax) - 1) > UNIT_TOL:
                raise ValueError(f"axis {j} is not a unit vector")
        if not np.all(in_strip(poles, 1, self.params)):
            raise ValueError("every pole must satisfy delta/2 < Im a < 3 delta/2")
        d = self.params.delta
        for j in range(len(poles)):
            for k in range(j):
                if abs(poles[j] - poles[k]) <= 1e-10 * d:
                    raise DegenerateArguments(f"poles {k} and {j} coincide")

    @property
    def n(self):
        return len(self.poles)


@dataclass(frozen=True)
class DressedData:
    """Solver output: scaled spin directions ``X`` (bold X_j), spins ``s``,
    background ``m0 = m n0`` and the frames used."""

    X: np.ndarray
    s: np.ndarray
    m0: np.ndarray
    m: float
    n1: np.ndarray
    n2: np.ndarray
    condition_number: float

    def to_state(self, spec, t=0.0):
        return CMState.from_physical(spec.poles, self.s, self.m0, spec.params, t=t)


def orthonormal_frame(n3):
    """Deterministic (n1, n2) completing ``n3`` to a right-handed frame.

    n1 is the normalised part of e_z orthogonal to n3 (e_x if n3 is nearly
    parallel to e_z) and n2 = n3 x n1.
    """
    n3 = np.asarray(n3, dtype=float)
    ref = np.array([0.0, 0.0, 1.0])
    if abs(n3 @ ref) > 1 - 1e-8:
        ref = np.array([1.0, 0.0, 0.0])
    n1 = ref - (ref @ n3) * n3
    n1 /= np.linalg.norm(n1)
    return n1, np.cross(n3, n1)


def rotate_frame(n1, n2, phi):
    """Gauge rotation of a frame by angle phi about n3."""
    c, s = np.cos(phi), np.sin(phi)
    return n1 * c + n2 * s, n2 * c - n1 * s


def _frames(spec, frames):
    if frames is None:
        pairs = [orthonormal_frame(ax) for ax in spec.axes]
    else:
        pairs = list(frames)
    return np.array([f[0] for f in pairs]), np.array([f[1] for f in pairs])


def build_system(spec, frames=None):
    """Return (A, B, C, n12) of the stacked constraint system."""
    n1, n2 = _frames(spec, frames)
    n12 = n1 + 1j * n2
    p = spec.params
    a = spec.poles
    ac = a.conj()
    dots = n12.conj() @ n12.T  # n*_j . n_k
    cdots = n12.conj() @ n12.conj().T  # n*_j . n*_k
    A = -1j * dots * alpha_tilde(ac[:, None] - a[None, :], p) / p.kappa
    N = spec.n
    B = np.zeros((N, N), dtype=complex)
    for j in range(N):
        for k in range(N):
            if j != k:
                B[j, k] = 1j * cdots[j, k] / np.tanh(p.kappa * (ac[j] - ac[k]))
    C = 2.0 * (n12.conj() @ spec.n0)
    return A, B, C, n12


def stacked_matrix(A, B):
    return np.block([[A, B], [-B.conj(), -A.conj()]])


def solve_constraints(spec, frames=None, cond_bound=COND_BOUND, conj_tol=CONJ_TOL):
    """Solve for (X, X*) and assemble the dressed spin data."""
    if spec.n == 0:
        empty = np.zeros((0, 3))
        return DressedData(X=empty.astype(complex), s=empty.astype(complex), m0=spec.n0.copy(),
                           m=1.0, n1=empty, n2=empty, condition_number=1.0)
    A, B, C, n12 = build_system(spec, frames)
    M = stacked_matrix(A, B)
    rhs = np.concatenate([C, -C.conj()])
    # entries are O(1) by construction, so measure against max(sigma_max, 1):
    # a uniformly vanishing matrix (N=1 at Im a = delta) is then caught too
    sv = np.linalg.svd(M, compute_uv=False)
    cond = float(max(sv[0], 1.0) / sv[-1]) if sv[-1] > 0 else float("inf")
    if not np.isfinite(cond) or cond > cond_bound:
        raise SingularSystem(
            f"constraint matrix is singular (condition number {cond:.3e})", cond
        )
    lu = sla.lu_factor(M)
    sol = sla.lu_solve(lu, rhs)
    sol = sol + sla.lu_solve(lu, rhs - M @ sol)
    N = spec.n
    X, Xc = sol[:N], sol[N:]
    gap = float(np.max(np.abs(Xc - X.conj()))) if N else 0.0
    if gap > conj_tol:
        raise ConjugacyViolation(f"solution halves are not conjugate (gap {gap:.3e})")
    Xv = X[:, None] * n12
    tot_im = Xv.imag.sum(axis=0)
    m = 1.0 / np.sqrt(1.0 + tot_im @ tot_im)
    s = (m / (2.0 * spec.params.kappa)) * Xv
    n1, n2 = _frames(spec, frames)
    log.debug("constraint solve N=%d cond=%.3e m=%.12g", N, cond, m)
    return DressedData(X=Xv, s=s, m0=m * spec.n0, m=float(m), n1=n1, n2=n2, condition_number=cond)


def constraint_residuals(data, spec):
    """Residual moduli (null spins, bracket conditions, norm) for the physical solution."""
    res = constraint_residuals_state(data.to_state(spec))
    N = spec.n
    return {"null": res["null"][:N], "bracket": res["bracket"][:N], "norm": res["norm"]}


def one_soliton_closed_form(n0, pole, n3, params=DEFAULT, tol=1e-12):
    """Analytic single-soliton spin and background.

    Valid also at Im a = delta, where the linear system is singular; there
    the limit from below is returned (m -> 0, static soliton).
    Returns (s, m0, m).
    """
    n0 = np.asarray(n0, dtype=float)
    n3 = np.asarray(n3, dtype=float)
    k = params.kappa
    cross = np.cross(n0, n3)
    c = np.linalg.norm(cross)
    if c < tol:
        raise DegenerateArguments("n3 parallel to n0 gives a vacuum, not a soliton")
    vec = (n0 @ n3) * n3 - n0 + 1j * cross
    theta = 2.0 * k * np.imag(pole)
    if abs(np.sin(theta)) < tol:
        m = 0.0
        mcot = -1.0 / c
    else:
        cot = np.cos(theta) / np.sin(theta)
        m = 1.0 / np.sqrt(1.0 + cot**2 * c**2)
        mcot = m * cot
    s = mcot / (2.0 * k) * vec
    return s, m * n0, m
