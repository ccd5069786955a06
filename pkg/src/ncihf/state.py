"""Spin-pole state shared by the solver, the flow and the field evaluators."""

from dataclasses import dataclass, field, replace

import numpy as np

from .kernels import DEFAULT, Params, alpha, pair_shift


@dataclass(frozen=True)
class CMState:
    """Poles ``a`` (shape (P,)), complex spins ``s`` (shape (P, 3)), chirality
    tags ``r`` (+1/-1), background ``m0`` and norm parameter ``rho``.

    ``physical=True`` marks the real-solution layout: the first half of the
    particles carry r=+1 and the second half are their complex conjugates.
    """

    a: np.ndarray
    s: np.ndarray
    r: np.ndarray
    m0: np.ndarray
    t: float = 0.0
    rho: complex = 1.0
    params: Params = field(default=DEFAULT)
    physical: bool = False

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=complex).reshape(-1))
        object.__setattr__(self, "s", np.asarray(self.s, dtype=complex).reshape(-1, 3))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=int).reshape(-1))
        object.__setattr__(self, "m0", np.asarray(self.m0, dtype=complex).reshape(3))
        if not (len(self.a) == len(self.s) == len(self.r)):
            raise ValueError("a, s and r must have matching lengths")
        if np.any(np.abs(self.r) != 1):
            raise ValueError("chirality tags must be +1 or -1")

    @classmethod
    def from_physical(cls, a_plus, s_plus, m0, params=DEFAULT, t=0.0):
        """Real-solution layout: (a, s, +) followed by (a*, s*, -)."""
        a_plus = np.asarray(a_plus, dtype=complex).reshape(-1)
        s_plus = np.asarray(s_plus, dtype=complex).reshape(-1, 3)
        n = len(a_plus)
        return cls(
            a=np.concatenate([a_plus, a_plus.conj()]),
            s=np.concatenate([s_plus, s_plus.conj()]),
            r=np.array([1] * n + [-1] * n),
            m0=np.real(np.asarray(m0, dtype=complex)).astype(complex),
            t=t,
            params=params,
            physical=True,
        )

    @property
    def size(self):
        return len(self.a)

    @property
    def n_solitons(self):
        """Number of physical solitons (half the particles in the real layout)."""
        return self.size // 2 if self.physical else self.size

    @property
    def a_plus(self):
        return self.a[: self.n_solitons] if self.physical else self.a[self.r > 0]

    @property
    def s_plus(self):
        return self.s[: self.n_solitons] if self.physical else self.s[self.r > 0]

    def with_(self, **kw):
        return replace(self, **kw)


def interaction_bracket(state, j):
    """i m0 - sum_{k != j} r_k s_k alpha(a_j - a_k + (r_j - r_k) i delta/2)."""
    p = state.params
    out = 1j * state.m0.astype(complex)
    for k in range(state.size):
        if k == j:
            continue
        z = state.a[j] - state.a[k] + pair_shift(state.r[j], state.r[k], p)
        out = out - state.r[k] * state.s[k] * alpha(z, p)
    return out


def constraint_residuals_state(state):
    """Residual moduli of the algebraic constraints on (a, s, m0).

    Returns a dict with ``null`` (|s_j . s_j|), ``bracket``
    (|s_j . bracket_j|) and ``norm`` (|m0^2 - kappa^2 (sum r_j s_j)^2 - rho^2|).
    """
    k = state.params.kappa
    null = np.abs(np.einsum("ji,ji->j", state.s, state.s))
    bracket = np.array(
        [abs(state.s[j] @ interaction_bracket(state, j)) for j in range(state.size)]
    )
    tot = (state.r[:, None] * state.s).sum(axis=0)
    norm = abs(state.m0 @ state.m0 - k**2 * (tot @ tot) - state.rho**2)
    return {"null": null, "bracket": bracket, "norm": float(norm)}
