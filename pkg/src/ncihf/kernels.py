"""Hyperbolic special functions and the paired kernels built from them.

All functions accept scalars or numpy arrays and broadcast elementwise.
Evaluation goes through exponentials of ``-2|Re w|`` so that arguments
with large real part saturate instead of overflowing.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateArguments, PoleError

DEFAULT_POLE_TOL = 1e-12


@dataclass(frozen=True)
class Params:
    """Physical parameter set. Only ``delta`` is stored; ``kappa`` is derived."""

    delta: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise ValueError(f"delta must be positive and finite, got {self.delta}")

    @property
    def kappa(self):
        return np.pi / (2.0 * self.delta)


DEFAULT = Params()


def in_strip(z, r, p=DEFAULT):
    """Strict membership of ``z`` in the strip of chirality ``r`` (+1 or -1)."""
    y = r * np.imag(z)
    return (y > 0.5 * p.delta) & (y < 1.5 * p.delta)


def _check_poles(z, offset, p, tol):
    # poles of coth(kappa z) sit at 2i*delta*n; offset=delta shifts to the tanh lattice
    w = np.asarray(z, dtype=complex) - 1j * offset
    n = np.round(w.imag / (2.0 * p.delta))
    dist = np.abs(w - 2j * p.delta * n)
    if np.any(dist < tol * p.delta):
        bad = np.asarray(z).ravel()[np.argmin(dist.ravel())]
        raise PoleError(f"argument {bad} lies within {tol}*delta of a kernel pole")


def _exp_parts(z, p):
    """Return (sign, e, 1-e) with e = exp(-2*sign*kappa*z) and |e| <= 1."""
    w = p.kappa * np.asarray(z, dtype=complex)
    sign = np.where(w.real >= 0, 1.0, -1.0)
    x = -2.0 * sign * w
    return sign, np.exp(x), -np.expm1(x)


def alpha(z, p=DEFAULT, pole_tol=DEFAULT_POLE_TOL):
    """kappa * coth(kappa z)."""
    _check_poles(z, 0.0, p, pole_tol)
    sign, e, one_minus_e = _exp_parts(z, p)
    return p.kappa * sign * (1.0 + e) / one_minus_e


def alpha_tilde(z, p=DEFAULT, pole_tol=DEFAULT_POLE_TOL):
    """kappa * tanh(kappa z), equal to alpha(z + i delta)."""
    _check_poles(z, p.delta, p, pole_tol)
    sign, e, one_minus_e = _exp_parts(z, p)
    return p.kappa * sign * one_minus_e / (1.0 + e)


def pot_V(z, p=DEFAULT, pole_tol=DEFAULT_POLE_TOL):
    """kappa^2 / sinh^2(kappa z); equals -alpha'(z)."""
    _check_poles(z, 0.0, p, pole_tol)
    _, e, one_minus_e = _exp_parts(z, p)
    return p.kappa**2 * 4.0 * e / one_minus_e**2


def pot_Vt(z, p=DEFAULT, pole_tol=DEFAULT_POLE_TOL):
    """-kappa^2 / cosh^2(kappa z), equal to pot_V(z + i delta)."""
    _check_poles(z, p.delta, p, pole_tol)
    _, e, _ = _exp_parts(z, p)
    return -(p.kappa**2) * 4.0 * e / (1.0 + e) ** 2


def pot_V_prime(z, p=DEFAULT, pole_tol=DEFAULT_POLE_TOL):
    """Derivative of pot_V: V' = -2 alpha V."""
    return -2.0 * alpha(z, p, pole_tol) * pot_V(z, p, pole_tol)


def a_pair(z, r, p=DEFAULT, pole_tol=DEFAULT_POLE_TOL):
    """Paired kernel (alpha(z + r i delta/2), alpha(z - r i delta/2)).

    Returns an array with leading axis of length 2 (u and v channel).
    """
    h = 0.5j * r * p.delta
    z = np.asarray(z, dtype=complex)
    return np.stack([alpha(z + h, p, pole_tol), alpha(z - h, p, pole_tol)])


def d_a_pair(z, r, p=DEFAULT, pole_tol=DEFAULT_POLE_TOL):
    """z-derivative of :func:`a_pair`: -(V(z + r i delta/2), V(z - r i delta/2))."""
    h = 0.5j * r * p.delta
    z = np.asarray(z, dtype=complex)
    return -np.stack([pot_V(z + h, p, pole_tol), pot_V(z - h, p, pole_tol)])


def pair_shift(r, s, p=DEFAULT):
    """Imaginary offset (r - s) i delta / 2 entering pair interactions."""
    return 0.5j * (r - s) * p.delta


def identity_residuals(z, a, b, p=DEFAULT, pole_tol=DEFAULT_POLE_TOL):
    """Absolute residuals of the functional identities satisfied by the kernels.

    Returns a dict of arrays. The pair identities are maximised over all
    four chirality combinations (r, s).
    """
    z, a, b = (np.asarray(v, dtype=complex) for v in (z, a, b))
    if np.any(np.abs(a - b) < pole_tol * p.delta):
        raise DegenerateArguments("identity residuals need a != b")
    k2 = p.kappa**2
    idd = 1j * p.delta

    def dalpha(w):
        return -pot_V(w, p, pole_tol)

    al = lambda w: alpha(w, p, pole_tol)  # noqa: E731
    out = {
        "alpha_product": np.abs(
            al(z - a) * al(z - b) - (al(a - b) * (al(z - a) - al(z - b)) + k2)
        ),
        "alpha_shift": np.abs(al(z - idd) - al(z + idd)),
        "V_alpha_square": np.abs(pot_V(z, p, pole_tol) - (al(z) ** 2 - k2)),
        "alpha_dalpha": np.abs(
            al(z - a) * dalpha(z - b)
            - (-al(a - b) * dalpha(z - b) + dalpha(a - b) * (al(z - a) - al(z - b)))
        ),
    }
    prod = np.zeros(z.shape)
    square = np.zeros(z.shape)
    dprod = np.zeros(z.shape)
    for r in (1, -1):
        Ar = a_pair(z - a, r, p, pole_tol)
        square = np.maximum(
            square,
            np.abs(Ar * Ar + d_a_pair(z - a, r, p, pole_tol) - k2).max(axis=0),
        )
        for s in (1, -1):
            As = a_pair(z - b, s, p, pole_tol)
            dAs = d_a_pair(z - b, s, p, pole_tol)
            c = a - b + pair_shift(r, s, p)
            prod = np.maximum(
                prod, np.abs(Ar * As - (al(c) * (Ar - As) + k2)).max(axis=0)
            )
            dprod = np.maximum(
                dprod,
                np.abs(
                    Ar * dAs - (-al(c) * dAs - pot_V(c, p, pole_tol) * (Ar - As))
                ).max(axis=0),
            )
    out["pair_product"] = prod
    out["pair_square"] = square
    out["pair_derivative_product"] = dprod
    return out
