"""Periodic-grid Fourier multipliers for the coth/tanh integral operators.

Samples are laid out along axis 0; trailing axes (e.g. 3-vector components)
are transformed independently. Both multipliers send the k=0 mode to zero,
so grid results agree with real-line closed forms up to one additive
constant per component.
"""

from dataclasses import dataclass
from functools import cached_property

import mpmath
import numpy as np

from .errors import DegenerateArguments, WindowTooSmall
from .kernels import DEFAULT, Params, a_pair

EDGE_TOL = 1e-8
COTLAR_DPS = 50


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid x_m = c - L/2 + m L/n, m = 0..n-1 (c = ``center``)."""

    window: float
    n: int
    center: float = 0.0

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not self.window > 0:
            raise ValueError(f"window must be positive, got {self.window}")

    @property
    def dx(self):
        return self.window / self.n

    @cached_property
    def x(self):
        return self.center - 0.5 * self.window + self.dx * np.arange(self.n)

    @classmethod
    def around(cls, positions, pad, n, min_window=0.0):
        """Grid centred on ``positions`` with ``pad`` of room on both sides."""
        lo, hi = float(np.min(positions)), float(np.max(positions))
        # the last sample sits one step short of the periodic edge
        window = max(hi - lo + 2 * pad, min_window) * n / (n - 1)
        return cls(window=window, n=n, center=0.5 * (lo + hi) + 0.5 * window / n)

    @cached_property
    def k(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)


def coth_multiplier(k, p=DEFAULT):
    """i coth(k delta) with the k=0 entry set to 0."""
    k = np.asarray(k, dtype=float)
    out = np.zeros(k.shape, dtype=complex)
    nz = k != 0
    out[nz] = 1j / np.tanh(k[nz] * p.delta)
    return out


def csch_multiplier(k, p=DEFAULT):
    """i / sinh(k delta) with the k=0 entry set to 0; stable for large |k delta|."""
    k = np.asarray(k, dtype=float)
    out = np.zeros(k.shape, dtype=complex)
    nz = k != 0
    y = k[nz] * p.delta
    e = np.exp(-np.abs(y))
    out[nz] = 1j * np.sign(y) * 2.0 * e / (-np.expm1(-2.0 * np.abs(y)))
    return out


def sign_multiplier(k):
    """i sgn(k), the Hilbert-transform symbol."""
    return 1j * np.sign(np.asarray(k, dtype=float))


def _check_edges(f, check_edges, tol=EDGE_TOL):
    if not np.all(np.isfinite(f)):
        raise ValueError("input samples must be finite")
    if check_edges:
        gap = np.max(np.abs(f[0] - f[-1]))
        if gap > tol:
            raise WindowTooSmall(
                f"edge values differ by {gap:.3e} > {tol:g}; pass decaying data "
                "or enlarge the window"
            )


def _real_symbol(mult):
    # an odd symbol has no consistent value on the Nyquist mode; zero it (like
    # the zero mode) so real input maps to real output
    mult = mult.copy()
    if mult.size % 2 == 0:
        mult[mult.size // 2] = 0
    return mult


def _apply(f, mult, check_edges):
    f = np.asarray(f)
    _check_edges(f, check_edges)
    mult = _real_symbol(mult)
    shape = (-1,) + (1,) * (f.ndim - 1)
    return np.fft.ifft(np.fft.fft(f, axis=0) * mult.reshape(shape), axis=0)


def transform_T(f, p, grid, check_edges=True):
    """Apply T (symbol i coth(k delta)) along axis 0."""
    return _apply(f, coth_multiplier(grid.k, p), check_edges)


def transform_Tt(f, p, grid, check_edges=True):
    """Apply T-tilde (symbol i / sinh(k delta)) along axis 0."""
    return _apply(f, csch_multiplier(grid.k, p), check_edges)


def transform_script_T(f1, f2, p, grid, check_edges=True):
    """Matrix operator on a pair: (T f1 - Tt f2, Tt f1 - T f2)."""
    f1 = np.asarray(f1)
    f2 = np.asarray(f2)
    if f1.shape != f2.shape:
        raise ValueError("pair components must share shape")
    _check_edges(f1, check_edges)
    _check_edges(f2, check_edges)
    shape = (-1,) + (1,) * (f1.ndim - 1)
    mt = _real_symbol(coth_multiplier(grid.k, p)).reshape(shape)
    mtt = _real_symbol(csch_multiplier(grid.k, p)).reshape(shape)
    F1 = np.fft.fft(f1, axis=0)
    F2 = np.fft.fft(f2, axis=0)
    g1 = np.fft.ifft(mt * F1 - mtt * F2, axis=0)
    g2 = np.fft.ifft(mtt * F1 - mt * F2, axis=0)
    return g1, g2


def hilbert(f, grid, check_edges=True):
    """Hilbert transform (symbol i sgn k) along axis 0."""
    return _apply(f, sign_multiplier(grid.k), check_edges)


def resolved_part(f):
    """Drop the zero and Nyquist modes along axis 0 (where odd symbols vanish)."""
    f = np.asarray(f)
    shape = (-1,) + (1,) * (f.ndim - 1)
    keep = _real_symbol(np.ones(f.shape[0], dtype=complex))
    keep[0] = 0
    out = np.fft.ifft(np.fft.fft(f, axis=0) * keep.reshape(shape), axis=0)
    return out.real if np.isrealobj(f) else out


def subtract_mean(f):
    f = np.asarray(f)
    return f - f.mean(axis=0)


def multiplier_identities(k, p=DEFAULT, dps=None):
    """Residuals of the multiplier-level reductions at wavenumber(s) k != 0.

    Keys: ``ihf_sum`` (coth + csch = coth at half argument),
    ``ihf_difference`` (coth - csch = tanh at half argument), and
    ``T_expansion`` / ``Tt_expansion``: remainders of the small-delta
    expansions i/(k delta) + i k delta/3 and i/(k delta) - i k delta/6.

    In double precision the first two carry a rounding floor of about
    eps/|k delta| near k = 0; pass ``dps`` to evaluate in that many digits.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k == 0):
        raise DegenerateArguments("multiplier identities need k != 0")
    y = k * p.delta
    if dps is None:
        return _multiplier_terms(y, np.tanh, np.sinh, 1.0)
    out = {key: np.empty(y.shape) for key in ("ihf_sum", "ihf_difference", "T_expansion", "Tt_expansion")}
    with mpmath.workdps(dps):
        for idx in np.ndindex(y.shape):
            res = _multiplier_terms(mpmath.mpf(y[idx]), mpmath.tanh, mpmath.sinh, mpmath.mpf(1))
            for key, val in res.items():
                out[key][idx] = float(val)
    return out


def _multiplier_terms(y, tanh, sinh, one):
    coth = one / tanh(y)
    csch = one / sinh(y)
    return {
        "ihf_sum": abs(coth + csch - one / tanh(y / 2)),
        "ihf_difference": abs(coth - csch - tanh(y / 2)),
        "T_expansion": abs(coth - (one / y + y / 3)),
        "Tt_expansion": abs(csch - (one / y - y / 6)),
    }


def expansion_order(k=1.0, deltas=(0.1, 0.05, 0.025)):
    """Observed convergence orders of the small-delta expansions.

    Returns a dict mapping each expansion key to the least-squares slope of
    log(remainder) against log(delta).
    """
    logs = np.log(np.asarray(deltas, dtype=float))
    rem = {"T_expansion": [], "Tt_expansion": []}
    for d in deltas:
        res = multiplier_identities(k, Params(d))
        for key in rem:
            rem[key].append(float(res[key]))
    return {key: float(np.polyfit(logs, np.log(vals), 1)[0]) for key, vals in rem.items()}


def _cotlar_terms(p, q, ch, sh):
    d = p - q
    return [
        ch(p) * sh(d) * sh(q)
        - sh(p) * ch(d) * sh(q)
        - sh(p) * sh(d) * ch(q)
        + ch(p) * ch(d) * ch(q)
        - 1,
        sh(d) * sh(q) - ch(p) + ch(d) * ch(q),
        sh(p) * sh(q) - ch(p) * ch(q) + ch(d),
        sh(p) * sh(d) - ch(p) * ch(d) + ch(q),
    ]


def cotlar_residual(p_val, p_prime, dps=COTLAR_DPS):
    """Absolute residuals of the four cosh/sinh identities behind the product rule
    for the matrix operator.

    The individual products grow like exp(2 max|p|) and cancel, so double
    precision loses everything beyond |p| ~ 5; the sums are formed in
    ``dps``-digit arithmetic and rounded to float at the end. ``dps=None``
    evaluates in plain double precision.
    """
    p_val = np.asarray(p_val, dtype=float)
    q = np.asarray(p_prime, dtype=float)
    if np.any(p_val == 0) or np.any(q == 0) or np.any(p_val == q):
        raise DegenerateArguments("need p, p' and p - p' all nonzero")
    if dps is None:
        return [np.abs(r) for r in _cotlar_terms(p_val, q, np.cosh, np.sinh)]
    pb, qb = np.broadcast_arrays(p_val, q)
    out = np.empty((4,) + pb.shape)
    with mpmath.workdps(dps):
        for idx in np.ndindex(pb.shape):
            terms = _cotlar_terms(mpmath.mpf(pb[idx]), mpmath.mpf(qb[idx]), mpmath.cosh, mpmath.sinh)
            for i, t in enumerate(terms):
                out[(i,) + idx] = float(abs(t))
    return list(out)


def cotlar_operator_residual(F, G, p, grid):
    """Sup-norm of TF(FG) - (TF)G - F(TG) - T((TF)(TG)) for pairs F, G.

    ``F`` and ``G`` are (u, v) tuples of zero-mean periodic samples; the
    product is componentwise.
    """

    def sT(pair):
        return transform_script_T(pair[0], pair[1], p, grid, check_edges=False)

    def prod(a, b):
        return (a[0] * b[0], a[1] * b[1])

    TF = sT(F)
    TG = sT(G)
    lhs = sT(prod(F, G))
    rhs = [a + b + c for a, b, c in zip(prod(TF, G), prod(F, TG), sT(prod(TF, TG)))]
    # the line identity needs the singular symbol at k=0, which the circle sets
    # to zero; that leaves a constant offset, so compare zero-mean parts
    return max(float(np.max(np.abs(subtract_mean(lhs[i] - rhs[i])))) for i in range(2))


def eigen_relation_residual(a, b, r, p, grid):
    """Sup-norm of (matrix operator) D + r i D for D = A_r(x - a) - A_r(x - b).

    D decays at both ends, so the FFT result is anchored to vanish at the
    window edge (the zero mode is lost on the circle).
    """
    D = a_pair(grid.x - a, r, p) - a_pair(grid.x - b, r, p)
    g1, g2 = transform_script_T(D[0], D[1], p, grid, check_edges=False)
    g1, g2 = g1 - g1[0], g2 - g2[0]
    return float(max(np.abs(g1 + r * 1j * D[0]).max(), np.abs(g2 + r * 1j * D[1]).max()))


def square_residual(f1, f2, p, grid):
    """Sup-norm of (matrix operator)^2 F + F, relative, on the modes the grid resolves."""
    f1, f2 = resolved_part(f1), resolved_part(f2)
    g1, g2 = transform_script_T(f1, f2, p, grid, check_edges=False)
    h1, h2 = transform_script_T(g1, g2, p, grid, check_edges=False)
    scale = max(np.abs(f1).max(), np.abs(f2).max(), 1e-300)
    return float(max(np.abs(h1 + f1).max(), np.abs(h2 + f2).max()) / scale)
