"""Singular pair integrals of the kernel ``|x - y|^q`` in one dimension.

Every energy matrix is built from two kinds of double integrals over
``R x R`` of zero-extended hat functions ``phi_i``:

* difference form ``1/2 iint (phi_i(x)-phi_i(y)) (phi_j(x)-phi_j(y)) k``
* product form ``-iint phi_i(x) phi_j(y) k``

both restricted to ``r_lo < |x - y| < r_hi``. Substituting ``y = x + z``
turns them into one-dimensional integrals against the autocorrelation of
the reference hat, which is the cubic B-spline ``Q``. With ``t = z / h``
and ``d = j - i``::

    difference:  h^(q+2) * int_clip t^q [2 Q(d) - Q(t - d) - Q(t + d)] dt
    product:    -h^(q+2) * int_clip t^q [Q(t - d) + Q(t + d)] dt

so the matrices are Toeplitz. The integrand is a cubic on each unit
interval ``[k, k+1]``. On ``[0, 1]`` the coefficients are kept as exact
rationals (the constant and linear parts of the difference form cancel
exactly, which is what makes the ``t^q`` singularity integrable) and the
monomials are integrated in closed form. Pieces with ``k >= 1`` are
analytic on a neighbourhood of the piece and use 16-point Gauss-Legendre.

:func:`quadrature_oracle` evaluates the same integrals by a separate route
(pointwise hat evaluations and adaptive QUADPACK quadrature) and is only
meant for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate

from .grid import Grid

__all__ = [
    "DivergenceError",
    "QuadratureError",
    "KernelExponent",
    "RangeClip",
    "FULL",
    "NEAR",
    "FAR",
    "antideriv1",
    "antideriv2",
    "power_integral",
    "pair_integral_pc",
    "toeplitz_column",
    "hat_pair_entry",
    "hat_product_entry",
    "quadrature_oracle",
]

GAUSS_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GAUSS_ORDER)


class DivergenceError(ArithmeticError):
    """The requested integral is infinite."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach its tolerance."""

    def __init__(self, msg, estimate=None, error=None):
        super().__init__(msg)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class KernelExponent:
    """Fractional order ``s`` of the kernel ``|z|^(-1-2s)``."""

    s: float

    def __post_init__(self):
        if not (0.0 <= self.s < 1.0):
            raise ValueError(f"fractional order must lie in [0, 1), got {self.s}")

    @property
    def q(self) -> float:
        return -1.0 - 2.0 * self.s


@dataclass(frozen=True)
class RangeClip:
    """Restriction ``r_lo < |x - y| < r_hi``."""

    r_lo: float = 0.0
    r_hi: float = math.inf

    def __post_init__(self):
        if not (self.r_lo >= 0 and self.r_hi > self.r_lo):
            raise ValueError(f"invalid clip [{self.r_lo}, {self.r_hi}]")


FULL = RangeClip()
NEAR = RangeClip(0.0, 1.0)
FAR = RangeClip(1.0, math.inf)


def _check_q(q):
    if math.isnan(q):
        raise ValueError("q is NaN")


def antideriv2(q: float, t: float) -> float:
    """Second antiderivative of ``t^q`` used by :func:`pair_integral_pc`.

    ``t^(q+2)/((q+1)(q+2))`` with the branches ``t ln t - t`` (``q = -1``)
    and ``-ln t`` (``q = -2``).
    """
    _check_q(q)
    if math.isnan(t) or t < 0:
        raise ValueError(f"antideriv2 needs t >= 0, got {t}")
    if q == -1.0:
        return 0.0 if t == 0 else t * math.log(t) - t
    if q == -2.0:
        if t == 0:
            raise DivergenceError("-ln t diverges at t = 0")
        return -math.log(t)
    if t == 0:
        if q + 2 < 0:
            raise DivergenceError(f"t^{q + 2} diverges at t = 0")
        return 0.0
    return t ** (q + 2) / ((q + 1) * (q + 2))


def antideriv1(q: float, t: float) -> float:
    """First antiderivative of ``t^q`` (``ln t`` for ``q = -1``)."""
    _check_q(q)
    if math.isnan(t) or t < 0:
        raise ValueError(f"antideriv1 needs t >= 0, got {t}")
    if q == -1.0:
        if t == 0:
            raise DivergenceError("ln t diverges at t = 0")
        return math.log(t)
    if t == 0:
        if q + 1 < 0:
            raise DivergenceError(f"t^{q + 1} diverges at t = 0")
        return 0.0
    return t ** (q + 1) / (q + 1)


def power_integral(p, a, b):
    """``int_a^b t^p dt`` for ``0 <= a <= b <= inf``, vectorised over ``a, b``.

    The difference ``(b^(p+1) - a^(p+1))/(p+1)`` is evaluated through
    ``expm1`` so it stays accurate as ``p`` crosses ``-1``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    e = p + 1.0
    out = np.zeros(np.broadcast(a, b).shape)
    a, b = np.broadcast_to(a, out.shape), np.broadcast_to(b, out.shape)
    live = b > a
    if not np.any(live):
        return out
    if np.any(live & (a == 0)) and e <= 0:
        raise DivergenceError(f"int_0 t^{p} dt diverges")
    if np.any(live & np.isinf(b)) and e >= 0:
        raise DivergenceError(f"int^inf t^{p} dt diverges")
    with np.errstate(divide="ignore", invalid="ignore"):
        zero_a = live & (a == 0)
        out[zero_a] = b[zero_a] ** e / e
        inf_b = live & np.isinf(b) & (a > 0)
        out[inf_b] = -(a[inf_b] ** e) / e
        mid = live & (a > 0) & np.isfinite(b)
        lg = np.log(b[mid] / a[mid])
        if e == 0:
            out[mid] = lg
        else:
            out[mid] = a[mid] ** e * np.expm1(e * lg) / e
    return out


def pair_integral_pc(gap: float, h: float, q: float, clip: RangeClip = FULL) -> float:
    """``iint_{I x I'} |x - y|^q`` for two length-``h`` intervals ``gap`` apart.

    Unclipped this is ``Psi(gap+2h) - 2 Psi(gap+h) + Psi(gap)`` with
    ``Psi = antideriv2``. With a clip the distance variable ``z`` is limited
    to ``[max(gap, r_lo), min(gap + 2h, r_hi)]`` and the triangular overlap
    length is integrated piece by piece.
    """
    _check_q(q)
    if not (gap >= 0 and h > 0):
        raise ValueError("need gap >= 0 and h > 0")
    lo, hi = max(gap, clip.r_lo), min(gap + 2 * h, clip.r_hi)
    if hi <= lo:
        return 0.0
    if gap == 0 and lo == 0 and q <= -2:
        raise DivergenceError(
            f"adjacent intervals: iint |x-y|^{q} diverges (q <= -2)")
    if clip == FULL or (lo == gap and hi == gap + 2 * h):
        return antideriv2(q, gap + 2 * h) - 2 * antideriv2(q, gap + h) + antideriv2(q, gap)
    # overlap length: z - gap on [gap, gap+h], gap + 2h - z on [gap+h, gap+2h]
    total = 0.0
    for za, zb, c0, c1 in ((gap, gap + h, -gap, 1.0), (gap + h, gap + 2 * h, gap + 2 * h, -1.0)):
        a, b = max(za, lo), min(zb, hi)
        if b > a:
            # c0 vanishes on the contact piece, where t^q alone need not be integrable
            if c0 != 0.0:
                total += c0 * float(power_integral(q, a, b))
            total += c1 * float(power_integral(q + 1, a, b))
    return total


# ----------------------------------------------------------------------------
# cubic B-spline autocorrelation of the reference hat

def _bspline(t):
    """``Q(t) = int Lambda(x) Lambda(x + t) dx`` for the unit hat ``Lambda``."""
    a = np.abs(np.asarray(t, dtype=float))
    return np.where(a <= 1, 2.0 / 3.0 - a * a + 0.5 * a ** 3,
                    np.where(a <= 2, (2.0 - a) ** 3 / 6.0, 0.0))


def _poly_mul(p, r):
    out = [Fraction(0)] * (len(p) + len(r) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(r):
            out[i + j] += a * b
    return out


def _poly_pow(p, k):
    out = [Fraction(1)]
    for _ in range(k):
        out = _poly_mul(out, p)
    return out


def _bspline_poly_on_unit(shift):
    """Exact coefficients in ``t`` of ``Q(t + shift)`` for ``t in [0, 1]``."""
    shift = Fraction(shift)
    mid = shift + Fraction(1, 2)
    # |t + shift| as a linear polynomial in t on [0, 1]
    sign = 1 if mid > 0 else -1
    absu = [sign * shift, Fraction(sign)]
    am = abs(mid)
    if am <= 1:
        poly = [Fraction(2, 3)] + [Fraction(0)] * 3
        sq = _poly_pow(absu, 2)
        cu = _poly_pow(absu, 3)
        for k, c in enumerate(sq):
            poly[k] -= c
        for k, c in enumerate(cu):
            poly[k] += c / 2
        return poly
    if am <= 2:
        two_minus = [2 - absu[0], -absu[1]]
        return [c / 6 for c in _poly_pow(two_minus, 3)]
    return [Fraction(0)] * 4


@lru_cache(maxsize=None)
def _first_piece_coeffs(d: int, form: str):
    """Exact cubic coefficients of the reduced integrand on ``t in [0, 1]``."""
    qm = _bspline_poly_on_unit(-d)
    qp = _bspline_poly_on_unit(d)
    qp += [Fraction(0)] * (4 - len(qp))
    qm += [Fraction(0)] * (4 - len(qm))
    if form == "difference":
        q_d = Fraction(2, 3) - d * d + Fraction(d ** 3, 2) if d <= 1 else (
            Fraction((2 - d) ** 3, 6) if d <= 2 else Fraction(0))
        c = [-(a + b) for a, b in zip(qm, qp)]
        c[0] += 2 * q_d
        assert c[0] == 0 and c[1] == 0
    else:
        c = [-(a + b) for a, b in zip(qm, qp)]
    return tuple(float(x) for x in c)


def _reduced_integrand(t, d, form):
    if form == "difference":
        return 2.0 * _bspline(d) - _bspline(t - d) - _bspline(t + d)
    return -(_bspline(t - d) + _bspline(t + d))


def toeplitz_column(h: float, n: int, s: float, clip: RangeClip = FULL,
                    form: str = "difference") -> np.ndarray:
    """Entries for index offsets ``d = 0..n-1`` of a hat-pair matrix.

    Parameters
    ----------
    h : float
        Grid spacing.
    n : int
        Number of offsets.
    s : float
        Fractional order in ``[0, 1)``.
    clip : RangeClip
        Interaction range.
    form : {"difference", "product"}

    Raises
    ------
    DivergenceError
        If the clipped integral is infinite (``s = 0`` without an upper
        clip for the difference form, or a product form reaching ``|z| = 0``).
    """
    if form not in ("difference", "product"):
        raise ValueError(f"unknown form {form!r}")
    q = KernelExponent(s).q
    rlo, rhi = clip.r_lo / h, clip.r_hi / h
    d = np.arange(n)
    col = np.zeros(n)

    # piece [0, 1]: closed form with exact coefficients (only d <= 2 is nonzero)
    a0, b0 = max(0.0, rlo), min(1.0, rhi)
    if b0 > a0:
        for dd in range(min(n, 3)):
            c = _first_piece_coeffs(dd, form)
            for m, cm in enumerate(c):
                if cm != 0.0:
                    col[dd] += cm * float(power_integral(q + m, a0, b0))

    # pieces [k, k+1], k >= 1: Gauss-Legendre
    ks = (d[:, None] + np.arange(-2, 2)[None, :])
    dd = np.broadcast_to(d[:, None], ks.shape)
    sel = ks >= 1
    ks, dd = ks[sel].astype(float), dd[sel]
    a = np.maximum(ks, rlo)
    b = np.minimum(ks + 1.0, rhi)
    live = b > a
    ks, dd, a, b = ks[live], dd[live], a[live], b[live]
    if len(a):
        half = 0.5 * (b - a)
        t = (a + b)[:, None] * 0.5 + half[:, None] * _GL_X[None, :]
        f = t ** q * _reduced_integrand(t, dd[:, None].astype(float), form)
        np.add.at(col, dd, half * (f @ _GL_W))

    # constant tail beyond t = d + 2 (difference form, d <= 1)
    if form == "difference":
        for dd in range(min(n, 2)):
            level = 2.0 * float(_bspline(dd))
            lo, hi = max(dd + 2.0, rlo), rhi
            if hi > lo:
                col[dd] += level * float(power_integral(q, lo, hi))
    return h ** (q + 2.0) * col


def _check_indices(grid: Grid, i: int, j: int):
    for k in (i, j):
        if not 1 <= k <= grid.n:
            raise IndexError(f"node index {k} outside 1..{grid.n}")


def hat_pair_entry(grid: Grid, i: int, j: int, kexp: KernelExponent,
                   clip: RangeClip = FULL) -> float:
    """``1/2 iint_clip (phi_i(x)-phi_i(y))(phi_j(x)-phi_j(y)) |x-y|^q dx dy``."""
    _check_indices(grid, i, j)
    d = abs(i - j)
    return float(toeplitz_column(grid.h, d + 1, kexp.s, clip, "difference")[d])


def hat_product_entry(grid: Grid, i: int, j: int, kexp: KernelExponent,
                      clip: RangeClip = FAR) -> float:
    """``-iint_clip phi_i(x) phi_j(y) |x-y|^q dx dy``."""
    _check_indices(grid, i, j)
    d = abs(i - j)
    return float(toeplitz_column(grid.h, d + 1, kexp.s, clip, "product")[d])


# ----------------------------------------------------------------------------
# independent oracle

_GL3_X, _GL3_W = np.polynomial.legendre.leggauss(3)


def _hat_shift_diff(x, w, c, h):
    """``phi(x) - phi(x + w)`` for a hat centred at ``c``; exact on a common linear piece."""
    u = (x - c) / h
    v = (x + w - c) / h
    pu = np.digitize(u, (-1.0, 0.0, 1.0))
    pv = np.digitize(v, (-1.0, 0.0, 1.0))
    slope = np.array([0.0, 1.0, -1.0, 0.0])
    lam = lambda r: np.maximum(0.0, 1.0 - np.abs(r))
    same = pu == pv
    return np.where(same, -slope[pu] * (w / h), lam(u) - lam(v))


def quadrature_oracle(grid: Grid, i: int, j: int, kexp: KernelExponent,
                      clip: RangeClip = FULL, form: str = "difference",
                      rtol: float = 1e-11, limit: int = 400) -> float:
    """Slow reference value for :func:`hat_pair_entry` / :func:`hat_product_entry`.

    The plane is cut along the diagonal; on the half ``y > x`` the variables
    ``(x, w = y - x)`` are used. For each ``w`` the ``x`` integral runs over
    the pieces cut out by the hat breakpoints ``B`` and their shifts ``B - w``
    with an exact 3-point Gauss rule. The ``w`` integral is adaptive QUADPACK,
    split at the kinks ``|b - b'|`` and at the clip radii; the segment at
    ``w = 0`` uses the algebraic-weight rule so the contact singularity is
    integrated exactly.
    """
    if form not in ("difference", "product"):
        raise ValueError(f"unknown form {form!r}")
    _check_indices(grid, i, j)
    h, q = grid.h, kexp.q
    ci, cj = grid.nodes[i - 1], grid.nodes[j - 1]
    B = np.unique(np.array([ci - h, ci, ci + h, cj - h, cj, cj + h]))

    def inner(w):
        pts = np.unique(np.concatenate((B, B - w)))
        pts = pts[(pts >= B[0] - w) & (pts <= B[-1])]
        a, b = pts[:-1], pts[1:]
        half = 0.5 * (b - a)
        x = (0.5 * (a + b))[:, None] + half[:, None] * _GL3_X[None, :]
        if form == "difference":
            f = _hat_shift_diff(x, w, ci, h) * _hat_shift_diff(x, w, cj, h)
        else:
            f = -(grid.hat(i, x) * grid.hat(j, x + w) + grid.hat(j, x) * grid.hat(i, x + w))
        return float(np.sum(half * (f @ _GL3_W)))

    def integrand(w):
        return w ** q * inner(w)

    kinks = np.unique(np.abs(B[:, None] - B[None, :]).ravel())
    # merge roundoff duplicates (and snap the spurious ones near 0) so every
    # segment is a genuine polynomial piece of inner(w)
    kinks = kinks[np.concatenate(([True], np.diff(kinks) > 1e-9 * h))]
    kinks[0] = 0.0
    w_max = kinks[-1]
    lo, hi = clip.r_lo, clip.r_hi
    cuts = [lo] + [k for k in kinks if lo < k < min(hi, w_max)] + [min(hi, w_max)]
    total, err = 0.0, 0.0
    if form == "product" and lo == 0:
        raise DivergenceError("product form is not integrable at |x - y| = 0")
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        if a == 0.0:
            # inner(w) = O(w^2) and polynomial below the first kink: integrate
            # inner(w) / w^2 against the algebraic weight w^(q + 2), q + 2 > -1
            d = abs(i - j)
            stiff = (2.0 / h) if d == 0 else (-1.0 / h if d == 1 else 0.0)  # limit at w = 0
            v, e = integrate.quad(lambda w: inner(w) / (w * w) if w > 0 else stiff, a, b,
                                  weight="alg",
                                  wvar=(q + 2.0, 0.0), epsabs=0.0, epsrel=rtol, limit=limit)
        else:
            v, e = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol, limit=limit)
        total += v
        err += e
    if hi > w_max:
        level = inner(w_max * 1.5 + h)  # constant beyond the last kink
        if level != 0.0:
            a = max(lo, w_max)
            if math.isinf(hi) and q >= -1:
                raise DivergenceError("unclipped tail diverges for s = 0")
            v, e = integrate.quad(lambda w: w ** q, a, hi, epsabs=0.0, epsrel=rtol, limit=limit)
            total += level * v
            err += abs(level) * e
    if err > 100 * rtol * abs(total) and err > 1e-300:
        raise QuadratureError(f"oracle did not converge: estimate {total}, error {err}",
                              estimate=total, error=err)
    return total
