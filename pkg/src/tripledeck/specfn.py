"""Airy function Ai and its derivative on the decay sector.

For ``|z| <= Z_SWITCH`` the Maclaurin series is summed in double-double
arithmetic.  Near the positive real axis the two sub-series grow like
``Bi`` while ``Ai`` decays, so in plain double precision the sum loses
roughly ``log10(Bi/Ai)`` digits (about 15 at ``|z| = 9``).  Carrying
about 32 digits keeps the result at full double accuracy up to the
switch.  Beyond the switch the optimally truncated asymptotic expansion
is used in ordinary double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, getcontext
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import PrecisionError, RefineRequest, SectorError

__all__ = [
    "AI0",
    "AIP0",
    "Z_SWITCH",
    "AiryEval",
    "RayIntegral",
    "ai",
    "ai_values",
    "ai_ray_integral",
    "ai0_closed_form",
    "aip0_closed_form",
    "ode_residual",
]

# Ai(0) = 1/(3^{2/3} Gamma(2/3)) and Ai'(0) = -1/(3^{1/3} Gamma(1/3)),
# to 50 significant digits.
_AI0_STR = "0.35502805388781723926006318600418317639797917419918"
_AIP0_STR = "-0.25881940379280679840518356018920396347909113835493"

AI0 = float(_AI0_STR)
AIP0 = float(_AIP0_STR)

Z_SWITCH = 8.5
SECTOR_LIMIT = math.pi / 3 - 0.01
MAX_ABS_Z = 1.0e4

_SERIES_MAX_TERMS = 120
_SERIES_RTOL = 1.0e-32


def ai0_closed_form() -> float:
    """Return ``1/(3^{2/3} Gamma(2/3))`` in double precision."""
    return 1.0 / (3.0 ** (2.0 / 3.0) * math.gamma(2.0 / 3.0))


def aip0_closed_form() -> float:
    """Return ``-1/(3^{1/3} Gamma(1/3))`` in double precision.

    Equivalent to ``-1/(3^{4/3} Gamma(4/3))``.
    """
    return -1.0 / (3.0 ** (1.0 / 3.0) * math.gamma(1.0 / 3.0))


@dataclass(frozen=True)
class AiryEval:
    """Value and derivative of Ai at a single point."""

    value: complex
    derivative: complex
    method_used: str


@dataclass(frozen=True)
class RayIntegral:
    """Result of integrating Ai along a ray.

    Attributes
    ----------
    value : complex
        Quadrature of Ai over ``[0, upper]`` along the ray.
    error : float
        Quadrature error estimate plus the analytic bound on the
        omitted tail ``[upper, inf)``.
    tail_bound : float
        The tail bound alone.
    """

    value: complex
    error: float
    tail_bound: float


# ---------------------------------------------------------------------------
# double-double primitives (vectorized, error-free transformations)

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(ah, al, bh, bl):
    s1, s2 = _two_sum(ah, bh)
    t1, t2 = _two_sum(al, bl)
    s2 = s2 + t1
    s1, s2 = _quick_two_sum(s1, s2)
    s2 = s2 + t2
    return _quick_two_sum(s1, s2)


def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    return _quick_two_sum(p, e)


class _DDComplex:
    """Complex numbers stored as double-double real and imaginary parts."""

    __slots__ = ("rh", "rl", "ih", "il")

    def __init__(self, rh, rl, ih, il):
        self.rh, self.rl, self.ih, self.il = rh, rl, ih, il

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z, dtype=complex)
        zero = np.zeros(z.shape)
        return cls(z.real.copy(), zero, z.imag.copy(), zero.copy())

    def __add__(self, other):
        rh, rl = _dd_add(self.rh, self.rl, other.rh, other.rl)
        ih, il = _dd_add(self.ih, self.il, other.ih, other.il)
        return _DDComplex(rh, rl, ih, il)

    def __mul__(self, other):
        a, b = _dd_mul(self.rh, self.rl, other.rh, other.rl)
        c, d = _dd_mul(self.ih, self.il, other.ih, other.il)
        rh, rl = _dd_add(a, b, -c, -d)
        a, b = _dd_mul(self.rh, self.rl, other.ih, other.il)
        c, d = _dd_mul(self.ih, self.il, other.rh, other.rl)
        ih, il = _dd_add(a, b, c, d)
        return _DDComplex(rh, rl, ih, il)

    def scale(self, hi, lo):
        """Multiply by the real double-double scalar ``hi + lo``."""
        rh, rl = _dd_mul(self.rh, self.rl, hi, lo)
        ih, il = _dd_mul(self.ih, self.il, hi, lo)
        return _DDComplex(rh, rl, ih, il)

    def to_complex(self):
        return (self.rh + self.rl) + 1j * (self.ih + self.il)

    def abs_approx(self):
        return np.hypot(self.rh, self.ih)


def _dd_from_decimal(text):
    getcontext().prec = 60
    d = Decimal(text)
    hi = float(d)
    lo = float(d - Decimal(hi))
    return hi, lo


def _dd_from_fraction(fr):
    hi = float(fr)
    lo = float(fr - Fraction(hi))
    return hi, lo


@lru_cache(maxsize=1)
def _series_tables():
    """Exact rational coefficients of the four sub-series, as double-doubles.

    With ``P_m = z^{3m}``::

        Ai  = Ai(0) * sum p_m P_m + Ai'(0) * z * sum q_m P_m
        Ai' = Ai(0) * z^2 * sum p_m/(3m+2) P_m + Ai'(0) * sum (3m+1) q_m P_m

    where ``p_m = p_{m-1}/((3m-1)(3m))`` and ``q_m = q_{m-1}/((3m)(3m+1))``.
    """
    p = Fraction(1)
    q = Fraction(1)
    rows = []
    for m in range(_SERIES_MAX_TERMS):
        if m > 0:
            p = p / ((3 * m - 1) * (3 * m))
            q = q / ((3 * m) * (3 * m + 1))
        rows.append(
            (
                _dd_from_fraction(p),
                _dd_from_fraction(q),
                _dd_from_fraction(p / (3 * m + 2)),
                _dd_from_fraction(q * (3 * m + 1)),
            )
        )
    return rows


def _ai_series(z):
    """Maclaurin series of Ai and Ai' in double-double arithmetic.

    Parameters
    ----------
    z : array_like of complex

    Returns
    -------
    value, derivative : ndarray of complex
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    zz = _DDComplex.from_complex(z)
    z3 = zz * zz * zz
    zero = np.zeros(z.shape)
    power = _DDComplex(np.ones(z.shape), zero, zero.copy(), zero.copy())
    sums = [_DDComplex(zero.copy(), zero.copy(), zero.copy(), zero.copy()) for _ in range(4)]
    absz3 = np.abs(z) ** 3
    mag = np.ones(z.shape)
    for m, coeffs in enumerate(_series_tables()):
        if m > 0:
            power = power * z3
            mag = mag * absz3
        for k in range(4):
            sums[k] = sums[k] + power.scale(*coeffs[k])
        # every later term is below the current one once |z|^3 < (3m)^2
        term = mag * (3 * m + 1) * coeffs[0][0]
        partial = np.maximum(np.maximum(sums[0].abs_approx(), sums[1].abs_approx()), 1e-300)
        if m > 2 and np.all(term <= _SERIES_RTOL * partial) and np.all(absz3 < (3 * m) ** 2):
            break
    else:
        raise PrecisionError("Airy series did not terminate within the term budget")

    c0 = _dd_from_decimal(_AI0_STR)
    c1 = _dd_from_decimal(_AIP0_STR)
    f_sum, g_sum, fp_sum, gp_sum = sums
    value = f_sum.scale(*c0) + (zz * g_sum).scale(*c1)
    deriv = (zz * zz * fp_sum).scale(*c0) + gp_sum.scale(*c1)
    value = value.to_complex()
    deriv = deriv.to_complex()
    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(deriv))):
        raise PrecisionError("overflow in Airy series")
    return value, deriv


@lru_cache(maxsize=1)
def _asymptotic_coefficients(n_terms=80):
    """Coefficients of the large-|z| expansions of Ai and Ai'.

    ``c_n = Gamma(3n + 1/2) / (9^n (2n)! Gamma(1/2))`` up to the common
    factor, generated by the ratio recurrence.  For Ai' the coefficients
    follow from differentiating the Ai expansion term by term.
    """
    c = [1.0]
    for n in range(1, n_terms):
        c.append(
            c[-1]
            * (3 * n - 0.5)
            * (3 * n - 1.5)
            * (3 * n - 2.5)
            / (9.0 * (2 * n) * (2 * n - 1))
        )
    d = [-1.0]
    for n in range(1, n_terms):
        d.append(-c[n] + c[n - 1] * (0.25 + 1.5 * (n - 1)))
    return np.array(c), np.array(d)


def _ai_asymptotic(z):
    """Optimally truncated asymptotic expansion of Ai and Ai'.

    Uses ``Ai(z) ~ e^{-zeta}/(2 sqrt(pi) z^{1/4}) sum (-1)^n c_n z^{-3n/2}``
    with ``zeta = (2/3) z^{3/2}``.  Each sum stops just before the first
    term whose modulus exceeds its predecessor.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    shape = z.shape
    z = z.ravel()
    c, d = _asymptotic_coefficients()
    signs = np.where(np.arange(len(c)) % 2, -1.0, 1.0)
    val = np.empty(z.shape, dtype=complex)
    der = np.empty(z.shape, dtype=complex)
    chunk = 8192
    for lo in range(0, z.size, chunk):
        zc = z[lo : lo + chunk]
        t = zc ** -1.5  # principal branch is analytic for |arg z| < pi/3
        powers = t[None, :] ** np.arange(len(c))[:, None]
        val[lo : lo + chunk] = _truncated_sum((signs * c)[:, None] * powers)
        der[lo : lo + chunk] = _truncated_sum((signs * d)[:, None] * powers)
        pref = np.exp(-(2.0 / 3.0) * zc ** 1.5) / (2.0 * math.sqrt(math.pi))
        val[lo : lo + chunk] *= pref * zc ** -0.25
        der[lo : lo + chunk] *= pref * zc ** 0.25
    return val.reshape(shape), der.reshape(shape)


def _truncated_sum(terms):
    """Sum rows of ``terms`` up to (excluding) the first growing term."""
    mags = np.abs(terms)
    grows = np.zeros(mags.shape, dtype=bool)
    grows[1:] = (mags[1:] >= mags[:-1]) & (mags[1:] > 0)
    keep = np.cumsum(grows, axis=0) == 0
    return np.sum(np.where(keep, terms, 0.0), axis=0)


def _check_sector(z):
    z = np.asarray(z, dtype=complex)
    nz = z != 0
    if np.any(np.abs(np.angle(z[nz])) > SECTOR_LIMIT + 1e-12):
        raise SectorError("Airy argument outside |arg z| <= pi/3 - 0.01")
    if np.any(np.abs(z) > MAX_ABS_Z):
        raise SectorError("Airy argument exceeds |z| <= 1e4")


def ai_values(z, z_switch: float = Z_SWITCH):
    """Vectorized Ai and Ai' on the decay sector.

    Parameters
    ----------
    z : array_like of complex
        Points with ``|arg z| <= pi/3 - 0.01`` and ``|z| <= 1e4``.
    z_switch : float, optional
        Modulus at which the evaluation switches from the series to the
        asymptotic expansion.

    Returns
    -------
    value, derivative : ndarray of complex
        Same shape as ``z``.

    Raises
    ------
    SectorError
        If any argument lies outside the sector.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    flat = z.ravel()
    _check_sector(flat)
    value = np.empty(flat.shape, dtype=complex)
    deriv = np.empty(flat.shape, dtype=complex)
    small = np.abs(flat) <= z_switch
    # bin by modulus so that small arguments stop the series early
    edges = [0.0, 1.0, 2.5, 4.5, 6.5, z_switch]
    mod = np.abs(flat)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = small & (mod >= lo) & ((mod < hi) | (hi == z_switch))
        if np.any(sel):
            value[sel], deriv[sel] = _ai_series(flat[sel])
    if np.any(~small):
        value[~small], deriv[~small] = _ai_asymptotic(flat[~small])
    return value.reshape(shape), deriv.reshape(shape)


def ai(z: complex, z_switch: float = Z_SWITCH) -> AiryEval:
    """Evaluate Ai and Ai' at a single point of the decay sector.

    Parameters
    ----------
    z : complex
    z_switch : float, optional

    Returns
    -------
    AiryEval
    """
    value, deriv = ai_values(np.array([z]), z_switch=z_switch)
    method = "series" if abs(z) <= z_switch else "asymptotic"
    return AiryEval(complex(value[0]), complex(deriv[0]), method)


def ode_residual(z, h: float = 1e-3) -> np.ndarray:
    """``|Ai''(z) - z Ai(z)|`` with ``Ai''`` from a 4th-order difference of ``Ai'``.

    The stencil runs along the ray through ``z`` so that it stays in the
    sector; within ``2.5 h`` of the origin it is one-sided.  Roundoff is
    about ``eps/h`` relative to ``|Ai'|``.
    """
    z = np.asarray(z, dtype=complex)
    mod = np.abs(z)
    u = np.where(mod > 0, z / np.where(mod > 0, mod, 1.0), 1.0)
    central = mod >= 2.5 * h
    off_c = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    w_c = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    off_f = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    w_f = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
    offsets = np.where(central[..., None], off_c, off_f) * h
    weights = np.where(central[..., None], w_c, w_f) / (h * u[..., None])
    _, d = ai_values(z[..., None] + offsets * u[..., None])
    second = np.sum(d * weights, axis=-1)
    value, _ = ai_values(z)
    return np.abs(second - z * value)


def _tail_bound(angle, upper):
    """Bound on ``int_upper^inf |Ai(r e^{i angle})| dr``.

    Uses ``|Ai(z)| <= 2 e^{-Re zeta}/(2 sqrt(pi) |z|^{1/4})`` (the factor 2
    covers the asymptotic series for ``|z| >= 3``) and the tangent-line
    bound ``r^{3/2} >= U^{3/2} + (3/2) U^{1/2} (r - U)``.
    """
    if upper < 3.0:
        return math.inf
    a = (2.0 / 3.0) * math.cos(1.5 * angle)
    return (
        2.0
        / (2.0 * math.sqrt(math.pi))
        * upper ** -0.25
        * math.exp(-a * upper ** 1.5)
        / (1.5 * a * math.sqrt(upper))
    )


def ai_ray_integral(angle: float, upper: float = 30.0, tol: float | None = None) -> RayIntegral:
    """Integrate Ai along the ray ``r e^{i angle}``, ``0 <= r <= upper``.

    The full ray integral equals ``e^{-i angle}/3`` by rotating the contour
    of ``int_0^inf Ai(r) dr = 1/3``.

    Parameters
    ----------
    angle : float
        Ray angle in radians, ``|angle| <= pi/6``.
    upper : float, optional
        Upper limit of the radial quadrature.
    tol : float, optional
        If given, raise :class:`RefineRequest` when the analytic bound on
        the omitted tail exceeds it.

    Returns
    -------
    RayIntegral
        ``value`` is the integral over ``[0, upper]`` times ``e^{i angle}``
        (the complex line element).
    """
    if abs(angle) > math.pi / 6 + 1e-15:
        raise SectorError("ray angle must satisfy |angle| <= pi/6")
    if upper < 0:
        raise ValueError("upper must be non-negative")
    if upper == 0:
        return RayIntegral(0j, 0.0, _tail_bound(angle, upper))
    tail = _tail_bound(angle, upper)
    if tol is not None and tail > tol:
        raise RefineRequest(f"tail bound {tail:.3e} exceeds tolerance {tol:.3e}; increase upper")
    phase = complex(math.cos(angle), math.sin(angle))

    def integrand(r):
        return complex(ai_values(np.array([r * phase]))[0][0])

    breaks = [b for b in (1.0, 3.0, 6.0, 10.0) if b < upper]
    value, qerr = integrate.quad(
        integrand,
        0.0,
        upper,
        complex_func=True,
        epsabs=1e-14,
        epsrel=1e-13,
        limit=200,
        points=breaks or None,
    )
    return RayIntegral(complex(value) * phase, float(abs(qerr)) + tail, tail)
