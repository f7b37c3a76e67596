"""Bessel functions of order two and the constants used throughout.

K2 is evaluated in-house: the ascending series (regrouped as
2/z^2 - 1/2 - (z^2/8) log z + z^2 F(z^2) + z^4 G(z^2) log z) for x <= 2 and
Steed's continued fraction for K0, K1 above that.  J2, Y2, I2 come from
scipy.special.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061
PI_CUBED = math.pi ** 3
F0 = (4.0 * math.log(2.0) + 3.0 - 4.0 * EULER_GAMMA) / 32.0
SERIES_MAX = 2.0
_EPS = 1e-17


@dataclass(frozen=True)
class Constants:
    euler_gamma: float
    pi_cubed: float
    eigen_equation_shift: float


def constants() -> Constants:
    """Euler's gamma, pi^3, and the additive shift 16 F(0) of the eigenvalue equation."""
    return Constants(EULER_GAMMA, PI_CUBED, 16.0 * F0)


@dataclass(frozen=True)
class K2Decomposition:
    """K2(z) = leading*2/z^2 + half + logcoef*(-z^2/8 log z) + z^2 F + z^4 G log z."""

    z: float
    leading: float
    half: float
    logcoef: float
    f_entire_at: float
    g_entire_at: float

    def reassemble(self) -> float:
        z = self.z
        lz = math.log(z)
        return (self.leading * 2.0 / z ** 2 + self.half
                - self.logcoef * z ** 2 / 8.0 * lz
                + z ** 2 * self.f_entire_at + z ** 4 * self.g_entire_at * lz)


def _check_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("argument must be finite and > 0")
    return x


def entire_parts(t):
    """F(t), G(t) of the K2 regrouping, t = z^2 >= 0 (power series)."""
    t = np.asarray(t, dtype=float)
    q = t / 4.0
    log2 = math.log(2.0)
    # F(t) = sum_k [log2/4 + (psi(k+1)+psi(k+3))/8] q^k/(k!(k+2)!)
    term = np.full_like(t, 0.5)
    psi_sum = -2.0 * EULER_GAMMA + 1.5
    f = (0.25 * log2 + psi_sum / 8.0) * term
    k = 0
    while True:
        k += 1
        term = term * q / (k * (k + 2))
        psi_sum += 1.0 / k + 1.0 / (k + 2)
        f = f + (0.25 * log2 + psi_sum / 8.0) * term
        if k > 300 or np.all(np.abs(term) * psi_sum < _EPS * np.abs(f)):
            break
    # G(t) = -(1/16) sum_{k>=1} q^(k-1)/(k!(k+2)!), the tail of -I2 log z
    term = np.full_like(t, 1.0 / 6.0)
    g = -term / 16.0
    k = 1
    while True:
        k += 1
        term = term * q / (k * (k + 2))
        g = g - term / 16.0
        if k > 300 or np.all(np.abs(term) < _EPS * np.abs(16.0 * g)):
            break
    return f, g


def k2_series(x: float) -> K2Decomposition:
    """Split K2(x) into its singular pieces and entire parts; 0 < x <= 1."""
    if not (x > 0):
        raise DomainError("k2_series needs x > 0")
    if x > 1.0:
        raise DomainError("k2_series is restricted to 0 < x <= 1")
    f, g = entire_parts(x * x)
    return K2Decomposition(float(x), 1.0, -0.5, 1.0, float(f), float(g))


def _k2_small(x):
    lx = np.log(x)
    f, g = entire_parts(x * x)
    return 2.0 / x ** 2 - 0.5 - x ** 2 / 8.0 * lx + x ** 2 * f + x ** 4 * g * lx


def _k01_steed(x):
    """K0, K1 for x >= 2 via Steed's continued fraction (Temme's variant), vectorised."""
    x = np.asarray(x, dtype=float)
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1, q2 = np.zeros_like(x), np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, 100000):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels / s) < 1e-17):
            break
    h = a1 * h
    k0 = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


def _k0_small(x: float) -> float:
    q = x * x / 4.0
    i0 = acc = 0.0
    term, hk = 1.0, 0.0
    for k in range(0, 300):
        if k > 0:
            term *= q / (k * k)
            hk += 1.0 / k
        i0 += term
        acc += term * (hk - EULER_GAMMA)
        if term < 1e-18 * i0:
            break
    return -math.log(x / 2.0) * i0 + acc


def bessel_k2(x):
    """Modified Bessel function K2 for x > 0 (scalar or array)."""
    xa = _check_positive(x)
    flat = np.atleast_1d(xa).ravel()
    out = np.empty_like(flat)
    small = flat <= SERIES_MAX
    if np.any(small):
        out[small] = _k2_small(flat[small])
    if np.any(~small):
        xb = flat[~small]
        k0, k1 = _k01_steed(xb)
        out[~small] = k0 + 2.0 * k1 / xb
    out = out.reshape(np.shape(xa))
    return float(out) if np.ndim(xa) == 0 else out


def bessel_k1(x):
    """K1, used for the derivative K2' = -K1 - 2 K2 / x."""
    xa = _check_positive(x)
    flat = np.atleast_1d(xa).ravel()
    out = np.empty_like(flat)
    big = flat >= SERIES_MAX
    if np.any(big):
        out[big] = _k01_steed(flat[big])[1]
    for i in np.nonzero(~big)[0]:
        # from K2 - K0 = (2/x) K1
        xi = float(flat[i])
        k2 = float(_k2_small(np.array([xi]))[0])
        out[i] = 0.5 * xi * (k2 - _k0_small(xi))
    out = out.reshape(np.shape(xa))
    return float(out) if np.ndim(xa) == 0 else out


def bessel_k2_prime(x):
    return -bessel_k1(x) - 2.0 * bessel_k2(x) / np.asarray(x, dtype=float)


def bessel_family(kind: str, x):
    """J2, Y2 or I2 at x > 0."""
    xa = _check_positive(x)
    if kind == "J2":
        out = special.jv(2, xa)
    elif kind == "Y2":
        out = special.yv(2, xa)
    elif kind == "I2":
        out = special.iv(2, xa)
    else:
        raise DomainError(f"unknown Bessel kind {kind!r}")
    return float(out) if np.ndim(xa) == 0 else out


def bessel_i2_prime(x):
    xa = _check_positive(x)
    return special.iv(1, xa) - 2.0 * special.iv(2, xa) / xa
