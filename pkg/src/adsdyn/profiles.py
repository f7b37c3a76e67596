"""Resolvent profiles in radial form psi(z) = z^(5/2) * (6D profile).

phi_j is the Green function of (-Delta - mu_j) on R^6 at the origin,
Phi_0 the three-term combination with a logarithmic singularity.  Besides
the closed forms we expose the *regular parts* (profile minus its
chi-truncated singular terms), evaluated without cancellation near z=0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .specfun import EULER_GAMMA, PI_CUBED, F0, bessel_k2, entire_parts

_C4 = 4.0 * math.log(2.0) + 3.0 - 4.0 * EULER_GAMMA


@dataclass(frozen=True)
class MuTriple:
    mu0: float
    mu1: float
    mu2: float

    def __post_init__(self):
        m = (self.mu0, self.mu1, self.mu2)
        if not all(np.isfinite(m)) or max(m) >= 0:
            raise DomainError(f"mu values must be negative: {m}")
        if len({self.mu0, self.mu1, self.mu2}) < 3:
            raise DomainError(f"mu values must be pairwise distinct: {m}")

    def weights(self):
        """Coefficients c_j with Phi_0 = sum_j c_j phi_j, ordered (mu1, mu2, mu0)."""
        a, b, c = self.mu0, self.mu1, self.mu2
        return (2.0 / ((a - b) * (b - c)),
                2.0 / ((b - c) * (c - a)),
                2.0 / ((c - a) * (a - b)))


def _neg(mu):
    if not (mu < 0):
        raise DomainError("mu must be negative")
    return float(mu)


def phi_j_radial(mu_j, z):
    """-mu z^(1/2) K2(sqrt(-mu) z) / (8 pi^3)."""
    mu = _neg(mu_j)
    z = np.asarray(z, dtype=float)
    lam = math.sqrt(-mu)
    return -mu * np.sqrt(z) * bessel_k2(lam * z) / (8.0 * PI_CUBED)


def phi0_radial(mus: MuTriple, z):
    c1, c2, c0 = mus.weights()
    return (c1 * phi_j_radial(mus.mu1, z) + c2 * phi_j_radial(mus.mu2, z)
            + c0 * phi_j_radial(mus.mu0, z))


def phi0_radial_closed(mus: MuTriple, z):
    """The three-K2 expression written out (independent of `weights`)."""
    m0, m1, m2 = mus.mu0, mus.mu1, mus.mu2
    z = np.asarray(z, dtype=float)
    k = lambda m: bessel_k2(math.sqrt(-m) * z)
    br = (m1 * k(m1) / ((m0 - m1) * (m1 - m2)) + m2 * k(m2) / ((m1 - m2) * (m2 - m0))
          + m0 * k(m0) / ((m2 - m0) * (m0 - m1)))
    return -np.sqrt(z) * br / (4.0 * PI_CUBED)


def phi_j_singular(mu_j, z):
    """Singular terms of phi_j: (z^-3/2 + mu z^1/2/4 - mu^2/16 z^5/2 log z)/(4 pi^3)."""
    mu = _neg(mu_j)
    z = np.asarray(z, dtype=float)
    return (z ** -1.5 + mu * np.sqrt(z) / 4.0
            - mu * mu / 16.0 * z ** 2.5 * np.log(z)) / (4.0 * PI_CUBED)


def phi_j_regular(mu_j, z, chi):
    """phi_j - chi * singular terms, accurate down to z -> 0."""
    mu = _neg(mu_j)
    z = np.asarray(z, dtype=float)
    chi = np.broadcast_to(np.asarray(chi, dtype=float), z.shape)
    lam = math.sqrt(-mu)
    y = lam * z
    out = np.empty_like(z)
    small = y <= 2.0
    if np.any(small):
        zs, ys = z[small], y[small]
        f, g = entire_parts(ys * ys)
        reg1 = lam ** 4 * zs ** 2.5 / (8.0 * PI_CUBED) * (
            f - math.log(lam) / 8.0 + ys * ys * g * np.log(ys))
        out[small] = reg1 + (1.0 - chi[small]) * phi_j_singular(mu, zs)
    big = ~small
    if np.any(big):
        out[big] = phi_j_radial(mu, z[big]) - chi[big] * phi_j_singular(mu, z[big])
    return out


def phi0_regular(mus: MuTriple, z, chi):
    """Phi_0 - chi * z^(5/2) log z / (32 pi^3)."""
    c1, c2, c0 = mus.weights()
    z = np.asarray(z, dtype=float)
    chi = np.broadcast_to(np.asarray(chi, dtype=float), z.shape)
    # the z^-3/2 and z^1/2 terms of the combination cancel identically
    return (c1 * phi_j_regular(mus.mu1, z, chi) + c2 * phi_j_regular(mus.mu2, z, chi)
            + c0 * phi_j_regular(mus.mu0, z, chi))


def f_j_at_zero(mu_j) -> float:
    mu = _neg(mu_j)
    return mu * mu / (256.0 * PI_CUBED) * (_C4 - 2.0 * math.log(-mu))


def g0_at_zero(mus: MuTriple) -> float:
    m0, m1, m2 = mus.mu0, mus.mu1, mus.mu2
    num = (m1 ** 2 * (m2 - m0) * math.log(-m1) + m2 ** 2 * (m0 - m1) * math.log(-m2)
           + m0 ** 2 * (m1 - m2) * math.log(-m0))
    den = 64.0 * PI_CUBED * (m0 - m1) * (m1 - m2) * (m2 - m0)
    return -_C4 / (128.0 * PI_CUBED) - num / den


def phi0_h2_norm_sq(mus: MuTriple) -> float:
    """Closed form of (1/8) int_0^inf rho^5 / ((rho^2-mu1)(rho^2-mu2)(rho^2-mu0)^2) d rho."""
    m0, m1, m2 = mus.mu0, mus.mu1, mus.mu2
    t1 = m1 ** 2 * math.log(-m1) / ((m2 - m1) * (m1 - m0) ** 2)
    t2 = m2 ** 2 * math.log(-m2) / ((m1 - m2) * (m2 - m0) ** 2)
    t3 = ((m1 * m0 ** 2 + m2 * m0 ** 2 - 2.0 * m0 * m1 * m2) * math.log(-m0)
          / ((m1 - m0) ** 2 * (m2 - m0) ** 2))
    t4 = -m0 / ((m1 - m0) * (m2 - m0))
    return (t1 + t2 + t3 + t4) / 16.0


# Phi_0 as written equals -2 (-D-mu1)^-1 (-D-mu2)^-1 (-D-mu0)^-1 delta.  With the
# unitary Fourier transform on R^6 its weighted norm is nu^2/(64 pi^3) times the
# rho-integral, i.e. the closed form above divided by 2 pi^3.
PHI0_NU = -2.0


def phi0_h2_norm_sq_6d(mus: MuTriple) -> float:
    """||Phi_0||^2 in the weighted H^2 norm of R^6 (checked by radial quadrature)."""
    return phi0_h2_norm_sq(mus) * 8.0 * PHI0_NU ** 2 / (64.0 * PI_CUBED)


__all__ = [
    "MuTriple", "phi_j_radial", "phi0_radial", "phi0_radial_closed",
    "phi_j_singular", "phi_j_regular", "phi0_regular", "f_j_at_zero",
    "g0_at_zero", "phi0_h2_norm_sq", "phi0_h2_norm_sq_6d", "PHI0_NU", "F0",
]
