"""Conserved energy of one Fourier mode.

For a state f = F_r + f0 Phi_0 + f1 phi_1 + f2 phi_2 (velocity g alike) the
energy is ||g||_0^2 + <(A + m^2) f, f>_0.  Writing B = (-D-mu1)(-D-mu2),
B Phi_0 = nu phi_0 and eliminating U_r(0) through the domain condition,

    E = sum_j gamma_j [(mu_j + m^2) f_j^2 + g_j^2]
        + ((m^2 + mu0) ||Phi_0||^2 - nu lambda0) f0^2
        + 2 nu f0 (gamma1 f1 - gamma2 f2) / (mu1 - mu2)
        + ||G||_H^2
        + 2 nu (m^2 + mu0) f0 ((-D-mu0)^-1 F_r)(0)
        + <-D F_r, F_r>_H + m^2 ||F_r||_H^2.

All radial quantities carry the factor pi^3 of the 6D measure.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .atlas import ExtensionParams
from .errors import UsageError
from .fields import (CutoffSpec, RadialGridField, UCoords, VCoords, _shifted_p2, grid_z,
                     h0_regular_ip, h2_ip_values, p1_face_products, resolvent_values,
                     u_to_v, v_to_u)
from .profiles import PHI0_NU, phi0_h2_norm_sq_6d
from .specfun import PI_CUBED

log = logging.getLogger(__name__)
TAIL_WARN = 1e-4


def profile_tail(mus, L: float) -> float:
    """exp(-sqrt(-mu) L) for the slowest profile: size of the part cut off at z = L."""
    mu = max(mus.mu0, mus.mu1, mus.mu2)
    return math.exp(-math.sqrt(-mu) * L)


@dataclass(frozen=True)
class EnergyReport:
    total: float
    singular_part: float
    regular_part: float
    cross_part: float
    mass: float
    printed_form_total: Optional[float] = None

    def to_dict(self):
        return {k: getattr(self, k) for k in
                ("total", "singular_part", "regular_part", "cross_part", "mass",
                 "printed_form_total")}


def grad_h2(values: np.ndarray, L: float, n: int, mu1: float, mu2: float) -> float:
    """<-D F, F>_H = pi^3 <P1 (P2-mu1) psi, P1 (P2-mu2) psi>."""
    a = _shifted_p2(values, L, n, mu1)
    b = _shifted_p2(values, L, n, mu2)
    return PI_CUBED * p1_face_products(a, b, L, n)


def _check_pair(uf: UCoords, ug: UCoords, params: ExtensionParams):
    if uf.mus != params.mus or ug.mus != params.mus:
        raise UsageError("states must be decomposed over params.mus")
    if uf.u_r.n != ug.u_r.n or abs(uf.u_r.L - ug.u_r.L) > 1e-12 * uf.u_r.L:
        raise UsageError("f and g live on different grids")


def energy_from_u(uf: UCoords, ug: UCoords, params: ExtensionParams, m: float,
                  printed_form: bool = False) -> EnergyReport:
    if m < 0:
        raise UsageError("m must be >= 0")
    _check_pair(uf, ug, params)
    mus = params.mus
    tail = profile_tail(mus, uf.u_r.L)
    if tail > TAIL_WARN:
        log.warning("profiles not decayed at z=L (tail %.1e); energy carries an O(tail) error", tail)
    m1, m2, m0 = mus.mu1, mus.mu2, mus.mu0
    d = m1 - m2
    g1, g2 = params.gamma1, params.gamma2
    nu = PHI0_NU
    L, n = uf.u_r.L, uf.u_r.n
    m2sq = m * m
    F = uf.u_r.values
    f0, f1, f2 = uf.u0, uf.u1, uf.u2
    phi_sq = phi0_h2_norm_sq_6d(mus)

    singular = (g1 * ((m1 + m2sq) * f1 ** 2 + ug.u1 ** 2)
                + g2 * ((m2 + m2sq) * f2 ** 2 + ug.u2 ** 2)
                + ((m2sq + m0) * phi_sq - nu * params.lambda0) * f0 ** 2
                + 2 * nu * f0 * (g1 * f1 - g2 * f2) / d)
    r0 = resolvent_values(F, L, n, m0) if f0 != 0 else 0.0
    cross = 2 * nu * (m2sq + m0) * f0 * r0
    grad = grad_h2(F, L, n, m1, m2)
    gnorm = h0_regular_ip(ug, ug)
    mass = m2sq * h2_ip_values(F, F, L, n, m1, m2)
    total = singular + cross + grad + gnorm + mass

    printed = None
    if printed_form:
        # (m^2 + 2 mu0) ||F_r + f0 Phi_0||^2 - 2 mu0 ||F_r||^2 - mu0 ||Phi_0||^2 f0^2 - lambda0 f0^2
        u_norm = h0_regular_ip(uf, uf)
        f_norm = h2_ip_values(F, F, L, n, m1, m2)
        printed = (g1 * ((m1 + m2sq) * f1 ** 2 + ug.u1 ** 2)
                   + g2 * ((m2 + m2sq) * f2 ** 2 + ug.u2 ** 2)
                   + (-m0 * phi_sq - params.lambda0) * f0 ** 2
                   + 2 * f0 * (g1 * f1 - g2 * f2) / d
                   + gnorm + (m2sq + 2 * m0) * u_norm + grad - 2 * m0 * f_norm)
    return EnergyReport(float(total), float(singular), float(grad + gnorm), float(cross),
                        float(mass), None if printed is None else float(printed))


def energy_full(f: VCoords, g: VCoords, params: ExtensionParams, m: float,
                printed_form: bool = False) -> EnergyReport:
    if not (isinstance(f, VCoords) and isinstance(g, VCoords)):
        raise UsageError("energy_full expects VCoords (use fields.extract_vcoords)")
    return energy_from_u(v_to_u(f, params.mus), v_to_u(g, params.mus), params, m, printed_form)


def _check_compact(f: RadialGridField):
    nz = np.nonzero(f.values)[0]
    if nz.size == 0:
        return
    if nz[0] < 10 or nz[-1] > f.n - 11:
        raise UsageError("support must stay at least 10 cells away from both ends")


def energy_compact(f: RadialGridField, g: RadialGridField, params: ExtensionParams,
                   m: float) -> float:
    """pi^3 times the explicit norm expression for compactly supported data."""
    if not f.same_grid(g):
        raise UsageError("f and g live on different grids")
    _check_compact(f)
    _check_compact(g)
    m1, m2 = params.mus.mu1, params.mus.mu2
    L, n, h = f.L, f.n, f.h

    def norms(v):
        p2v = _shifted_p2(v, L, n, 0.0)
        return (p1_face_products(p2v, p2v, L, n), h * float(p2v @ p2v),
                p1_face_products(v, v, L, n), h * float(v @ v))

    p1p2f, p2f, p1f, f2 = norms(f.values)
    p1p2g, p2g, p1g, g2 = norms(g.values)
    s, p = m1 + m2, m1 * m2
    val = (p1p2f - s * p2f + p * p1f
           + m * m * (p2f - s * p1f + p * f2)
           + p2g - s * p1g + p * g2)
    return PI_CUBED * val


# ---------------------------------------------------------------- sampling

@dataclass(frozen=True)
class PositivityRecord:
    min_value: float
    min_relative: float
    all_nonnegative: bool
    trials: int


def random_bump(rng: np.random.Generator, L: float, n: int, lo: float, hi: float) -> np.ndarray:
    z = grid_z(L, n)
    c = rng.uniform(lo, hi)
    w = rng.uniform(0.2, 0.8)
    s = np.clip((z - c) / w, -1.0, 1.0)
    return rng.normal() * (1.0 - s * s) ** 4


def random_state(rng: np.random.Generator, params: ExtensionParams, L: float, n: int,
                 cutoff: CutoffSpec, singular: bool = True) -> UCoords:
    """Random compact bumps plus chi z^(5/2) (nonzero value at 0) plus profiles."""
    z = grid_z(L, n)
    chi = cutoff.chi(z)
    ur = sum(random_bump(rng, L, n, 1.0, 0.6 * L) for _ in range(3))
    c = rng.normal() if singular else 0.0
    ur = ur + c * chi * z ** 2.5 * np.exp(-z * z)
    u = rng.normal(size=3) if singular else np.zeros(3)
    return UCoords(float(u[0]), float(u[1]), float(u[2]), RadialGridField(L, n, ur), float(c),
                   params.mus, cutoff)


def zero_ucoords(params: ExtensionParams, L: float, n: int, cutoff: CutoffSpec) -> UCoords:
    return UCoords(0.0, 0.0, 0.0, RadialGridField(L, n, np.zeros(n)), 0.0, params.mus, cutoff)


def _scale(rep: EnergyReport, uf: UCoords, ug: UCoords, params: ExtensionParams, m: float):
    g1, g2 = params.gamma1, params.gamma2
    return (abs(rep.regular_part) + abs(rep.mass) + abs(rep.cross_part)
            + (1 + m * m) * (g1 * uf.u1 ** 2 + g2 * uf.u2 ** 2 + uf.u0 ** 2)
            + g1 * ug.u1 ** 2 + g2 * ug.u2 ** 2)


def positivity_sample(params: ExtensionParams, m: float, trials: int, seed: int = 0,
                      L: float = 20.0, n: int = 2000, g_only: bool = False) -> PositivityRecord:
    if trials < 1:
        raise UsageError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    cutoff = CutoffSpec.default(L)
    lo, lo_rel = math.inf, math.inf
    for _ in range(trials):
        if g_only:
            uf = zero_ucoords(params, L, n, cutoff)
        else:
            uf = random_state(rng, params, L, n, cutoff)
        ug = random_state(rng, params, L, n, cutoff)
        rep = energy_from_u(uf, ug, params, m)
        lo = min(lo, rep.total)
        lo_rel = min(lo_rel, rep.total / _scale(rep, uf, ug, params, m))
    return PositivityRecord(float(lo), float(lo_rel), bool(lo_rel >= -1e-10), trials)


def norm0_sq(v: VCoords, params: ExtensionParams) -> float:
    u = v_to_u(v, params.mus)
    return h0_regular_ip(u, u) + params.gamma1 * u.u1 ** 2 + params.gamma2 * u.u2 ** 2


def state_from_u(u: UCoords) -> VCoords:
    return u_to_v(u, u.mus)
