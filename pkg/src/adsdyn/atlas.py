"""Boundary-parameter atlas.

A boundary triple alpha = (a0, a1, a2) prescribes v_m1 + a0 v0 + a1 v1 + a2 v2 = 0.
It is realised as a self-adjoint extension with parameters
(mu0, mu1, mu2, gamma1, gamma2, lambda0) when the scalar function

    G(mu) = a0/4 - a1/mu - 4 a2/mu^2 + log|mu|/8 - log2/4 - 3/16 + gamma_E/4

has a root mu* < 0 with G'(mu*) > 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InadmissibleError, UsageError
from .profiles import MuTriple, f_j_at_zero, g0_at_zero
from .specfun import EULER_GAMMA, F0, PI_CUBED

LOG2 = math.log(2.0)
ADMISSIBLE_BOUND = 0.75 - EULER_GAMMA
SIGMA0_BOUND = 0.25 - LOG2 / 2.0 - EULER_GAMMA
GRAVITON_WINDOW_LOWER = -0.5 - 1.5 * LOG2
EMPTY_SPECTRUM_LOWER = -LOG2
TIE = 1e-12


@dataclass(frozen=True)
class BoundaryTriple:
    a0: float
    a1: float
    a2: float

    @classmethod
    def parse(cls, text: str) -> "BoundaryTriple":
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != 3:
            raise UsageError(f"alpha needs three comma-separated numbers, got {text!r}")
        return cls(*(float(p) for p in parts))

    def as_tuple(self):
        return (self.a0, self.a1, self.a2)


@dataclass(frozen=True)
class ExtensionParams:
    mus: MuTriple
    gamma1: float
    gamma2: float
    lambda0: float

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise DomainError("gamma1, gamma2 must be positive")
        if not math.isfinite(self.lambda0):
            raise DomainError("lambda0 must be finite")

    def to_dict(self):
        return {"mu0": self.mus.mu0, "mu1": self.mus.mu1, "mu2": self.mus.mu2,
                "gamma1": self.gamma1, "gamma2": self.gamma2, "lambda0": self.lambda0}


@dataclass(frozen=True)
class AlphaClass:
    admissible: bool
    branch: str        # neg_a2 | zero_a2 | pos_a2_window | inadmissible
    positivity: str    # empty_point_spectrum | graviton_only | indefinite

    def to_dict(self):
        return {"admissible": self.admissible, "branch": self.branch,
                "positivity": self.positivity}


def _alpha(alpha) -> BoundaryTriple:
    if isinstance(alpha, BoundaryTriple):
        return alpha
    return BoundaryTriple(*map(float, alpha))


def admissibility_expression(alpha, s: float) -> float:
    """a0 + a1/s - a2/s^2 + log|s|/2."""
    a = _alpha(alpha)
    return a.a0 + a.a1 / s - a.a2 / s ** 2 + 0.5 * math.log(abs(s))


def _disc(a: BoundaryTriple) -> float:
    return a.a1 ** 2 - 4.0 * a.a2


def is_admissible(alpha) -> AlphaClass:
    a = _alpha(alpha)
    branch = "inadmissible"
    if a.a2 < 0:
        s = a.a1 + math.sqrt(_disc(a))
        if admissibility_expression(a, s) < ADMISSIBLE_BOUND - TIE:
            branch = "neg_a2"
    elif a.a2 == 0:
        if a.a1 > 0 and admissibility_expression(a, 2.0 * a.a1) < ADMISSIBLE_BOUND - TIE:
            branch = "zero_a2"
    else:
        if a.a1 > 0 and _disc(a) > 0:
            r = math.sqrt(_disc(a))
            sp, sm = a.a1 + r, a.a1 - r
            if (admissibility_expression(a, sp) < ADMISSIBLE_BOUND - TIE
                    and admissibility_expression(a, sm) > ADMISSIBLE_BOUND + TIE):
                branch = "pos_a2_window"
    admissible = branch != "inadmissible"
    positivity = "indefinite"
    if admissible and branch == "neg_a2":
        e = admissibility_expression(a, a.a1 + math.sqrt(_disc(a)))
        if EMPTY_SPECTRUM_LOWER < e < ADMISSIBLE_BOUND:
            positivity = "empty_point_spectrum"
    elif admissible and branch == "zero_a2":
        e = a.a0 + 0.5 * math.log(a.a1)
        if GRAVITON_WINDOW_LOWER < e < SIGMA0_BOUND:
            positivity = "graviton_only"
    return AlphaClass(admissible, branch, positivity)


def g_alpha(alpha, mu):
    a = _alpha(alpha)
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(mu_arr >= 0):
        raise DomainError("G_alpha needs mu < 0")
    out = (a.a0 / 4.0 - a.a1 / mu_arr - 4.0 * a.a2 / mu_arr ** 2 + np.log(-mu_arr) / 8.0
           - LOG2 / 4.0 - 3.0 / 16.0 + EULER_GAMMA / 4.0)
    return float(out) if np.ndim(mu_arr) == 0 else out


def g_alpha_prime(alpha, mu):
    a = _alpha(alpha)
    mu = np.asarray(mu, dtype=float)
    out = mu ** -3 * (mu ** 2 / 8.0 + a.a1 * mu + 8.0 * a.a2)
    return float(out) if np.ndim(mu) == 0 else out


def critical_points(alpha):
    """Real roots of mu^2/8 + a1 mu + 8 a2 = 0, i.e. 4(-a1 +- sqrt(a1^2 - 4 a2))."""
    a = _alpha(alpha)
    d = _disc(a)
    if d < 0:
        return ()
    r = math.sqrt(d)
    return (4.0 * (-a.a1 - r), 4.0 * (-a.a1 + r))


def increasing_piece(alpha):
    """Interval of mu < 0 where G is increasing, or None."""
    a = _alpha(alpha)
    cps = critical_points(a)
    if not cps:
        return None
    lo, hi = cps
    hi = min(hi, 0.0)
    if lo >= 0 or lo >= hi:
        return None
    return lo, hi


def root_mu_star(alpha) -> float:
    """The root of G on its increasing piece (bracketed, then Brent)."""
    a = _alpha(alpha)
    piece = increasing_piece(a)
    if piece is None:
        raise InadmissibleError(f"G_alpha has no increasing piece for {a}")
    lo, hi = piece
    glo = g_alpha(a, lo)
    if hi == 0.0:
        hi_pt = lo / 2.0
        for _ in range(2000):
            if g_alpha(a, hi_pt) > 0:
                break
            hi_pt /= 2.0
        hi = hi_pt
    ghi = g_alpha(a, hi)
    if not (glo < 0 < ghi):
        raise InadmissibleError(f"no sign change of G_alpha on increasing piece for {a}")
    return brentq(lambda m: g_alpha(a, m), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                  maxiter=500)


def gammas_for(alpha, mu1: float, mu2: float):
    a = _alpha(alpha)
    g1 = (mu1 - mu2) * mu1 ** 2 * g_alpha(a, mu1) / (16.0 * PI_CUBED)
    g2 = (mu2 - mu1) * mu2 ** 2 * g_alpha(a, mu2) / (16.0 * PI_CUBED)
    return g1, g2


def find_extension_params(alpha, spread: float = 0.1, shrink: float = 0.5,
                          max_shrinks: int = 40) -> ExtensionParams:
    a = _alpha(alpha)
    if not (0 < spread < 1):
        raise UsageError("spread must lie in (0, 1)")
    cls = is_admissible(a)
    if not cls.admissible:
        raise InadmissibleError(f"alpha={a.as_tuple()} is not admissible")
    mu_star = root_mu_star(a)
    sp = spread
    for _ in range(max_shrinks + 1):
        mu1, mu2 = mu_star * (1 + sp), mu_star * (1 - sp)
        g1, g2 = gammas_for(a, mu1, mu2)
        if g1 > 0 and g2 > 0:
            mus = MuTriple(0.5 * (mu1 + mu2), mu1, mu2)
            lam0 = g0_at_zero(mus) + a.a0 / (32.0 * PI_CUBED)
            return ExtensionParams(mus, g1, g2, lam0)
        sp *= shrink
    raise InadmissibleError(f"could not make gamma_j > 0 around mu*={mu_star}")


def alpha_from_params(params: ExtensionParams, form: str = "closed") -> BoundaryTriple:
    """Forward map (gamma, lambda0, mu) -> alpha.

    form='closed' eliminates a1 from the two gamma equations by hand;
    form='solve' inverts them as a 2x2 linear system (independent cross-check);
    form='printed' pairs mu_j with gamma_j in the a2 term, which does not
    invert find_extension_params; 'closed' pairs mu1 with gamma2 and vice versa.
    """
    m1, m2 = params.mus.mu1, params.mus.mu2
    g1, g2 = params.gamma1, params.gamma2
    d = params.lambda0 - g0_at_zero(params.mus)
    p3 = PI_CUBED
    a0 = 32.0 * p3 * d
    c = -LOG2 / 4.0 - 3.0 / 16.0 + EULER_GAMMA / 4.0
    l1, l2 = math.log(-m1), math.log(-m2)
    if form == "printed":
        a1 = ((m1 + m2) * (8 * p3 * d + c)
              + (m1 ** 2 * l1 - m2 ** 2 * l2) / (8.0 * (m1 - m2))
              - 16 * p3 * (g1 + g2) / (m1 - m2) ** 2)
        a2 = (m1 * m2 * (-2 * p3 * d + LOG2 / 16.0 + 3.0 / 64.0 - EULER_GAMMA / 16.0
                         - (m1 * l1 - m2 * l2) / (32.0 * (m1 - m2)))
              + 4 * p3 * (m1 * g1 + m2 * g2) / (m1 - m2) ** 2)
    elif form == "closed":
        a1 = ((m1 + m2) * (8 * p3 * d + c)
              + (m1 ** 2 * l1 - m2 ** 2 * l2) / (8.0 * (m1 - m2))
              - 16 * p3 * (g1 + g2) / (m1 - m2) ** 2)
        a2 = (m1 * m2 * (-2 * p3 * d + LOG2 / 16.0 + 3.0 / 64.0 - EULER_GAMMA / 16.0
                         - (m1 * l1 - m2 * l2) / (32.0 * (m1 - m2)))
              + 4 * p3 * (m2 * g1 + m1 * g2) / (m1 - m2) ** 2)
    elif form == "solve":
        # mu^2 G(mu) = a0 mu^2/4 - a1 mu - 4 a2 + mu^2 (log|mu|/8 + c)
        r1 = 16 * p3 * g1 / (m1 - m2) - a0 * m1 ** 2 / 4 - m1 ** 2 * (l1 / 8 + c)
        r2 = 16 * p3 * g2 / (m2 - m1) - a0 * m2 ** 2 / 4 - m2 ** 2 * (l2 / 8 + c)
        A = np.array([[-m1, -4.0], [-m2, -4.0]])
        a1, a2 = np.linalg.solve(A, np.array([r1, r2]))
    else:
        raise UsageError(f"unknown form {form!r}")
    return BoundaryTriple(float(a0), float(a1), float(a2))


def change_mu0(params: ExtensionParams, mu0_new: float) -> ExtensionParams:
    """Same extension, different auxiliary mu0 (lambda0 compensates through G0(0))."""
    mus_new = MuTriple(mu0_new, params.mus.mu1, params.mus.mu2)
    lam = params.lambda0 + g0_at_zero(mus_new) - g0_at_zero(params.mus)
    return ExtensionParams(mus_new, params.gamma1, params.gamma2, lam)


def constraint_functional(params: ExtensionParams):
    """Coefficients (c_m1, c0, c1, c2) of the domain condition written in v-coordinates.

    U_r(0) + lambda0 u0 - (gamma1 u1 - gamma2 u2)/(mu1 - mu2), with the u's
    and U_r(0) expressed through (v_m1, v0, v1, v2).
    """
    from .fields import _u_scalars
    mus = params.mus
    out = []
    for e in np.eye(4):
        vm1, v0, v1, v2 = e
        u0, u1, u2 = _u_scalars(v0, v1, v2, mus)
        ur0 = vm1 - u0 * g0_at_zero(mus) - u1 * f_j_at_zero(mus.mu1) - u2 * f_j_at_zero(mus.mu2)
        out.append(ur0 + params.lambda0 * u0
                   - (params.gamma1 * u1 - params.gamma2 * u2) / (mus.mu1 - mus.mu2))
    return np.array(out)


# ---------------------------------------------------------------- special sets

def sigma0_contains(alpha, positivity_window: bool = False) -> bool:
    a = _alpha(alpha)
    if not (a.a2 == 0 and a.a1 > 0):
        return False
    e = a.a0 + 0.5 * math.log(a.a1)
    if not e < SIGMA0_BOUND:
        return False
    return (e > GRAVITON_WINDOW_LOWER) if positivity_window else True


def sigma_m_residual(alpha, m: float, variant: str) -> float:
    """Zero iff z^(1/2) K2(m z) satisfies the boundary condition (per variant)."""
    a = _alpha(alpha)
    if not m > 0:
        raise DomainError("m must be positive")
    if variant == "printed":
        return m * m * a.a0 + a.a1 / 2.0 - 2.0 * a.a2 / m ** 2 - m * m * (F0 - math.log(m))
    if variant == "shifted":
        return (m * m * a.a0 / 8.0 + a.a1 / 2.0 - 2.0 * a.a2 / m ** 2
                - m * m * (F0 - math.log(m) / 8.0))
    raise UsageError(f"unknown variant {variant!r}")


def sigma_m_contains(alpha, m: float, variant: str, tol: float = 1e-9) -> bool:
    a = _alpha(alpha)
    scale = 1.0 + abs(m * m * a.a0) + abs(a.a1) + abs(a.a2 / m ** 2) + m * m * (1 + abs(math.log(m)))
    return abs(sigma_m_residual(a, m, variant)) <= tol * scale


def sigma_m_alpha0(a1: float, a2: float, m: float, variant: str) -> float:
    """The a0 that puts (a0, a1, a2) on Sigma(m)."""
    if variant == "printed":
        return (m * m * (F0 - math.log(m)) - a1 / 2.0 + 2.0 * a2 / m ** 2) / (m * m)
    if variant == "shifted":
        return 8.0 * (m * m * (F0 - math.log(m) / 8.0) - a1 / 2.0 + 2.0 * a2 / m ** 2) / (m * m)
    raise UsageError(f"unknown variant {variant!r}")


def theta_zero_case(alpha) -> bool:
    a = _alpha(alpha)
    return a.a0 == 1 and a.a1 < 0 and -a.a1 ** 2 < 4.0 * a.a2 < 0


def sample_admissible(rng: np.random.Generator, branch: Optional[str] = None,
                      max_tries: int = 100000) -> BoundaryTriple:
    """Rejection sampler over a box, optionally restricted to one branch."""
    for _ in range(max_tries):
        kind = branch or rng.choice(["neg_a2", "zero_a2", "pos_a2_window"])
        a1 = rng.uniform(-3, 3) if kind == "neg_a2" else rng.uniform(0.05, 3)
        if kind == "neg_a2":
            a2 = -rng.uniform(0.01, 3)
        elif kind == "zero_a2":
            a2 = 0.0
        else:
            a2 = rng.uniform(0.0, 1.0) * a1 ** 2 / 4.0
            if a2 == 0:
                continue
        a0 = rng.uniform(-5, 3)
        alpha = BoundaryTriple(float(a0), float(a1), float(a2))
        cls = is_admissible(alpha)
        if cls.admissible and (branch is None or cls.branch == branch):
            return alpha
    raise RuntimeError("rejection sampler exhausted")


def sample_inadmissible(rng: np.random.Generator, max_tries: int = 100000) -> BoundaryTriple:
    for _ in range(max_tries):
        a2 = rng.choice([-1.0, 0.0, 1.0]) * rng.uniform(0.0, 3.0)
        alpha = BoundaryTriple(float(rng.uniform(-5, 5)), float(rng.uniform(-3, 3)), float(a2))
        if not is_admissible(alpha).admissible:
            return alpha
    raise RuntimeError("rejection sampler exhausted")
