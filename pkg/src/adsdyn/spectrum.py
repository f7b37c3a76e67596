"""Point spectrum of the generalised Bessel operator.

Negative eigenvalues are -x with x > 0 a root of

    h(x) = log x + 2 a0 + 8 a1/x - 32 a2/x^2 - c,

where c = 0 in the `printed` variant and c = 16 F(0) in the `shifted` one.
The eigenfunction is z^(1/2) K2(sqrt(x) z).  Which constant is right is
decided by extracting the singular coefficients of that eigenfunction and
evaluating the boundary condition directly (`eigenvalue_condition_oracle`).
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from .atlas import _alpha, is_admissible, sample_admissible, sigma0_contains
from .errors import DomainError, NumericError, UsageError
from .fields import (CutoffSpec, RadialGridField, VCoords, apply_p2, extract_vcoords, grid_z,
                     sample)
from .profiles import phi_j_regular
from .specfun import F0, PI_CUBED, bessel_family, bessel_k2, constants

VARIANTS = ("printed", "shifted")
X_MIN, X_MAX = 1e-150, 1e150


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: List[float]
    count: int
    zero_mode: bool
    variant_used: str

    def __post_init__(self):
        if self.count != len(self.eigenvalues):
            raise UsageError("count must equal the number of eigenvalues")
        if self.count > 3:
            raise UsageError("at most three negative eigenvalues")

    @property
    def lambdas(self) -> List[float]:
        return [math.sqrt(-e) for e in self.eigenvalues]

    def to_dict(self):
        return {"eigenvalues": list(self.eigenvalues), "count": self.count,
                "zero_mode": self.zero_mode, "variant_used": self.variant_used,
                "lambdas": self.lambdas}


def _check_variant(variant):
    if variant not in VARIANTS:
        raise UsageError(f"variant must be one of {VARIANTS}, got {variant!r}")


def h_function(alpha, x, variant: str = "printed"):
    _check_variant(variant)
    a = _alpha(alpha)
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise DomainError("h_function needs x > 0")
    out = np.log(xa) + 2 * a.a0 + 8 * a.a1 / xa - 32 * a.a2 / xa ** 2
    if variant == "shifted":
        out = out - constants().eigen_equation_shift
    return float(out) if np.ndim(xa) == 0 else out


def h_critical_points(alpha) -> List[float]:
    """Positive zeros of h'(x) = x^-3 (x^2 - 8 a1 x + 64 a2)."""
    a = _alpha(alpha)
    d = a.a1 ** 2 - 4 * a.a2
    if d < 0:
        return []
    r = math.sqrt(d)
    return sorted(c for c in (4 * (a.a1 - r), 4 * (a.a1 + r)) if c > 0)


def find_roots(alpha, variant: str) -> List[float]:
    """All positive roots of h, bisected on the monotone pieces."""
    a = _alpha(alpha)
    f = lambda x: h_function(a, x, variant)
    cps = h_critical_points(a)
    edges = [0.0] + cps + [math.inf]
    roots = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        # interior anchor points, then push outward until the sign settles
        if lo == 0.0 and hi == math.inf:
            xl, xh = 0.5, 2.0
        elif lo == 0.0:
            xl, xh = hi / 2.0, hi
        elif hi == math.inf:
            xl, xh = lo, 2.0 * lo
        else:
            xl, xh = lo, hi
        fl, fh = f(xl), f(xh)
        if lo == 0.0:
            while xl > X_MIN and np.sign(f(xl)) == np.sign(fh):
                xl /= 4.0
            fl = f(xl)
        if hi == math.inf:
            while xh < X_MAX and np.sign(f(xh)) == np.sign(fl):
                xh *= 4.0
            fh = f(xh)
        if fl == 0.0:
            roots.append(xl)
            continue
        if np.sign(fl) == np.sign(fh) or fh == 0.0:
            continue
        roots.append(brentq(f, xl, xh, xtol=1e-300, rtol=1e-14, maxiter=1000))
    roots = sorted(set(roots))
    return roots


def sign_change_count(alpha, variant: str, samples: int = 10_000,
                      x_lo: float = 1e-6, x_hi: float = 1e6) -> int:
    """Brute-force root count: sign changes of h on a log-spaced grid."""
    xs = np.logspace(math.log10(x_lo), math.log10(x_hi), samples)
    s = np.sign(h_function(alpha, xs, variant))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def negative_eigenvalues(alpha, variant: Optional[str] = None) -> SpectrumReport:
    a = _alpha(alpha)
    if not is_admissible(a).admissible:
        raise UsageError(f"alpha={a.as_tuple()} is not admissible")
    if variant is None:
        variant = selected_variant()
    _check_variant(variant)
    roots = find_roots(a, variant)
    return SpectrumReport([-x for x in roots], len(roots), sigma0_contains(a), variant)


# ---------------------------------------------------------------- eigenfunctions

def eigenfunction(lam: float, L: float, n: int) -> RadialGridField:
    if not lam >= 0:
        raise DomainError("lambda must be >= 0")
    if lam == 0:
        return sample(lambda z: z ** -1.5, L, n)
    return sample(lambda z: np.sqrt(z) * bessel_k2(lam * z), L, n)


def eigen_coefficients(lam: float):
    """(v_m1, v0, v1, v2) of sqrt(z) K2(lam z); lam = 0 gives z^-3/2."""
    if lam == 0:
        return (0.0, 0.0, 0.0, 1.0)
    l2 = lam * lam
    return (l2 * (F0 - math.log(lam) / 8.0), -l2 / 8.0, -0.5, 2.0 / l2)


def eigen_vcoords(lam: float, L: float, n: int, cutoff: Optional[CutoffSpec] = None) -> VCoords:
    """Exact decomposition of the eigenfunction (regular part without cancellation)."""
    if not lam >= 0:
        raise DomainError("lambda must be >= 0")
    cutoff = cutoff or CutoffSpec.default(L)
    z = grid_z(L, n)
    chi = cutoff.chi(z)
    vm1, v0, v1, v2 = eigen_coefficients(lam)
    if lam == 0:
        rem = (1.0 - chi) * z ** -1.5
    else:
        # sqrt(z) K2(lam z) = (8 pi^3 / lam^2) phi_j with mu_j = -lam^2
        reg = 8.0 * PI_CUBED / lam ** 2 * phi_j_regular(-lam * lam, z, chi)
        rem = reg - chi * vm1 * z ** 2.5
    return VCoords(vm1, v0, v1, v2, RadialGridField(L, n, rem), cutoff)


def boundary_residual(alpha, lam: float) -> float:
    """Normalised v_m1 + a0 v0 + a1 v1 + a2 v2 on the exact coefficients of the profile."""
    a = _alpha(alpha)
    vm1, v0, v1, v2 = eigen_coefficients(lam)
    terms = np.array([vm1, a.a0 * v0, a.a1 * v1, a.a2 * v2])
    scale = np.abs(terms).sum()
    return float(abs(terms.sum()) / scale) if scale > 0 else 0.0


def eigen_residual(alpha, lam: float, L: float = 20.0, n: int = 20_000) -> float:
    """Residual of the eigen-relation for the extension selected by alpha.

    The larger of ||P2 psi + lam^2 psi|| / ||psi|| on z in [0.5, L/2] and the
    normalised boundary-condition residual of psi: every sqrt(z) K2(lam z)
    solves the interior equation, only the boundary condition picks lam.
    """
    psi = eigenfunction(lam, L, n)
    r = apply_p2(psi).values + lam * lam * psi.values
    z = psi.z
    sel = (z >= 0.5) & (z <= L / 2.0)
    den = np.linalg.norm(psi.values[sel])
    if den == 0:
        return math.inf
    return max(float(np.linalg.norm(r[sel]) / den), boundary_residual(alpha, lam))


def eigenvalue_condition_oracle(alpha, lam: float, n: int = 20_000) -> float:
    """v_m1 + a0 v0 + a1 v1 + a2 v2 on the fitted coefficients of sqrt(z) K2(lam z).

    The grid is scaled with 1/lam so the fit window covers the same range of
    lam*z (up to 1) for every lam; the value is divided by the sum of the absolute
    sizes of the four terms.
    """
    if not lam > 0:
        raise DomainError("oracle needs lambda > 0")
    a = _alpha(alpha)
    L = 8.0 / lam
    f = eigenfunction(lam, L, n)
    v = extract_vcoords(f, CutoffSpec.default(L), n_regular=4)
    terms = np.array([v.v_m1, a.a0 * v.v0, a.a1 * v.v1, a.a2 * v.v2])
    return float(terms.sum() / np.abs(terms).sum())


# ---------------------------------------------------------------- variant choice

@dataclass(frozen=True)
class VariantSelection:
    chosen: str
    max_oracle: dict = field(default_factory=dict)
    roots_checked: dict = field(default_factory=dict)


_SELECTION: Optional[VariantSelection] = None
_LOCK = threading.Lock()
ORACLE_TOL = 1e-4


def select_variant(samples: int = 20, seed: int = 20240611) -> VariantSelection:
    """Evaluate the oracle at the roots of both variants over sampled alphas."""
    rng = np.random.default_rng(seed)
    alphas = [sample_admissible(rng) for _ in range(samples)]
    worst = {v: 0.0 for v in VARIANTS}
    checked = {v: 0 for v in VARIANTS}
    for a in alphas:
        for var in VARIANTS:
            for x in find_roots(a, var):
                lam = math.sqrt(x)
                if not (1e-3 < lam < 1e3):
                    continue
                worst[var] = max(worst[var], abs(eigenvalue_condition_oracle(a, lam)))
                checked[var] += 1
    ok = [v for v in VARIANTS if checked[v] > 0 and worst[v] <= ORACLE_TOL]
    if len(ok) != 1:
        raise NumericError(f"variant oracle inconclusive: worst={worst}, checked={checked}")
    return VariantSelection(ok[0], worst, checked)


def variant_selection() -> VariantSelection:
    global _SELECTION
    with _LOCK:
        if _SELECTION is None:
            _SELECTION = select_variant()
        return _SELECTION


def selected_variant() -> str:
    return variant_selection().chosen


# ---------------------------------------------------------------- continuum check

def oscillatory_envelope_ratio(x: float, A: float = 1.0, B: float = 0.5) -> float:
    """Envelope of sqrt(z)(A J2 + B Y2)(sqrt(x) z) on [10,20] over [40,50]."""
    if not x > 0:
        raise DomainError("x must be positive")
    k = math.sqrt(x)

    def env(lo, hi):
        z = np.linspace(lo, hi, 4000)
        w = np.sqrt(z) * (A * bessel_family("J2", k * z) + B * bessel_family("Y2", k * z))
        return float(np.max(np.abs(w)))

    return env(10.0, 20.0) / env(40.0, 50.0)
