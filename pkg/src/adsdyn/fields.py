"""Radial grid fields, the operators P1 / P2, and singular-expansion coordinates.

Grid: cell centres z_i = (i + 1/2) h, h = L / n.

P2 = -d^2/dz^2 + 15/(4 z^2) is discretised in flux form on U = z^(-5/2) psi
(P2 psi = -z^(-5/2) (z^5 U')'), with face weights chosen as the harmonic
mean of z^5 over each cell pair.  The stencil is symmetric, second order,
and annihilates both z^(5/2) and z^(-3/2) exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, FitError, UsageError
from .profiles import (MuTriple, phi0_radial, phi0_regular, phi_j_radial,
                       phi_j_regular, f_j_at_zero, g0_at_zero)
from .specfun import PI_CUBED


# ---------------------------------------------------------------- grid types

@dataclass(frozen=True, eq=False)
class RadialGridField:
    L: float
    n: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.n,):
            raise UsageError(f"values shape {v.shape} != ({self.n},)")
        if not np.all(np.isfinite(v)):
            raise UsageError("non-finite grid values")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def z(self) -> np.ndarray:
        return grid_z(self.L, self.n)

    def like(self, values) -> "RadialGridField":
        return RadialGridField(self.L, self.n, values)

    def same_grid(self, other: "RadialGridField") -> bool:
        return self.n == other.n and abs(self.L - other.L) <= 1e-12 * self.L

    def __add__(self, other):
        _check_same(self, other)
        return self.like(self.values + other.values)

    def __sub__(self, other):
        _check_same(self, other)
        return self.like(self.values - other.values)

    def scale(self, c: float) -> "RadialGridField":
        return self.like(c * self.values)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# L={float(self.L)!r} n={self.n}\n")
            for zi, vi in zip(self.z, self.values):
                fh.write(f"{float(zi)!r},{float(vi)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "RadialGridField":
        with open(path) as fh:
            head = fh.readline().strip()
            if not head.startswith("#"):
                raise UsageError(f"{path}: missing '# L=.. n=..' header")
            kv = dict(tok.split("=") for tok in head[1:].split())
            L, n = float(kv["L"]), int(kv["n"])
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if data.shape[0] != n:
            raise UsageError(f"{path}: expected {n} rows, got {data.shape[0]}")
        return cls(L, n, data[:, 1])


def grid_z(L: float, n: int) -> np.ndarray:
    h = L / n
    return (np.arange(n) + 0.5) * h


def sample(fn, L: float, n: int) -> RadialGridField:
    return RadialGridField(L, n, fn(grid_z(L, n)))


def _check_same(a, b):
    if not a.same_grid(b):
        raise UsageError("fields live on different grids")


@dataclass(frozen=True)
class CutoffSpec:
    """C^4 cutoff: 1 on [0, rho], degree-9 smoothstep down to 0 at `outer`."""

    rho: float
    outer: float

    def __post_init__(self):
        if not (0 < self.rho < self.outer):
            raise UsageError("need 0 < rho < outer")

    @classmethod
    def default(cls, L: float) -> "CutoffSpec":
        return cls(L / 4.0, L / 2.0)

    def _s(self, z):
        return np.clip((np.asarray(z, dtype=float) - self.rho) / (self.outer - self.rho), 0.0, 1.0)

    def chi(self, z):
        s = self._s(z)
        return 1.0 - s ** 5 * (126.0 - 420.0 * s + 540.0 * s ** 2 - 315.0 * s ** 3 + 70.0 * s ** 4)

    def dchi(self, z):
        s = self._s(z)
        return -630.0 * s ** 4 * (1.0 - s) ** 4 / (self.outer - self.rho)

    def d2chi(self, z):
        s = self._s(z)
        return -2520.0 * s ** 3 * (1.0 - s) ** 3 * (1.0 - 2.0 * s) / (self.outer - self.rho) ** 2


# ---------------------------------------------------------------- operators

def face_weights(L: float, n: int) -> np.ndarray:
    """w_{i+1/2} = h / int_{z_i}^{z_{i+1}} s^-5 ds for i = 0..n-2."""
    z = grid_z(L, n)
    a, b = z[:-1], z[1:]
    return 4.0 * a ** 4 * b ** 4 / ((a + b) * (a * a + b * b))


@dataclass(frozen=True, eq=False)
class P2Operator:
    """Symmetric tridiagonal P2 on a grid.

    left='friedrichs': zero 6D flux at the origin (regular U);
    right='dirichlet': odd ghost psi_n = -psi_{n-1};
    right='free': the last face is dropped (natural truncation);
    right='graviton': ghost psi_n = psi_{n-1} (z_n/z_{n-1})^(-3/2), a Robin
    condition under which z^(-3/2) stays an exact kernel element.
    """

    L: float
    n: int
    right: str = "dirichlet"
    diag: np.ndarray = field(init=False, repr=False)
    off: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        L, n = self.L, self.n
        h = L / n
        z = grid_z(L, n)
        w = face_weights(L, n)
        s = z ** -2.5
        diag = np.zeros(n)
        diag[:-1] += w * s[:-1] ** 2
        diag[1:] += w * s[1:] ** 2
        zg = L + 0.5 * h
        wg = 4.0 * z[-1] ** 4 * zg ** 4 / ((z[-1] + zg) * (z[-1] ** 2 + zg ** 2))
        if self.right == "dirichlet":
            diag[-1] += wg * s[-1] * (s[-1] + zg ** -2.5)
        elif self.right == "graviton":
            diag[-1] += wg * s[-1] * (s[-1] - zg ** -4.0 * z[-1] ** 1.5)
        elif self.right != "free":
            raise UsageError(f"unknown right closure {self.right!r}")
        off = -w * s[:-1] * s[1:]
        object.__setattr__(self, "diag", diag / h ** 2)
        object.__setattr__(self, "off", off / h ** 2)

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out

    def solve_shifted(self, mu: float, rhs: np.ndarray) -> np.ndarray:
        """Solve (P2 - mu) x = rhs."""
        ab = np.zeros((3, self.n))
        ab[0, 1:] = self.off
        ab[1] = self.diag - mu
        ab[2, :-1] = self.off
        return solve_banded((1, 1), ab, rhs)


_OPS: dict = {}


def p2_operator(L: float, n: int, right: str = "dirichlet") -> P2Operator:
    key = (float(L), int(n), right)
    op = _OPS.get(key)
    if op is None:
        op = _OPS[key] = P2Operator(float(L), int(n), right)
    return op


def _need(f: RadialGridField):
    if f.n < 4:
        raise UsageError("need at least 4 grid cells")


def apply_p1(f: RadialGridField) -> RadialGridField:
    """P1 psi = psi' - 5/(2z) psi = z^(5/2) (z^(-5/2) psi)'."""
    _need(f)
    z, h = f.z, f.h
    u = f.values * z ** -2.5
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    du[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    du[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return f.like(z ** 2.5 * du)


def apply_p2(f: RadialGridField, left: str = "onesided") -> RadialGridField:
    """P2 on the interior with the kernel-exact stencil.

    End cells: one-sided second-order formulas on psi (left='onesided'),
    or the zero-flux origin closure for regular fields (left='friedrichs').
    The right end always uses the one-sided formula.
    """
    _need(f)
    v = f.values
    h = f.h
    z = f.z
    out = p2_operator(f.L, f.n, "free").apply(v)
    if left == "onesided":
        out[0] = -(2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h ** 2 + 3.75 * v[0] / z[0] ** 2
    elif left != "friedrichs":
        raise UsageError(f"unknown left closure {left!r}")
    out[-1] = -(2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h ** 2 + 3.75 * v[-1] / z[-1] ** 2
    return f.like(out)


def p1_face_products(a: np.ndarray, b: np.ndarray, L: float, n: int) -> float:
    """sum over faces of w (dU_a)(dU_b)/h, i.e. <P1 a, P1 b> consistent with P2."""
    z = grid_z(L, n)
    h = L / n
    s = z ** -2.5
    w = face_weights(L, n)
    da = np.diff(a * s)
    db = np.diff(b * s)
    return float(np.sum(w * da * db) / h)


def value_at_origin(values: np.ndarray, L: float, n: int, ncells: int = 16) -> float:
    """lim z^(-5/2) psi for a regular field: fit U = a + b z^2 + c z^2 log z + d z^4."""
    z = grid_z(L, n)[:ncells]
    u = values[:ncells] * z ** -2.5
    A = np.stack([np.ones_like(z), z ** 2, z ** 2 * np.log(z), z ** 4], axis=1)
    coef, *_ = np.linalg.lstsq(A, u, rcond=None)
    return float(coef[0])


# ---------------------------------------------------------------- coordinates

@dataclass(frozen=True, eq=False)
class VCoords:
    """psi = psi_r + chi (v_m1 z^5/2 + v0 z^5/2 log z + v1 z^1/2 + v2 z^-3/2)."""

    v_m1: float
    v0: float
    v1: float
    v2: float
    psi_r: RadialGridField
    cutoff: CutoffSpec

    @property
    def singular_charge(self) -> float:
        return -4.0 * PI_CUBED * self.v2

    def singular_part(self) -> np.ndarray:
        z = self.psi_r.z
        return self.cutoff.chi(z) * (self.v_m1 * z ** 2.5 + self.v0 * z ** 2.5 * np.log(z)
                                     + self.v1 * np.sqrt(z) + self.v2 * z ** -1.5)

    def field(self) -> RadialGridField:
        return self.psi_r.like(self.psi_r.values + self.singular_part())

    def scale(self, c: float) -> "VCoords":
        return VCoords(c * self.v_m1, c * self.v0, c * self.v1, c * self.v2,
                       self.psi_r.scale(c), self.cutoff)

    def __add__(self, o: "VCoords") -> "VCoords":
        return VCoords(self.v_m1 + o.v_m1, self.v0 + o.v0, self.v1 + o.v1,
                       self.v2 + o.v2, self.psi_r + o.psi_r, self.cutoff)

    def coefficients(self) -> np.ndarray:
        return np.array([self.v_m1, self.v0, self.v1, self.v2])


@dataclass(frozen=True, eq=False)
class UCoords:
    """psi = U_r + u0 Phi_0 + u1 phi_1 + u2 phi_2, U_r regular.

    `u_r` holds U_r on the grid and `ur_at_0` its 6D value at the origin.
    The H^2 component of the 0-norm is U_r + u0 Phi_0.
    """

    u0: float
    u1: float
    u2: float
    u_r: RadialGridField
    ur_at_0: float
    mus: MuTriple
    cutoff: CutoffSpec


def synthesize(v_m1: float, v0: float, v1: float, v2: float,
               L: float, n: int, cutoff: CutoffSpec,
               remainder: Optional[np.ndarray] = None) -> VCoords:
    rem = np.zeros(n) if remainder is None else np.asarray(remainder, dtype=float)
    return VCoords(v_m1, v0, v1, v2, RadialGridField(L, n, rem), cutoff)


def default_window(f: RadialGridField, cutoff: CutoffSpec):
    return (min(40.0 * f.h, cutoff.rho / 10.0), cutoff.rho / 2.0)


def extract_vcoords(f: RadialGridField, chi: CutoffSpec, window=None,
                    n_regular: int = 2) -> VCoords:
    """Weighted least-squares fit of the singular expansion near z = 0.

    Basis on the window: z^-3/2, z^1/2, z^5/2 log z, z^5/2, plus `n_regular`
    pairs z^(5/2+2k) {log z, 1} absorbing the regular remainder.  Rows are
    scaled by z^(3/2), i.e. squared-residual weight z^3.
    """
    if window is None:
        window = default_window(f, chi)
    lo, hi = window
    if not (0 < lo < hi <= chi.rho):
        raise UsageError(f"fit window {window} must lie inside the cutoff plateau (0, {chi.rho}]")
    z = f.z
    sel = (z >= lo) & (z <= hi)
    if sel.sum() < 20:
        raise UsageError(f"fit window holds {sel.sum()} points (< 20)")
    zs = z[sel]
    lz = np.log(zs)
    cols = [zs ** -1.5, np.sqrt(zs), zs ** 2.5 * lz, zs ** 2.5]
    for k in range(1, n_regular + 1):
        cols += [zs ** (2.5 + 2 * k) * lz, zs ** (2.5 + 2 * k)]
    A = np.stack(cols, axis=1) * (zs ** 1.5)[:, None]
    y = f.values[sel] * zs ** 1.5
    scale = np.linalg.norm(A, axis=0)
    An = A / scale
    cond = np.linalg.cond(An)
    if not np.isfinite(cond) or cond > 1e12:
        raise FitError(f"singular-expansion fit ill-conditioned (cond={cond:.3g})")
    coef, *_ = np.linalg.lstsq(An, y, rcond=None)
    coef = coef / scale
    v2, v1, v0, vm1 = coef[:4]
    chiz = chi.chi(z)
    sing = chiz * (vm1 * z ** 2.5 + v0 * z ** 2.5 * np.log(z) + v1 * np.sqrt(z) + v2 * z ** -1.5)
    return VCoords(float(vm1), float(v0), float(v1), float(v2), f.like(f.values - sing), chi)


def _u_scalars(v0: float, v1: float, v2: float, mus: MuTriple):
    p3 = PI_CUBED
    m1, m2 = mus.mu1, mus.mu2
    u1 = (16 * p3 * v1 - 4 * p3 * m2 * v2) / (m1 - m2)
    u2 = (16 * p3 * v1 - 4 * p3 * m1 * v2) / (m2 - m1)
    u0 = 32 * p3 * v0 + 8 * p3 * (m1 + m2) * v1 - 2 * p3 * m1 * m2 * v2
    return u0, u1, u2


def _v_scalars(u0: float, u1: float, u2: float, mus: MuTriple):
    p3 = PI_CUBED
    m1, m2 = mus.mu1, mus.mu2
    v2 = (u1 + u2) / (4 * p3)
    v1 = (m1 * u1 + m2 * u2) / (16 * p3)
    v0 = (2 * u0 - m1 * m1 * u1 - m2 * m2 * u2) / (64 * p3)
    return v0, v1, v2


def profile_regular_parts(mus: MuTriple, z: np.ndarray, chi: np.ndarray):
    """(reg Phi_0, reg phi_1, reg phi_2) on the grid; cached per grid."""
    key = (mus, float(z[0]), float(z[-1]), len(z), float(chi[len(chi) // 2]), float(np.sum(chi)))
    hit = _REG_CACHE.get(key)
    if hit is None:
        hit = (phi0_regular(mus, z, chi), phi_j_regular(mus.mu1, z, chi),
               phi_j_regular(mus.mu2, z, chi))
        if len(_REG_CACHE) > 64:
            _REG_CACHE.clear()
        _REG_CACHE[key] = hit
    return hit


_REG_CACHE: dict = {}


def v_to_u(v: VCoords, mus: MuTriple) -> UCoords:
    if not isinstance(mus, MuTriple):
        raise DomainError("mus must be a MuTriple")
    u0, u1, u2 = _u_scalars(v.v0, v.v1, v.v2, mus)
    z = v.psi_r.z
    chi = v.cutoff.chi(z)
    r0, r1, r2 = profile_regular_parts(mus, z, chi)
    ur = v.psi_r.values + chi * v.v_m1 * z ** 2.5 - (u0 * r0 + u1 * r1 + u2 * r2)
    ur0 = v.v_m1 - u0 * g0_at_zero(mus) - u1 * f_j_at_zero(mus.mu1) - u2 * f_j_at_zero(mus.mu2)
    return UCoords(u0, u1, u2, v.psi_r.like(ur), ur0, mus, v.cutoff)


def u_to_v(u: UCoords, mus: MuTriple) -> VCoords:
    if not isinstance(mus, MuTriple):
        raise DomainError("mus must be a MuTriple")
    if mus != u.mus:
        # profiles depend on mu0 only through Phi_0; re-expand around the new triple
        u = v_to_u(u_to_v(u, u.mus), mus)
    v0, v1, v2 = _v_scalars(u.u0, u.u1, u.u2, mus)
    ur0 = u.ur_at_0
    if ur0 is None:
        ur0 = value_at_origin(u.u_r.values, u.u_r.L, u.u_r.n)
    vm1 = ur0 + u.u0 * g0_at_zero(mus) + u.u1 * f_j_at_zero(mus.mu1) + u.u2 * f_j_at_zero(mus.mu2)
    z = u.u_r.z
    chi = u.cutoff.chi(z)
    r0, r1, r2 = profile_regular_parts(mus, z, chi)
    psi_r = u.u_r.values + u.u0 * r0 + u.u1 * r1 + u.u2 * r2 - chi * vm1 * z ** 2.5
    return VCoords(float(vm1), v0, v1, v2, u.u_r.like(psi_r), u.cutoff)


def full_field_from_u(u: UCoords) -> RadialGridField:
    z = u.u_r.z
    return u.u_r.like(u.u_r.values + u.u0 * phi0_radial(u.mus, z)
                      + u.u1 * phi_j_radial(u.mus.mu1, z) + u.u2 * phi_j_radial(u.mus.mu2, z))


# ---------------------------------------------------------------- inner products

def _shifted_p2(values: np.ndarray, L: float, n: int, mu: float) -> np.ndarray:
    """(P2 - mu) with the zero-flux origin and a quadratic-extrapolation right ghost."""
    op = p2_operator(L, n, "free")
    out = op.apply(values)
    # restore the missing right face using an extrapolated ghost value
    h = L / n
    z = grid_z(L, n)
    zg = L + 0.5 * h
    ghost = 3 * values[-1] - 3 * values[-2] + values[-3]
    wg = 4.0 * z[-1] ** 4 * zg ** 4 / ((z[-1] + zg) * (z[-1] ** 2 + zg ** 2))
    out[-1] -= z[-1] ** -2.5 * wg * (ghost * zg ** -2.5 - values[-1] * z[-1] ** -2.5) / h ** 2
    return out - mu * values


def h2_ip_values(a: np.ndarray, b: np.ndarray, L: float, n: int, mu1: float, mu2: float) -> float:
    h = L / n
    pa = _shifted_p2(a, L, n, mu1)
    pb = _shifted_p2(b, L, n, mu2)
    return PI_CUBED * h * float(np.dot(pa, pb))


def h2_weighted_ip(a: RadialGridField, b: RadialGridField, mu1: float, mu2: float) -> float:
    """pi^3 <(P2 - mu1) a, (P2 - mu2) b> by the midpoint rule on the cell centres."""
    _check_same(a, b)
    return h2_ip_values(a.values, b.values, a.L, a.n, mu1, mu2)


def h0_parts(u: UCoords):
    """H^2 component U_r + u0 Phi_0 as grid values."""
    z = u.u_r.z
    return u.u_r.values + u.u0 * phi0_radial(u.mus, z)


def inner_h0(f: VCoords, g: VCoords, params) -> float:
    """<f, g>_0 = <f_r, g_r>_{H^2} + gamma1 f1 g1 + gamma2 f2 g2."""
    mus = params.mus
    uf, ug = v_to_u(f, mus), v_to_u(g, mus)
    _check_same(uf.u_r, ug.u_r)
    ip = h0_regular_ip(uf, ug)
    return ip + params.gamma1 * uf.u1 * ug.u1 + params.gamma2 * uf.u2 * ug.u2


def h0_regular_ip(uf: UCoords, ug: UCoords) -> float:
    """<U_r + u0 Phi_0, W_r + w0 Phi_0>_{H^2} with the Phi_0 pieces in closed form."""
    from .profiles import phi0_h2_norm_sq_6d, PHI0_NU
    mus = uf.mus
    L, n = uf.u_r.L, uf.u_r.n
    a, b = uf.u_r.values, ug.u_r.values
    ip = h2_ip_values(a, b, L, n, mus.mu1, mus.mu2)
    ip += PHI0_NU * (uf.u0 * resolvent_values(b, L, n, mus.mu0)
                     + ug.u0 * resolvent_values(a, L, n, mus.mu0))
    ip += uf.u0 * ug.u0 * phi0_h2_norm_sq_6d(mus)
    return ip


def resolvent_values(values: np.ndarray, L: float, n: int, mu0: float) -> float:
    if not (mu0 < 0):
        raise DomainError("mu0 must be negative")
    if not np.any(values):
        return 0.0
    op = p2_operator(L, n, "dirichlet")
    w = op.solve_shifted(mu0, values)
    if not np.all(np.isfinite(w)):
        from .errors import NumericError
        raise NumericError("resolvent solve failed")
    return value_at_origin(w, L, n)


def resolvent_at_origin(f: RadialGridField, mu0: float) -> float:
    """((-Delta - mu0)^-1 u)(0) for the 6D function u = z^(-5/2) f."""
    return resolvent_values(f.values, f.L, f.n, mu0)
