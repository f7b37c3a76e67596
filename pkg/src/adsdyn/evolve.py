"""Time evolution of one Fourier mode m = |xi|.

The field is split as

    psi = phiF + chi (z^(1/2) phi1 + z^(-3/2) phi2),
    phiF = phi_r + chi z^(5/2) (v_m1 + phi0 log z),

and the mode equation (d_t^2 + m^2 + P2) psi = 0 becomes

    (d_t^2 + m^2 + P2) phiF = -4 chi z^(1/2) phi0
                              + phi1 (chi'' z^(1/2) + chi' z^(-1/2))
                              + phi2 (chi'' z^(-3/2) - 3 chi' z^(-5/2)),
    phi1'' + m^2 phi1 = 4 phi0,
    phi2'' + m^2 phi2 = -4 phi1,

closed by the boundary condition v_m1 + a0 phi0 + a1 phi1 + a2 phi2 = 0.
P2 acts on phiF with the zero-flux origin and a Dirichlet wall at z = L
(or the z^(-3/2)-exact Robin wall for graviton data).
Positions (phiF, phi1, phi2) advance by velocity Verlet; phi0 and v_m1 are
linear functions of the positions (the closure), so the scheme is
time-reversible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .atlas import BoundaryTriple, ExtensionParams, _alpha, find_extension_params, is_admissible
from .atlas import sigma_m_contains, sigma0_contains
from .energy import EnergyReport, energy_full
from .errors import ClosureError, UsageError
from .fields import CutoffSpec, RadialGridField, VCoords, grid_z, p2_operator

CFL_DEFAULT = 0.5
CONSTRAINT_TOL = 1e-8
PROBE_TERMS = 5
# fit-truncation level of the v2 probe, relative to the data amplitude
PROBE_NOISE = 1e-5


@dataclass(frozen=True, eq=False)
class ModeState:
    phiF: RadialGridField
    phiF_dot: RadialGridField
    phi1: float
    phi1_dot: float
    phi2: float
    phi2_dot: float
    phi0: float
    v_m1: float
    t: float
    m: float
    phi0_dot: float = 0.0
    v_m1_dot: float = 0.0

    @property
    def L(self):
        return self.phiF.L

    @property
    def n(self):
        return self.phiF.n


@dataclass
class Trajectory:
    times: List[float] = field(default_factory=list)
    energies: List[Optional[EnergyReport]] = field(default_factory=list)
    v_m1: List[float] = field(default_factory=list)
    phi0: List[float] = field(default_factory=list)
    phi1: List[float] = field(default_factory=list)
    phi2: List[float] = field(default_factory=list)
    phi1_dot: List[float] = field(default_factory=list)
    phi2_dot: List[float] = field(default_factory=list)
    snapshots: Dict[float, np.ndarray] = field(default_factory=dict)
    states: List[ModeState] = field(default_factory=list)
    L: float = 0.0
    n: int = 0
    m: float = 0.0
    growing: bool = False
    alpha: Optional[BoundaryTriple] = None
    geo: Optional["ModeGeometry"] = None

    def append(self, t, rep, st: "ModeState", snapshot=None):
        if self.times and not t > self.times[-1]:
            raise ValueError("trajectory times must increase")
        self.times.append(t)
        self.energies.append(rep)
        self.v_m1.append(st.v_m1)
        self.phi0.append(st.phi0)
        self.phi1.append(st.phi1)
        self.phi2.append(st.phi2)
        self.phi1_dot.append(st.phi1_dot)
        self.phi2_dot.append(st.phi2_dot)
        if snapshot is not None:
            self.snapshots[t] = snapshot

    def energy_totals(self) -> np.ndarray:
        return np.array([e.total if e is not None else np.nan for e in self.energies])

    def trace(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)


# ---------------------------------------------------------------- geometry

@dataclass(frozen=True, eq=False)
class ModeGeometry:
    """Grid-dependent pieces shared by all steps of one run."""

    L: float
    n: int
    cutoff: CutoffSpec
    window: Tuple[float, float]
    n_regular: int = 2
    right: str = "dirichlet"

    def __post_init__(self):
        z = grid_z(self.L, self.n)
        c = self.cutoff
        chi, d1, d2 = c.chi(z), c.dchi(z), c.d2chi(z)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "chi", chi)
        op = p2_operator(self.L, self.n, self.right)
        zl = z ** 2.5 * np.log(z)
        dzl = z ** 1.5 * (2.5 * np.log(z) + 1.0)
        # -4 chi z^(1/2) written as P2(chi zl) + chi'' zl + 2 chi' zl' with the
        # discrete P2, so the stencil error on the log term cancels exactly
        object.__setattr__(self, "src0", op.apply(chi * zl) + d2 * zl + 2.0 * d1 * dzl)
        object.__setattr__(self, "src1", d2 * np.sqrt(z) + d1 / np.sqrt(z))
        object.__setattr__(self, "src2", d2 * z ** -1.5 - 3.0 * d1 * z ** -2.5)
        object.__setattr__(self, "sing1", chi * np.sqrt(z))
        object.__setattr__(self, "sing2", chi * z ** -1.5)
        object.__setattr__(self, "zlog", chi * z ** 2.5 * np.log(z))
        object.__setattr__(self, "z52", chi * z ** 2.5)
        object.__setattr__(self, "op", op)
        lo, hi = self.window
        sel = (z >= lo) & (z <= hi)
        if sel.sum() < 8:
            raise UsageError(f"closure window {self.window} holds {sel.sum()} points (< 8)")
        if hi > c.rho:
            raise UsageError("closure window must lie inside the cutoff plateau")
        zs = z[sel]
        lz = np.log(zs)
        cols = [np.ones_like(zs), lz]
        for k in range(1, self.n_regular + 1):
            cols += [zs ** (2 * k), zs ** (2 * k) * lz]
        A = np.stack(cols, axis=1)
        # fit U = z^(-5/2) phiF; row i of pinv gives coefficient i
        pinv = np.linalg.pinv(A)
        object.__setattr__(self, "sel", sel)
        object.__setattr__(self, "w_sel", zs ** -2.5)
        object.__setattr__(self, "pinv", pinv)
        # constrained variant: refit with the log coefficient prescribed
        A_nolog = np.delete(A, 1, axis=1)
        pinv_nolog = np.linalg.pinv(A_nolog)
        object.__setattr__(self, "pinv_nolog", pinv_nolog)
        object.__setattr__(self, "lz_sel", lz)

    def fit(self, phiF: np.ndarray) -> Tuple[float, float]:
        """(v_m1, log coefficient) of phiF near the origin."""
        u = phiF[self.sel] * self.w_sel
        c = self.pinv[:2] @ u
        return float(c[0]), float(c[1])

    def fit_ratio(self) -> Tuple[np.ndarray, float]:
        """v_m1 = r . U - s * phi0 when the log coefficient is prescribed as phi0."""
        r = self.pinv_nolog[0]
        s = float(r @ self.lz_sel)
        return r, s


def default_closure_window(L: float, n: int) -> Tuple[float, float]:
    h = L / n
    return (0.4 * h, 20.6 * h)


def make_geometry(L: float, n: int, cutoff: Optional[CutoffSpec] = None,
                  window=None, right: str = "dirichlet") -> ModeGeometry:
    cutoff = cutoff or CutoffSpec.default(L)
    return ModeGeometry(float(L), int(n), cutoff, tuple(window or default_closure_window(L, n)),
                        right=right)


# ---------------------------------------------------------------- closure

def closure(geo: ModeGeometry, alpha: BoundaryTriple, phiF: np.ndarray, phi1: float,
            phi2: float, mode: str = "joint") -> Tuple[float, float]:
    """Return (v_m1, phi0) consistent with phiF and the boundary condition."""
    a = alpha
    rhs = -(a.a1 * phi1 + a.a2 * phi2)
    if mode == "explicit":
        if a.a0 == 0:
            raise ClosureError("a0 = 0: the boundary condition does not determine phi0")
        vm1, _ = geo.fit(phiF)
        return vm1, (rhs - vm1) / a.a0
    if mode == "joint":
        # fit with the log coefficient tied to phi0: v_m1 + s phi0 = r.U,
        # constraint: v_m1 + a0 phi0 = rhs
        r, s = geo.fit_ratio()
        u = phiF[geo.sel] * geo.w_sel
        M = np.array([[1.0, s], [1.0, a.a0]])
        if abs(a.a0 - s) <= 1e-12 * max(1.0, abs(s)):
            raise ClosureError(f"closure matrix singular: a0 = {a.a0} equals fit ratio {s}")
        vm1, phi0 = np.linalg.solve(M, np.array([float(r @ u), rhs]))
        return float(vm1), float(phi0)
    raise UsageError(f"unknown closure mode {mode!r}")


# ---------------------------------------------------------------- dynamics

def _accel(geo: ModeGeometry, m: float, phiF, phi0, phi1, phi2):
    aF = (-geo.op.apply(phiF) - m * m * phiF + geo.src0 * phi0 + geo.src1 * phi1
          + geo.src2 * phi2)
    a1 = -m * m * phi1 + 4.0 * phi0
    a2 = -m * m * phi2 - 4.0 * phi1
    return aF, a1, a2


def _check_dt(dt: float, h: float, m: float, cfl: float = CFL_DEFAULT):
    if not dt > 0:
        raise UsageError("dt must be positive")
    if dt > cfl * h * (1 + 1e-12):
        raise UsageError(f"dt={dt} violates CFL: dt <= {cfl} h = {cfl * h}")


def _with_closure(geo, alpha, st: ModeState, mode) -> ModeState:
    vm1, phi0 = closure(geo, alpha, st.phiF.values, st.phi1, st.phi2, mode)
    vd, pd = closure(geo, alpha, st.phiF_dot.values, st.phi1_dot, st.phi2_dot, mode)
    return replace(st, v_m1=vm1, phi0=phi0, v_m1_dot=vd, phi0_dot=pd)


def step(state: ModeState, dt: float, alpha, params: Optional[ExtensionParams] = None,
         geo: Optional[ModeGeometry] = None, closure_mode: str = "joint",
         cfl: float = CFL_DEFAULT) -> ModeState:
    """One velocity-Verlet step of the coupled system."""
    a = _alpha(alpha)
    geo = geo or make_geometry(state.L, state.n)
    _check_dt(dt, state.phiF.h, state.m, cfl)
    m = state.m
    x, v = state.phiF.values, state.phiF_dot.values
    aF, a1, a2 = _accel(geo, m, x, state.phi0, state.phi1, state.phi2)
    vh = v + 0.5 * dt * aF
    v1h = state.phi1_dot + 0.5 * dt * a1
    v2h = state.phi2_dot + 0.5 * dt * a2
    xn = x + dt * vh
    p1n = state.phi1 + dt * v1h
    p2n = state.phi2 + dt * v2h
    vm1, p0n = closure(geo, a, xn, p1n, p2n, closure_mode)
    aF, a1, a2 = _accel(geo, m, xn, p0n, p1n, p2n)
    vn = vh + 0.5 * dt * aF
    v1n = v1h + 0.5 * dt * a1
    v2n = v2h + 0.5 * dt * a2
    vd, pd = closure(geo, a, vn, v1n, v2n, closure_mode)
    like = state.phiF.like
    return ModeState(like(xn), like(vn), p1n, v1n, p2n, v2n, p0n, vm1, state.t + dt, m, pd, vd)


def state_vcoords(st: ModeState, geo: ModeGeometry) -> Tuple[VCoords, VCoords]:
    """Decomposed position and velocity of a mode state."""
    x = st.phiF.values - st.v_m1 * geo.z52 - st.phi0 * geo.zlog
    v = st.phiF_dot.values - st.v_m1_dot * geo.z52 - st.phi0_dot * geo.zlog
    f = VCoords(st.v_m1, st.phi0, st.phi1, st.phi2, st.phiF.like(x), geo.cutoff)
    g = VCoords(st.v_m1_dot, st.phi0_dot, st.phi1_dot, st.phi2_dot, st.phiF.like(v), geo.cutoff)
    return f, g


def full_field(st: ModeState, geo: ModeGeometry) -> np.ndarray:
    return st.phiF.values + st.phi1 * geo.sing1 + st.phi2 * geo.sing2


def constraint_residual(st: ModeState, alpha) -> float:
    a = _alpha(alpha)
    terms = np.array([st.v_m1, a.a0 * st.phi0, a.a1 * st.phi1, a.a2 * st.phi2])
    return float(abs(terms.sum()) / max(np.abs(terms).sum(), 1e-300))


def initial_state(f, g, m: float, L: Optional[float] = None, n: Optional[int] = None,
                  geo: Optional[ModeGeometry] = None, alpha=None,
                  closure_mode: str = "joint") -> ModeState:
    """Build a ModeState from grid fields (compact data) or VCoords."""
    def split(x):
        if isinstance(x, VCoords):
            z = x.psi_r.z
            chi = x.cutoff.chi(z)
            phiF = x.psi_r.values + chi * z ** 2.5 * (x.v_m1 + x.v0 * np.log(z))
            return x.psi_r.like(phiF), x.v1, x.v2, x.v0, x.v_m1
        if isinstance(x, RadialGridField):
            return x, 0.0, 0.0, 0.0, 0.0
        raise UsageError("initial data must be RadialGridField or VCoords")

    F, p1, p2, p0, vm1 = split(f)
    G, d1, d2, d0, dvm1 = split(g)
    if not F.same_grid(G):
        raise UsageError("f and g live on different grids")
    st = ModeState(F, G, p1, d1, p2, d2, p0, vm1, 0.0, float(m), d0, dvm1)
    if alpha is not None:
        geo = geo or make_geometry(F.L, F.n)
        st = _with_closure(geo, _alpha(alpha), st, closure_mode)
    return st


def evolve(f, g, alpha, m: float, T: float, dt: float, sample_every: int = 10,
           params: Optional[ExtensionParams] = None, snapshot_every: Optional[int] = None,
           with_energy: bool = True, geo: Optional[ModeGeometry] = None,
           closure_mode: str = "joint", keep_states: bool = False,
           cfl: float = CFL_DEFAULT) -> Trajectory:
    a = _alpha(alpha)
    if not is_admissible(a).admissible:
        raise UsageError(f"alpha={a.as_tuple()} is not admissible")
    if T < 0:
        raise UsageError("T must be >= 0")
    F = f.psi_r if isinstance(f, VCoords) else f
    geo = geo or make_geometry(F.L, F.n)
    _check_dt(dt, F.h, m, cfl)
    if with_energy and params is None:
        params = find_extension_params(a)
    st = initial_state(f, g, m, geo=geo, alpha=a, closure_mode=closure_mode)
    traj = Trajectory(L=F.L, n=F.n, m=float(m), alpha=a, geo=geo)
    nsteps = int(round(T / dt))

    def record(s: ModeState, k: int):
        rep = None
        if with_energy:
            fv, gv = state_vcoords(s, geo)
            rep = energy_full(fv, gv, params, m)
            if rep.total < 0:
                traj.growing = True
        snap = None
        if snapshot_every and k % snapshot_every == 0:
            snap = full_field(s, geo)
        traj.append(s.t, rep, s, snap)
        if keep_states:
            traj.states.append(s)

    record(st, 0)
    for k in range(1, nsteps + 1):
        st = step(st, dt, a, params, geo, closure_mode, cfl)
        if k % sample_every == 0 or k == nsteps:
            record(st, k)
    traj.final_state = st
    return traj


# ---------------------------------------------------------------- Friedrichs baseline

@dataclass
class FriedrichsTrajectory:
    times: List[float] = field(default_factory=list)
    energy: List[float] = field(default_factory=list)
    norm: List[float] = field(default_factory=list)
    l2: List[float] = field(default_factory=list)
    v2: List[float] = field(default_factory=list)
    snapshots: Dict[float, np.ndarray] = field(default_factory=dict)
    L: float = 0.0
    n: int = 0


def natural_energy(x: np.ndarray, v: np.ndarray, L: float, n: int, m: float) -> float:
    """int |psi_t|^2 + |psi_z|^2 + (m^2 + 15/(4z^2)) |psi|^2, discretised with P2."""
    h = L / n
    op = p2_operator(L, n, "dirichlet")
    return h * float(v @ v + x @ op.apply(x) + m * m * (x @ x))


def friedrichs_evolve(f: RadialGridField, g: RadialGridField, m: float, T: float, dt: float,
                      sample_every: int = 10, snapshot_every: Optional[int] = None,
                      cfl: float = CFL_DEFAULT, v2_window=None) -> FriedrichsTrajectory:
    """Leapfrog with the Dirichlet-type origin; tracks the natural energy."""
    if not f.same_grid(g):
        raise UsageError("f and g live on different grids")
    _check_dt(dt, f.h, m, cfl)
    L, n, h = f.L, f.n, f.h
    op = p2_operator(L, n, "dirichlet")
    z = f.z
    x, v = f.values.copy(), g.values.copy()
    lo, hi = v2_window or (2 * h, max(0.2, 20 * h))
    sel = (z >= lo) & (z <= hi)
    zs = z[sel]
    # v2 probe: coefficient of z^-3/2 in a fit {z^-3/2, z^1/2, ..., z^13/2}
    A = np.stack([zs ** (2 * j - 1.5) for j in range(PROBE_TERMS)], axis=1) * (zs ** 1.5)[:, None]
    pinv = np.linalg.pinv(A)
    traj = FriedrichsTrajectory(L=L, n=n)

    def record(t, k):
        traj.times.append(t)
        e = natural_energy(x, v, L, n, m)
        traj.energy.append(e)
        # norm of the unitary group is the energy norm; plain L2 is not conserved
        traj.norm.append(math.sqrt(max(e, 0.0)))
        traj.l2.append(math.sqrt(h * float(x @ x)))
        traj.v2.append(float(pinv[0] @ (x[sel] * zs ** 1.5)))
        if snapshot_every and k % snapshot_every == 0:
            traj.snapshots[t] = x.copy()

    acc = lambda y: -op.apply(y) - m * m * y
    record(0.0, 0)
    a = acc(x)
    nsteps = int(round(T / dt))
    for k in range(1, nsteps + 1):
        v = v + 0.5 * dt * a
        x = x + dt * v
        a = acc(x)
        v = v + 0.5 * dt * a
        if k % sample_every == 0 or k == nsteps:
            record(k * dt, k)
    traj.final = (x, v)
    return traj


# ---------------------------------------------------------------- diagnostics

def causality_front(snapshots: Dict[float, np.ndarray], L: float, n: int,
                    threshold: float = 1e-3, z_min: float = 0.0) -> List[Tuple[float, float]]:
    """Outermost z with |field| > threshold * max|field| for each snapshot."""
    if not snapshots:
        raise UsageError("trajectory has no snapshots")
    z = grid_z(L, n)
    keep = z >= z_min
    out = []
    for t in sorted(snapshots):
        w = np.abs(snapshots[t])[keep]
        mx = float(w.max()) if w.size else 0.0
        if mx == 0.0:
            continue
        idx = np.nonzero(w > threshold * mx)[0]
        out.append((t, float(z[keep][idx[-1]])))
    return out


def front_speed(fronts: List[Tuple[float, float]], t_max: float = 1.0) -> float:
    pts = [(t, p) for t, p in fronts if t <= t_max]
    if len(pts) < 2:
        raise UsageError("need at least two fronts")
    t, p = np.array(pts).T
    return float(np.polyfit(t, p, 1)[0])


def static_drift(alpha, m: float, T: float, dt: float, L: float = 20.0,
                 n: Optional[int] = None, variant: str = "shifted",
                 force: bool = False) -> float:
    """Relative L2 drift of the static (or zero-mode) profile over [0, T]."""
    from .spectrum import eigen_vcoords
    a = _alpha(alpha)
    n = n or int(round(L / (2 * dt)))
    if m > 0:
        if not force and not sigma_m_contains(a, m, variant):
            raise UsageError(f"alpha={a.as_tuple()} is not in Sigma({m}) ({variant})")
        f = eigen_vcoords(m, L, n)
    else:
        if not force and not sigma0_contains(a):
            raise UsageError(f"alpha={a.as_tuple()} is not in Sigma(0)")
        f = eigen_vcoords(0.0, L, n)
    g = VCoords(0.0, 0.0, 0.0, 0.0, f.psi_r.like(np.zeros(n)), f.cutoff)
    geo = make_geometry(L, n, f.cutoff)
    traj = evolve(f, g, a, m, T, dt, sample_every=max(1, int(round(0.1 / dt))),
                  with_energy=False, geo=geo, keep_states=True)
    s0 = full_field(traj.states[0], geo)
    z = grid_z(L, n)
    sel = (z >= 0.5) & (z <= L / 2)
    base = np.linalg.norm(s0[sel])
    return max(float(np.linalg.norm(full_field(s, geo)[sel] - s0[sel]) / base)
               for s in traj.states)
