"""Superposition of Fourier modes into Phi(t, x, z) and the graviton split.

A plane-wave spec is a finite list of modes xi in R^3 with complex amplitudes.
Each mode evolves independently with m = |xi|; the assembled field is

    Phi(t, x, z) = (2 pi)^(-3/2) sum_k c_k exp(i x . xi_k) psi_k(t, z).

The graviton amplitude of a mode is its <.,.>_0 projection on z^(-3/2), which
obeys phi'' + m^2 phi = 0 because z^(-3/2) spans the kernel of A.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .atlas import ExtensionParams, _alpha, find_extension_params, sigma0_contains
from .energy import energy_full
from .errors import UsageError
from .evolve import Trajectory, evolve, make_geometry, state_vcoords
from .fields import CutoffSpec, RadialGridField, VCoords, inner_h0
from .spectrum import eigen_vcoords

ModeData = Union[RadialGridField, VCoords]


@dataclass(frozen=True, eq=False)
class Mode:
    xi: Tuple[float, float, float]
    amplitude: complex
    f: ModeData
    g: ModeData
    weight: float = 1.0

    @property
    def m(self) -> float:
        return float(np.linalg.norm(self.xi))


@dataclass(eq=False)
class PlaneWaveSpec:
    modes: List[Mode]
    x_grid: np.ndarray  # (N, 3) sample points

    def __post_init__(self):
        if not self.modes:
            raise UsageError("spec has no modes")
        self.x_grid = np.atleast_2d(np.asarray(self.x_grid, dtype=float))
        if self.x_grid.shape[1] != 3:
            raise UsageError("x_grid must have shape (N, 3)")
        grids = {(_grid_of(x).L, _grid_of(x).n) for md in self.modes for x in (md.f, md.g)}
        if len(grids) != 1:
            raise UsageError("all modes must share one radial grid")

    @property
    def L(self) -> float:
        return _grid_of(self.modes[0].f).L

    @property
    def n(self) -> int:
        return _grid_of(self.modes[0].f).n


def _grid_of(x: ModeData) -> RadialGridField:
    return x.psi_r if isinstance(x, VCoords) else x


def graviton_data(L: float, n: int, c: float = 1.0, cutoff: Optional[CutoffSpec] = None) -> VCoords:
    """c z^(-3/2) in v-coordinates."""
    return eigen_vcoords(0.0, L, n, cutoff).scale(c)


def zero_data(L: float, n: int, cutoff: Optional[CutoffSpec] = None) -> VCoords:
    cutoff = cutoff or CutoffSpec.default(L)
    return VCoords(0.0, 0.0, 0.0, 0.0, RadialGridField(L, n, np.zeros(n)), cutoff)


def is_conjugate_symmetric(spec: PlaneWaveSpec, tol: float = 1e-12) -> bool:
    """Every mode has a partner at -xi with conjugate amplitude and equal data."""
    for md in spec.modes:
        if np.allclose(md.xi, 0.0) and abs(md.amplitude.imag) <= tol * max(1.0, abs(md.amplitude)):
            continue
        if not any(np.allclose(np.negative(md.xi), o.xi, atol=tol)
                   and abs(np.conj(md.amplitude) - o.amplitude) <= tol * max(1.0, abs(md.amplitude))
                   and o.f is md.f and o.g is md.g
                   for o in spec.modes):
            return False
    return True


# ---------------------------------------------------------------- evolution

def worker_count(requested: Optional[int] = None) -> int:
    cap = os.environ.get("ADSDYN_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"ADSDYN_THREADS={cap!r} is not an integer")
    return max(1, n)


def evolve_modes(spec: PlaneWaveSpec, alpha, T: float, dt: float, sample_every: int = 10,
                 snapshot_every: Optional[int] = None, params: Optional[ExtensionParams] = None,
                 right: str = "dirichlet", workers: Optional[int] = None,
                 keep_states: bool = False, with_energy: bool = True,
                 order: Optional[Sequence[int]] = None) -> List[Trajectory]:
    """Evolve every mode; results are returned in spec order whatever `order` is."""
    a = _alpha(alpha)
    params = params or (find_extension_params(a) if with_energy else None)
    L, n = spec.L, spec.n
    idx = list(order) if order is not None else list(range(len(spec.modes)))
    if sorted(idx) != list(range(len(spec.modes))):
        raise UsageError("order must be a permutation of the mode indices")

    def run(k: int) -> Trajectory:
        md = spec.modes[k]
        cutoff = md.f.cutoff if isinstance(md.f, VCoords) else None
        geo = make_geometry(L, n, cutoff, right=right)
        return evolve(md.f, md.g, a, md.m, T, dt, sample_every, params=params,
                      snapshot_every=snapshot_every, with_energy=with_energy, geo=geo,
                      keep_states=keep_states)

    out: List[Optional[Trajectory]] = [None] * len(spec.modes)
    nw = min(worker_count(workers), len(idx))
    if nw == 1:
        for k in idx:
            out[k] = run(k)
    else:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            for k, tr in zip(idx, ex.map(run, idx)):
                out[k] = tr
    return out


def _snapshot_at(traj: Trajectory, t: float) -> np.ndarray:
    if not traj.snapshots:
        raise UsageError("mode trajectory has no snapshots")
    keys = np.array(sorted(traj.snapshots))
    k = int(np.argmin(np.abs(keys - t)))
    if abs(keys[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise UsageError(f"no snapshot at t={t} (nearest {keys[k]})")
    return traj.snapshots[float(keys[k])]


def assemble(spec: PlaneWaveSpec, trajectories: Sequence[Optional[Trajectory]], t: float):
    """Phi(t, x, z) on x_grid times the radial grid, shape (N, n).

    Real for conjugate-symmetric specs, complex otherwise.
    """
    if len(trajectories) != len(spec.modes) or any(tr is None for tr in trajectories):
        raise UsageError("missing mode trajectory")
    x = spec.x_grid
    out = np.zeros((x.shape[0], spec.n), dtype=complex)
    for md, tr in zip(spec.modes, trajectories):
        psi = _snapshot_at(tr, t)
        phase = md.amplitude * np.exp(1j * (x @ np.asarray(md.xi, dtype=float)))
        out += np.outer(phase, psi)
    out *= (2.0 * math.pi) ** -1.5
    return out.real if is_conjugate_symmetric(spec) else out


def free_wave_amplitude(spec: PlaneWaveSpec, c: Sequence[float], d: Sequence[float],
                        t: float) -> np.ndarray:
    """phi(t, x) for modes with data c_k z^(-3/2), d_k z^(-3/2): a free 3D wave."""
    x = spec.x_grid
    out = np.zeros(x.shape[0], dtype=complex)
    for md, ck, dk in zip(spec.modes, c, d):
        m = md.m
        s = math.sin(m * t) / m if m > 0 else t
        out += md.amplitude * np.exp(1j * (x @ np.asarray(md.xi))) * (ck * math.cos(m * t) + dk * s)
    out *= (2.0 * math.pi) ** -1.5
    return out.real if is_conjugate_symmetric(spec) else out


# ---------------------------------------------------------------- graviton

@dataclass
class GravitonSplit:
    times: np.ndarray
    closed_form_amplitude: np.ndarray
    projected_amplitude: np.ndarray
    residual: np.ndarray  # phi2(t) - closed form
    norm_sq: float        # ||z^(-3/2)||_0^2


def graviton_norm_sq(params: ExtensionParams, L: float, n: int,
                     cutoff: Optional[CutoffSpec] = None) -> float:
    e = eigen_vcoords(0.0, L, n, cutoff)
    return inner_h0(e, e, params)


def graviton_split(traj: Trajectory, params: Optional[ExtensionParams] = None,
                   m: Optional[float] = None) -> GravitonSplit:
    """Closed-form graviton amplitude vs the projection of the evolved states."""
    if traj.alpha is None or traj.geo is None:
        raise UsageError("trajectory lacks alpha/geometry (use evolve)")
    if not sigma0_contains(traj.alpha, positivity_window=True):
        raise UsageError(f"alpha={traj.alpha.as_tuple()} is outside the graviton window")
    if len(traj.states) < 2:
        raise UsageError("graviton_split needs stored states (evolve(..., keep_states=True))")
    params = params or find_extension_params(traj.alpha)
    m = traj.m if m is None else float(m)
    geo = traj.geo
    e = eigen_vcoords(0.0, traj.L, traj.n, geo.cutoff)
    ee = inner_h0(e, e, params)
    f0, g0 = state_vcoords(traj.states[0], geo)
    cf, cg = inner_h0(f0, e, params) / ee, inner_h0(g0, e, params) / ee
    t = np.array([s.t for s in traj.states])
    sin_m = np.sin(m * t) / m if m > 0 else t
    closed = cf * np.cos(m * t) + cg * sin_m
    proj = np.array([inner_h0(state_vcoords(s, geo)[0], e, params) / ee for s in traj.states])
    phi2 = np.array([s.phi2 for s in traj.states])
    return GravitonSplit(t, closed, proj, phi2 - closed, float(ee))


def scattering_diagnostic(split: GravitonSplit) -> np.ndarray:
    """phi2(t) - graviton amplitude; recorded for inspection only."""
    return np.asarray(split.residual, dtype=float).copy()


# ---------------------------------------------------------------- energy

def ads_energy(spec: PlaneWaveSpec, trajectories: Sequence[Trajectory],
               params: Optional[ExtensionParams] = None) -> np.ndarray:
    """Weighted mode sum w_k |c_k|^2 E_k(t) over the common sample times."""
    if len(trajectories) != len(spec.modes):
        raise UsageError("missing mode trajectory")
    series = []
    for md, tr in zip(spec.modes, trajectories):
        E = tr.energy_totals()
        if np.isnan(E).any():
            raise UsageError("mode trajectory has no energies")
        series.append(md.weight * abs(md.amplitude) ** 2 * E)
    lens = {len(s) for s in series}
    if len(lens) != 1:
        raise UsageError("mode trajectories were sampled differently")
    return np.sum(series, axis=0)


def graviton_energy(spec: PlaneWaveSpec, c: Sequence[float], d: Sequence[float],
                    norm_sq: float) -> float:
    """||z^(-3/2)||_0^2 sum_k w_k |c_k|^2 (d_k^2 + |xi_k|^2 c_k^2)."""
    return norm_sq * sum(md.weight * abs(md.amplitude) ** 2 * (dk * dk + md.m ** 2 * ck * ck)
                         for md, ck, dk in zip(spec.modes, c, d))


def sample_states(alpha, params: ExtensionParams, trials: int, seed: int, L: float, n: int):
    """Random 0-normalised mixtures of bound states and smooth bumps."""
    from .energy import norm0_sq, random_bump
    from .spectrum import find_roots, selected_variant
    rng = np.random.default_rng(seed)
    cutoff = CutoffSpec.default(L)
    bound = [eigen_vcoords(math.sqrt(x), L, n, cutoff) for x in find_roots(alpha, selected_variant())]
    bound = [b.scale(1.0 / math.sqrt(norm0_sq(b, params))) for b in bound]
    out = []
    for _ in range(trials):
        bump = RadialGridField(L, n, sum(random_bump(rng, L, n, 1.0, 0.6 * L) for _ in range(2)))
        v = VCoords(0.0, 0.0, 0.0, 0.0, bump, cutoff)
        v = v.scale(rng.normal() / math.sqrt(norm0_sq(v, params)))
        for b in bound:
            v = v + b.scale(rng.normal())
        out.append(v.scale(1.0 / math.sqrt(norm0_sq(v, params))))
    return out


def kappa_threshold(alpha, params: Optional[ExtensionParams] = None, trials: int = 200,
                    seed: int = 0, m_hi: float = 10.0, tol: float = 1e-2, L: float = 20.0,
                    n: int = 1000) -> float:
    """Smallest |xi| (bisection) above which <(A + |xi|^2) f, f>_0 >= 0 on sampled states."""
    a = _alpha(alpha)
    params = params or find_extension_params(a)
    states = sample_states(a, params, trials, seed, L, n)
    zero = zero_data(L, n, states[0].cutoff)
    # the form is affine in m^2: E(m) = E(0) + m^2 ||f||_0^2 with ||f||_0 = 1
    e0 = np.array([energy_full(f, zero, params, 0.0).total for f in states])

    def positive(m):
        return bool(np.all(e0 + m * m >= -1e-10))

    if not positive(m_hi):
        raise UsageError(f"energy not positive even at |xi| = {m_hi}")
    if positive(0.0):
        return 0.0
    lo, hi = 0.0, m_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if positive(mid):
            hi = mid
        else:
            lo = mid
    return hi
