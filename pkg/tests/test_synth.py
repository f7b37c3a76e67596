import math

import numpy as np
import pytest

from adsdyn.atlas import BoundaryTriple, find_extension_params
from adsdyn.errors import UsageError
from adsdyn.evolve import evolve, make_geometry
from adsdyn.fields import CutoffSpec, RadialGridField, VCoords, sample
from adsdyn.spectrum import find_roots, selected_variant
from adsdyn.synth import (Mode, PlaneWaveSpec, ads_energy, assemble, evolve_modes,
                          free_wave_amplitude, graviton_data, graviton_norm_sq, graviton_split,
                          is_conjugate_symmetric, kappa_threshold, scattering_diagnostic,
                          worker_count, zero_data)

L, N = 20.0, 1000
DT = 0.5 * L / N
ALPHA = BoundaryTriple(0.8, 0.05, 0.0)
CUT = CutoffSpec.default(L)
X = np.array([[0.0, 0.0, 0.0], [0.3, -1.0, 2.0], [1.5, 0.2, -0.7]])


def bump_data(c=3.0, w=1.0):
    f = sample(lambda z: np.where(abs(z - c) < w, (1 - np.clip((z - c) / w, -1, 1) ** 2) ** 4, 0.0),
               L, N)
    return VCoords(0.0, 0.0, 0.0, 0.0, f, CUT)


def run(spec, T=1.0, **kw):
    kw.setdefault("snapshot_every", 20)
    return evolve_modes(spec, ALPHA, T, DT, sample_every=20, **kw)


def test_single_zero_mode_is_x_independent():
    spec = PlaneWaveSpec([Mode((0.0, 0.0, 0.0), 1.0, bump_data(), zero_data(L, N))], X)
    tr = run(spec)
    phi = assemble(spec, tr, 1.0)
    assert phi.shape == (3, N)
    assert np.allclose(phi, phi[0][None, :], rtol=0, atol=1e-15)


def test_conjugate_pair_is_real_and_linear():
    f, g = bump_data(), zero_data(L, N)
    a = 0.7 + 0.4j
    spec = PlaneWaveSpec([Mode((0.5, 0.0, 0.0), a, f, g), Mode((-0.5, 0.0, 0.0), np.conj(a), f, g)], X)
    assert is_conjugate_symmetric(spec)
    tr = run(spec)
    phi = assemble(spec, tr, 1.0)
    assert np.isrealobj(phi)
    spec2 = PlaneWaveSpec([Mode(md.xi, 2 * md.amplitude, md.f, md.g) for md in spec.modes], X)
    assert np.array_equal(assemble(spec2, tr, 1.0), 2 * phi)
    lone = PlaneWaveSpec(spec.modes[:1], X)
    assert not is_conjugate_symmetric(lone)
    assert np.iscomplexobj(assemble(lone, tr[:1], 1.0))


def test_mode_order_and_threads_do_not_matter():
    modes = [Mode((0.3 * k, 0.0, 0.1), 1.0, bump_data(3.0 + 0.2 * k), zero_data(L, N))
             for k in range(4)]
    spec = PlaneWaveSpec(modes, X)
    a = run(spec, workers=1)
    b = run(spec, workers=4, order=[3, 1, 0, 2])
    for ta, tb in zip(a, b):
        assert np.array_equal(ta.trace("phi2"), tb.trace("phi2"))
        assert np.array_equal(ta.energy_totals(), tb.energy_totals())
        for t in ta.snapshots:
            assert np.array_equal(ta.snapshots[t], tb.snapshots[t])
    with pytest.raises(UsageError):
        run(spec, order=[0, 0, 1, 2])


def test_assemble_errors():
    spec = PlaneWaveSpec([Mode((0.0, 0.0, 0.0), 1.0, bump_data(), zero_data(L, N))], X)
    with pytest.raises(UsageError):
        assemble(spec, [None], 0.0)
    tr = run(spec, snapshot_every=None)
    with pytest.raises(UsageError):
        assemble(spec, tr, 0.0)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("ADSDYN_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.setenv("ADSDYN_THREADS", "x")
    with pytest.raises(UsageError):
        worker_count()


def split_for(f, g, m, T=3.0):
    geo = make_geometry(L, N, CUT, right="graviton")
    tr = evolve(f, g, ALPHA, m, T, DT, sample_every=20, geo=geo, keep_states=True,
                with_energy=False)
    return graviton_split(tr)


def test_graviton_split_kernel_data():
    s = split_for(graviton_data(L, N), zero_data(L, N), 0.0)
    assert np.allclose(s.closed_form_amplitude, 1.0, atol=1e-12)
    assert np.allclose(s.projected_amplitude, 1.0, atol=1e-4)
    assert np.max(np.abs(scattering_diagnostic(s))) <= 1e-4
    s = split_for(zero_data(L, N), graviton_data(L, N), 0.0)
    assert np.allclose(s.closed_form_amplitude, s.times, atol=1e-12)
    assert np.allclose(s.projected_amplitude, s.times, atol=1e-4 * (1 + s.times))


def test_graviton_split_zero_data_and_errors():
    s = split_for(zero_data(L, N), zero_data(L, N), 1.0, T=0.5)
    assert not np.any(scattering_diagnostic(s))
    tr = evolve(bump_data(), zero_data(L, N), ALPHA, 0.0, 0.2, DT, with_energy=False)
    with pytest.raises(UsageError):
        graviton_split(tr)
    tr = evolve(bump_data(), zero_data(L, N), (-3.0, 0.0, -1.0), 0.0, 0.2, DT, with_energy=False,
                keep_states=True)
    with pytest.raises(UsageError):
        graviton_split(tr)


def test_graviton_norm_golden():
    p = find_extension_params(ALPHA)
    assert graviton_norm_sq(p, 20.0, 2000) == pytest.approx(0.1327039324988438, rel=1e-9)


def test_ads_energy_single_mode_and_graviton_formula():
    spec = PlaneWaveSpec([Mode((0.0, 0.0, 0.0), 1.0, bump_data(), zero_data(L, N))], X)
    tr = run(spec)
    assert np.array_equal(ads_energy(spec, tr), tr[0].energy_totals())
    from adsdyn.synth import graviton_energy
    spec = PlaneWaveSpec([Mode((0.0, 0.0, 0.0), 2.0, graviton_data(L, N), zero_data(L, N))], X)
    assert graviton_energy(spec, [1.0], [0.5], 3.0) == 3.0 * 4.0 * 0.25


def test_free_wave_amplitude_solves_mode_ode():
    spec = PlaneWaveSpec([Mode((0.0, 0.0, 0.0), 1.0, graviton_data(L, N), zero_data(L, N)),
                          Mode((0.0, 3.0, 4.0), 1.0, graviton_data(L, N), zero_data(L, N))], X)
    c, d = [1.0, 0.5], [0.2, -1.0]
    t, h = 0.7, 1e-4
    phi = lambda s: free_wave_amplitude(spec, c, d, s)
    # each mode has phi'' = -|xi|^2 phi; the sum satisfies the 3D wave equation
    lap = np.zeros(len(X), dtype=complex)
    for md, ck, dk in zip(spec.modes, c, d):
        m = md.m
        sol = ck * math.cos(m * t) + (dk * math.sin(m * t) / m if m else dk * t)
        lap += -m * m * md.amplitude * np.exp(1j * X @ np.array(md.xi)) * sol
    lap *= (2 * math.pi) ** -1.5
    tt = (phi(t + h) - 2 * phi(t) + phi(t - h)) / h ** 2
    assert np.allclose(tt, lap, atol=1e-5)


def test_kappa_threshold_tracks_bound_state():
    p = find_extension_params(ALPHA)
    lam_max = math.sqrt(max(find_roots(ALPHA, selected_variant())))
    M = kappa_threshold(ALPHA, p, trials=200, seed=1, n=1000)
    assert 0.9 * lam_max <= M <= lam_max + 1e-2
    # above the threshold a mode's energy is positive and conserved
    tr = evolve(bump_data(), zero_data(L, N), ALPHA, M + 0.1, 4.0, DT, params=p, sample_every=40)
    e = tr.energy_totals()
    assert np.all(e > 0) and not tr.growing


def test_plane_wave_spec_validation():
    with pytest.raises(UsageError):
        PlaneWaveSpec([Mode((0, 0, 0), 1.0, bump_data(), RadialGridField(L, 10, np.zeros(10)))], X)
    with pytest.raises(UsageError):
        PlaneWaveSpec([Mode((0, 0, 0), 1.0, bump_data(), zero_data(L, N))], np.zeros((3, 2)))
