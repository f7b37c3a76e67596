import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from adsdyn.atlas import find_extension_params
from adsdyn.errors import DomainError, FitError, UsageError
from adsdyn.fields import (CutoffSpec, RadialGridField, VCoords, apply_p1, apply_p2,
                           extract_vcoords, h2_weighted_ip, inner_h0, resolvent_at_origin,
                           sample, synthesize, u_to_v, v_to_u)
from adsdyn.profiles import MuTriple, phi_j_radial
from adsdyn.specfun import F0, PI_CUBED, bessel_k2
from adsdyn.spectrum import eigen_vcoords

MUS = MuTriple(-1.5, -1.0, -2.0)


def bump_fn(c=2.5, w=1.0, p=8):
    return lambda z: np.where(abs(z - c) < w, (1 - np.clip((z - c) / w, -1, 1) ** 2) ** p, 0.0)


def interior(f, lo=0.5, hi=None):
    z = f.z
    return (z >= lo) & (z <= (hi or f.L / 2))


# ---------------------------------------------------------------- grid type

def test_grid_offset_and_csv_roundtrip(tmp_path):
    f = sample(np.sin, 5.0, 50)
    assert f.z[0] == pytest.approx(0.05) and f.h * f.n == pytest.approx(5.0)
    f.to_csv(tmp_path / "f.csv")
    g = RadialGridField.from_csv(tmp_path / "f.csv")
    assert g.same_grid(f) and np.array_equal(g.values, f.values)


def test_grid_rejects_bad_values():
    with pytest.raises(UsageError):
        RadialGridField(1.0, 4, [0.0, 1.0, np.nan, 2.0])
    with pytest.raises(UsageError):
        RadialGridField(1.0, 4, [0.0, 1.0])
    with pytest.raises(UsageError):
        sample(np.sin, 1.0, 10) + sample(np.sin, 1.0, 11)


def test_cutoff_shape():
    c = CutoffSpec(1.0, 2.0)
    z = np.linspace(0, 3, 301)
    chi = c.chi(z)
    assert np.all(chi[z <= 1.0] == 1.0) and np.all(chi[z >= 2.0] == 0.0)
    assert np.all(np.diff(chi) <= 1e-15)
    # analytic derivatives agree with finite differences
    h = 1e-5
    zz = np.linspace(1.05, 1.95, 19)
    assert np.allclose(c.dchi(zz), (c.chi(zz + h) - c.chi(zz - h)) / (2 * h), atol=1e-8)
    assert np.allclose(c.d2chi(zz), (c.dchi(zz + h) - c.dchi(zz - h)) / (2 * h), atol=1e-6)
    with pytest.raises(UsageError):
        CutoffSpec(2.0, 1.0)


# ---------------------------------------------------------------- operators

def test_p1_examples():
    for n in (2000, 4000):
        sel = None
        f = sample(lambda z: z ** 2.5, 4.0, n)
        sel = interior(f, 0.5, 3.5)
        assert np.max(np.abs(apply_p1(f).values[sel])) <= 1e-10
    errs = []
    for n in (1000, 2000):
        f = sample(lambda z: np.sqrt(z), 4.0, n)
        sel = interior(f, 0.5, 3.5)
        errs.append(np.max(np.abs(apply_p1(f).values[sel] + 2 / np.sqrt(f.z[sel]))))
    assert errs[1] < errs[0] / 3.5 and errs[1] < 1e-4
    f = sample(np.sin, 4.0, 2000)
    sel = interior(f, 0.5, 3.5)
    z = f.z[sel]
    assert np.max(np.abs(apply_p1(f).values[sel] - (np.cos(z) - 2.5 * np.sin(z) / z))) <= 1e-4


def test_p1_needs_four_cells():
    with pytest.raises(UsageError):
        apply_p1(RadialGridField(1.0, 3, [1.0, 2.0, 3.0]))
    with pytest.raises(UsageError):
        apply_p2(RadialGridField(1.0, 3, [1.0, 2.0, 3.0]))


@pytest.mark.parametrize("power", [-1.5, 2.5])
def test_p2_kernel(power):
    f = sample(lambda z: z ** power, 10.0, 2000)
    r = apply_p2(f).values
    sel = interior(f, 0.5, 9.5)
    assert np.linalg.norm(r[sel]) / np.linalg.norm(f.values[sel]) <= 1e-8


def test_p2_bessel_eigen_relation():
    f = sample(lambda z: np.sqrt(z) * bessel_k2(z), 10.0, 10_000)
    r = apply_p2(f).values + f.values
    sel = interior(f, 0.5, 5.0)
    assert np.linalg.norm(r[sel]) / np.linalg.norm(f.values[sel]) <= 1e-6


def test_p1_adjoint_and_p2_factorisation():
    a = sample(bump_fn(2.5, 1.0), 6.0, 3000)
    b = sample(bump_fn(3.0, 1.2), 6.0, 3000)
    z, h = a.z, a.h
    # P1* b = -b' - 5 b/(2z), analytically differentiated
    zb = np.clip((z - 3.0) / 1.2, -1, 1)
    db = np.where(abs(zb) < 1, 8 * (1 - zb ** 2) ** 7 * (-2 * zb) / 1.2, 0.0)
    p1s = -db - 2.5 * b.values / z
    lhs = h * apply_p1(a).values @ b.values
    rhs = h * a.values @ p1s
    assert lhs == pytest.approx(rhs, rel=1e-5)
    gaps = []
    for n in (1500, 3000):
        a = sample(bump_fn(2.5, 1.0), 6.0, n)
        p1a = apply_p1(a).values
        gaps.append(abs(a.h * apply_p2(a).values @ a.values / (a.h * p1a @ p1a) - 1))
    assert gaps[1] <= 1e-4 and gaps[1] < gaps[0] / 3.5


def test_parseval_radial_measure():
    # 6D Gaussian: int exp(-2 r^2) d^6 Z = (pi/2)^3
    f = sample(lambda z: z ** 2.5 * np.exp(-z * z), 8.0, 4000)
    assert PI_CUBED * f.h * f.values @ f.values == pytest.approx((math.pi / 2) ** 3, rel=1e-8)


# ---------------------------------------------------------------- extraction

def test_extract_pure_singular():
    f = sample(lambda z: z ** -1.5, 20.0, 2000)
    v = extract_vcoords(f, CutoffSpec.default(20.0))
    assert np.allclose(v.coefficients(), [0, 0, 0, 1], atol=1e-8)
    assert v.singular_charge == pytest.approx(-4 * PI_CUBED)


def test_extract_bessel_expansion():
    f = sample(lambda z: np.sqrt(z) * bessel_k2(z), 8.0, 8000)
    v = extract_vcoords(f, CutoffSpec.default(8.0), n_regular=3)
    assert np.allclose(v.coefficients(), [F0, -1 / 8, -1 / 2, 2], atol=1e-4)
    assert v.v_m1 == pytest.approx(0.108241, abs=1e-4)


def test_extract_bump_has_no_singular_content():
    f = sample(bump_fn(2.5, 0.5), 20.0, 2000)
    v = extract_vcoords(f, CutoffSpec.default(20.0), window=(0.4, 1.9))
    assert np.allclose(v.coefficients(), 0.0, atol=1e-12)


@given(st.lists(st.floats(min_value=-5, max_value=5), min_size=4, max_size=4))
def test_extract_inverts_synthesize(coef):
    cut = CutoffSpec.default(20.0)
    z = np.linspace(0.005, 19.995, 2000)
    rem = np.exp(-(z - 8.0) ** 2)  # regular remainder outside the window
    v = synthesize(*coef, 20.0, 2000, cut, remainder=rem)
    w = extract_vcoords(v.field(), cut)
    assert np.allclose(w.coefficients(), coef, atol=1e-8)


def test_extract_window_errors():
    f = sample(lambda z: z ** -1.5, 20.0, 2000)
    cut = CutoffSpec.default(20.0)
    with pytest.raises(UsageError):
        extract_vcoords(f, cut, window=(1.0, 6.0))
    with pytest.raises(UsageError):
        extract_vcoords(f, cut, window=(1.0, 1.1))
    with pytest.raises(FitError):
        extract_vcoords(f, cut, window=(1.0, 1.2), n_regular=6)


# ---------------------------------------------------------------- coordinate maps

def test_u_of_pure_singular_profile():
    cut = CutoffSpec.default(20.0)
    v = synthesize(0.0, 0.0, 0.0, 1.0, 20.0, 2000, cut)
    u = v_to_u(v, MUS)
    m1, m2 = MUS.mu1, MUS.mu2
    assert u.u1 == pytest.approx(-4 * PI_CUBED * m2 / (m1 - m2), rel=1e-14)
    assert u.u2 == pytest.approx(4 * PI_CUBED * m1 / (m1 - m2), rel=1e-14)
    assert u.u0 == pytest.approx(-2 * PI_CUBED * m1 * m2, rel=1e-14)


@given(st.lists(st.floats(min_value=-5, max_value=5), min_size=4, max_size=4),
       st.floats(min_value=-6.0, max_value=-0.1))
def test_v_u_roundtrip_and_mu0_invariance(coef, mu0):
    cut = CutoffSpec.default(20.0)
    z = np.linspace(0.005, 19.995, 2000)
    v = synthesize(*coef, 20.0, 2000, cut, remainder=np.exp(-(z - 8.0) ** 2))
    u = v_to_u(v, MUS)
    w = u_to_v(u, MUS)
    assert np.allclose(w.coefficients(), v.coefficients(), rtol=1e-12, atol=1e-12)
    assert np.allclose(w.psi_r.values, v.psi_r.values, rtol=1e-12, atol=1e-12)
    if min(abs(mu0 - MUS.mu1), abs(mu0 - MUS.mu2)) > 1e-3:
        other = MuTriple(mu0, MUS.mu1, MUS.mu2)
        u2 = v_to_u(v, other)
        for a, b in ((u.u0, u2.u0), (u.u1, u2.u1), (u.u2, u2.u2)):
            assert a == pytest.approx(b, rel=1e-10, abs=1e-10)
        # re-expanding around another mu0 lands on the same field
        w2 = u_to_v(u, other)
        assert np.allclose(w2.coefficients(), v.coefficients(), rtol=1e-10, atol=1e-10)


def test_v_to_u_rejects_bad_mus():
    v = synthesize(0, 0, 0, 1, 20.0, 200, CutoffSpec.default(20.0))
    with pytest.raises(DomainError):
        v_to_u(v, (-1.0, -2.0, -3.0))


# ---------------------------------------------------------------- inner products

def test_h2_ip_definite_and_symmetric():
    a = sample(bump_fn(2.5, 1.0), 10.0, 4000)
    b = sample(bump_fn(3.0, 0.7), 10.0, 4000)
    assert h2_weighted_ip(a, a, -1.0, -2.0) > 0
    ab, ba = h2_weighted_ip(a, b, -1.0, -2.0), h2_weighted_ip(b, a, -1.0, -2.0)
    assert abs(ab - ba) <= 1e-6 * math.sqrt(h2_weighted_ip(a, a, -1, -2) * h2_weighted_ip(b, b, -1, -2))
    with pytest.raises(UsageError):
        h2_weighted_ip(a, sample(np.sin, 10.0, 100), -1.0, -2.0)


def test_h2_ip_matches_hankel_transform():
    bump = bump_fn(2.5, 1.0)
    f = sample(bump, 10.0, 4000)
    mu1, mu2 = -1.0, -2.0
    r = np.linspace(1.5, 3.5, 2001)
    u = bump(r) * r ** -2.5
    rho = np.linspace(1e-6, 40.0, 4001)
    uh = np.array([integrate.trapezoid(u * special.jv(2, p * r) * r ** 3, r) for p in rho]) / rho ** 2
    oracle = PI_CUBED * integrate.trapezoid((rho ** 2 - mu1) * (rho ** 2 - mu2) * uh ** 2 * rho ** 5, rho)
    assert h2_weighted_ip(f, f, mu1, mu2) == pytest.approx(oracle, rel=1e-4)


def test_inner_h0_basic_laws():
    params = find_extension_params((-1.0, 1.0, 0.0))
    cut = CutoffSpec.default(20.0)
    bump = VCoords(0, 0, 0, 0, sample(bump_fn(3.0, 1.0), 20.0, 2000), cut)
    assert inner_h0(bump, bump, params) == pytest.approx(
        h2_weighted_ip(bump.psi_r, bump.psi_r, params.mus.mu1, params.mus.mu2), rel=1e-14)
    zero = bump.scale(0.0)
    assert inner_h0(zero, zero, params) == 0.0
    e = eigen_vcoords(0.0, 20.0, 2000, cut)
    for f in (bump, e, bump + e.scale(0.3)):
        assert inner_h0(f, f, params) > 0


def test_graviton_norm_golden():
    params = find_extension_params((-1.0, 1.0, 0.0))
    e = eigen_vcoords(0.0, 20.0, 2000)
    assert inner_h0(e, e, params) == pytest.approx(287.3995344267448, rel=1e-9)


# ---------------------------------------------------------------- resolvent

def test_resolvent_constructed_preimage():
    L, n, mu0 = 20.0, 4000, -1.0
    cut = CutoffSpec.default(L)
    f = sample(lambda z: (-cut.d2chi(z) * z ** 2.5 - 5 * cut.dchi(z) * z ** 1.5
                          - mu0 * cut.chi(z) * z ** 2.5), L, n)
    assert resolvent_at_origin(f, mu0) == pytest.approx(1.0, abs=1e-3)
    assert resolvent_at_origin(f.scale(0.0), mu0) == 0.0
    with pytest.raises(DomainError):
        resolvent_at_origin(f, 0.5)


def test_resolvent_matches_convolution_quadrature():
    f = sample(bump_fn(2.5, 0.5), 10.0, 4000)
    mu0 = -1.0
    oracle = PI_CUBED * f.h * float(phi_j_radial(mu0, f.z) @ f.values)
    assert resolvent_at_origin(f, mu0) == pytest.approx(oracle, rel=1e-5)
