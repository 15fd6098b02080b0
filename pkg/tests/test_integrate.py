import math

import numpy as np
import pytest

import oracles
from lelong_lab import geometry as G
from lelong_lab.errors import LabError
from lelong_lab.forms import Form
from lelong_lab.integrate import (QuadratureSpec, integrate_horizontal_boundary, integrate_radial_profile,
                                  integrate_tube, jensen_weight)


@pytest.fixture(scope="module")
def setting():
    return G.build_setting(3, 1, 1)


def _norm2(pts):
    return np.abs(pts[:, 0]) ** 2 + np.abs(pts[:, 1]) ** 2


def test_volume(setting):
    est = integrate_tube(lambda p: np.ones(len(p)), setting.tube(0.5), setting)
    exact = math.pi * (math.pi ** 2 / 2) * 0.5 ** 4
    assert abs(est.value - exact) <= 1e-12
    assert est.error <= 1e-10


def test_inverse_norm_squared(setting):
    spec = QuadratureSpec(singular_weight=2)
    est = integrate_tube(lambda p: 1 / _norm2(p), setting.tube(0.5), setting, spec)
    exact = oracles.tube_integral_radial(2, 1, lambda rho: rho ** -2.0, 0.5, angular=oracles.sphere_area(2))
    assert abs(est.value - exact) / exact <= 1e-3


def test_inverse_norm_squared_mc(setting):
    spec = QuadratureSpec(method="mc", samples=20000, singular_weight=2, seed=4)
    est = integrate_tube(lambda p: 1 / _norm2(p), setting.tube(0.5), setting, spec)
    exact = math.pi ** 3 * 0.25
    assert abs(est.value - exact) / exact <= 1e-3


def test_empty_corona(setting):
    est = integrate_tube(lambda p: np.ones(len(p)), setting.tube(0.3, 0.3), setting)
    assert est.value == 0 and est.error == 0


def test_additivity(setting):
    f = lambda p: np.abs(p[:, 0]) ** 4 + np.real(p[:, 2])
    whole = integrate_tube(f, setting.tube(0.5), setting)
    inner = integrate_tube(f, setting.tube(0.2), setting)
    outer = integrate_tube(f, setting.tube(0.5, 0.2), setting)
    assert abs(whole.value - inner.value - outer.value) <= 1e-13 + whole.error + inner.error + outer.error


def test_thread_count_is_bit_identical(setting):
    f = lambda p: np.exp(-_norm2(p)) * (1 + np.abs(p[:, 2]) ** 2)
    for method in ("tensor", "mc"):
        a = integrate_tube(f, setting.tube(0.5), setting, QuadratureSpec(method=method, threads=1, chunk=2))
        b = integrate_tube(f, setting.tube(0.5), setting, QuadratureSpec(method=method, threads=4, chunk=2))
        assert a.value == b.value and a.error == b.error


def test_mc_error_is_honest(setting):
    f = lambda p: np.abs(p[:, 0]) ** 2 + np.real(p[:, 2])
    exact = math.pi ** 3 * 0.5 ** 6 / 6
    hits = 0
    for seed in range(40):
        est = integrate_tube(f, setting.tube(0.5), setting, QuadratureSpec(method="mc", samples=2000, seed=seed))
        hits += abs(est.value - exact) <= 3 * est.error
    assert hits >= 36


def _stokes_eta(setting):
    f = setting.forms
    return f.dc_phi.wedge(f.beta).wedge(f.omega)


@pytest.mark.parametrize("t", [0.2, 0.5])
def test_horizontal_boundary_stokes(setting, t):
    # the boundary integral of dc(phi) ^ beta ^ omega is int_{|z|<t} beta^2 * int_B omega = 4 t^4 * 2
    est = integrate_horizontal_boundary(_stokes_eta(setting), t, setting)
    assert abs(est.value - 8 * t ** 4) <= 1e-12 + est.error
    assert est.error <= 1e-10


def test_horizontal_boundary_slope(setting):
    eta = _stokes_eta(setting)
    a = integrate_horizontal_boundary(eta, 0.1, setting).real().value
    b = integrate_horizontal_boundary(eta, 0.4, setting).real().value
    assert math.log(b / a) / math.log(4) == pytest.approx(4.0, abs=1e-10)


def test_horizontal_boundary_weighted_metric():
    s = G.build_setting(3, 1, 1, metric={"name": "scalar", "c": 2})
    eta = _stokes_eta(s)
    # A = 2I: phi = 4|z|^2, the level t is |z| = t / 2 and beta = 4 beta_e
    est = integrate_horizontal_boundary(eta, 0.4, s)
    exact = 4 ** 2 * 4 * (0.4 / 2) ** 4 * 2
    assert abs(est.value - exact) <= 1e-12 + est.error


def test_horizontal_boundary_degree_checked(setting):
    with pytest.raises(LabError) as exc:
        integrate_horizontal_boundary(setting.forms.omega, 0.3, setting)
    assert exc.value.code == "arity-mismatch"
    zero = Form.zero(3, 5)
    assert integrate_horizontal_boundary(zero, 0.3, setting).value == 0


def test_radial_profile_constant():
    est = integrate_radial_profile(lambda t: np.full(t.shape, 3.0), 0.4, [(2.0, 1.0)])
    assert abs(est.value - 3 * 0.16) <= 1e-13 + est.error
    assert est.error <= 1e-10


def test_radial_profile_jensen_weight():
    r = 0.4
    est = integrate_radial_profile(lambda t: t ** 2, r, jensen_weight(1, r))
    assert abs(est.value - r * r / 2) <= 1e-12
    assert est.error <= 1e-8


def test_radial_profile_divergent_tail():
    with pytest.raises(LabError) as exc:
        integrate_radial_profile(lambda t: 1 / t, 0.4, jensen_weight(1, 0.4))
    assert exc.value.code == "tail-divergent"
