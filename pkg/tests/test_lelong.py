import math

import numpy as np
import pytest

import oracles
from lelong_lab import currents as C
from lelong_lab import geometry as G
from lelong_lab.errors import LabError
from lelong_lab.lelong import (RadiusSchedule, extrapolate, hat_nu, kappa, kappa_corona, kappa_eps, nu_j, nu_jq,
                               nu_point, nu_sequence)

K, N = 3, 2


@pytest.fixture(scope="module")
def setting():
    return G.build_setting(K, 1, 1)


@pytest.mark.parametrize("r", [0.1, 0.4])
def test_nu_point_alpha(r):
    est = nu_point(C.AlphaPower(2, 2, 1), r)
    # sigma = alpha ^ (pi/2) omega_E over B(0, r), normalised by pi r^2
    exact = oracles.fiber_mass_alpha_beta(2, 1, 1, r) * (math.pi / 2) / (math.pi * r * r)
    assert abs(est.value - exact) <= 1e-12 + est.error
    assert exact == pytest.approx(2.0)


def test_nu_point_line_through_origin():
    L = C.IntegrationLinear(2, 2, np.array([[1], [2j]]))
    assert nu_point(L, 0.3).value == pytest.approx(1.0, abs=1e-13)


def test_nu_point_smooth_decays():
    T = C.random_positive_form(2, 1, seed=1)
    a, b = nu_point(T, 0.1).value, nu_point(T, 0.025).value
    assert math.log(a / b) / math.log(4) >= 1.9


def test_nu_j_alpha(setting):
    T = C.AlphaPower(K, N, 1)
    est = nu_j(T, setting, 0.3, 1)
    assert abs(est.value - oracles.nu_alpha_top(K, 1, 1, 1, 0.3)) <= 1e-12 + est.error
    assert nu_j(T, setting, 0.3, 0).value == 0
    assert nu_j(T, setting, 0.3, 2).value == 0


def test_nu_jq(setting):
    T = C.AlphaPower(K, N, 1)
    r = 0.3
    assert nu_jq(T, setting, r, 1, 1).value == pytest.approx(8.0, abs=1e-12)
    assert nu_jq(T, setting, r, 1, 0).value == pytest.approx(8 * r * r, abs=1e-12)
    with pytest.raises(LabError):
        nu_jq(T, setting, r, 1, 3)


def test_kappa_identities(setting):
    A, B = C.AlphaPower(K, N, 1), C.BetaPower(K, N, 1)
    r, s = 0.4, 0.1
    # alpha ^ alpha vanishes off V on a 2-dimensional fiber, but its declared weight is not integrable
    assert abs(kappa_corona(A, setting, s, r, 1).value) <= 1e-12
    with pytest.raises(LabError) as exc:
        kappa(A, setting, r, 1)
    assert exc.value.code == "non-integrable"
    kb = kappa(B, setting, r, 1)
    assert abs(kb.value - 8 * r * r) <= 1e-12 + kb.error
    kc = kappa_corona(B, setting, s, r, 1)
    assert abs(kc.value - 8 * (r * r - s * s)) <= 1e-12 + kc.error
    with pytest.raises(LabError):
        kappa_corona(B, setting, 0.5, 0.4, 1)


def test_kappa_eps_single_eps_equal_to_r(setting):
    r = 0.4
    out = kappa_eps(C.BetaPower(K, N, 1), setting, r, 1, [r])
    # int beta ^ alpha_eps ^ omega = 8 r^4 / (r^2 + eps^2) by Stokes
    assert out.limit == pytest.approx(4 * r * r, abs=1e-10)
    with pytest.raises(LabError):
        kappa_eps(C.BetaPower(K, N, 1), setting, r, 1, [0.1, 0.2])


def test_kappa_eps_limit(setting):
    r = 0.4
    out = kappa_eps(C.BetaPower(K, N, 1), setting, r, 1, [0.1 * 2.0 ** -i for i in range(5)])
    assert abs(out.limit - 8 * r * r) <= max(out.error, 1e-3)
    assert out.monotone


def test_hat_nu(setting):
    A = C.AlphaPower(K, N, 1)
    hat, combo, resid = hat_nu(A, setting, 0.3, 0)
    # (beta + c1 r^2 omega)^2 ^ alpha keeps only the cross term: 2 * 8 r^4 / r^4
    assert hat.value == pytest.approx(16.0, abs=1e-10)
    assert resid <= 1e-12
    hat1, _, resid1 = hat_nu(A, setting, 0.3, 1)
    assert hat1.value == pytest.approx(8.0, abs=1e-10) and resid1 <= 1e-12


def test_hat_nu_positive_for_positive_current(setting):
    T = C.random_positive_form(K, 1, seed=7, n=N)
    for j in (0, 1):
        hat, _, resid = hat_nu(T, setting, 0.2, j)
        assert hat.value > 0 and resid <= 1e-10


def test_extrapolate_constant():
    samples = [(0.4 / 2 ** i, 3.0, 1e-14) for i in range(6)]
    out = extrapolate(samples)
    assert out.limit == 3.0 and out.method == "last-value" and out.monotone


def test_extrapolate_linear():
    samples = [(r, 1.5 + 2 * r, 1e-15) for r in (0.4 / 2 ** i for i in range(6))]
    out = extrapolate(samples)
    assert out.method == "richardson"
    assert abs(out.limit - 1.5) <= 1e-12 + out.error
    assert out.error <= 1e-10


def test_extrapolate_oscillating():
    samples = [(0.4 / 2 ** i, 1.0 + 0.1 * (-1) ** i, 1e-6) for i in range(6)]
    out = extrapolate(samples)
    assert not out.monotone and out.method == "last-value"
    assert out.error >= 0.2


def test_extrapolate_needs_four_samples():
    with pytest.raises(LabError) as exc:
        extrapolate([(0.4, 1, 0), (0.2, 1, 0), (0.1, 1, 0)])
    assert exc.value.code == "insufficient-samples"
    with pytest.raises(LabError):
        RadiusSchedule(0.4, 3)


def test_smooth_nu_sequence_vanishes(setting):
    T = C.random_positive_form(K, 1, seed=1, n=N)
    # j = 1 differs from l - p = 0, so the limit vanishes like r^2
    seq = nu_sequence(T, setting, RadiusSchedule(0.2, 5, 2.0), 1)
    assert abs(seq.limit) <= 1e-6 + seq.error
    vals = [v for _, v, _ in seq.samples]
    assert np.all(np.diff(vals) < 0)
    assert vals[-2] / vals[-1] == pytest.approx(4, rel=0.05)
