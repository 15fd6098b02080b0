import numpy as np
import pytest

import oracles
from lelong_lab import currents as C
from lelong_lab import geometry as G
from lelong_lab import maps as M
from lelong_lab.errors import LabError
from lelong_lab.forms import Form, kahler_form, symbols
from lelong_lab.geometry import _hermitian
from lelong_lab.integrate import QuadratureSpec

K, N = 3, 2


@pytest.fixture(scope="module")
def setting():
    return G.build_setting(K, 1, 1)


@pytest.fixture(scope="module")
def test_form(setting):
    return setting.forms.beta.wedge(setting.forms.omega)


def _bump_form(setting, R=0.5):
    # a compactly supported 3-form inside Tube(ball_1, R)
    x, xb = symbols(K)
    phi = x[0] * xb[0] + x[1] * xb[1]
    chi = (1 - phi / R ** 2) ** 4 * (1 - x[2] * xb[2]) ** 4
    return Form.scalar(K, chi).wedge(setting.forms.dc_phi).wedge(setting.forms.omega)


@pytest.mark.parametrize("r", [0.2, 0.5])
def test_beta_pairing_oracle(setting, test_form, r):
    est = C.pair(C.BetaPower(K, N, 1), setting.tube(r), test_form, setting)
    exact = oracles.fiber_mass_alpha_beta(N, 0, 2, r) * oracles.base_omega_mass(1)
    assert abs(est.value - exact) <= 1e-12 + est.error
    assert exact == pytest.approx(8 * r ** 4)


@pytest.mark.parametrize("r", [0.2, 0.5])
def test_alpha_pairing_oracle(setting, test_form, r):
    est = C.pair(C.AlphaPower(K, N, 1), setting.tube(r), test_form, setting)
    exact = oracles.fiber_mass_alpha_beta(N, 1, 1, r) * oracles.base_omega_mass(1)
    assert abs(est.value - exact) <= 1e-12 + est.error


def test_plane_pairing_and_empty_plane(setting, test_form):
    h = 0.05
    basis = np.array([[1, 0], [0, 0], [0, 1]])
    L = C.IntegrationLinear(K, N, basis, [0, h, 0])
    est = C.pair(L, setting.tube(0.3), test_form, setting)
    assert abs(est.value - 4 * (0.09 - h * h)) <= 1e-12 + est.error
    far = C.IntegrationLinear(K, N, basis, [0, 0.4, 0])
    assert C.pair(far, setting.tube(0.3), test_form, setting).value == 0


def test_arity_mismatch(setting):
    with pytest.raises(LabError) as exc:
        C.pair(C.AlphaPower(K, N, 1), setting.tube(0.3), setting.forms.omega, setting)
    assert exc.value.code == "arity-mismatch"


def test_non_integrable_alpha_top(setting):
    with pytest.raises(LabError) as exc:
        C.pair(C.AlphaPower(K, N, 2), setting.tube(0.3), setting.forms.omega, setting)
    assert exc.value.code == "non-integrable"


def test_ddc_of_kinds(setting):
    z = C.ddc_of(C.AlphaPower(K, N, 1))
    assert isinstance(z, C.ZeroCurrent) and z.p == 2
    T = C.random_positive_form(K, 1, seed=1, n=N)
    d = C.ddc_of(T)
    pts = G.sample_tube_points(setting, 0.5, 10, np.random.default_rng(0))
    assert (d.density().evaluate(pts) - T.form.ddc().evaluate(pts)).max_abs() == 0
    x, _ = symbols(K)
    psh = C.PshLogNorm(K, [x[0], x[1]], 1)
    dd = C.ddc_of(psh)
    assert dd.closed and dd.p == 2
    sigma = M.general_map(K, N, [x[0] + symbols(K)[1][1] / 5, x[1], x[2]])
    with pytest.raises(LabError) as exc:
        C.ddc_of(C.Pushforward(sigma, T))
    assert exc.value.code == "unsupported-kind"


def test_pushforward_identity_and_dilation():
    T = C.AlphaPower(K, N, 1)
    assert C.pushforward(M.identity(K, N), T) is T
    D = C.pushforward(M.dilation(K, N, 2), T)
    assert isinstance(D, C.Dilated) and D.lam == 2


def test_dilation_group_law():
    T = C.AlphaPower(K, N, 1)
    assert C.dilate(2, C.dilate(0.5, T)) is T
    assert C.dilate(3, C.dilate(2, T)).lam == 6
    with pytest.raises(LabError) as exc:
        C.dilate(0, T)
    assert exc.value.code == "zero-lambda"


@pytest.mark.parametrize("lam", [2, 0.5 + 0.5j])
def test_alpha_is_dilation_invariant(setting, test_form, lam):
    T = C.AlphaPower(K, N, 1)
    a = C.pair(T, setting.tube(0.3), test_form, setting)
    b = C.pair(C.dilate(lam, T), setting.tube(0.3), test_form, setting)
    assert abs(a.value - b.value) <= 1e-12 + a.error + b.error


def test_pairing_is_linear_in_test_form(setting):
    T = C.random_positive_form(K, 1, seed=2, n=N)
    f1 = setting.forms.beta.wedge(setting.forms.omega)
    f3 = kahler_form(K, [0]).wedge(kahler_form(K, [2]))
    est = C.pair(T, setting.tube(0.4), [f1, f3, f1 + f3 * 2], setting)
    v = est.value
    assert abs(v[2] - v[0] - 2 * v[1]) <= 1e-13 * np.max(np.abs(v))


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
def test_regularized_alpha_oracle(setting, test_form, eps):
    r = 0.4
    est = C.pair(C.regularize(C.AlphaPower(K, N, 1), eps), setting.tube(r), test_form, setting)
    # ddc log(|z|^2 + eps^2) ^ beta has fiber mass 4 r^4 / (r^2 + eps^2) by Stokes
    exact = 8 * r ** 4 / (r * r + eps * eps)
    assert abs(est.value - exact) <= 1e-10 + est.error


def test_regularized_alpha_monotone_and_quadratic(setting, test_form):
    r = 0.4
    limit = 8 * r * r
    vals = [C.pair(C.regularize(C.AlphaPower(K, N, 1), e), setting.tube(r), test_form, setting).real().value
            for e in (0.2, 0.1, 0.05)]
    assert vals[0] < vals[1] < vals[2] < limit
    # the gap is O(eps^2) with constant 8 approached from below
    ratios = [(limit - v) / e ** 2 for v, e in zip(vals, (0.2, 0.1, 0.05))]
    assert ratios[0] < ratios[1] < ratios[2] <= 8
    assert ratios[2] > 7.8


def test_regularize_unsupported():
    L = C.IntegrationLinear(K, N, np.eye(3)[:, [0, 2]])
    with pytest.raises(LabError) as exc:
        C.regularize(L, 0.1)
    assert exc.value.code == "unsupported-kind"


def test_adjoint_and_direct_paths_agree(setting, test_form):
    tau = M.strongly_admissible(K, N, 0.2 * np.eye(2), [[0.1, 0.1]])
    T = C.pushforward(tau, C.random_positive_form(K, 1, seed=3, n=N))
    quad = QuadratureSpec(radial=10, simplex=4, torus=6, base_radial=6, base_angular=8)
    a = C.pair(T, setting.tube(0.3), test_form, setting, quad, path="direct")
    b = C.pair(T, setting.tube(0.3), test_form, setting, quad, path="adjoint")
    assert abs(a.value - b.value) <= 1e-10 + a.error + b.error
    assert abs(a.value) > 0.01


@pytest.mark.parametrize("make", [
    lambda: C.AlphaPower(K, N, 1),
    lambda: C.random_positive_form(K, 1, seed=4, n=N),
])
def test_closed_currents_annihilate_exact_forms(setting, make):
    psi = _bump_form(setting)
    est = C.pair(make(), setting.tube(0.5), psi.d(), setting)
    assert abs(est.value) <= 1e-11 + 3 * est.error


def test_non_closed_current_detected(setting):
    x, xb = symbols(K)
    T = C.SmoothForm(setting.forms.beta * (x[0] * xb[0]))
    est = C.pair(T, setting.tube(0.5), _bump_form(setting).d(), setting)
    assert abs(est.value) > 100 * est.error + 1e-6


def test_random_positive_form_is_positive(setting):
    T = C.random_positive_form(K, 1, seed=5)
    pts = G.sample_tube_points(setting, 0.5, 500, np.random.default_rng(1))
    H = _hermitian(T.form.evaluate(pts), K, range(K))
    H = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    assert np.min(np.linalg.eigvalsh(H)) > 0
    assert T.form.d().is_zero()


def test_unknown_kind_from_spec():
    with pytest.raises(LabError) as exc:
        C.current_from_spec({"kind": "nope"}, K, N)
    assert exc.value.code == "schema"


def test_spec_round_trip_plane(setting, test_form):
    L = C.IntegrationLinear(K, N, np.array([[1, 0], [0, 0], [0, 1]]), [0, 0.05, 0])
    spec = L.spec()
    again = C.current_from_spec({"kind": spec["kind"], "basis": spec["basis"], "offset": spec["offset"]}, K, N)
    assert np.allclose(again.basis, L.basis) and np.allclose(again.offset, L.offset)
