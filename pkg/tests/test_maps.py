import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lelong_lab import currents as C
from lelong_lab import geometry as G
from lelong_lab import maps as M
from lelong_lab.errors import LabError
from lelong_lab.integrate import QuadratureSpec
from lelong_lab.lelong import RadiusSchedule, intrinsic_check

K, N = 3, 2


def _pts(count=50, seed=0, scale=0.3):
    rng = np.random.default_rng(seed)
    return scale * (rng.normal(size=(count, K)) + 1j * rng.normal(size=(count, K)))


def test_identity():
    x = _pts()
    tau = M.identity(K, N)
    assert np.array_equal(tau.apply(x), x)
    jz, jzb = tau.jacobian(x[0])
    assert np.array_equal(jz, np.eye(K)) and not np.any(jzb)


def test_dilation():
    tau = M.dilation(K, N, 2j)
    y = tau.apply(np.array([1, 1, 1], dtype=complex))
    assert np.array_equal(y, [2j, 2j, 1])
    assert np.allclose(tau.inverse(y), [1, 1, 1], atol=0, rtol=1e-15)


def test_dilation_semigroup():
    x = _pts()
    a = M.dilation(K, N, 2).compose(M.dilation(K, N, 3 - 1j))
    b = M.dilation(K, N, 6 - 2j)
    assert np.allclose(a.apply(x), b.apply(x), rtol=1e-15, atol=1e-15)


def test_newton_inverse_k2():
    tau = M.strongly_admissible(2, 1, [[1]], [[0.2]])
    rng = np.random.default_rng(3)
    x = np.stack([0.05 * (rng.normal(size=40) + 1j * rng.normal(size=40)),
                  0.5 * (rng.normal(size=40) + 1j * rng.normal(size=40))], axis=1)
    back = tau.inverse(tau.apply(x))
    assert np.max(np.abs(back - x)) <= 1e-12


def test_newton_divergence_is_reported():
    tau = M.strongly_admissible(2, 1, [[1]], [[0]])
    # z + z^2 = -1 has no root near the fiber origin: Newton from y wanders
    with pytest.raises(LabError) as exc:
        tau.inverse(np.array([[-1.0 + 0j, 0]]))
    assert exc.value.code in ("newton-diverged", "not-invertible-on-region")


def test_admissible_orders():
    tau = M.strongly_admissible(K, N, 0.2 * np.eye(2), [[0.1, 0.1]])
    out = M.verify_admissible_orders(tau)
    assert out["fiber"] == pytest.approx(2, abs=0.05)
    assert out["base"] == pytest.approx(1, abs=0.05)
    assert out["phi"] == pytest.approx(3, abs=0.05)
    ident = M.verify_admissible_orders(M.identity(K, N))
    assert ident["fiber"] == ident["base"] == ident["phi"] == np.inf
    ctrl = M.verify_admissible_orders(M.nonadmissible_control(K, N))
    assert ctrl["fiber"] == pytest.approx(1, abs=0.05)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_admissible_maps_fix_v_with_unit_fiber_jacobian(a, b, c):
    tau = M.strongly_admissible(K, N, [[a, b], [b, c]], [[c, a]])
    rng = np.random.default_rng(0)
    w = rng.normal(size=8) + 1j * rng.normal(size=8)
    on_v = np.stack([np.zeros(8), np.zeros(8), w], axis=1)
    assert np.array_equal(tau.apply(on_v), on_v)
    jz, jzb = tau.jacobian(on_v)
    assert np.allclose(jz[:, :N, :N], np.eye(N), atol=1e-15)
    assert not np.any(jzb)


def test_compose_matches_sequential_application():
    t1 = M.strongly_admissible(K, N, 0.2 * np.eye(2), [[0.1, 0.0]])
    t2 = M.strongly_admissible(K, N, [[0, 0.3], [0.3, 0]], [[0.0, 0.2]])
    x = _pts(scale=0.05)
    assert np.allclose(t1.compose(t2).apply(x), t1.apply(t2.apply(x)), rtol=0, atol=1e-15)


def test_map_from_spec():
    tau = M.map_from_spec({"kind": "strongly_admissible", "A": [[0.2, 0], [0, 0.2]], "B": [[0.1, 0.1]]}, K, N)
    ref = M.strongly_admissible(K, N, 0.2 * np.eye(2), [[0.1, 0.1]])
    x = _pts(scale=0.1)
    assert np.allclose(tau.apply(x), ref.apply(x), rtol=0, atol=1e-15)
    with pytest.raises(LabError) as exc:
        M.map_from_spec({"kind": "bogus"}, K, N)
    assert exc.value.code == "schema"


def test_affine_pushforward_of_plane():
    tau = M.strongly_admissible(K, N, np.zeros((2, 2)), [[0.1, 0.3]])
    L = C.IntegrationLinear(K, N, np.array([[1, 0], [1, 0], [0, 1]]), [0, 0.05, 0])
    image = C.pushforward(tau, L)
    assert isinstance(image, C.IntegrationLinear)
    rng = np.random.default_rng(1)
    coef = rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2))
    on_l = L.offset + coef @ L.basis.T
    assert np.all(image.contains(tau.apply(on_l)))


def test_intrinsic_same_map_gives_zero():
    s = G.build_setting(K, 1, 1)
    tau = M.strongly_admissible(K, N, np.zeros((2, 2)), [[0.1, 0.1]])
    L = C.IntegrationLinear(K, N, np.array([[1, 0], [0, 0], [0, 1]]))
    out = intrinsic_check(L, s, tau, tau, 1, RadiusSchedule(0.4, 4, 2.0), QuadratureSpec())
    assert out["difference"] == 0.0 and out["agree"]
    assert out["limit_1"] == pytest.approx(4.0, abs=1e-10)
