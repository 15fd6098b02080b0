import numpy as np
import pytest
import sympy as sp

from lelong_lab import currents as C
from lelong_lab import geometry as G
from lelong_lab.errors import LabError
from lelong_lab.forms import kahler_form, symbols
from lelong_lab.geometry import _hermitian

DIAG = {"name": "diag_weight", "a": [1.0, 0.0]}


@pytest.fixture(scope="module")
def euclid():
    return G.build_setting(3, 1, 1)


@pytest.fixture(scope="module")
def weighted():
    return G.build_setting(3, 1, 1, metric=DIAG)


def _pts(setting, count=100, seed=0, r=0.5):
    return G.sample_tube_points(setting, r, count, np.random.default_rng(seed))


def test_identity_metric_forms(euclid):
    x, xb = symbols(3)
    assert sp.expand(euclid.forms.phi_expr - (x[0] * xb[0] + x[1] * xb[1])) == 0
    pts = _pts(euclid)
    ref_beta = kahler_form(3, [0, 1]).evaluate(pts)
    assert (euclid.forms.beta.evaluate(pts) - ref_beta).max_abs() == 0.0
    _, alpha_e, _ = G.euclidean_fiber_forms(3, 2)
    assert (euclid.forms.alpha.evaluate(pts) - alpha_e.evaluate(pts)).max_abs() <= 1e-12
    assert euclid.c1 == 1.0 and euclid.c2 == 4.0


def test_phi_homogeneity(weighted):
    rng = np.random.default_rng(1)
    pts = _pts(weighted, 100, 2)
    lam = rng.normal(size=100) + 1j * rng.normal(size=100)
    moved = pts.copy()
    moved[:, :2] *= lam[:, None]
    a = weighted.forms.phi_value(moved)
    b = np.abs(lam) ** 2 * weighted.forms.phi_value(pts)
    assert np.max(np.abs(a - b) / np.maximum(1, np.abs(b))) <= 1e-14


def test_weighted_phi_value(weighted):
    assert weighted.forms.phi_value(np.array([1, 1, 1], dtype=complex)) == pytest.approx(5.0, abs=1e-14)


def test_tube_membership(euclid):
    tube = euclid.tube(0.5)
    assert G.tube_membership(euclid, tube, [0.3, 0, 0.2])
    assert not G.tube_membership(euclid, tube, [0.5, 0, 0.2])
    s2 = G.build_setting(3, 1, 1, metric={"name": "scalar", "c": 2})
    assert not G.tube_membership(s2, s2.tube(0.5), [0.3, 0, 0.2])


@pytest.mark.parametrize("metric,t,tol", [(None, 0.5, 1e-8), (DIAG, 0.3, 1e-7)])
def test_horizontal_restriction(metric, t, tol):
    s = G.build_setting(3, 1, 1, metric=metric)
    rng = np.random.default_rng(5)
    pts = G.sample_tube_points(s, t, 200, rng, level=True)
    frames = G.level_tangent_frames(s, pts, rng)
    assert G.horizontal_restriction_check(s, t, pts, frames) <= tol


def test_horizontal_restriction_symbolic_points(weighted):
    # at five points, compare alpha - beta / t^2 on tangent frames with a sympy evaluation
    x, xb = symbols(3)
    t = 0.3
    rng = np.random.default_rng(9)
    pts = G.sample_tube_points(weighted, t, 5, rng, level=True)
    frames = G.level_tangent_frames(weighted, pts, rng)
    phi = weighted.forms.phi_expr
    for p, fr in zip(pts, frames):
        sub = {x[m]: complex(p[m]) for m in range(3)}
        sub.update({xb[m]: complex(np.conj(p[m])) for m in range(3)})
        H = np.zeros((3, 3), dtype=complex)
        Hl = np.zeros((3, 3), dtype=complex)
        for a in range(3):
            for b in range(3):
                H[a, b] = complex(sp.diff(phi, x[a], xb[b]).evalf(subs=sub))
                Hl[a, b] = complex(sp.diff(sp.log(phi), x[a], xb[b]).evalf(subs=sub))
        v1, v2 = fr
        # (i/pi) sum H_ab dz_a ^ dzbar_b on (v1, v2)
        def val(M):
            return 1j / np.pi * (v1 @ M @ np.conj(v2) - v2 @ M @ np.conj(v1))
        assert abs(val(Hl) - val(H) / t ** 2) <= 1e-7


def test_radial_frame_rejected(euclid):
    rng = np.random.default_rng(0)
    pts = G.sample_tube_points(euclid, 1.0, 4, rng, level=True)
    radial = np.stack([pts, G.level_tangent_frames(euclid, pts, rng, 1)[:, 0]], axis=1)
    with pytest.raises(LabError) as exc:
        G.horizontal_restriction_check(euclid, 1.0, pts, radial)
    assert exc.value.code == "frame-not-tangent"


def test_degenerate_metric_rejected():
    with pytest.raises(LabError) as exc:
        G.build_setting(3, 1, 1, metric={"name": "constant", "matrix": [[1, 0], [0, 1e-9]]})
    assert exc.value.code == "metric-degenerate"


def test_c1_for_weighted_metric(weighted):
    assert weighted.c1 == 2.0


@pytest.mark.parametrize("metric", [None, DIAG])
def test_hat_beta_positive(metric):
    s = G.build_setting(3, 1, 1, metric=metric)
    pts = _pts(s, 1000, 11)
    H = _hermitian(s.forms.hat_beta.evaluate(pts), 3, range(3))
    rng = np.random.default_rng(12)
    v = rng.normal(size=(1000, 3)) + 1j * rng.normal(size=(1000, 3))
    q = np.real(np.einsum("na,nab,nb->n", np.conj(v), H, v))
    assert np.min(q) >= -1e-12
    assert np.all(q > 0)


@pytest.mark.parametrize("metric", [None, DIAG])
def test_hat_alpha_prime_dominates_alpha_ver(metric):
    s = G.build_setting(3, 1, 1, metric=metric)
    pts = _pts(s, 500, 13)
    f = s.forms
    diff = f.hat_alpha_prime.evaluate(pts) - f.alpha_ver.evaluate(pts).scale(1 / s.c1)
    H = _hermitian(diff, 3, range(3))
    H = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    ev = np.linalg.eigvalsh(H)
    scale = np.max(np.abs(ev), axis=1)
    assert np.min(ev[:, 0] / scale) >= -1e-10


def test_alpha_ver_top_power_pairs_to_zero(euclid):
    # alpha_ver^2 on C^2 x C vanishes pointwise off z = 0
    pts = _pts(euclid)
    top = euclid.forms.alpha_ver.evaluate(pts).power(2)
    assert top.max_abs() <= 1e-10
    est = C.pair(C.SmoothForm(euclid.forms.omega), euclid.tube(0.5, 0.1),
                 euclid.forms.alpha_ver.power(2), euclid)
    assert abs(complex(est.value)) <= est.error + 1e-12


@pytest.mark.parametrize("metric", [None, DIAG])
def test_alpha_beta_closed(metric):
    s = G.build_setting(3, 1, 1, metric=metric)
    pts = _pts(s, 20)
    assert s.forms.alpha.d().evaluate(pts).max_abs() <= 1e-10
    assert s.forms.beta.d().evaluate(pts).max_abs() <= 1e-10


def test_base_domains():
    b = G.BaseDomain.ball(1, 1.0)
    assert b.volume == pytest.approx(np.pi)
    assert b.omega_power_integral() == pytest.approx(2.0)
    pd = G.BaseDomain.polydisc(2, [1.0, 0.5])
    assert pd.volume == pytest.approx(np.pi ** 2 * 0.25)
    w, wt = pd.nodes(6, 8)
    assert np.sum(wt) == pytest.approx(pd.volume)


def test_tube_validation():
    with pytest.raises(Exception):
        G.Tube(G.BaseDomain.ball(1), 0.2, 0.3)
    assert G.Tube(G.BaseDomain.ball(1), 0.2, 0.2).is_empty
