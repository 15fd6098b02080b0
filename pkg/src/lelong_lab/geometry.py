"""The local model: trivial bundle C^(k-l) x C^l with fiber metric A(w).

phi(z, w) = |A(w) z|^2, alpha = ddc log phi, beta = ddc phi and the
companion forms are built symbolically so every one of them carries exact
partial derivatives.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .errors import LabError
from .forms import (Form, as_points, base_mask, conj_expr, fiber_mask, fiber_origin_distance,
                    frame_array, kahler_form, norm_squared, symbols)


# --------------------------------------------------------------------------
# base domains

class BaseDomain:
    """A ball or polydisc in C^l (or the single point C^0)."""

    def __init__(self, shape, l, center=None, radius=1.0, radii=None):
        if l == 0:
            shape = "point"
        if shape not in ("ball", "polydisc", "point"):
            raise ValueError(f"unsupported base shape {shape!r}")
        self.shape, self.l = shape, l
        self.center = np.zeros(l, dtype=complex) if center is None else np.asarray(center, dtype=complex).reshape(l)
        if shape == "polydisc":
            self.radii = np.full(l, float(radius)) if radii is None else np.asarray(radii, dtype=float).reshape(l)
            self.radius = float(np.max(self.radii))
        else:
            self.radius = float(radius)
            self.radii = np.full(l, self.radius)

    @classmethod
    def ball(cls, l, radius=1.0, center=None):
        return cls("ball", l, center, radius)

    @classmethod
    def polydisc(cls, l, radii=1.0, center=None):
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (l,))
        return cls("polydisc", l, center, radii=radii)

    @classmethod
    def point(cls):
        return cls("point", 0)

    def contains(self, w):
        w = np.asarray(w, dtype=complex)
        if self.l == 0:
            return np.ones(w.shape[:-1], dtype=bool)
        d = w - self.center
        if self.shape == "ball":
            return np.linalg.norm(d, axis=-1) < self.radius
        return np.all(np.abs(d) < self.radii, axis=-1)

    @functools.cached_property
    def volume(self):
        """Euclidean volume."""
        if self.l == 0:
            return 1.0
        if self.shape == "ball":
            return math.pi ** self.l * self.radius ** (2 * self.l) / math.factorial(self.l)
        return float(np.prod(math.pi * self.radii ** 2))

    def omega_power_integral(self, scale=1.0):
        """Integral over B of (scale * ddc |w|^2)^l = scale^l l! (2/pi)^l vol(B)."""
        return scale ** self.l * math.factorial(self.l) * (2 / math.pi) ** self.l * self.volume

    def nodes(self, n_radial, n_angular):
        """Product quadrature nodes and weights (weights sum to the volume)."""
        from .integrate import ball_rule, disc_rule
        if self.l == 0:
            return np.zeros((1, 0), dtype=complex), np.ones(1)
        if self.shape == "ball":
            if self.l == 1:
                pts, wts = disc_rule(self.radius, n_radial, n_angular)
                pts = pts[:, None]
            else:
                pts, wts = ball_rule(self.l, self.radius, n_radial, n_angular)
            return pts + self.center, wts
        pts, wts = np.zeros((1, 0), dtype=complex), np.ones(1)
        for R in self.radii:
            p1, w1 = disc_rule(R, n_radial, n_angular)
            pts = np.concatenate([np.repeat(pts, len(p1), axis=0), np.tile(p1[:, None], (len(pts), 1))], axis=1)
            wts = np.repeat(wts, len(w1)) * np.tile(w1, len(wts))
        return pts + self.center, wts

    def sample_uniform(self, rng, count):
        """Uniform samples in the domain."""
        l = self.l
        if l == 0:
            return np.zeros((count, 0), dtype=complex)
        if self.shape == "ball":
            g = rng.normal(size=(count, l)) + 1j * rng.normal(size=(count, l))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            rad = self.radius * rng.uniform(size=(count, 1)) ** (1 / (2 * l))
            return self.center + rad * g
        rad = self.radii * np.sqrt(rng.uniform(size=(count, l)))
        ang = rng.uniform(0, 2 * np.pi, size=(count, l))
        return self.center + rad * np.exp(1j * ang)

    def boundary_nodes(self, count):
        """Points on the boundary with outward unit normals and area weights.

        Only the ball is supported in closed form (sphere of radius R); for a
        polydisc the boundary is a union of faces, returned per face.
        """
        from .integrate import sphere_rule
        if self.l == 0:
            return np.zeros((0, 0), dtype=complex), np.zeros((0, 0), dtype=complex), np.zeros(0)
        if self.shape == "ball":
            m = max(2, int(round(count ** (1 / max(1, 2 * self.l - 1)))))
            theta, wts = sphere_rule(self.l, m, m)
            R = self.radius
            return self.center + R * theta, theta, wts * R ** (2 * self.l - 1)
        pts, normals, wts = [], [], []
        for j in range(self.l):
            m = max(4, count // self.l)
            ang = 2 * np.pi * (np.arange(m) + 0.5) / m
            face = np.tile(self.center, (m, 1)).astype(complex)
            face[:, j] += self.radii[j] * np.exp(1j * ang)
            nrm = np.zeros((m, self.l), dtype=complex)
            nrm[:, j] = np.exp(1j * ang)
            pts.append(face)
            normals.append(nrm)
            wts.append(np.full(m, 2 * np.pi * self.radii[j] / m))
        return np.concatenate(pts), np.concatenate(normals), np.concatenate(wts)

    def spec(self):
        out = {"shape": self.shape, "center": [[c.real, c.imag] for c in self.center]}
        if self.shape == "polydisc":
            out["radii"] = [float(r) for r in self.radii]
        elif self.shape == "ball":
            out["radius"] = self.radius
        return out


@dataclass(frozen=True)
class Tube:
    """{w in B, s < |A(w) z| < r}; s = 0 is the solid tube."""

    base: BaseDomain
    r: float
    s: float = 0.0

    def __post_init__(self):
        if self.r <= 0 or self.s < 0 or self.s > self.r:
            raise ValueError(f"invalid tube radii s={self.s}, r={self.r}")

    @property
    def is_empty(self):
        return self.s >= self.r


# --------------------------------------------------------------------------
# fiber metrics

class Metric:
    """Matrix field w -> A(w) on the fiber, given by sympy entries in the
    base symbols of the chart."""

    def __init__(self, k, n, matrix, name="custom", params=None):
        self.k, self.n = k, n
        self.matrix = sp.Matrix(matrix)
        if self.matrix.shape != (n, n):
            raise ValueError(f"metric matrix must be {n}x{n}")
        self.name = name
        self.params = params or {}

    @property
    def is_identity(self):
        return self.matrix == sp.eye(self.n)

    @functools.cached_property
    def _fn(self):
        x, xb = symbols(self.k)
        return sp.lambdify(list(x[self.n:]) + list(xb[self.n:]), list(self.matrix), modules="numpy")

    def numeric(self, w):
        """A(w) for a batch w of shape (..., l) -> (..., n, n)."""
        w = np.asarray(w, dtype=complex)
        cols = [w[..., j] for j in range(self.k - self.n)]
        vals = self._fn(*(cols + [np.conj(c) for c in cols]))
        shape = w.shape[:-1]
        arr = np.stack([np.broadcast_to(np.asarray(v, dtype=complex), shape) for v in vals], axis=-1)
        return arr.reshape(shape + (self.n, self.n))

    def spec(self):
        return {"name": self.name, **self.params}


def metric_from_spec(spec, k, n):
    spec = spec or {"name": "identity"}
    name = spec.get("name", "identity")
    x, xb = symbols(k)
    l = k - n
    wsq = sum((x[n + j] * xb[n + j] for j in range(l)), sp.S.Zero)
    if name == "identity":
        return Metric(k, n, sp.eye(n), "identity")
    if name == "scalar":
        c = sp.nsimplify(spec["c"])
        return Metric(k, n, c * sp.eye(n), "scalar", {"c": spec["c"]})
    if name == "constant":
        from .maps import _parse_entries
        m = _parse_entries(spec["matrix"], k)
        return Metric(k, n, sp.Matrix(m.tolist()), "constant", {"matrix": spec["matrix"]})
    if name == "diag_weight":
        a = list(spec["a"])
        if len(a) != n:
            raise LabError("schema", "diag_weight needs one weight per fiber coordinate", field="setting.metric.a")
        return Metric(k, n, sp.diag(*[1 + sp.nsimplify(ai) * wsq for ai in a]), "diag_weight", {"a": a})
    raise LabError("schema", f"unknown metric {name!r}", field="setting.metric.name")


# --------------------------------------------------------------------------
# canonical forms

class CanonicalForms:
    """phi, alpha, beta, alpha_eps, alpha_ver, beta_ver, hat forms and omega."""

    def __init__(self, setting):
        self.setting = setting
        k, n = setting.k, setting.n
        x, xb = symbols(k)
        A = setting.metric.matrix
        z = sp.Matrix(x[:n])
        v = A * z
        self.phi_expr = sp.expand(sum((v[i] * conj_expr(v[i], k) for i in range(n)), sp.S.Zero))
        self.phi = Form.scalar(k, self.phi_expr, name="phi")
        origin = fiber_origin_distance(n)
        self.log_phi = Form.scalar(k, sp.log(self.phi_expr), singular=(origin,), name="log phi")
        self.omega = kahler_form(k, range(n, k)) * sp.nsimplify(setting.omega_scale)
        self._fiber = fiber_mask(k, n)

    @functools.cached_property
    def alpha(self):
        return self.log_phi.ddc()

    @functools.cached_property
    def beta(self):
        return self.phi.ddc()

    @functools.cached_property
    def d_phi(self):
        return self.phi.d()

    @functools.cached_property
    def dc_phi(self):
        return self.phi.dc()

    @functools.cached_property
    def dc_log_phi(self):
        return self.log_phi.dc()

    @functools.lru_cache(maxsize=64)
    def alpha_eps(self, eps):
        k = self.setting.k
        f = Form.scalar(k, sp.log(self.phi_expr + sp.Float(eps) ** 2))
        return f.ddc()

    @functools.cached_property
    def alpha_ver(self):
        return self.alpha.restrict(self._fiber)

    @functools.cached_property
    def beta_ver(self):
        return self.beta.restrict(self._fiber)

    @functools.cached_property
    def hat_alpha_prime(self):
        return self.omega * sp.nsimplify(self.setting.c1) + self.alpha

    @functools.cached_property
    def hat_beta(self):
        return self.omega * (sp.nsimplify(self.setting.c1) * self.phi_expr) + self.beta

    def phi_value(self, at):
        return self.phi.evaluate(at).comps.get(0, 0.0).real


def euclidean_fiber_forms(k, n):
    """(|z|^2, ddc log |z|^2, ddc |z|^2) for the Euclidean fiber norm."""
    return _euclidean_cached(k, n)


@functools.lru_cache(maxsize=None)
def _euclidean_cached(k, n):
    r2 = norm_squared(k, range(n))
    origin = fiber_origin_distance(n)
    alpha = Form.scalar(k, sp.log(r2), singular=(origin,)).ddc()
    beta = kahler_form(k, range(n))
    return r2, alpha, beta


@dataclass
class LocalSetting:
    k: int
    l: int
    p: int
    metric: Metric
    base: BaseDomain
    r_bar: float = 0.5
    omega_scale: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    cond_bound: float = 1e6
    forms: CanonicalForms = field(default=None, repr=False)

    @property
    def n(self):
        return self.k - self.l

    @property
    def m_lower(self):
        return max(0, self.l - self.p)

    @property
    def m_upper(self):
        return min(self.l, self.k - self.p)

    @property
    def fiber_mask(self):
        return fiber_mask(self.k, self.n)

    @property
    def base_mask(self):
        return base_mask(self.k, self.n)

    def metric_numeric(self, w):
        return self.metric.numeric(w)

    def tube(self, r, s=0.0):
        return Tube(self.base, r, s)

    def spec(self):
        return {
            "k": self.k, "l": self.l, "p": self.p,
            "metric": self.metric.spec(),
            "omega": {"name": "euclidean", "scale": self.omega_scale},
            "base": self.base.spec(),
            "r_bar": self.r_bar, "c1": self.c1, "c2": self.c2,
        }


def build_setting(k, l, p, metric=None, base=None, r_bar=0.5, omega_scale=1.0, sweep=256,
                  seed=0, cond_bound=1e6, margin=1e-6):
    """Build the local setting and its canonical forms.

    c1 is the smallest power of two for which hat_beta passes a positivity
    sweep (margin ``margin`` after rescaling by phi) and hat_alpha_prime
    dominates alpha_ver / c1 on random tube points.  c2 = c1 / r_bar^2.
    """
    if not (0 <= l < k) or not (0 <= p <= k):
        raise ValueError(f"invalid dimensions k={k}, l={l}, p={p}")
    n = k - l
    if metric is None or isinstance(metric, dict):
        metric = metric_from_spec(metric, k, n)
    if base is None:
        base = BaseDomain.ball(l, 1.0) if l else BaseDomain.point()
    elif isinstance(base, dict):
        base = base_from_spec(base, l)
    setting = LocalSetting(k, l, p, metric, base, r_bar, omega_scale, cond_bound=cond_bound)
    rng = np.random.default_rng(seed)
    pts = sample_tube_points(setting, r_bar, sweep, rng)
    setting.forms = CanonicalForms(setting)
    setting.c1 = select_c1(setting, pts, margin)
    setting.c2 = setting.c1 / r_bar ** 2
    setting.forms = CanonicalForms(setting)
    return setting


def base_from_spec(spec, l):
    shape = spec.get("shape", "ball")
    center = spec.get("center")
    if center is not None:
        center = [complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c) for c in center]
    if shape == "ball":
        return BaseDomain.ball(l, spec.get("radius", 1.0), center)
    if shape == "polydisc":
        return BaseDomain.polydisc(l, spec.get("radii", 1.0), center)
    if shape == "point":
        return BaseDomain.point()
    raise LabError("schema", f"unknown base shape {shape!r}", field="setting.base.shape")


def sample_tube_points(setting, r, count, rng, level=False):
    """Random points of Tube(B, r) (or of its horizontal boundary when
    ``level``), checking the metric along the way."""
    n, l = setting.n, setting.l
    w = setting.base.sample_uniform(rng, count)
    A = setting.metric.numeric(w) if l else setting.metric.numeric(np.zeros((count, 0)))
    if A.shape[:-2] != (count,):
        A = np.broadcast_to(A, (count, n, n))
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(A)
    if not np.all(np.isfinite(cond)) or np.any(cond > setting.cond_bound):
        raise LabError("metric-degenerate", "A(w) is singular or badly conditioned on the sweep grid",
                       max_condition=float(np.nanmax(np.where(np.isfinite(cond), cond, np.inf))))
    u = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    if not level:
        u *= r * rng.uniform(size=(count, 1)) ** (1 / (2 * n))
    else:
        u *= r
    z = np.linalg.solve(A, u[..., None])[..., 0]
    return np.concatenate([z, w], axis=1)


def _hermitian(fv, k, idx):
    """Hermitian matrix H with form = (i/pi) sum H_ab dx_a ^ dxbar_b."""
    m = len(idx)
    H = np.zeros(fv.shape + (m, m), dtype=complex)
    for a, ia in enumerate(idx):
        for b, ib in enumerate(idx):
            v = fv.comps.get((1 << ia) | (1 << (k + ib)))
            if v is not None:
                H[..., a, b] = v * (np.pi / 1j)
    return H


def _scaled_min_eig(H, scale):
    S = scale[..., :, None] * scale[..., None, :]
    M = H * S
    M = 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))
    return np.linalg.eigvalsh(M)[..., 0]


def select_c1(setting, pts, margin=1e-6, max_power=40):
    """Smallest power of two passing the hat-form positivity sweep."""
    k, n = setting.k, setting.n
    forms = setting.forms
    phi = np.real(forms.phi.evaluate(pts).comps[0])
    beta = forms.beta.evaluate(pts)
    alpha = forms.alpha.evaluate(pts)
    omega = forms.omega.evaluate(pts)
    idx = list(range(k))
    Hb, Ha, Ho = (_hermitian(v, k, idx) for v in (beta, alpha, omega))
    Hav = Ha.copy()
    Hav[..., n:, :] = 0
    Hav[..., :, n:] = 0
    sb = np.concatenate([np.ones((len(pts), n)), np.tile(1 / np.sqrt(phi)[:, None], (1, k - n))], axis=1)
    sa = np.concatenate([np.tile(np.sqrt(phi)[:, None], (1, n)), np.ones((len(pts), k - n))], axis=1)
    for power in range(max_power):
        c1 = 2.0 ** power
        hb = c1 * phi[:, None, None] * Ho + Hb
        ha = c1 * Ho + Ha - Hav / c1
        if np.min(_scaled_min_eig(hb, sb)) >= margin and np.min(_scaled_min_eig(ha, sa)) >= -1e-9:
            return c1
    raise LabError("metric-degenerate", "no power of two up to 2^40 makes hat_beta positive")


def tube_membership(setting, tube, at):
    """True iff w in B and s < |A(w) z| < r (strict: tubes are open)."""
    pts = as_points(at, setting.k)
    n = setting.n
    z, w = pts[..., :n], pts[..., n:]
    A = setting.metric.numeric(w)
    norm = np.linalg.norm(np.einsum("...ij,...j->...i", A, z), axis=-1)
    inside = tube.base.contains(w) & (norm < tube.r)
    if tube.s > 0:
        inside &= norm > tube.s
    return inside if inside.ndim else bool(inside)


def level_tangent_frames(setting, pts, rng, vectors=2):
    """Random real tangent vectors to the level set of phi through each point.

    Returns an array (N, vectors, k) of complex coordinates of real vectors.
    """
    k = setting.k
    dphi = setting.forms.d_phi.evaluate(pts)
    g = np.stack([2 * np.conj(dphi.comps.get(1 << m, np.zeros(len(pts), complex))) for m in range(k)], axis=-1)
    out = []
    for _ in range(vectors):
        v = rng.normal(size=(len(pts), k)) + 1j * rng.normal(size=(len(pts), k))
        coef = np.real(np.sum(v * np.conj(g), axis=1)) / np.real(np.sum(g * np.conj(g), axis=1))
        out.append(v - coef[:, None] * g)
    return np.stack(out, axis=1)


def horizontal_restriction_check(setting, t, pts, frames, tangency_tol=1e-9):
    """max |alpha(v1, v2) - beta(v1, v2) / t^2| over points and frame pairs."""
    k = setting.k
    pts = as_points(pts, k)
    frames = np.asarray(frames, dtype=complex)
    phi = np.real(setting.forms.phi.evaluate(pts).comps[0])
    if np.max(np.abs(phi - t * t)) > 1e-12 * max(1.0, t * t):
        raise LabError("precondition", "sample points are not on the level set phi = t^2")
    dphi = setting.forms.d_phi.evaluate(pts)
    full = frame_array([frames[:, a, :] for a in range(frames.shape[1])], k)  # (N, d, 2k)
    grad_norm = np.sqrt(sum(np.abs(dphi.comps.get(1 << m, 0)) ** 2 for m in range(k)) * 4)
    for a in range(full.shape[1]):
        val = np.abs(dphi.on_frame(full[:, a:a + 1, :]))
        vnorm = np.linalg.norm(frames[:, a, :], axis=-1)
        if np.any(val > tangency_tol * grad_norm * vnorm):
            raise LabError("frame-not-tangent", "a frame vector is transverse to the level set")
    alpha = setting.forms.alpha.evaluate(pts)
    beta = setting.forms.beta.evaluate(pts)
    worst = 0.0
    d = full.shape[1]
    for a in range(d):
        for b in range(a + 1, d):
            pair = full[:, [a, b], :]
            diff = alpha.on_frame(pair) - beta.on_frame(pair) / (t * t)
            worst = max(worst, float(np.max(np.abs(diff))))
    return worst
