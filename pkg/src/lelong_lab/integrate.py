"""Quadrature over tubes, coronas and horizontal boundaries.

Tensor rules work in the metric-normalised fiber coordinate u = A(w) z, so
the tube becomes (ball or shell in u) x B and dV_z = |det A(w)|^-2 dV_u.
The fiber is done in polar form: a Gauss-Jacobi rule in rho carrying the
weight rho^(2n-1-s) (s is the declared singular weight of the integrand)
and a toric product rule on the sphere S^(2n-1).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import LabError

ROUNDOFF = 1e-14


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "tensor"          # "tensor" or "mc"
    radial: int = 16
    simplex: int = 6
    torus: int = 8
    base_radial: int = 8
    base_angular: int = 12
    radial_panels: int = 0          # extra geometric panels towards rho = 0
    samples: int = 20000            # MC budget
    shells: int = 8
    base_cells: int = 4
    seed: int = 0
    singular_weight: float = 0.0
    threads: int = 1
    chunk: int = 16                 # base nodes per evaluation batch
    error_model: str = "pair"       # "pair" (two resolutions) or "none"

    def __post_init__(self):
        if self.method not in ("tensor", "mc"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if min(self.radial, self.simplex, self.torus, self.base_radial, self.base_angular, self.samples) <= 0:
            raise ValueError("quadrature budget must be positive")

    def coarse(self):
        """The lower resolution used by the two-resolution error model."""
        return replace(self, radial=max(2, self.radial * 2 // 3), simplex=max(1, self.simplex - 2),
                       torus=max(3, self.torus - 2), base_radial=max(2, self.base_radial - 2),
                       base_angular=max(3, self.base_angular - 3))

    def with_weight(self, s):
        return replace(self, singular_weight=float(s))

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class Estimate:
    """A value with an absolute error bound."""

    value: complex
    error: float
    evals: int = 0
    seed: int | None = None

    def real(self):
        v = complex(self.value) if np.ndim(self.value) == 0 else np.asarray(self.value)
        return Estimate(np.real(v), self.error + np.abs(np.imag(v)), self.evals, self.seed)

    def __add__(self, other):
        if not isinstance(other, Estimate):
            return Estimate(self.value + other, self.error, self.evals, self.seed)
        return Estimate(self.value + other.value, self.error + other.error, self.evals + other.evals, self.seed)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Estimate):
            return Estimate(self.value - other, self.error, self.evals, self.seed)
        return Estimate(self.value - other.value, self.error + other.error, self.evals + other.evals, self.seed)

    def __neg__(self):
        return Estimate(-self.value, self.error, self.evals, self.seed)

    def scale(self, c):
        return Estimate(self.value * c, self.error * np.abs(c), self.evals, self.seed)

    __mul__ = scale
    __rmul__ = scale

    def __getitem__(self, idx):
        err = self.error[idx] if np.ndim(self.error) else self.error
        return Estimate(self.value[idx], err, self.evals, self.seed)

    def __float__(self):
        return float(np.real(self.value))


ZERO = Estimate(0.0, 0.0)


# --------------------------------------------------------------------------
# one-dimensional and product rules

def jacobi_rule(m, a, R):
    """Nodes/weights for int_0^R f(rho) rho^a d rho (a > -1)."""
    if a <= -1:
        raise LabError("non-integrable", f"radial weight rho^{a} is not integrable at 0")
    x, w = roots_jacobi(m, 0.0, a)
    return R * (1 + x) / 2, w * (R / 2) ** (a + 1)


def legendre_rule(m, lo, hi):
    x, w = roots_legendre(m)
    return lo + (hi - lo) * (1 + x) / 2, w * (hi - lo) / 2


def radial_rule(n, s, r, spec):
    """Effective nodes/weights W with sum W f(rho) ~ int_s^r f rho^(2n-1) d rho.

    On a solid tube the innermost panel carries rho^(2n-1-sw) exactly and
    the integrand is multiplied by rho^sw through the weights.
    """
    m = spec.radial
    sw = spec.singular_weight
    a = 2 * n - 1
    nodes, weights = [], []
    if s == 0:
        inner = r / 4.0 ** spec.radial_panels
        x, w = jacobi_rule(m, a - sw, inner)
        nodes.append(x)
        weights.append(w * x ** sw)
        edges = [inner * 4.0 ** i for i in range(spec.radial_panels + 1)]
    else:
        panels = max(1, math.ceil(math.log(r / s, 4)))
        edges = list(np.geomspace(s, r, panels + 1))
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = legendre_rule(m, lo, hi)
        nodes.append(x)
        weights.append(w * x ** a)
    return np.concatenate(nodes), np.concatenate(weights)


def simplex_rule(d, m):
    """Conical product rule on {tau_i >= 0, sum tau_i <= 1} in R^d."""
    pts = np.zeros((1, 0))
    wts = np.ones(1)
    for i in range(1, d + 1):
        y, w = roots_jacobi(m, d - i, 0.0)
        x = (1 + y) / 2
        w = w / 2 ** (d - i + 1)
        remaining = 1 - pts.sum(axis=1) if pts.shape[1] else np.ones(len(pts))
        new = np.repeat(remaining, m) * np.tile(x, len(pts))
        pts = np.concatenate([np.repeat(pts, m, axis=0), new[:, None]], axis=1)
        wts = np.repeat(wts, m) * np.tile(w, len(wts))
    return pts, wts


def sphere_rule(n, m_simplex, m_torus):
    """Toric product rule on the unit sphere of C^n; weights sum to its area.

    u_j = sqrt(tau_j) e^(i theta_j) with tau in the simplex and theta on the
    torus, for which d sigma = 2^(1-n) d tau d theta.
    """
    tau, wt = simplex_rule(n - 1, m_simplex)
    last = np.clip(1 - tau.sum(axis=1), 0.0, None)
    tau = np.concatenate([tau, last[:, None]], axis=1)
    ang = 2 * np.pi * (np.arange(m_torus) + 0.5) / m_torus
    grids = np.meshgrid(*([ang] * n), indexing="ij")
    theta = np.stack([g.ravel() for g in grids], axis=1)  # (m^n, n)
    u = np.sqrt(tau)[:, None, :] * np.exp(1j * theta)[None, :, :]
    w = wt[:, None] * np.full(len(theta), (2 * np.pi / m_torus) ** n)[None, :] * 2.0 ** (1 - n)
    return u.reshape(-1, n), w.ravel()


def sphere_area(n):
    return 2 * math.pi ** n / math.factorial(n - 1)


def disc_rule(R, n_radial, n_angular):
    """Disc of radius R in s = rho^2/R^2 (Gauss-Legendre) x angle (trapezoid)."""
    s, ws = legendre_rule(n_radial, 0.0, 1.0)
    ang = 2 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    pts = (R * np.sqrt(s))[:, None] * np.exp(1j * ang)[None, :]
    wts = (ws * R * R / 2)[:, None] * np.full(n_angular, 2 * np.pi / n_angular)[None, :]
    return pts.ravel(), wts.ravel()


def ball_rule(l, R, n_radial, n_angular):
    rho, wr = jacobi_rule(n_radial, 2 * l - 1, R)
    theta, wt = sphere_rule(l, max(2, n_radial // 2), n_angular)
    pts = rho[:, None, None] * theta[None]
    return pts.reshape(-1, l), (wr[:, None] * wt[None]).ravel()


def clenshaw_curtis(N):
    """Nodes on [-1, 1] (descending) and weights of the (N+1)-point rule."""
    j = np.arange(N + 1)
    x = np.cos(j * np.pi / N)
    w = np.zeros(N + 1)
    for jj in j:
        total = 0.0
        for kk in range(1, N // 2 + 1):
            b = 1.0 if 2 * kk == N else 2.0
            total += b / (4 * kk * kk - 1) * math.cos(2 * kk * jj * math.pi / N)
        c = 1.0 if jj in (0, N) else 2.0
        w[jj] = c / N * (1 - total)
    return x, w


# --------------------------------------------------------------------------
# tube integration

def _fiber_points(n, tube, spec):
    rho, wr = radial_rule(n, tube.s, tube.r, spec)
    theta, wt = sphere_rule(n, spec.simplex, spec.torus)
    u = (rho[:, None, None] * theta[None]).reshape(-1, n)
    return u, (wr[:, None] * wt[None]).ravel()


def _metric_factors(setting, w):
    n = setting.n
    if setting.metric.is_identity:
        return None, np.ones(len(w))
    A = np.broadcast_to(setting.metric.numeric(w), (len(w), n, n))
    det = np.abs(np.linalg.det(A)) ** -2
    return np.linalg.inv(A), det


def _run_chunks(fn, count, spec):
    bounds = [(i, min(count, i + spec.chunk)) for i in range(0, count, spec.chunk)]
    if spec.threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(spec.threads) as ex:
            parts = list(ex.map(lambda b: fn(*b), bounds))
    else:
        parts = [fn(*b) for b in bounds]
    return parts


def _check_finite(vals, pts):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        flat = bad.reshape(len(pts), -1).any(axis=1)
        i = int(np.argmax(flat))
        raise LabError("nonfinite-sample", "integrand is not finite at a sample point", point=pts[i].tolist())


def _tensor(density, tube, setting, spec, fiber_only=None):
    n, k = setting.n, setting.k
    u, wu = _fiber_points(n, tube, spec)
    wpts, wb = tube.base.nodes(spec.base_radial, spec.base_angular)
    F = len(u)

    def chunk(a, b):
        w = wpts[a:b]
        Ainv, det = _metric_factors(setting, w)
        z = np.broadcast_to(u, (b - a, F, n)) if Ainv is None else np.einsum("bij,fj->bfi", Ainv, u)
        pts = np.concatenate([z, np.broadcast_to(w[:, None, :], (b - a, F, k - n))], axis=2).reshape(-1, k)
        vals = np.asarray(density(pts))
        _check_finite(vals, pts)
        vals = vals.reshape((b - a, F) + vals.shape[1:])
        wt = (wb[a:b] * det)[:, None] * wu[None, :]
        wt = wt.reshape(wt.shape + (1,) * (vals.ndim - 2))
        return np.sum(vals * wt, axis=1), np.sum(np.abs(vals) * wt, axis=1)

    parts = _run_chunks(chunk, len(wpts), spec)
    per_node = np.concatenate([p[0] for p in parts])
    absum = np.concatenate([p[1] for p in parts])
    return np.sum(per_node, axis=0), np.sum(absum, axis=0), len(wpts) * F


def integrate_tube(density, tube, setting, spec=None):
    """Integral of ``density`` (point batch (N, k) -> (N,) or (N, m)) over the
    tube against Lebesgue measure, with an error estimate."""
    spec = spec or QuadratureSpec()
    if tube.is_empty:
        return Estimate(0.0, 0.0, 0, spec.seed)
    if spec.method == "mc":
        return _monte_carlo(density, tube, setting, spec)
    value, absum, evals = _tensor(density, tube, setting, spec)
    floor = ROUNDOFF * absum
    if spec.error_model == "none":
        return Estimate(value, floor, evals, spec.seed)
    coarse, _, ev2 = _tensor(density, tube, setting, spec.coarse())
    return Estimate(value, np.abs(value - coarse) + floor, evals + ev2, spec.seed)


# --------------------------------------------------------------------------
# stratified Monte Carlo

def _base_cells(base, cells):
    """List of (sampler(rng, m) -> (m, l) points, cell volume)."""
    l = base.l
    if l == 0:
        return [(lambda rng, m: np.zeros((m, 0), dtype=complex), 1.0)]
    out = []
    if base.shape == "ball" and l == 1:
        ns = max(1, int(round(math.sqrt(cells))))
        na = max(1, cells // ns)
        R = base.radius
        for i in range(ns):
            for j in range(na):
                def sampler(rng, m, i=i, j=j):
                    s = (i + rng.uniform(size=m)) / ns
                    psi = 2 * np.pi * (j + rng.uniform(size=m)) / na
                    return (base.center + R * np.sqrt(s) * np.exp(1j * psi))[:, None]
                out.append((sampler, base.volume / (ns * na)))
        return out
    for i in range(cells):
        def sampler(rng, m, i=i):
            v = (i + rng.uniform(size=m)) / cells
            if base.shape == "ball":
                g = rng.normal(size=(m, l)) + 1j * rng.normal(size=(m, l))
                g /= np.linalg.norm(g, axis=1, keepdims=True)
                return base.center + base.radius * (v ** (1 / (2 * l)))[:, None] * g
            pts = base.sample_uniform(rng, m) - base.center
            R0 = base.radii[0]
            pts[:, 0] = R0 * np.sqrt(v) * np.exp(2j * np.pi * rng.uniform(size=m))
            return base.center + pts
        out.append((sampler, base.volume / cells))
    return out


def _monte_carlo(density, tube, setting, spec):
    n, k = setting.n, setting.k
    sw = spec.singular_weight
    c = 2 * n - sw
    if c <= 0:
        raise LabError("non-integrable", "singular weight leaves no integrable radial density")
    cells = _base_cells(tube.base, spec.base_cells)
    S = spec.shells
    strata = S * len(cells)
    m = max(4, spec.samples // strata)
    edges = np.linspace(tube.s ** c, tube.r ** c, S + 1)
    area = sphere_area(n)
    pts_all, fac_all = [], []
    for i in range(S):
        for j, (sampler, vol) in enumerate(cells):
            idx = i * len(cells) + j
            rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(idx,)))
            v = edges[i] + (edges[i + 1] - edges[i]) * rng.uniform(size=m)
            rho = v ** (1 / c)
            g = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            w = sampler(rng, m)
            Ainv, det = _metric_factors(setting, w)
            u = rho[:, None] * g
            z = u if Ainv is None else np.einsum("bij,bj->bi", Ainv, u)
            pts_all.append(np.concatenate([z, w], axis=1))
            fac_all.append(rho ** sw * (edges[i + 1] - edges[i]) / c * area * vol * det)
    pts = np.concatenate(pts_all)
    fac = np.concatenate(fac_all)
    chunk_pts = max(1, spec.chunk) * 4096

    def chunk(a, b):
        lo, hi = a * chunk_pts, min(len(pts), b * chunk_pts)
        vals = np.asarray(density(pts[lo:hi]))
        _check_finite(vals, pts[lo:hi])
        return vals

    nchunks = -(-len(pts) // chunk_pts)
    bounds = [(i, i + 1) for i in range(nchunks)]
    if spec.threads > 1 and nchunks > 1:
        with ThreadPoolExecutor(spec.threads) as ex:
            parts = list(ex.map(lambda b: chunk(*b), bounds))
    else:
        parts = [chunk(*b) for b in bounds]
    vals = np.concatenate(parts)
    est = vals * fac.reshape((-1,) + (1,) * (vals.ndim - 1))
    est = est.reshape((strata, m) + vals.shape[1:])
    means = est.mean(axis=1)
    var = est.var(axis=1, ddof=1) / m
    value = np.sum(means, axis=0)
    err = np.sqrt(np.sum(np.real(var), axis=0))
    return Estimate(value, err, len(pts), spec.seed)


# --------------------------------------------------------------------------
# horizontal boundary

def _horizontal(eta, t, base, setting, spec):
    n, k = setting.n, setting.k
    theta, wt = sphere_rule(n, spec.simplex, spec.torus)
    u = t * theta
    wpts, wb = base.nodes(spec.base_radial, spec.base_angular)
    F = len(u)
    dphi = setting.forms.d_phi

    def chunk(a, b):
        w = wpts[a:b]
        Ainv, det = _metric_factors(setting, w)
        z = np.broadcast_to(u, (b - a, F, n)) if Ainv is None else np.einsum("bij,fj->bfi", Ainv, u)
        pts = np.concatenate([z, np.broadcast_to(w[:, None, :], (b - a, F, k - n))], axis=2).reshape(-1, k)
        vals = dphi.evaluate(pts).wedge(eta.evaluate(pts)).top_density() / (2 * t)
        _check_finite(vals, pts)
        vals = vals.reshape(b - a, F)
        wgt = (wb[a:b] * det)[:, None] * wt[None, :] * t ** (2 * n - 1)
        return np.sum(vals * wgt, axis=1), np.sum(np.abs(vals) * wgt, axis=1)

    parts = _run_chunks(chunk, len(wpts), spec)
    return (np.sum(np.concatenate([p[0] for p in parts])), np.sum(np.concatenate([p[1] for p in parts])),
            len(wpts) * F)


def integrate_horizontal_boundary(eta, t, setting, base=None, spec=None):
    """Integral of a (2k-1)-form over {|A(w) z| = t, w in B}, oriented as the
    boundary of the tube.

    Uses the co-area identity: the surface integral equals
    int_B |det A|^-2 t^(2n-1) int_S top(d phi ^ eta) / (2t) d sigma dV_w,
    which is the contraction against an outward-co-oriented tangent frame.
    """
    spec = spec or QuadratureSpec()
    base = base or setting.base
    if t <= 0:
        raise LabError("precondition", "t must be positive")
    if eta.degree != 2 * setting.k - 1:
        raise LabError("arity-mismatch", f"boundary integrand must have degree {2 * setting.k - 1}")
    if getattr(eta, "is_zero", lambda: False)():
        return Estimate(0.0, 0.0, 0, spec.seed)
    value, absum, evals = _horizontal(eta, t, base, setting, spec)
    floor = ROUNDOFF * absum
    if spec.error_model == "none":
        return Estimate(value, floor, evals, spec.seed)
    coarse, _, ev2 = _horizontal(eta, t, base, setting, spec.coarse())
    return Estimate(value, abs(value - coarse) + floor, evals + ev2, spec.seed)


# --------------------------------------------------------------------------
# radial profiles

def power_weight(terms):
    """w(t) = sum c t^e from a list of (c, e)."""
    terms = [(float(c), float(e)) for c, e in terms]

    def w(t):
        t = np.asarray(t, dtype=float)
        return sum(c * t ** e for c, e in terms)
    w.terms = terms
    return w


def jensen_weight(q, r):
    """2t (t^-2q - r^-2q) as power terms."""
    return [(2.0, 1.0 - 2 * q), (-2.0 * r ** (-2 * q), 1.0)]


def integrate_radial_profile(g, r, weight, levels=24, nodes=8, tail_terms=None):
    """int_0^r g(t) w(t) dt on geometric panels [r 2^-(m+1), r 2^-m].

    ``g`` maps an array of radii to values, or to (values, errors).
    ``weight`` is a list of power terms (c, e) or a callable; in the latter
    case ``tail_terms`` gives its power-law behaviour near 0 for the tail.
    Each panel uses Clenshaw-Curtis with ``nodes`` intervals, the embedded
    half rule giving the panel error.  Below the last panel g is modelled
    as C t^a from the two smallest grid points.
    """
    if nodes % 2:
        raise ValueError("nodes must be even (the half rule is embedded)")
    if callable(weight):
        wfn = weight
        terms = tail_terms
    else:
        wfn = power_weight(weight)
        terms = wfn.terms
    x, wcc = clenshaw_curtis(nodes)
    _, whalf = clenshaw_curtis(nodes // 2)
    edges = r * 2.0 ** -np.arange(levels + 1)
    lo, hi = edges[1:], edges[:-1]
    t = (lo[:, None] + hi[:, None]) / 2 + (hi[:, None] - lo[:, None]) / 2 * x[None, :]
    flat = t.ravel()
    out = g(flat)
    if isinstance(out, tuple):
        gv, ge = (np.asarray(a, dtype=float) for a in out)
    else:
        gv, ge = np.asarray(out, dtype=float), np.zeros(flat.shape)
    gv = gv.reshape(t.shape)
    ge = np.broadcast_to(ge, flat.shape).reshape(t.shape)
    f = gv * wfn(t)
    fe = np.abs(ge * wfn(t))
    half = (hi - lo) / 2
    full = half * (f @ wcc)
    coarse = half * (f[:, ::2] @ whalf)
    value = float(np.sum(full))
    error = float(np.sum(np.abs(full - coarse)) + np.sum(half * (fe @ np.abs(wcc))))
    tail, tail_err = _tail(t[-1, -1], gv[-1, -1], t[-2, -1], gv[-2, -1], t[-3, -1], gv[-3, -1], terms)
    return Estimate(value + tail, error + tail_err + ROUNDOFF * float(np.sum(np.abs(full))))


def _power_fit(t1, g1, t2, g2):
    if g1 == 0 or g2 == 0 or np.sign(g1) != np.sign(g2):
        return None
    a = math.log(abs(g1 / g2)) / math.log(t1 / t2)
    return g1 / t1 ** a, a


def _tail_value(C, a, tm, terms):
    total = 0.0
    for c, e in terms:
        s = a + e + 1
        if s <= 1e-9:
            raise LabError("tail-divergent", "the profile does not decay fast enough near t = 0",
                           exponent=a, weight_exponent=e)
        total += c * C * tm ** s / s
    return total


def _tail(tm, gm, t2, g2, t3, g3, terms):
    if terms is None:
        raise LabError("precondition", "callable weights need tail_terms")
    if gm == 0 and g2 == 0:
        return 0.0, 0.0
    fit = _power_fit(tm, gm, t2, g2)
    if fit is None:
        # sign change or an isolated zero: bound the tail by a constant fit
        bound = max(abs(gm), abs(g2))
        val = _tail_value(bound, 0.0, tm, [(abs(c), e) for c, e in terms])
        return 0.0, abs(val)
    C, a = fit
    val = _tail_value(C, a, tm, terms)
    prev = _power_fit(t2, g2, t3, g3)
    err = abs(val) * 1e-3
    if prev is not None:
        try:
            err += abs(val - _tail_value(prev[0], prev[1], tm, terms))
        except LabError:
            err += abs(val)
    return val, err
