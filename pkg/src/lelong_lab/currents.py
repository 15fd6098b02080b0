"""Explicit test currents of bidegree (p, p) and the pairing engine.

Every current is paired with a test form Phi of degree 2k - 2p over a tube
or corona.  Currents with a density (smooth forms, powers of
ddc log|z|^2, psh log-norm families) are integrated pointwise off their
singular locus; integration currents on linear subspaces are parametrised.
"""
from __future__ import annotations

import functools

import numpy as np
import sympy as sp

from .errors import LabError
from .forms import (Form, FormValue, PowerForm, ProductForm, as_points, dilate_value, fiber_origin_distance,
                    kahler_form, symbols)
from .geometry import Tube, _euclidean_cached
from .integrate import (Estimate, QuadratureSpec, ROUNDOFF, _check_finite, _metric_factors, integrate_tube,
                        radial_rule, sphere_rule)
from .maps import DilationMap, IdentityMap, _parse_complex, _real_jacobian, map_from_spec


class Current:
    """Base class; subclasses set ``kind``, ``k``, ``p`` and a pairing rule."""

    kind = "abstract"
    singular_weight = 0.0
    closed = False

    def __init__(self, k, p):
        self.k, self.p = k, p

    @property
    def bidegree(self):
        return (self.p, self.p)

    @property
    def bidimension(self):
        return self.k - self.p

    def density(self):
        """Form-like object representing the current off its singular locus."""
        raise LabError("unsupported-kind", f"{self.kind} has no pointwise density")

    def spec(self):
        return {"kind": self.kind}

    def __repr__(self):
        return f"{type(self).__name__}(k={self.k}, p={self.p})"


class ZeroCurrent(Current):
    kind = "zero"
    closed = True

    def spec(self):
        return {"kind": "zero", "p": self.p}


class SmoothForm(Current):
    kind = "smooth_form"

    def __init__(self, form, name=None):
        if form.degree % 2:
            raise ValueError("a current of bidegree (p,p) needs an even-degree form")
        super().__init__(form.k, form.degree // 2)
        self.form = form
        self.name = name

    def density(self):
        return self.form

    def spec(self):
        out = {"kind": "smooth_form"}
        if self.name:
            out["name"] = self.name
        if isinstance(self.form, Form):
            from .forms import pair_of
            out["terms"] = [{"I": list(pair_of(m, self.k)[0]), "J": list(pair_of(m, self.k)[1]), "coeff": str(e)}
                            for m, e in sorted(self.form.comps.items())]
        return out


class AlphaPower(Current):
    """(ddc log |z|^2)^q with the Euclidean norm on the first n coordinates."""

    kind = "alpha_power"
    closed = True

    def __init__(self, k, n, q):
        if not 0 <= q <= n:
            raise ValueError(f"exponent q={q} must lie in [0, {n}]")
        super().__init__(k, q)
        self.n, self.q = n, q
        self.singular_weight = 2.0 * q

    def density(self):
        return PowerForm(_euclidean_cached(self.k, self.n)[1], self.q)

    def spec(self):
        return {"kind": "alpha_power", "q": self.q}


class BetaPower(SmoothForm):
    """(ddc |z|^2)^q on the fiber: smooth, closed, not conic."""

    kind = "beta_power"
    closed = True

    def __init__(self, k, n, q):
        super().__init__(kahler_form(k, range(n)).power(q), name=f"beta^{q}")
        self.n, self.q = n, q

    def spec(self):
        return {"kind": "beta_power", "q": self.q}


class PshLogNorm(Current):
    """|f|^(2a) (ddc log |f|^2)^q for a holomorphic map f = (f_1..f_m).

    For a > 0 this is psh but not pluriharmonic; ddc of it is the positive
    closed current ddc(|f|^(2a)) ^ (ddc log |f|^2)^q.
    """

    kind = "psh_log_norm"

    def __init__(self, k, f, q, a=0.5, n=None):
        self.f = tuple(sp.sympify(c) for c in f)
        super().__init__(k, q)
        self.q, self.a = q, sp.nsimplify(a)
        self.n = n if n is not None else len(self.f)
        # for f linear in the fiber the density blows up like |z|^(2a - 2q)
        self.singular_weight = max(0.0, 2.0 * q - 2.0 * float(self.a))

    @functools.cached_property
    def _parts(self):
        from .forms import conj_expr
        k = self.k
        nf = sum((c * conj_expr(c, k) for c in self.f), sp.S.Zero)
        x, _ = symbols(k)
        fdist = _zero_set_distance(self.f, k)
        theta = Form.scalar(k, sp.log(nf), singular=(fdist,)).ddc()
        u = Form.scalar(k, nf ** self.a, singular=(fdist,))
        return nf, u, theta

    def density(self):
        _, u, theta = self._parts
        return ProductForm(u, PowerForm(theta, self.q))

    def ddc_density(self):
        _, u, theta = self._parts
        return ProductForm(u.ddc(), PowerForm(theta, self.q))

    def spec(self):
        return {"kind": "psh_log_norm", "f": [str(c) for c in self.f], "q": self.q, "a": float(self.a)}


def _zero_set_distance(f, k):
    """Crude distance surrogate to {f = 0}: |f| itself (exact for linear f)."""
    x, xb = symbols(k)
    fn = sp.lambdify(list(x), list(f), modules="numpy")

    def dist(pts):
        vals = fn(*[pts[..., m] for m in range(k)])
        return np.sqrt(sum(np.abs(np.broadcast_to(v, pts.shape[:-1])) ** 2 for v in vals))
    return dist


class DensityCurrent(Current):
    """A current given by an explicit form-like density and singular weight."""

    kind = "density"

    def __init__(self, density, singular_weight=0.0, closed=False, label="density"):
        super().__init__(density.k, density.degree // 2)
        self._density = density
        self.singular_weight = singular_weight
        self.closed = closed
        self.label = label

    def density(self):
        return self._density

    def spec(self):
        return {"kind": self.label}


class IntegrationLinear(Current):
    """Integration over the affine subspace offset + span(basis).

    The subspace must be adapted to the fibration: its projection to the
    base is either a point or all of C^l.
    """

    kind = "integration_linear"
    closed = True

    def __init__(self, k, n, basis, offset=None):
        M = np.asarray(basis, dtype=complex)
        if M.ndim != 2 or M.shape[0] != k:
            raise ValueError("basis must be a k x d array of column vectors")
        d = M.shape[1]
        if np.linalg.matrix_rank(M) != d:
            raise ValueError("basis vectors are linearly dependent")
        super().__init__(k, k - d)
        self.n, self.l, self.d = n, k - n, d
        self.basis = M
        self.offset = np.zeros(k, dtype=complex) if offset is None else np.asarray(offset, dtype=complex)
        l = self.l
        Mb = M[n:, :]
        rank_b = np.linalg.matrix_rank(Mb) if l else 0
        if rank_b == 0:
            self.d_base = 0
            adapted = M
        elif rank_b == l:
            self.d_base = l
            _, _, vh = np.linalg.svd(Mb)
            null = np.conj(vh[l:, :]).T
            X = np.linalg.pinv(Mb)
            adapted = np.concatenate([M @ null, M @ X], axis=1)
            adapted[n:, :d - l] = 0
        else:
            raise LabError("unsupported-kind", "linear subspace must project to a point or onto the base")
        self.adapted = adapted
        self.d_fiber = d - self.d_base

    def contains(self, pts):
        pts = as_points(pts, self.k)
        rel = pts - self.offset
        coef, *_ = np.linalg.lstsq(self.basis, rel.reshape(-1, self.k).T, rcond=None)
        resid = self.basis @ coef - rel.reshape(-1, self.k).T
        return np.linalg.norm(resid, axis=0).reshape(pts.shape[:-1]) < 1e-12

    def spec(self):
        return {"kind": "integration_linear",
                "basis": [[[v.real, v.imag] for v in col] for col in self.basis.T.tolist()],
                "offset": [[v.real, v.imag] for v in self.offset.tolist()]}


class Pushforward(Current):
    kind = "pushforward"

    def __init__(self, tau, inner):
        super().__init__(inner.k, inner.p)
        self.tau, self.inner = tau, inner
        self.singular_weight = inner.singular_weight
        self.closed = inner.closed

    def spec(self):
        return {"kind": "pushforward", "map": self.tau.spec(), "inner": self.inner.spec()}


class Dilated(Current):
    """(A_lam)_* T."""

    kind = "dilated"

    def __init__(self, lam, inner, n):
        lam = complex(lam)
        if lam == 0:
            raise LabError("zero-lambda", "dilation factor must be nonzero")
        super().__init__(inner.k, inner.p)
        self.lam, self.inner, self.n = lam, inner, n
        self.singular_weight = inner.singular_weight
        self.closed = inner.closed

    def spec(self):
        return {"kind": "dilated", "lambda": [self.lam.real, self.lam.imag], "inner": self.inner.spec()}


class MollifiedForm:
    """Fiberwise mollification of a form-like object with the bump
    c (1 - |y|^2)^3 of radius eps (a probability density on the fiber ball)."""

    def __init__(self, f, eps, n, radial=3, simplex=2, torus=4):
        self.f, self.eps, self.n = f, float(eps), n
        self.k, self.degree = f.k, f.degree
        self.singular = ()
        rho, wr = radial_rule(n, 0.0, 1.0, QuadratureSpec(radial=radial))
        theta, wt = sphere_rule(n, simplex, torus)
        y = (rho[:, None, None] * theta[None]).reshape(-1, n)
        w = (wr[:, None] * wt[None]).ravel() * np.repeat((1 - rho ** 2) ** 3, len(theta))
        self.shifts, self.weights = y, w / w.sum()

    def evaluate(self, at):
        pts = as_points(at, self.k)
        out = None
        for y, w in zip(self.shifts, self.weights):
            q = pts.copy()
            q[..., :self.n] -= self.eps * y
            v = self.f.evaluate(q).scale(w)
            out = v if out is None else out + v
        return out

    __call__ = evaluate


class Regularized(Current):
    kind = "regularized"

    def __init__(self, inner, eps, n=None):
        if eps <= 0:
            raise ValueError("eps must be positive")
        super().__init__(inner.k, inner.p)
        self.inner, self.eps = inner, float(eps)
        if isinstance(inner, AlphaPower):
            self.closed = True
            k, n, e = inner.k, inner.n, sp.Float(eps)
            from .forms import norm_squared
            a_eps = Form.scalar(k, sp.log(norm_squared(k, range(n)) + e * e)).ddc()
            self._density = PowerForm(a_eps, inner.q)
        elif isinstance(inner, SmoothForm):
            self.closed = inner.closed
            self._density = MollifiedForm(inner.density(), eps, n if n is not None else _fiber_dim(inner))
        else:
            raise LabError("unsupported-kind", f"cannot regularize a {inner.kind} current")

    def density(self):
        return self._density

    def spec(self):
        return {"kind": "regularized", "eps": self.eps, "inner": self.inner.spec()}


def _fiber_dim(T):
    n = getattr(T, "n", None)
    if n is None:
        raise LabError("precondition", "fiber dimension unknown for this current; construct it with n")
    return n


# --------------------------------------------------------------------------
# catalog helpers

def smooth_form(form, name=None, n=None):
    T = SmoothForm(form, name)
    if n is not None:
        T.n = n
    return T


def alpha_power(k, n, q):
    return AlphaPower(k, n, q)


def beta_power(k, n, q):
    return BetaPower(k, n, q)


def integration_linear(k, n, basis, offset=None):
    return IntegrationLinear(k, n, basis, offset)


def psh_log_norm(k, f, q, a=0.5, n=None):
    return PshLogNorm(k, f, q, a, n)


def diagonal_form(k, terms):
    """sum_t c_t prod_{j in idx_t} (i/pi) dx_j ^ dxbar_j for terms (idx, c),
    with 1-based indices: a real form when the coefficients are real."""
    out = None
    for idx, coeff in terms:
        f = Form.scalar(k, coeff)
        for j in sorted(idx):
            f = f.wedge(kahler_form(k, [j - 1]))
        out = f if out is None else out + f
    return out


def random_positive_form(k, p, seed=0, n=None, terms=3):
    """A smooth positive closed (p,p)-form with polynomial coefficients:
    the p-th power of ddc of c0|x|^2 + sum c_j |m_j(x)|^2, m_j random
    quadratic holomorphic monomials."""
    rng = np.random.default_rng(seed)
    x, xb = symbols(k)
    pot = sp.Rational(1) * sum(x[m] * xb[m] for m in range(k))
    for _ in range(terms):
        i, j = rng.integers(0, k, size=2)
        c = sp.Rational(int(rng.integers(1, 5)), 4)
        pot += c * x[i] * x[j] * xb[i] * xb[j]
    T = SmoothForm(Form.scalar(k, pot).ddc().power(p), name=f"random_positive_{seed}")
    T.potential = pot
    if n is not None:
        T.n = n
    return T


# --------------------------------------------------------------------------
# operations

def ddc_of(T):
    """The current ddc T for kinds with an explicit formula."""
    if isinstance(T, (AlphaPower, IntegrationLinear, ZeroCurrent)) or (
            isinstance(T, Regularized) and isinstance(T.inner, AlphaPower)):
        return ZeroCurrent(T.k, T.p + 1)
    if isinstance(T, SmoothForm):
        if not isinstance(T.form, Form):
            raise LabError("unsupported-kind", "smooth form without symbolic coefficients")
        out = SmoothForm(T.form.ddc(), name=f"ddc({T.name})" if T.name else None)
        if hasattr(T, "n"):
            out.n = T.n
        return out
    if isinstance(T, PshLogNorm):
        return DensityCurrent(T.ddc_density(), T.singular_weight + 2.0, closed=True, label="psh_log_norm_ddc")
    if isinstance(T, Regularized):
        return Regularized(ddc_of(T.inner), T.eps)
    if isinstance(T, Dilated):
        return Dilated(T.lam, ddc_of(T.inner), T.n)
    if isinstance(T, Pushforward):
        if not T.tau.holomorphic:
            raise LabError("unsupported-kind", "ddc does not commute with a non-holomorphic pushforward")
        return Pushforward(T.tau, ddc_of(T.inner))
    raise LabError("unsupported-kind", f"no explicit ddc for {T.kind}")


def pushforward(tau, T):
    if isinstance(tau, IdentityMap):
        return T
    if isinstance(tau, DilationMap):
        return dilate(tau.lam, T, tau.n)
    if isinstance(T, Pushforward):
        return Pushforward(tau.compose(T.tau), T.inner)
    if isinstance(T, IntegrationLinear) and _is_affine_holomorphic(tau):
        # the image of an affine subspace under an affine map is affine
        jz, _ = tau.jacobian(np.zeros(T.k, dtype=complex))
        return IntegrationLinear(T.k, T.n, jz @ T.basis, tau.apply(T.offset))
    return Pushforward(tau, T)


def _is_affine_holomorphic(tau):
    comps = getattr(tau, "components", None)
    if comps is None or not tau.holomorphic:
        return False
    x, _ = symbols(tau.k)
    return all(sp.Poly(c, *x).total_degree() <= 1 for c in comps)


def dilate(lam, T, n=None):
    lam = complex(lam)
    if lam == 0:
        raise LabError("zero-lambda", "dilation factor must be nonzero")
    if lam == 1:
        return T
    if isinstance(T, Dilated):
        prod = lam * T.lam
        return T.inner if prod == 1 else Dilated(prod, T.inner, T.n)
    if n is None:
        n = _fiber_dim(T)
    if isinstance(T, IntegrationLinear):
        M = T.basis.copy()
        M[:n] *= lam
        off = T.offset.copy()
        off[:n] *= lam
        return IntegrationLinear(T.k, T.n, M, off)
    return Dilated(lam, T, n)


def regularize(T, eps, n=None):
    return Regularized(T, eps, n)


# --------------------------------------------------------------------------
# pairing

def _as_list(phi):
    return (list(phi), True) if isinstance(phi, (list, tuple)) else ([phi], False)


def _top(tv, phis, pts):
    cols = [tv.wedge(f.evaluate(pts)).top_density() for f in phis]
    return np.stack(cols, axis=-1)


def pair(T, region, phi, setting, quad=None, path="direct", phi_weight=0.0):
    """<T, 1_region Phi> as an Estimate.

    ``phi`` may be a list of test forms sharing one set of samples; the
    value is then an array.  ``phi_weight`` declares a singularity of the
    test forms along V (as for powers of alpha).
    """
    quad = quad or QuadratureSpec()
    phis, many = _as_list(phi)
    for f in phis:
        if f.degree + 2 * T.p != 2 * T.k:
            raise LabError("arity-mismatch",
                           f"test form of degree {f.degree} does not complement bidegree ({T.p},{T.p})")
    if not isinstance(region, Tube):
        raise LabError("precondition", "pairing region must be a Tube")
    est = _pair(T, region, phis, setting, quad, path, phi_weight)
    if not many:
        est = Estimate(np.asarray(est.value)[0], np.asarray(est.error)[0] if np.ndim(est.error) else est.error,
                       est.evals, est.seed)
    return est


def _zero(phis, quad):
    return Estimate(np.zeros(len(phis)), np.zeros(len(phis)), 0, quad.seed)


def _pair(T, region, phis, setting, quad, path, phi_weight):
    if region.is_empty or isinstance(T, ZeroCurrent):
        return _zero(phis, quad)
    if isinstance(T, Dilated):
        lam = T.lam
        scaled = Tube(region.base, region.r / abs(lam), region.s / abs(lam))
        pulled = [_DilatedTest(f, lam, T.n) for f in phis]
        return _pair(T.inner, scaled, pulled, setting, quad, path, phi_weight)
    if isinstance(T, IntegrationLinear):
        return _pair_linear(T, region, phis, setting, quad, phi_weight)
    if isinstance(T, Pushforward):
        return _pair_pushforward(T, region, phis, setting, quad, path, phi_weight)
    weight = T.singular_weight + phi_weight
    if region.s == 0 and weight >= 2 * setting.n:
        raise LabError("non-integrable", "singularity along V is not integrable over a solid tube",
                       weight=weight, fiber_dim=setting.n)
    dens = T.density()

    def integrand(pts):
        return _top(dens.evaluate(pts), phis, pts)

    return integrate_tube(integrand, region, setting, quad.with_weight(weight if region.s == 0 else 0.0))


class _DilatedTest:
    def __init__(self, f, lam, n):
        self.f, self.lam, self.n = f, lam, n
        self.k, self.degree = f.k, f.degree

    def evaluate(self, at):
        pts = as_points(at, self.k).copy()
        pts[..., :self.n] *= self.lam
        return dilate_value(self.f.evaluate(pts), self.lam, self.n)


def _pair_pushforward(T, region, phis, setting, quad, path, phi_weight):
    tau, inner = T.tau, T.inner
    if isinstance(inner, IntegrationLinear):
        raise LabError("unsupported-kind", "pushforward of an integration current by a nonlinear map")
    if isinstance(inner, (Pushforward, Dilated)):
        raise LabError("unsupported-kind", "nested pushforwards must be composed first")
    weight = inner.singular_weight + phi_weight
    if region.s == 0 and weight >= 2 * setting.n:
        raise LabError("non-integrable", "singularity along V is not integrable over a solid tube")
    dens = inner.density()

    def preimage(y):
        try:
            return tau.inverse(y)
        except LabError as exc:
            if exc.code == "newton-diverged":
                raise LabError("not-invertible-on-region", "map inverse failed on a requested sample",
                               **exc.context) from exc
            raise

    if path == "direct":
        # (tau^-1)^* T ^ Phi at target points
        def integrand(y):
            x = preimage(y)
            if tau.holomorphic:
                jz, _ = tau.jacobian(x)
                inv = np.linalg.inv(jz)
                Jinv = _real_jacobian(inv, np.zeros_like(inv))
            else:
                Jinv = np.linalg.inv(tau.real_jacobian(x))
            tv = dens.evaluate(x).pullback(Jinv, holomorphic=tau.holomorphic)
            return _top(tv, phis, y)
    elif path == "adjoint":
        # T ^ tau^* Phi at x, divided by the real Jacobian determinant
        def integrand(y):
            x = preimage(y)
            J = tau.real_jacobian(x)
            tv = dens.evaluate(x)
            cols = []
            for f in phis:
                pulled = f.evaluate(y).pullback(J, holomorphic=tau.holomorphic)
                cols.append(tv.wedge(pulled).top_density())
            return np.stack(cols, axis=-1) / np.real(np.linalg.det(J))[..., None]
    else:
        raise ValueError(f"unknown pairing path {path!r}")
    return integrate_tube(integrand, region, setting, quad.with_weight(weight if region.s == 0 else 0.0))


def _linear_sum(T, region, phis, setting, quad):
    """One-resolution quadrature of Phi restricted to L inside the region."""
    k, n, d = T.k, setting.n, T.d
    df, db = T.d_fiber, T.d_base
    M = T.adapted
    Mff = M[:n, :df]
    Mfb = M[:n, df:]
    z0, w0 = T.offset[:n], T.offset[n:]
    jac = np.zeros((2 * k, 2 * d), dtype=complex)
    jac[:k, :d] = M
    jac[k:, d:] = np.conj(M)
    if db:
        wpts, wb = region.base.nodes(quad.base_radial, quad.base_angular)
    else:
        if not region.base.contains(w0[None, :])[0]:
            return np.zeros(len(phis)), np.zeros(len(phis)), 0
        wpts, wb = w0[None, :], np.ones(1)
    sphere = sphere_rule(df, quad.simplex, quad.torus) if df else None
    total = np.zeros(len(phis), dtype=complex)
    absum = np.zeros(len(phis))
    evals = 0
    for w, wt in zip(wpts, wb):
        zb = w - w0 if db else np.zeros(0, dtype=complex)
        z1 = z0 + Mfb @ zb
        A = np.eye(n, dtype=complex) if setting.metric.is_identity else setting.metric.numeric(w[None, :])[0]
        Az1 = A @ z1
        if df:
            Q, R = np.linalg.qr(A @ Mff)
            c = np.conj(Q.T) @ Az1
            h2 = max(0.0, float(np.linalg.norm(Az1) ** 2 - np.linalg.norm(c) ** 2))
        else:
            h2 = float(np.linalg.norm(Az1) ** 2)
        if h2 >= region.r ** 2:
            continue
        if df == 0:
            if h2 <= region.s ** 2 and region.s > 0:
                continue
            zeta = zb[None, :]
            pts = np.concatenate([z1, w])[None, :]
            vw = np.ones(1)
        else:
            r_eff = np.sqrt(region.r ** 2 - h2)
            s_eff = np.sqrt(max(0.0, region.s ** 2 - h2))
            if s_eff >= r_eff:
                continue
            rho, wr = radial_rule(df, s_eff, r_eff, quad)
            theta, wth = sphere
            v = (rho[:, None, None] * theta[None]).reshape(-1, df)
            vw = (wr[:, None] * wth[None]).ravel() * abs(np.linalg.det(R)) ** -2
            zf = np.linalg.solve(R, (v - c).T).T
            zeta = np.concatenate([zf, np.broadcast_to(zb, (len(zf), db))], axis=1)
            pts = T.offset + zeta @ M.T
        cols = []
        for f in phis:
            fv = f.evaluate(pts).pullback(jac, holomorphic=True)
            cols.append(fv.top_density())
        vals = np.stack(cols, axis=-1)
        _check_finite(vals, pts)
        total += wt * np.sum(vals * vw[:, None], axis=0)
        absum += wt * np.sum(np.abs(vals) * vw[:, None], axis=0)
        evals += len(pts)
    return total, absum, evals


def _pair_linear(T, region, phis, setting, quad, phi_weight):
    q = quad.with_weight(phi_weight if region.s == 0 else 0.0)
    value, absum, evals = _linear_sum(T, region, phis, setting, q)
    floor = ROUNDOFF * absum
    if quad.error_model == "none":
        return Estimate(value, floor, evals, quad.seed)
    coarse, _, ev2 = _linear_sum(T, region, phis, setting, q.coarse())
    return Estimate(value, np.abs(value - coarse) + floor, evals + ev2, quad.seed)


# --------------------------------------------------------------------------
# configuration grammar

def current_from_spec(spec, k, n):
    kind = spec.get("kind")
    x, xb = symbols(k)
    loc = {str(s): s for s in x + xb}
    loc["I"] = sp.I
    if kind == "alpha_power":
        return AlphaPower(k, n, int(spec["q"]))
    if kind == "beta_power":
        return BetaPower(k, n, int(spec["q"]))
    if kind == "smooth_form":
        if "random_positive" in spec:
            cfg = spec["random_positive"]
            return random_positive_form(k, int(cfg["p"]), int(cfg.get("seed", 0)), n)
        comps = {}
        for term in spec["terms"]:
            comps[(tuple(term["I"]), tuple(term["J"]))] = sp.sympify(term["coeff"], locals=loc)
        return smooth_form(Form(k, comps), spec.get("name"), n)
    if kind == "integration_linear":
        # the config lists basis vectors; the constructor wants columns
        basis = np.array([[_parse_complex(v) for v in vec] for vec in spec["basis"]]).T
        offset = spec.get("offset")
        if offset is not None:
            offset = [_parse_complex(v) for v in offset]
        return IntegrationLinear(k, n, basis, offset)
    if kind == "psh_log_norm":
        f = [sp.sympify(c, locals=loc) for c in spec["f"]]
        return PshLogNorm(k, f, int(spec["q"]), spec.get("a", 0.5), n)
    if kind == "pushforward":
        return pushforward(map_from_spec(spec["map"], k, n), current_from_spec(spec["inner"], k, n))
    if kind == "dilated":
        return dilate(_parse_complex(spec["lambda"]), current_from_spec(spec["inner"], k, n), n)
    if kind == "regularized":
        return Regularized(current_from_spec(spec["inner"], k, n), float(spec["eps"]))
    raise LabError("schema", f"unknown current kind {kind!r}", field="current.kind")
