"""Admissible maps of tube neighbourhoods and their order-of-contact checks."""
from __future__ import annotations

import functools

import numpy as np
import sympy as sp

from .errors import LabError
from .forms import as_points, conj_expr, symbols


def _real_jacobian(jz, jzb):
    """Complexified Jacobian: rows are target slots, columns source slots."""
    top = np.concatenate([jz, jzb], axis=-1)
    bottom = np.concatenate([np.conj(jzb), np.conj(jz)], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


class AdmissibleMap:
    """Base class.  Points are (..., k) complex arrays, fiber coordinates first."""

    kind = "abstract"
    holomorphic = True
    is_identity = False

    def __init__(self, k, n):
        self.k, self.n, self.l = k, n, k - n
        self.validity_radius = np.inf

    def apply(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        """(d tau/dx, d tau/dxbar), each of shape (..., k, k)."""
        raise NotImplementedError

    def real_jacobian(self, x):
        jz, jzb = self.jacobian(x)
        return _real_jacobian(jz, jzb)

    def inverse(self, y):
        raise NotImplementedError

    def compose(self, inner):
        """The map self o inner."""
        return ComposedMap(self, inner)

    def __call__(self, x):
        return self.apply(x)

    def spec(self):
        return {"kind": self.kind}


class IdentityMap(AdmissibleMap):
    kind = "identity"
    is_identity = True

    def apply(self, x):
        return as_points(x, self.k)

    def jacobian(self, x):
        x = as_points(x, self.k)
        eye = np.broadcast_to(np.eye(self.k, dtype=complex), x.shape[:-1] + (self.k, self.k))
        return eye, np.zeros_like(eye)

    def inverse(self, y):
        return as_points(y, self.k)

    def compose(self, inner):
        return inner


class DilationMap(AdmissibleMap):
    """A_lam(z, w) = (lam z, w)."""

    kind = "dilation"

    def __init__(self, k, n, lam):
        super().__init__(k, n)
        lam = complex(lam)
        if lam == 0:
            raise LabError("zero-lambda", "dilation factor must be nonzero")
        self.lam = lam

    def apply(self, x):
        x = as_points(x, self.k).copy()
        x[..., :self.n] *= self.lam
        return x

    def jacobian(self, x):
        x = as_points(x, self.k)
        d = np.ones(self.k, dtype=complex)
        d[:self.n] = self.lam
        jz = np.broadcast_to(np.diag(d), x.shape[:-1] + (self.k, self.k))
        return jz, np.zeros_like(jz)

    def inverse(self, y):
        y = as_points(y, self.k).copy()
        y[..., :self.n] /= self.lam
        return y

    def compose(self, inner):
        if isinstance(inner, DilationMap):
            return DilationMap(self.k, self.n, self.lam * inner.lam)
        if isinstance(inner, IdentityMap):
            return self
        return ComposedMap(self, inner)

    def spec(self):
        return {"kind": "dilation", "lambda": [self.lam.real, self.lam.imag]}


class SymbolicMap(AdmissibleMap):
    """A polynomial (or analytic) map given by sympy components in x, xb."""

    def __init__(self, k, n, components, kind="holomorphic", name=None, validity_radius=None,
                 spec=None):
        super().__init__(k, n)
        if len(components) != k:
            raise ValueError(f"need {k} components, got {len(components)}")
        self.components = tuple(sp.sympify(c) for c in components)
        x, xb = symbols(k)
        self.kind = kind
        self.name = name
        self.holomorphic = all(not (c.free_symbols & set(xb)) for c in self.components)
        self._spec = spec
        if validity_radius is not None:
            self.validity_radius = validity_radius

    @functools.cached_property
    def _compiled(self):
        x, xb = symbols(self.k)
        args = list(x) + list(xb)
        f = sp.lambdify(args, list(self.components), modules="numpy", cse=True)
        jz = [[sp.diff(c, v) for v in x] for c in self.components]
        jzb = [[sp.diff(c, v) for v in xb] for c in self.components]
        flat = [e for row in jz for e in row] + [e for row in jzb for e in row]
        jf = sp.lambdify(args, flat, modules="numpy", cse=True)
        return f, jf

    def _cols(self, x):
        cols = [x[..., m] for m in range(self.k)]
        return cols + [np.conj(c) for c in cols]

    def apply(self, x):
        x = as_points(x, self.k)
        f, _ = self._compiled
        vals = f(*self._cols(x))
        return np.stack([np.broadcast_to(np.asarray(v, dtype=complex), x.shape[:-1]) for v in vals], axis=-1)

    def jacobian(self, x):
        x = as_points(x, self.k)
        _, jf = self._compiled
        vals = jf(*self._cols(x))
        vals = [np.broadcast_to(np.asarray(v, dtype=complex), x.shape[:-1]) for v in vals]
        k = self.k
        arr = np.stack(vals, axis=-1).reshape(x.shape[:-1] + (2, k, k))
        return arr[..., 0, :, :], arr[..., 1, :, :]

    def inverse(self, y, tol=1e-13, maxit=60):
        """Damped Newton inverse, converged to |tau(x) - y| <= tol (1 + |y|)."""
        y = as_points(y, self.k)
        x = y.copy()
        scale = tol * (1.0 + np.linalg.norm(y, axis=-1))
        res = self.apply(x) - y
        err = np.linalg.norm(res, axis=-1)
        for _ in range(maxit):
            if np.all(err <= scale):
                return x
            if self.holomorphic:
                jz, _ = self.jacobian(x)
                delta = np.linalg.solve(jz, res[..., None])[..., 0]
            else:
                big = self.real_jacobian(x)
                rhs = np.concatenate([res, np.conj(res)], axis=-1)
                delta = np.linalg.solve(big, rhs[..., None])[..., 0][..., :self.k]
            step = np.ones(err.shape)
            for _ in range(8):
                trial = x - step[..., None] * delta
                tres = self.apply(trial) - y
                terr = np.linalg.norm(tres, axis=-1)
                worse = terr > err
                if not np.any(worse):
                    break
                step = np.where(worse, step / 2, step)
            x, res, err = trial, tres, terr
        bad = np.flatnonzero(np.reshape(~(err <= scale), -1))
        if bad.size:
            pt = np.reshape(y, (-1, self.k))[bad[0]]
            raise LabError("newton-diverged", "inverse did not converge", point=pt.tolist())
        return x

    def compose(self, inner):
        if isinstance(inner, IdentityMap):
            return self
        if isinstance(inner, SymbolicMap) or isinstance(inner, DilationMap):
            x, xb = symbols(self.k)
            if isinstance(inner, DilationMap):
                comps = [x[m] * inner.lam if m < self.n else x[m] for m in range(self.k)]
            else:
                comps = list(inner.components)
            rep = {x[m]: comps[m] for m in range(self.k)}
            rep.update({xb[m]: conj_expr(comps[m], self.k) for m in range(self.k)})
            new = [sp.expand(c.xreplace(rep)) for c in self.components]
            kind = self.kind if self.kind == getattr(inner, "kind", None) else "composed"
            return SymbolicMap(self.k, self.n, new, kind=kind,
                               validity_radius=min(self.validity_radius, inner.validity_radius))
        return ComposedMap(self, inner)

    def spec(self):
        if self._spec is not None:
            return dict(self._spec)
        return {"kind": self.kind, "components": [str(c) for c in self.components]}


class ComposedMap(AdmissibleMap):
    """outer o inner with the chain rule applied numerically."""

    kind = "composed"

    def __init__(self, outer, inner):
        super().__init__(outer.k, outer.n)
        self.outer, self.inner = outer, inner
        self.holomorphic = outer.holomorphic and inner.holomorphic
        self.validity_radius = min(outer.validity_radius, inner.validity_radius)

    def apply(self, x):
        return self.outer.apply(self.inner.apply(x))

    def jacobian(self, x):
        y = self.inner.apply(x)
        az, azb = self.outer.jacobian(y)
        bz, bzb = self.inner.jacobian(x)
        jz = az @ bz + azb @ np.conj(bzb)
        jzb = az @ bzb + azb @ np.conj(bz)
        return jz, jzb

    def inverse(self, y):
        return self.inner.inverse(self.outer.inverse(y))

    def spec(self):
        return {"kind": "composed", "outer": self.outer.spec(), "inner": self.inner.spec()}


# --------------------------------------------------------------------------
# catalog constructors

def identity(k, n):
    return IdentityMap(k, n)


def dilation(k, n, lam):
    return DilationMap(k, n, lam)


def _quadratic_terms(A, n, z):
    A = np.asarray(A, dtype=object)
    if A.shape == (n, n):
        q = sum(sp.sympify(A[a, b]) * z[a] * z[b] for a in range(n) for b in range(n))
        return [q] * n
    if A.shape == (n, n, n):
        return [sum(sp.sympify(A[j, a, b]) * z[a] * z[b] for a in range(n) for b in range(n))
                for j in range(n)]
    raise ValueError(f"quadratic coefficient array must have shape ({n},{n}) or ({n},{n},{n})")


def strongly_admissible(k, n, A, B, fiber_remainder=None, base_remainder=None, name=None,
                        sweep_points=2000, seed=0):
    """z' = z + Q_A(z) + R_v, w' = w + B z + R_h.

    ``A`` of shape (n, n) adds the scalar quadratic form z A z^T to every fiber
    component; shape (n, n, n) gives each component its own form.  Entries of
    A and B may be sympy expressions in the base symbols.  Remainders are
    sympy expressions whose contact order is the caller's obligation (and is
    measured by ``verify_admissible_orders``).
    """
    l = k - n
    x, xb = symbols(k)
    z, w = x[:n], x[n:]
    quad = _quadratic_terms(A, n, z)
    Bm = np.asarray(B, dtype=object).reshape(l, n) if l else np.zeros((0, n), dtype=object)
    comps = []
    for j in range(n):
        c = z[j] + quad[j]
        if fiber_remainder is not None:
            c = c + sp.sympify(fiber_remainder[j])
        comps.append(c)
    for i in range(l):
        c = w[i] + sum(sp.sympify(Bm[i, a]) * z[a] for a in range(n))
        if base_remainder is not None:
            c = c + sp.sympify(base_remainder[i])
        comps.append(c)
    spec = {"kind": "strongly_admissible", "A": _jsonable(A), "B": _jsonable(B)}
    tau = SymbolicMap(k, n, comps, kind="strongly_admissible", name=name, spec=spec)
    tau.validity_radius = _validity_radius(quad, k, n, sweep_points, seed)
    return tau


def _jsonable(arr):
    a = np.asarray(arr, dtype=object)
    def conv(v):
        v = sp.sympify(v)
        if v.is_number:
            c = complex(v)
            return c.real if c.imag == 0 else [c.real, c.imag]
        return str(v)
    return [conv(v) for v in a.reshape(-1)] if a.ndim == 0 else _nest(a, conv)


def _nest(a, conv):
    if a.ndim == 1:
        return [conv(v) for v in a]
    return [_nest(row, conv) for row in a]


def _validity_radius(quad, k, n, count, seed):
    """Largest r with sup |quadratic term| <= r/4 on |z| = r (sampled)."""
    x, xb = symbols(k)
    f = sp.lambdify(list(x) + list(xb), quad, modules="numpy")
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    wv = rng.normal(size=(count, k - n)) + 1j * rng.normal(size=(count, k - n))
    if k > n:
        wv *= (rng.uniform(size=(count, 1)) ** (1 / (2 * (k - n)))) / np.linalg.norm(wv, axis=1, keepdims=True)
    pts = np.concatenate([z, wv], axis=1)
    cols = [pts[:, m] for m in range(k)]
    vals = f(*(cols + [np.conj(c) for c in cols]))
    vals = np.stack([np.broadcast_to(np.asarray(v, dtype=complex), (count,)) for v in vals], axis=-1)
    c = float(np.max(np.linalg.norm(vals, axis=1)))
    return np.inf if c == 0 else 1.0 / (4.0 * c)


def holomorphic_map(k, n, components, name=None):
    tau = SymbolicMap(k, n, components, kind="holomorphic", name=name)
    if not tau.holomorphic:
        raise ValueError("components depend on conjugate variables")
    return tau


def general_map(k, n, components, kind="custom", name=None):
    """A map with arbitrary (possibly non-holomorphic) symbolic components."""
    return SymbolicMap(k, n, components, kind=kind, name=name)


def nonadmissible_control(k, n, c=0.1):
    """z' = z + c zbar: violates the fiber contact condition on purpose."""
    x, xb = symbols(k)
    comps = [x[m] + c * xb[m] if m < n else x[m] for m in range(k)]
    return SymbolicMap(k, n, comps, kind="nonadmissible_control",
                       spec={"kind": "nonadmissible_control", "c": c})


def _parse_complex(v):
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    if isinstance(v, str):
        return complex(sp.sympify(v.replace("i", "I") if "I" not in v else v))
    return complex(v)


def _parse_entries(arr, k):
    def conv(v):
        if isinstance(v, str):
            x, xb = symbols(k)
            loc = {str(s): s for s in x + xb}
            loc["I"] = sp.I
            return sp.sympify(v, locals=loc)
        if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
            return sp.Float(v[0]) + sp.I * sp.Float(v[1])
        return sp.nsimplify(v) if isinstance(v, int) else sp.Float(v)
    a = np.asarray(arr, dtype=object)
    out = np.empty(a.shape, dtype=object)
    for idx in np.ndindex(a.shape):
        out[idx] = conv(a[idx])
    return out


def map_from_spec(spec, k, n):
    """Build a map from the CLI grammar."""
    kind = spec.get("kind")
    if kind == "identity":
        return IdentityMap(k, n)
    if kind == "dilation":
        return DilationMap(k, n, _parse_complex(spec["lambda"]))
    if kind == "strongly_admissible":
        return strongly_admissible(k, n, _parse_entries(spec["A"], k), _parse_entries(spec.get("B", [[0] * n] * (k - n)), k))
    if kind == "holomorphic":
        x, xb = symbols(k)
        loc = {str(s): s for s in x}
        loc["I"] = sp.I
        return holomorphic_map(k, n, [sp.sympify(c, locals=loc) for c in spec["components"]])
    if kind == "nonadmissible_control":
        return nonadmissible_control(k, n, spec.get("c", 0.1))
    raise LabError("schema", f"unknown map kind {kind!r}", field="maps.kind")


# --------------------------------------------------------------------------
# order-of-contact verification

def _slope(radii, values):
    values = np.asarray(values, dtype=float)
    if np.all(values == 0):
        return np.inf
    keep = values > 0
    if keep.sum() < 2:
        return np.inf
    return float(np.polyfit(np.log(np.asarray(radii)[keep]), np.log(values[keep]), 1)[0])


def verify_admissible_orders(tau, r0=0.1, count=6, ratio=2.0, samples=128, base_radius=1.0,
                             metric=None, seed=0):
    """Fit log-log slopes of sup |tau_v - z|, sup |tau_h - w| and
    sup |phi o tau - phi| against |z| over radii r0 / ratio^n.

    ``metric`` (optional) maps a base batch (N, l) to fiber matrices (N, n, n);
    the default is the identity so phi = |z|^2.
    """
    k, n, l = tau.k, tau.n, tau.l
    rng = np.random.default_rng(seed)
    z0 = rng.normal(size=(samples, n)) + 1j * rng.normal(size=(samples, n))
    z0 /= np.linalg.norm(z0, axis=1, keepdims=True)
    if l:
        w = rng.normal(size=(samples, l)) + 1j * rng.normal(size=(samples, l))
        w *= base_radius * rng.uniform(size=(samples, 1)) ** (1 / (2 * l)) / np.linalg.norm(w, axis=1, keepdims=True)
    else:
        w = np.zeros((samples, 0), dtype=complex)

    def phi(pts):
        z, ww = pts[:, :n], pts[:, n:]
        if metric is None:
            return np.sum(np.abs(z) ** 2, axis=1)
        A = metric(ww)
        return np.sum(np.abs(np.einsum("nij,nj->ni", A, z)) ** 2, axis=1)

    radii = [r0 / ratio ** i for i in range(count)]
    fib, bas, ph = [], [], []
    for r in radii:
        x = np.concatenate([r * z0, w], axis=1)
        y = tau.apply(x)
        fib.append(np.max(np.linalg.norm(y[:, :n] - x[:, :n], axis=1)))
        bas.append(np.max(np.linalg.norm(y[:, n:] - x[:, n:], axis=1)) if l else 0.0)
        ph.append(np.max(np.abs(phi(y) - phi(x))))
    return {
        "radii": radii,
        "fiber": _slope(radii, fib),
        "base": _slope(radii, bas),
        "phi": _slope(radii, ph),
        "residuals": {"fiber": fib, "base": bas, "phi": ph},
    }


def intrinsic_check(T, setting, tau1, tau2, j, schedule, quad=None):
    """Agreement of extrapolated nu_j limits computed through two maps."""
    from .lelong import intrinsic_check as _check
    return _check(T, setting, tau1, tau2, j, schedule, quad)
