"""Complex differential forms on a chart C^k = C^(k-l) x C^l.

A basis element dx_I ^ dxbar_J is encoded as a bitmask over 2k slots:
bit m (m < k) stands for dx_{m+1} and bit k+m for dxbar_{m+1}.  Increasing
bit order is the canonical ordering, so every holomorphic differential comes
before every antiholomorphic one.  Fiber coordinates come first, base
coordinates last.

Two layers live here:

* ``Form``: symbolic coefficients (sympy expressions in x_m and xb_m, the
  latter standing for the conjugate variables).  Derivatives are exact
  Wirtinger derivatives; evaluation goes through ``sympy.lambdify``.
* ``FormValue``: the value of a form at a batch of points, a sparse map from
  masks to complex arrays.  Wedge products of singular forms, pullbacks and
  contractions are done at this level.

Normalisation: dc = (1/2 pi i)(d' - d''), so ddc = (i/pi) d' d''.
"""
from __future__ import annotations

import functools
import itertools

import numpy as np
import sympy as sp

from .errors import LabError

DEFAULT_STEP = 1e-4


# --------------------------------------------------------------------------
# index bookkeeping

@functools.lru_cache(maxsize=None)
def symbols(k):
    """Holomorphic coordinate symbols and their conjugate stand-ins."""
    x = tuple(sp.Symbol(f"x{m + 1}") for m in range(k))
    xb = tuple(sp.Symbol(f"xb{m + 1}") for m in range(k))
    return x, xb


def conj_expr(expr, k):
    """Complex conjugate of an expression in the chart symbols."""
    x, xb = symbols(k)
    e = sp.conjugate(sp.sympify(expr))
    rep = {sp.conjugate(a): b for a, b in zip(x, xb)}
    rep.update({sp.conjugate(b): a for a, b in zip(x, xb)})
    return e.xreplace(rep)


def mask_of(I, J, k):
    """Mask of dx_I ^ dxbar_J, with 1-based strictly increasing I, J."""
    for idx in (I, J):
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"multi-index {idx} is not strictly increasing")
        if any(i < 1 or i > k for i in idx):
            raise ValueError(f"multi-index {idx} out of range 1..{k}")
    m = 0
    for i in I:
        m |= 1 << (i - 1)
    for j in J:
        m |= 1 << (k + j - 1)
    return m


def pair_of(mask, k):
    """Inverse of ``mask_of``."""
    I = tuple(m + 1 for m in range(k) if mask >> m & 1)
    J = tuple(m + 1 for m in range(k) if mask >> (k + m) & 1)
    return I, J


def slots(mask):
    out = []
    m = 0
    while mask:
        if mask & 1:
            out.append(m)
        mask >>= 1
        m += 1
    return tuple(out)


def popcount(mask):
    return bin(mask).count("1")


@functools.lru_cache(maxsize=None)
def merge_sign(a, b):
    """Sign of dx_a ^ dx_b relative to the canonical ordering (0 on overlap)."""
    if a & b:
        return 0
    inversions = 0
    bb = b
    while bb:
        low = bb & -bb
        inversions += popcount(a & ~((low << 1) - 1))
        bb ^= low
    return -1 if inversions & 1 else 1


def top_constant(k):
    """dx_1..dx_k ^ dxbar_1..dxbar_k = top_constant(k) * Lebesgue volume form."""
    return (-1) ** (k * (k - 1) // 2) * (-2j) ** k


def fiber_mask(k, n):
    """Mask of all slots belonging to the first n (fiber) coordinates."""
    low = (1 << n) - 1
    return low | (low << k)


def base_mask(k, n):
    return ((1 << (2 * k)) - 1) & ~fiber_mask(k, n)


# --------------------------------------------------------------------------
# numeric values

class FormValue:
    """Values of a form at a batch of points: mask -> complex array."""

    __slots__ = ("k", "comps", "shape", "degree")

    def __init__(self, k, comps=None, shape=(), degree=None):
        self.k = k
        self.shape = tuple(shape)
        self.comps = dict(comps or {})
        if degree is None:
            degs = {popcount(m) for m in self.comps}
            if len(degs) > 1:
                raise ValueError("mixed total degree in FormValue")
            degree = degs.pop() if degs else 0
        self.degree = degree

    # construction helpers
    @classmethod
    def constant(cls, k, value, shape=()):
        return cls(k, {0: np.broadcast_to(np.asarray(value, dtype=complex), shape)}, shape, 0)

    def is_zero(self):
        return not self.comps

    def component(self, I, J):
        m = mask_of(tuple(I), tuple(J), self.k)
        return self.comps.get(m, np.zeros(self.shape, dtype=complex))

    def bidegrees(self):
        return sorted({(len(pair_of(m, self.k)[0]), len(pair_of(m, self.k)[1])) for m in self.comps})

    def _combine(self, other, sign):
        if other.k != self.k:
            raise ValueError("forms live on different chart dimensions")
        if self.comps and other.comps and self.degree != other.degree:
            raise ValueError("cannot add forms of different degrees")
        out = dict(self.comps)
        for m, v in other.comps.items():
            out[m] = out[m] + sign * v if m in out else sign * v
        shape = np.broadcast_shapes(self.shape, other.shape)
        deg = self.degree if self.comps else other.degree
        return FormValue(self.k, out, shape, deg)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c):
        c = np.asarray(c)
        shape = np.broadcast_shapes(self.shape, c.shape)
        return FormValue(self.k, {m: c * v for m, v in self.comps.items()}, shape, self.degree)

    __mul__ = scale
    __rmul__ = scale

    def wedge(self, other):
        if other.k != self.k:
            raise ValueError("forms live on different chart dimensions")
        out = {}
        for ma, va in self.comps.items():
            for mb, vb in other.comps.items():
                s = merge_sign(ma, mb)
                if s == 0:
                    continue
                v = va * vb if s > 0 else -(va * vb)
                m = ma | mb
                out[m] = out[m] + v if m in out else v
        deg = self.degree + other.degree
        return FormValue(self.k, out, np.broadcast_shapes(self.shape, other.shape), deg)

    __xor__ = wedge

    def power(self, m):
        out = FormValue.constant(self.k, 1.0, self.shape)
        for _ in range(m):
            out = out.wedge(self)
        return out

    def restrict(self, keep_mask):
        """Keep components whose slots lie inside ``keep_mask``."""
        return FormValue(self.k, {m: v for m, v in self.comps.items() if m & ~keep_mask == 0},
                         self.shape, self.degree)

    def top_density(self):
        """Coefficient of a top-degree form against Lebesgue measure."""
        full = (1 << (2 * self.k)) - 1
        if self.degree != 2 * self.k and self.comps:
            raise ValueError(f"degree {self.degree} is not top degree {2 * self.k}")
        v = self.comps.get(full)
        if v is None:
            return np.zeros(self.shape, dtype=complex)
        return np.broadcast_to(v * top_constant(self.k), self.shape)

    def on_frame(self, frame):
        """Contract with tangent vectors given in the complexified basis.

        ``frame`` has shape (..., d, 2k): entry [a, s] is the value of the
        slot-s basis covector on the a-th vector.
        """
        frame = np.asarray(frame, dtype=complex)
        d = frame.shape[-2]
        if d != self.degree:
            raise LabError("arity-mismatch", f"frame has {d} vectors, form has degree {self.degree}")
        total = np.zeros(np.broadcast_shapes(self.shape, frame.shape[:-2]), dtype=complex)
        for m, v in self.comps.items():
            s = list(slots(m))
            if d == 0:
                total = total + v
                continue
            sub = frame[..., :, s]  # (..., d vectors, d slots)
            total = total + v * small_det(np.swapaxes(sub, -1, -2))
        return total

    def pullback(self, jac, holomorphic=False):
        """Pull back by a map with complexified Jacobian ``jac`` (..., 2k, 2d).

        Row s of ``jac`` expresses the target slot-s covector in the source
        basis; d < k restricts to a parametrised subspace.  For holomorphic maps bidegree is preserved and mixed minors
        are skipped.
        """
        jac = np.asarray(jac)
        k = self.k
        src = jac.shape[-1] // 2  # source dimension (a subspace when < k)
        out = {}
        shape = np.broadcast_shapes(self.shape, jac.shape[:-2])
        for m, v in self.comps.items():
            rows = list(slots(m))
            d = len(rows)
            if d == 0:
                out[0] = out[0] + v if 0 in out else v
                continue
            if d > 2 * src:
                continue
            a = sum(1 for s in rows if s < k)
            sub_rows = jac[..., rows, :]
            for cols in itertools.combinations(range(2 * src), d):
                if holomorphic and sum(1 for c in cols if c < src) != a:
                    continue
                det = small_det(sub_rows[..., list(cols)])
                mm = 0
                for c in cols:
                    mm |= 1 << c
                val = v * det
                out[mm] = out[mm] + val if mm in out else val
        return FormValue(src, out, shape, self.degree)

    def max_abs(self):
        if not self.comps:
            return 0.0
        return float(max(np.max(np.abs(v)) for v in self.comps.values()))

    def to_dict(self):
        return {pair_of(m, self.k): v for m, v in self.comps.items()}

    def __repr__(self):
        return f"FormValue(k={self.k}, degree={self.degree}, masks={sorted(self.comps)})"


def small_det(m):
    """Batched determinant with closed forms for orders up to 3."""
    d = m.shape[-1]
    if d == 1:
        return m[..., 0, 0]
    if d == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if d == 3:
        return (m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
                - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
                + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0]))
    return np.linalg.det(m)


def as_points(at, k=None):
    """Accept a ChartPoint, a (k,) vector or a (..., k) batch."""
    if hasattr(at, "as_array"):
        at = at.as_array()
    pts = np.asarray(at, dtype=complex)
    if k is not None and pts.shape[-1] != k:
        raise ValueError(f"point dimension {pts.shape[-1]} != {k}")
    return pts


class ChartPoint:
    """A point (z, w) with fiber part z and base part w."""

    __slots__ = ("z", "w")

    def __init__(self, z, w=()):
        self.z = np.atleast_1d(np.asarray(z, dtype=complex))
        self.w = np.asarray(w, dtype=complex).reshape(-1)

    def as_array(self):
        return np.concatenate([self.z, self.w])

    def __repr__(self):
        return f"ChartPoint(z={self.z.tolist()}, w={self.w.tolist()})"


# --------------------------------------------------------------------------
# symbolic forms

def _key(k, key):
    if isinstance(key, (int, np.integer)):
        return int(key)
    I, J = key
    return mask_of(tuple(I), tuple(J), k)


class Form:
    """A form with sympy coefficients, immutable after construction.

    ``singular`` is a tuple of callables mapping a point batch to the
    distance from a locus where coefficients blow up; numeric stencils that
    reach such a locus are refused.
    """

    def __init__(self, k, components=None, degree=None, singular=(), name=None):
        self.k = k
        comps = {}
        for key, expr in (components or {}).items():
            e = sp.sympify(expr)
            if e != 0:
                m = _key(k, key)
                comps[m] = comps[m] + e if m in comps else e
        self.comps = {m: e for m, e in comps.items() if e != 0}
        degs = {popcount(m) for m in self.comps}
        if len(degs) > 1:
            raise ValueError("mixed total degree in Form")
        self.degree = degs.pop() if degs else (degree or 0)
        self.singular = tuple(singular)
        self.name = name

    # constructors
    @classmethod
    def scalar(cls, k, expr, singular=(), name=None):
        return cls(k, {0: expr}, 0, singular, name)

    @classmethod
    def zero(cls, k, degree=0):
        return cls(k, {}, degree)

    @classmethod
    def basis(cls, k, I, J, coeff=1):
        return cls(k, {(tuple(I), tuple(J)): coeff})

    # inspection
    def is_zero(self):
        return not self.comps

    @property
    def bidegree(self):
        bds = {(popcount(m & ((1 << self.k) - 1)), popcount(m >> self.k)) for m in self.comps}
        if len(bds) == 1:
            return bds.pop()
        if not bds:
            return None
        return None

    def coefficient(self, I, J):
        return self.comps.get(mask_of(tuple(I), tuple(J), self.k), sp.S.Zero)

    def is_holomorphic_free(self):
        """True when no coefficient depends on the conjugate variables."""
        _, xb = symbols(self.k)
        return all(not (e.free_symbols & set(xb)) for e in self.comps.values())

    # algebra
    def _merge_singular(self, other):
        return tuple(dict.fromkeys(self.singular + getattr(other, "singular", ())))

    def __add__(self, other):
        if not isinstance(other, Form):
            other = Form.scalar(self.k, other)
        if self.comps and other.comps and self.degree != other.degree:
            raise ValueError("cannot add forms of different degrees")
        comps = dict(self.comps)
        for m, e in other.comps.items():
            comps[m] = comps[m] + e if m in comps else e
        deg = self.degree if self.comps else other.degree
        return Form(self.k, comps, deg, self._merge_singular(other))

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other if isinstance(other, Form) else -sp.sympify(other))

    def __mul__(self, c):
        if isinstance(c, Form):
            return self.wedge(c)
        c = sp.sympify(c)
        return Form(self.k, {m: c * e for m, e in self.comps.items()}, self.degree, self.singular)

    __rmul__ = __mul__

    def wedge(self, other):
        if other.k != self.k:
            raise ValueError("forms live on different chart dimensions")
        comps = {}
        for ma, ea in self.comps.items():
            for mb, eb in other.comps.items():
                s = merge_sign(ma, mb)
                if s == 0:
                    continue
                m = ma | mb
                comps[m] = comps[m] + s * ea * eb if m in comps else s * ea * eb
        return Form(self.k, comps, self.degree + other.degree, self._merge_singular(other))

    __xor__ = wedge

    def power(self, m):
        out = Form.scalar(self.k, 1)
        for _ in range(m):
            out = out.wedge(self)
        return out

    def restrict(self, keep_mask):
        return Form(self.k, {m: e for m, e in self.comps.items() if m & ~keep_mask == 0},
                    self.degree, self.singular)

    def map_coefficients(self, fn):
        return Form(self.k, {m: fn(e) for m, e in self.comps.items()}, self.degree, self.singular)

    # differential operators
    def _apply(self, holo, anti):
        x, xb = symbols(self.k)
        comps = {}
        for m0, e in self.comps.items():
            for j in range(self.k):
                for use, var, slot in ((holo, x[j], j), (anti, xb[j], self.k + j)):
                    if not use:
                        continue
                    bit = 1 << slot
                    s = merge_sign(bit, m0)
                    if s == 0:
                        continue
                    de = sp.diff(e, var)
                    if de == 0:
                        continue
                    m = bit | m0
                    comps[m] = comps[m] + s * de if m in comps else s * de
        return Form(self.k, comps, self.degree + 1, self.singular)

    def partial(self):
        return self._apply(True, False)

    def dbar(self):
        return self._apply(False, True)

    def d(self):
        return self._apply(True, True)

    def dc(self):
        return (self.partial() - self.dbar()) * (1 / (2 * sp.pi * sp.I))

    def ddc(self):
        return self.dc().d()

    # evaluation
    @functools.cached_property
    def _compiled(self):
        x, xb = symbols(self.k)
        masks = list(self.comps)
        if not masks:
            return masks, None
        fn = sp.lambdify(list(x) + list(xb), [self.comps[m] for m in masks],
                         modules="numpy", cse=True)
        return masks, fn

    def evaluate(self, at):
        pts = as_points(at, self.k)
        shape = pts.shape[:-1]
        masks, fn = self._compiled
        if fn is None:
            return FormValue(self.k, {}, shape, self.degree)
        cols = [pts[..., m] for m in range(self.k)]
        cols += [np.conj(c) for c in cols]
        with np.errstate(all="ignore"):
            vals = fn(*cols)
        comps = {m: np.broadcast_to(np.asarray(v, dtype=complex), shape) for m, v in zip(masks, vals)}
        return FormValue(self.k, comps, shape, self.degree)

    __call__ = evaluate

    def singular_distance(self, at):
        pts = as_points(at, self.k)
        if not self.singular:
            return np.full(pts.shape[:-1], np.inf)
        return np.min([np.broadcast_to(f(pts), pts.shape[:-1]) for f in self.singular], axis=0)

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"Form{label}(k={self.k}, degree={self.degree}, terms={len(self.comps)})"


def kahler_form(k, coords):
    """ddc of sum |x_m|^2 over the given 0-based coordinate indices."""
    return Form(k, {(1 << m) | (1 << (k + m)): sp.I / sp.pi for m in coords}, 2)


def norm_squared(k, coords):
    x, xb = symbols(k)
    return sum((x[m] * xb[m] for m in coords), sp.S.Zero)


def fiber_origin_distance(n):
    """Distance to {z = 0} for the first n coordinates."""
    def dist(pts):
        return np.linalg.norm(pts[..., :n], axis=-1)
    dist.__name__ = f"fiber_origin_{n}"
    return dist


# --------------------------------------------------------------------------
# lazily evaluated numeric combinations

class ProductForm:
    """Wedge product of form-like factors, evaluated numerically."""

    def __init__(self, *factors):
        if not factors:
            raise ValueError("empty product")
        self.factors = factors
        self.k = factors[0].k
        self.degree = sum(f.degree for f in factors)
        self.singular = tuple(dict.fromkeys(s for f in factors for s in getattr(f, "singular", ())))

    def evaluate(self, at):
        out = None
        for f in self.factors:
            v = f.evaluate(at)
            out = v if out is None else out.wedge(v)
        return out

    __call__ = evaluate


class PowerForm:
    def __init__(self, base, m):
        self.base, self.m = base, m
        self.k = base.k
        self.degree = base.degree * m
        self.singular = getattr(base, "singular", ()) if m else ()

    def evaluate(self, at):
        if self.m == 0:
            pts = as_points(at, self.k)
            return FormValue.constant(self.k, 1.0, pts.shape[:-1])
        return self.base.evaluate(at).power(self.m)

    __call__ = evaluate


class SumForm:
    """Linear combination sum c_i f_i of form-like terms."""

    def __init__(self, terms):
        self.terms = [(c, f) for c, f in terms]
        self.k = self.terms[0][1].k
        self.degree = self.terms[0][1].degree
        self.singular = tuple(dict.fromkeys(s for _, f in self.terms for s in getattr(f, "singular", ())))

    def evaluate(self, at):
        out = None
        for c, f in self.terms:
            v = f.evaluate(at).scale(c)
            out = v if out is None else out + v
        return out

    __call__ = evaluate


class PulledBackForm:
    """tau^* f as a form-like object."""

    def __init__(self, tau, f):
        self.tau, self.f = tau, f
        self.k = f.k
        self.degree = f.degree
        self.singular = ()

    def evaluate(self, at):
        return pullback(self.tau, self.f, at)

    __call__ = evaluate


class DilatedForm:
    """(A_lam)^* f for the fiber dilation A_lam(z, w) = (lam z, w)."""

    def __init__(self, f, lam, n):
        self.f, self.lam, self.n = f, complex(lam), n
        self.k = f.k
        self.degree = f.degree
        self.singular = ()

    def evaluate(self, at):
        pts = as_points(at, self.k).copy()
        pts[..., :self.n] *= self.lam
        return dilate_value(self.f.evaluate(pts), self.lam, self.n)

    __call__ = evaluate


def dilate_value(fv, lam, n):
    """Pull back a form value by the linear fiber dilation (slot scaling)."""
    lam = complex(lam)
    k = fv.k
    fm = (1 << n) - 1
    out = {}
    for m, v in fv.comps.items():
        a = popcount(m & fm)
        b = popcount((m >> k) & fm)
        out[m] = v * (lam ** a * lam.conjugate() ** b)
    return FormValue(k, out, fv.shape, fv.degree)


# --------------------------------------------------------------------------
# operations

def wedge(f, g):
    """Wedge of two forms or two form values."""
    return f.wedge(g)


def _default_step(pts, h):
    if h is not None:
        return np.broadcast_to(np.asarray(h, dtype=float), pts.shape[:-1])
    return DEFAULT_STEP * (1.0 + np.linalg.norm(pts, axis=-1))


def _numeric_d(fn, k, pts, h, parts=(True, True)):
    """Fourth-order central-difference exterior derivative of ``fn``.

    Returns (d' F, d'' F) as form values; either may be None when not
    requested.
    """
    hh = h[..., None]
    holo = anti = None
    for m in range(k):
        grads = []
        for direction in (1.0, 1j):
            e = np.zeros(k, dtype=complex)
            e[m] = direction
            vals = [fn(pts + c * hh * e) for c in (-2, -1, 1, 2)]
            num = (vals[0] - vals[1].scale(8) + vals[2].scale(8) - vals[3])
            grads.append(num.scale(1.0 / (12.0 * h)))
        gx, gy = grads
        dz = (gx - gy.scale(1j)).scale(0.5)
        dzb = (gx + gy.scale(1j)).scale(0.5)
        shape = pts.shape[:-1]
        if parts[0]:
            term = FormValue(k, {1 << m: np.ones(shape, complex)}, shape, 1).wedge(dz)
            holo = term if holo is None else holo + term
        if parts[1]:
            term = FormValue(k, {1 << (k + m): np.ones(shape, complex)}, shape, 1).wedge(dzb)
            anti = term if anti is None else anti + term
    return holo, anti


def _check_stencil(f, pts, h, reach):
    dist = f.singular_distance(pts) if hasattr(f, "singular_distance") else np.inf
    if np.any(dist <= reach * h):
        bad = np.argmin(dist - reach * h) if np.ndim(dist) else 0
        raise LabError("singular-stencil", "finite-difference stencil touches the singular locus",
                       point=np.reshape(pts, (-1, pts.shape[-1]))[int(bad)].tolist())


def differentiate(f, op, at, mode="analytic", h=None):
    """Value of d f, dc f or ddc f at the given point(s).

    ``mode='analytic'`` uses exact symbolic partials; ``mode='numeric'``
    uses fourth-order central differences with step h (default
    1e-4 * (1 + |x|)).
    """
    if op not in ("d", "dc", "ddc"):
        raise ValueError(f"unknown operator {op!r}")
    pts = as_points(at, f.k)
    if mode == "analytic":
        g = {"d": f.d, "dc": f.dc, "ddc": f.ddc}[op]()
        return g.evaluate(pts)
    if mode != "numeric":
        raise ValueError(f"unknown mode {mode!r}")
    step = _default_step(pts, h)
    k = f.k

    def dc_fn(p, hstep):
        holo, anti = _numeric_d(f.evaluate, k, p, hstep)
        return (holo - anti).scale(1 / (2j * np.pi))

    if op == "d":
        _check_stencil(f, pts, step, 2.5)
        holo, anti = _numeric_d(f.evaluate, k, pts, step)
        return holo + anti
    if op == "dc":
        _check_stencil(f, pts, step, 2.5)
        return dc_fn(pts, step)
    _check_stencil(f, pts, step, 4.5)
    # inner stencil uses the step of the outer base point
    holo, anti = _numeric_d(lambda p: dc_fn(p, step), k, pts, step)
    return holo + anti


def pullback(tau, f, at):
    """(tau^* f)(x): f at tau(x) composed with the Jacobian on each slot."""
    pts = as_points(at, f.k)
    fv = f.evaluate(tau.apply(pts))
    if getattr(tau, "is_identity", False):
        return fv
    return fv.pullback(tau.real_jacobian(pts), holomorphic=tau.holomorphic)


def frame_array(frame, k):
    """Normalise a list of tangent vectors to the complexified slot basis.

    A length-k complex vector v is the real tangent vector with components
    dx_m(v) = v_m and dxbar_m(v) = conj(v_m); a length-2k vector is taken as
    given (complexified tangent vector).
    """
    vecs = []
    for v in frame:
        v = np.asarray(v, dtype=complex)
        if v.shape[-1] == k:
            v = np.concatenate([v, np.conj(v)], axis=-1)
        elif v.shape[-1] != 2 * k:
            raise ValueError(f"tangent vector of length {v.shape[-1]} in dimension {k}")
        vecs.append(v)
    if not vecs:
        return np.zeros((0, 2 * k), dtype=complex)
    return np.stack(vecs, axis=-2)


def evaluate_on_tangent_frame(f, at, frame):
    """Evaluate a form on a list of tangent vectors (multilinear, alternating)."""
    if len(frame) != f.degree:
        raise LabError("arity-mismatch", f"frame has {len(frame)} vectors, form has degree {f.degree}")
    fv = f.evaluate(at) if not isinstance(f, FormValue) else f
    return fv.on_frame(frame_array(frame, fv.k))

