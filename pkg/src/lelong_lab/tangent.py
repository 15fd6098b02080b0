"""Tangent data: pairings of (A_lam)_* tau_* T with a fixed probe dictionary."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .currents import dilate, pair, pushforward
from .errors import LabError
from .forms import Form, as_points, kahler_form, symbols
from .geometry import BaseDomain, Tube
from .integrate import Estimate


@dataclass
class Probe:
    """bump * monomial * basis form, supported in Tube(ball(R_base), R)."""

    form: object
    label: str
    radius: float
    base_radius: float


class ScaledForm:
    """A numeric scalar function times a form, evaluated lazily."""

    def __init__(self, fn, form):
        self.fn, self.form = fn, form
        self.k, self.degree = form.k, form.degree
        self.singular = ()

    def evaluate(self, at):
        pts = as_points(at, self.k)
        return self.form.evaluate(pts).scale(self.fn(pts))

    __call__ = evaluate


def bump_values(setting, R, R_base):
    """Numeric version of ``bump`` for a batch of points."""
    n = setting.n

    def fn(pts):
        phi = setting.forms.phi_value(pts)
        b = np.clip(1 - phi / R ** 2, 0, None) ** 4
        if setting.l:
            w2 = np.sum(np.abs(pts[..., n:]) ** 2, axis=-1)
            b = b * np.clip(1 - w2 / R_base ** 2, 0, None) ** 4
        return b
    return fn


def bump(setting, R, R_base):
    """(1 - phi/R^2)^4 (1 - |w|^2/R_base^2)^4: C^3 across the tube boundary."""
    k, n = setting.k, setting.n
    x, xb = symbols(k)
    b = (1 - setting.forms.phi_expr / R ** 2) ** 4
    if setting.l:
        w2 = sum((x[m] * xb[m] for m in range(n, k)), sp.S.Zero)
        b *= (1 - w2 / R_base ** 2) ** 4
    return sp.expand(b)


def default_probes(setting, p, R=0.5, R_base=0.9, count=12):
    """A dictionary of ``count`` probes of degree 2(k - p)."""
    k, n, l = setting.k, setting.n, setting.l
    m = k - p
    f = setting.forms
    b = bump_values(setting, R, R_base)
    monomials = [(lambda p: 1.0, "1"), (lambda p: np.abs(p[..., 0]) ** 2, "|z1|^2"),
                 (lambda p: 1 + p[..., 0] * np.conj(p[..., min(1, n - 1)]), "1+z1 zb2")]
    last = n if l else k - 1
    monomials.append((lambda p: np.abs(p[..., last]) ** 2, f"|x{last + 1}|^2"))
    bases = []
    for j in range(max(0, m - n), min(l, m) + 1):
        bases.append((f.omega.power(j).wedge(f.beta.power(m - j)), f"omega^{j} beta^{m - j}"))
    # elementary diagonal forms
    for start in range(k):
        idx = [(start + t) % k for t in range(m)]
        form = Form.scalar(k, 1)
        for j in sorted(idx):
            form = form.wedge(kahler_form(k, [j]))
        bases.append((form, "diag" + "".join(str(j + 1) for j in sorted(idx))))
    probes = []
    for mono, mlabel in monomials:
        for basis, blabel in bases:
            if len(probes) == count:
                break
            probes.append(Probe(ScaledForm(lambda p, mono=mono: b(p) * mono(p), basis),
                                f"bump*{mlabel}*{blabel}", R, R_base))
    return probes[:count]


def mass_probe(setting, p, R=0.5, R_base=0.9):
    """bump * omega^j * beta^(k-p-j) with j the top index."""
    k = setting.k
    m = k - p
    j = min(setting.l, m)
    f = setting.forms
    return Probe(ScaledForm(bump_values(setting, R, R_base), f.omega.power(j).wedge(f.beta.power(m - j))),
                 "mass", R, R_base)


def _region(setting, probe):
    return Tube(BaseDomain.ball(setting.l, probe.base_radius) if setting.l else BaseDomain.point(), probe.radius)


@dataclass
class TangentTable:
    lambdas: list
    labels: list
    values: np.ndarray            # (rows, probes) complex
    errors: np.ndarray            # (rows, probes)
    verdicts: list = field(default_factory=list)

    def to_dict(self):
        return {"lambdas": [float(abs(v)) for v in self.lambdas], "labels": self.labels,
                "values": [[[float(v.real), float(v.imag)] for v in row] for row in self.values],
                "errors": self.errors.tolist(), "verdicts": self.verdicts}


def _pair_probes(T, setting, probes, quad):
    """Pair with every probe; probes sharing a region share samples."""
    groups = {}
    for i, pr in enumerate(probes):
        groups.setdefault((pr.radius, pr.base_radius), []).append(i)
    vals = np.zeros(len(probes), dtype=complex)
    errs = np.zeros(len(probes))
    for key, idx in groups.items():
        region = _region(setting, probes[idx[0]])
        est = pair(T, region, [probes[i].form for i in idx], setting, quad)
        vals[idx] = est.value
        errs[idx] = est.error
    return vals, errs


def converged(values, errors, last=3, floor=1e-12):
    """Cauchy test over the last rows within error bars."""
    v = values[-last:]
    e = errors[-last:]
    spread = np.max(np.abs(v - v[-1]), axis=0)
    bound = 3 * np.max(e, axis=0) + 3 * e[-1] + floor * (1 + np.abs(v[-1]))
    return (spread <= bound).tolist()


def sample_tangent(T, setting, tau=None, schedule=None, probes=None, quad=None):
    """Rows n: <(A_lam_n)_* tau_* T, Phi_i> for lam_n = 2^n."""
    schedule = schedule or [2.0 ** i for i in range(5)]
    probes = probes or default_probes(setting, T.p)
    S = T if tau is None else pushforward(tau, T)
    for pr in probes:
        if tau is not None and pr.radius > getattr(tau, "validity_radius", np.inf):
            raise LabError("precondition", "probe support leaves the validity tube of the map")
    rows, errs = [], []
    for lam in schedule:
        v, e = _pair_probes(dilate(lam, S, setting.n), setting, probes, quad)
        rows.append(v)
        errs.append(e)
    values, errors = np.array(rows), np.array(errs)
    table = TangentTable(list(schedule), [p.label for p in probes], values, errors)
    table.verdicts = converged(values, errors) if len(schedule) >= 3 else [False] * len(probes)
    return table


def conic_check(T_inf, setting, mus=(2.0, 0.5, 3.0), probes=None, quad=None, eps0=1e-9):
    """max over mu and probes of |<(A_mu)_* T, Phi> - <T, Phi>| / (|<T, Phi>| + eps0)."""
    probes = probes or default_probes(setting, T_inf.p)
    base, _ = _pair_probes(T_inf, setting, probes, quad)
    worst = 0.0
    for mu in mus:
        moved = dilate(mu, T_inf, setting.n)
        if moved is T_inf:
            continue
        v, _ = _pair_probes(moved, setting, probes, quad)
        worst = max(worst, float(np.max(np.abs(v - base) / (np.abs(base) + eps0))))
    return worst


def pluriharmonic_check(T_inf, setting, m_lower=None, psis=None, quad=None, R=0.5, R_base=0.9):
    """Pairings of T ^ omega^m_lower against ddc Psi for compactly supported Psi.

    Returns (max |pairing|, list of (value, error), pass flag); a pass needs
    every |pairing| <= 10 * error + roundoff.
    """
    k, n = setting.k, setting.n
    m_lower = setting.m_lower if m_lower is None else m_lower
    deg = k - T_inf.p - m_lower - 1      # Psi has bidegree (deg, deg)
    if deg < 0:
        raise LabError("precondition", "no room for a test form of the required degree")
    f = setting.forms
    if psis is None:
        b = bump(setting, R, R_base)
        psis = []
        for j in range(max(0, deg - n), min(setting.l - m_lower, deg) + 1):
            psis.append(f.omega.power(j).wedge(f.beta.power(deg - j)) * b)
    region = Tube(BaseDomain.ball(setting.l, R_base) if setting.l else BaseDomain.point(), R)
    omega_m = f.omega.power(m_lower)
    results = []
    for psi in psis:
        test = omega_m.wedge(psi.ddc())
        if test.is_zero():
            results.append(Estimate(0.0, 0.0))
            continue
        results.append(pair(T_inf, region, test, setting, quad))
    worst = max((abs(complex(r.value)) for r in results), default=0.0)
    ok = all(abs(complex(r.value)) <= 10 * r.error + 1e-12 for r in results)
    return worst, [(complex(r.value), float(r.error)) for r in results], ok
