"""Term-by-term evaluation of Lelong-Jensen identities on tubes.

For a smooth form S of bidimension (q, q) and 0 < r1 < r2,

  r2^-2q M(r2) - r1^-2q M(r1)
      = V + int_{r1<|z|<r2} S ^ alpha^q + J(r2) - J(r1),

where M(r) = int_Tube(r) S ^ beta^q, g(t) = int_Tube(t) ddc S ^ beta^(q-1),
J(r) = int_0^r (t^-2q - r^-2q) 2t g(t) dt and V collects the vertical
boundary contributions.  J(r2) - J(r1) is reported as the two double
integrals of the identity.  V vanishes when S already has full degree in
the base directions; otherwise the residual is the vertical discrepancy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .currents import SmoothForm, pair
from .errors import LabError
from .forms import Form, PowerForm, ProductForm
from .integrate import Estimate, QuadratureSpec, integrate_radial_profile, jensen_weight
from .lelong import extrapolate

PROFILE_QUAD = QuadratureSpec(radial=8, simplex=3, torus=6, base_radial=6, base_angular=8)
TERMS = ("lhs_mass_difference", "corona_alpha_integral", "ddc_double_integral_1", "ddc_double_integral_2",
         "vertical_term")


@dataclass
class JensenReport:
    inputs: dict
    terms: dict                      # name -> Estimate (vertical_term may be None)
    residual: Estimate
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def max_term(self):
        return max([abs(float(np.real(t.value))) for t in self.terms.values() if t is not None] + [0.0])

    def passes(self, rel=1e-3):
        return abs(float(np.real(self.residual.value))) <= rel * self.max_term + self.residual.error

    def to_dict(self):
        def enc(t):
            return None if t is None else {"value": float(np.real(t.value)), "error": float(t.error)}
        return {"inputs": self.inputs, "terms": {k: enc(v) for k, v in self.terms.items()},
                "residual": enc(self.residual), "flags": list(self.flags),
                "extra": {k: (enc(v) if isinstance(v, Estimate) else v) for k, v in self.extra.items()}}


def _as_form(S):
    return S.form if isinstance(S, SmoothForm) else S


def bidimension(S, k):
    if S.degree % 2:
        raise LabError("precondition", "S must have even degree")
    return k - S.degree // 2


def full_base_degree(S, setting):
    """True when every component of S contains all base differentials."""
    bm = setting.base_mask
    return all(m & bm == bm for m in S.comps)


class _Profile:
    """g(t) = int_Tube(t) ddc S ^ beta^(q-1), cached per radius."""

    def __init__(self, ddcS, setting, q, quad):
        self.setting, self.quad = setting, quad
        self.zero = ddcS.is_zero()
        self.current = None if self.zero else SmoothForm(ddcS)
        self.phi = PowerForm(setting.forms.beta, q - 1)
        self.cache = {}

    def __call__(self, ts):
        ts = np.asarray(ts, dtype=float)
        vals = np.zeros(ts.shape)
        errs = np.zeros(ts.shape)
        if self.zero:
            return vals, errs
        for i, t in enumerate(ts.ravel()):
            key = float(t)
            if key not in self.cache:
                est = pair(self.current, self.setting.tube(key), self.phi, self.setting, self.quad).real()
                self.cache[key] = (float(est.value), float(est.error))
            vals.flat[i], errs.flat[i] = self.cache[key]
        return vals, errs


def _mass(S, setting, r, q, quad):
    return pair(SmoothForm(S), setting.tube(r), PowerForm(setting.forms.beta, q), setting, quad).real()


def _jitter(radii, seed):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    return [r * rng.uniform(0.99, 1.01) for r in radii]


def _double_integrals(profile, r1, r2, q, levels, nodes):
    if profile.zero:
        z = Estimate(0.0, 0.0)
        return z, z
    J2 = integrate_radial_profile(profile, r2, jensen_weight(q, r2), levels, nodes)
    if r1 == r2:
        return J2 - J2, Estimate(0.0, 0.0)
    J1 = integrate_radial_profile(profile, r1, jensen_weight(q, r1), levels, nodes)
    K1 = integrate_radial_profile(profile, r1, [(2.0, 1.0)], levels, nodes)
    di2 = K1.scale(r1 ** (-2 * q) - r2 ** (-2 * q))
    di1 = J2 - J1 - di2
    return di1, di2


def lj_report(S, setting, r1, r2, quad=None, profile_quad=None, jitter=False, seed=0, levels=10, nodes=6):
    """Evaluate every summand of the tube Lelong-Jensen identity."""
    quad = quad or QuadratureSpec()
    profile_quad = profile_quad or PROFILE_QUAD
    S = _as_form(S)
    k = setting.k
    q = bidimension(S, k)
    if not 1 <= q <= setting.n:
        raise LabError("precondition", f"bidimension q={q} must lie in [1, {setting.n}]")
    if jitter:
        r1, r2 = _jitter([r1, r2], seed)
        r1 = min(r1, r2)
    if not 0 < r1 <= r2:
        raise LabError("precondition", "need 0 < r1 <= r2")
    full = full_base_degree(S, setting)
    m1 = _mass(S, setting, r1, q, quad)
    m2 = m1 if r1 == r2 else _mass(S, setting, r2, q, quad)
    lhs = m2.scale(r2 ** (-2 * q)) - m1.scale(r1 ** (-2 * q))
    if r1 == r2:
        corona = Estimate(0.0, 0.0)
    else:
        alpha_q = PowerForm(setting.forms.alpha, q)
        corona = pair(SmoothForm(S), setting.tube(r2, r1), alpha_q, setting, quad).real()
    profile = _Profile(S.ddc(), setting, q, profile_quad)
    di1, di2 = _double_integrals(profile, r1, r2, q, levels, nodes)
    vertical = Estimate(0.0, 0.0) if full else None
    rhs = corona + di1 + di2
    residual = lhs - rhs
    flags = ["vertical-term-skipped"] if full else ["vertical-term-not-integrated"]
    if profile.zero:
        flags.append("closed-input")
    terms = dict(zip(TERMS, (lhs, corona, di1, di2, vertical)))
    inputs = {"q": q, "r1": r1, "r2": r2, "seed": quad.seed}
    return JensenReport(inputs, terms, residual, flags, {"mass_r1": m1, "mass_r2": m2})


def lj_smooth_origin(S, setting, r, quad=None, profile_quad=None, schedule=None, levels=10, nodes=6):
    """The r1 -> 0 version: the small-radius normalised mass is extrapolated
    and the corona integral becomes the solid alpha integral."""
    quad = quad or QuadratureSpec()
    profile_quad = profile_quad or PROFILE_QUAD
    S = _as_form(S)
    k, n = setting.k, setting.n
    q = bidimension(S, k)
    if not 1 <= q <= n:
        raise LabError("precondition", f"bidimension q={q} must lie in [1, {n}]")
    full = full_base_degree(S, setting)
    if S.is_zero():
        z = Estimate(0.0, 0.0)
        terms = dict(zip(TERMS, (z, z, z, z, z)))
        return JensenReport({"q": q, "r": r}, terms, z, ["zero-input"], {"small_radius_limit": z})
    radii = schedule or [r * 2.0 ** -i for i in range(1, 7)]
    samples = []
    for s in radii:
        m = _mass(S, setting, s, q, quad)
        samples.append((s, float(m.value) * s ** (-2 * q), float(m.error) * s ** (-2 * q)))
    lim = extrapolate(samples, radii[0] / radii[1], "small_radius_mass", q)
    limit = Estimate(lim.limit, lim.error)
    mr = _mass(S, setting, r, q, quad)
    lhs = mr.scale(r ** (-2 * q)) - limit
    alpha_q = PowerForm(setting.forms.alpha, q)
    if q < n:
        solid = pair(SmoothForm(S), setting.tube(r), alpha_q, setting, quad, phi_weight=2.0 * q).real()
    else:
        # alpha^n vanishes off V: the whole contribution sits in the limit term
        solid = Estimate(0.0, 0.0)
    profile = _Profile(S.ddc(), setting, q, profile_quad)
    if profile.zero:
        di1 = Estimate(0.0, 0.0)
    else:
        di1 = integrate_radial_profile(profile, r, jensen_weight(q, r), levels, nodes)
    di2 = Estimate(0.0, 0.0)
    vertical = Estimate(0.0, 0.0) if full else None
    residual = lhs - (solid + di1)
    flags = ["vertical-term-skipped"] if full else ["vertical-term-not-integrated"]
    terms = dict(zip(TERMS, (lhs, solid, di1, di2, vertical)))
    return JensenReport({"q": q, "r": r, "seed": quad.seed}, terms, residual, flags,
                        {"small_radius_limit": limit, "small_radius_sequence": lim.to_dict()})


def eps_jensen(S, setting, r, eps, quad=None, profile_quad=None, levels=10, nodes=6):
    """The phi + eps^2 version:
    (r^2+eps^2)^-q M(r) = V_eps + int_Tube(r) S ^ alpha_eps^q
                          + int_0^r ((t^2+eps^2)^-q - (r^2+eps^2)^-q) 2t g(t) dt."""
    quad = quad or QuadratureSpec()
    profile_quad = profile_quad or PROFILE_QUAD
    if not 0 < eps < r:
        raise LabError("precondition", "eps_jensen needs 0 < eps < r")
    S = _as_form(S)
    q = bidimension(S, setting.k)
    full = full_base_degree(S, setting)
    m = _mass(S, setting, r, q, quad)
    lhs = m.scale((r * r + eps * eps) ** (-q))
    panels = max(1, int(math.ceil(math.log(r / eps, 4))) + 1)
    aq = PowerForm(setting.forms.alpha_eps(eps), q)
    alpha_term = pair(SmoothForm(S), setting.tube(r), aq, setting,
                      replace(quad, radial_panels=max(quad.radial_panels, panels))).real()
    profile = _Profile(S.ddc(), setting, q, profile_quad)
    if profile.zero:
        di = Estimate(0.0, 0.0)
    else:
        c_top = (r * r + eps * eps) ** (-q)

        def weight(t):
            return 2 * t * ((t * t + eps * eps) ** (-q) - c_top)
        di = integrate_radial_profile(profile, r, weight, levels, nodes,
                                      tail_terms=[(2 * (eps ** (-2 * q) - c_top), 1.0)])
    vertical = Estimate(0.0, 0.0) if full else None
    residual = lhs - (alpha_term + di)
    flags = ["vertical-term-skipped"] if full else ["vertical-term-not-integrated"]
    terms = dict(zip(TERMS, (lhs, alpha_term, di, Estimate(0.0, 0.0), vertical)))
    return JensenReport({"q": q, "r": r, "eps": eps, "seed": quad.seed}, terms, residual, flags)


def vertical_discrepancy(S, setting, r, quad=None, profile_quad=None, levels=10, nodes=6):
    """D(r) = r^-2q M(r) - int_Tube(r) S ^ alpha^q - J(r) for q < k - l, where
    the small-radius mass limit vanishes; D(r) is then the vertical term."""
    S = _as_form(S)
    q = bidimension(S, setting.k)
    if q >= setting.n:
        raise LabError("precondition", "vertical_bound_fit needs q < k - l")
    quad = quad or QuadratureSpec()
    profile_quad = profile_quad or PROFILE_QUAD
    mr = _mass(S, setting, r, q, quad)
    solid = pair(SmoothForm(S), setting.tube(r), PowerForm(setting.forms.alpha, q), setting, quad,
                 phi_weight=2.0 * q).real()
    profile = _Profile(S.ddc(), setting, q, profile_quad)
    J = Estimate(0.0, 0.0) if profile.zero else integrate_radial_profile(profile, r, jensen_weight(q, r),
                                                                         levels, nodes)
    return mr.scale(r ** (-2 * q)) - solid - J


def vertical_bound_fit(S, setting, radii=None, quad=None, profile_quad=None):
    """Slope of log |D(r)| against log r; degenerate (all D within error) is a pass."""
    radii = radii or list(np.geomspace(0.05, 0.5, 5))
    ds = [vertical_discrepancy(S, setting, r, quad, profile_quad) for r in radii]
    vals = np.array([abs(float(d.value)) for d in ds])
    errs = np.array([float(d.error) for d in ds])
    if np.all(vals <= 3 * errs + 1e-12):
        return {"slope": math.inf, "degenerate": True, "passes": True, "radii": list(map(float, radii)),
                "values": vals.tolist(), "errors": errs.tolist()}
    slope = float(np.polyfit(np.log(radii), np.log(np.maximum(vals, 1e-300)), 1)[0])
    return {"slope": slope, "degenerate": False, "passes": slope >= 0.9, "radii": list(map(float, radii)),
            "values": [float(d.value) for d in ds], "errors": errs.tolist()}
