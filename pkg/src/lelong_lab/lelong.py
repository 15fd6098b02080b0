"""Mass indicators along V and their small-radius limits.

nu_j(T, r)   = r^-2(k-p-j) int_Tube(r) T ^ omega^j ^ beta^(k-p-j)
nu_jq(T, r)  = r^-2q      int_Tube(r) T ^ omega^j ^ beta^(k-p-j)
kappa_j      = int T ^ omega^j ^ alpha^(k-p-j)      (corona or solid tube)
kappa_eps_j  = int T ^ omega^j ^ alpha_eps^(k-p-j)
hat_nu_j     = r^-2(k-p-j) int T ^ omega^j ^ (beta + c1 r^2 omega)^(k-p-j)
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .currents import pair, pushforward
from .errors import LabError
from .forms import PowerForm, ProductForm, SumForm, kahler_form
from .geometry import BaseDomain, build_setting
from .integrate import Estimate, QuadratureSpec


@dataclass(frozen=True)
class RadiusSchedule:
    r0: float = 0.4
    count: int = 6
    ratio: float = 2.0

    def __post_init__(self):
        if self.r0 <= 0 or self.ratio <= 1:
            raise ValueError("schedule needs r0 > 0 and ratio > 1")
        if self.count < 4:
            raise LabError("insufficient-samples", "a radius schedule needs at least 4 radii")

    @property
    def radii(self):
        return [self.r0 * self.ratio ** -i for i in range(self.count)]


@dataclass
class LelongEstimate:
    indicator: str
    j: int
    samples: list            # (r, value, error), decreasing r
    limit: float
    error: float
    monotone: bool
    method: str
    q: int | None = None
    seeds: list = field(default_factory=list)

    def to_dict(self):
        return {"indicator": self.indicator, "j": self.j, "q": self.q, "limit": self.limit,
                "error": self.error, "monotone": self.monotone, "method": self.method,
                "samples": [[float(r), float(v), float(e)] for r, v, e in self.samples]}


# --------------------------------------------------------------------------
# test forms

def _omega_beta(setting, j, q):
    f = setting.forms
    parts = []
    if j:
        parts.append(PowerForm(f.omega, j))
    if q:
        parts.append(PowerForm(f.beta, q))
    if not parts:
        return PowerForm(f.omega, 0)
    return ProductForm(*parts)


def _omega_alpha(setting, j, q, alpha):
    parts = []
    if j:
        parts.append(PowerForm(setting.forms.omega, j))
    if q:
        parts.append(PowerForm(alpha, q))
    return ProductForm(*parts) if parts else PowerForm(setting.forms.omega, 0)


def _current_for(T, tau):
    return T if tau is None else pushforward(tau, T)


def _real(est, idx=None):
    if idx is not None:
        est = est[idx]
    return est.real()


def _fiber_power(T, j):
    return T.k - T.p - j


def _valid_j(setting, T, j):
    """Bidegree bookkeeping: zero when omega^j or the beta power is void."""
    m = _fiber_power(T, j)
    return j >= 0 and m >= 0 and j <= setting.l and m <= setting.n


# --------------------------------------------------------------------------
# point Lelong numbers

@functools.lru_cache(maxsize=None)
def _point_setting(k, p):
    return build_setting(k, 0, p, base=BaseDomain.point())


def nu_point(T, r, quad=None):
    """sigma_T(B(0, r)) / (pi^m r^2m / m!) with m = k - p.

    sigma_T = T ^ ((pi/2) omega_E)^m / m!, so a linear m-plane through 0
    has value 1 at every radius.
    """
    k, p = T.k, T.p
    m = k - p
    setting = _point_setting(k, p)
    phi = kahler_form(k, range(k)).power(m)
    est = pair(T, setting.tube(r), phi, setting, quad).real()
    return est.scale(1.0 / (2.0 ** m * r ** (2 * m)))


# --------------------------------------------------------------------------
# tube indicators

def tube_masses(T, setting, r, js, tau=None, quad=None):
    """Raw masses int_Tube(r) T ^ omega^j ^ beta^(k-p-j) for several j on
    one set of samples.  Returns {j: Estimate}."""
    S = _current_for(T, tau)
    valid = [j for j in js if _valid_j(setting, T, j)]
    out = {j: Estimate(0.0, 0.0) for j in js if j not in valid}
    if valid:
        phis = [_omega_beta(setting, j, _fiber_power(T, j)) for j in valid]
        est = pair(S, setting.tube(r), phis, setting, quad)
        for i, j in enumerate(valid):
            out[j] = _real(est, i)
    return out


def nu_j(T, setting, r, j, tau=None, quad=None):
    m = tube_masses(T, setting, r, [j], tau, quad)[j]
    return m.scale(r ** (-2 * _fiber_power(T, j)))


def nu_jq(T, setting, r, j, q, tau=None, quad=None):
    if not 0 <= q <= setting.n:
        raise LabError("precondition", f"q={q} outside [0, {setting.n}]")
    m = tube_masses(T, setting, r, [j], tau, quad)[j]
    return m.scale(r ** (-2 * q))


def nu_all(T, setting, r, tau=None, quad=None, js=None):
    """All nu_j over [m_lower, m_upper] (or ``js``) on shared samples."""
    js = list(range(setting.m_lower, setting.m_upper + 1)) if js is None else list(js)
    masses = tube_masses(T, setting, r, js, tau, quad)
    return {j: masses[j].scale(r ** (-2 * _fiber_power(T, j))) for j in js}


def kappa_corona(T, setting, s, r, j, tau=None, quad=None):
    if not 0 < s <= r:
        raise LabError("precondition", "corona needs 0 < s <= r")
    if not _valid_j(setting, T, j):
        return Estimate(0.0, 0.0)
    phi = _omega_alpha(setting, j, _fiber_power(T, j), setting.forms.alpha)
    return pair(_current_for(T, tau), setting.tube(r, s), phi, setting, quad).real()


def kappa(T, setting, r, j, tau=None, quad=None):
    """Solid-tube alpha integral; integrable when k-p-j < k-l."""
    if not _valid_j(setting, T, j):
        return Estimate(0.0, 0.0)
    m = _fiber_power(T, j)
    phi = _omega_alpha(setting, j, m, setting.forms.alpha)
    return pair(_current_for(T, tau), setting.tube(r), phi, setting, quad, phi_weight=2.0 * m).real()


def _eps_panels(r, eps):
    return max(1, int(math.ceil(math.log(max(r / eps, 1.0), 4))) + 1)


def kappa_eps(T, setting, r, j, eps_list, tau=None, quad=None):
    """The alpha_eps integrals for a decreasing eps schedule, extrapolated
    to eps -> 0 (the schedule is treated like a radius schedule)."""
    quad = quad or QuadratureSpec()
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise LabError("precondition", "eps schedule must be strictly decreasing")
    m = _fiber_power(T, j)
    S = _current_for(T, tau)
    samples = []
    for eps in eps_list:
        if not _valid_j(setting, T, j):
            est = Estimate(0.0, 0.0)
        else:
            phi = _omega_alpha(setting, j, m, setting.forms.alpha_eps(eps))
            q = replace(quad, radial_panels=max(quad.radial_panels, _eps_panels(r, eps)))
            est = pair(S, setting.tube(r), phi, setting, q).real()
        samples.append((eps, float(est.value), float(est.error)))
    ratio = eps_list[0] / eps_list[1] if len(eps_list) > 1 else 2.0
    if len(samples) >= 4:
        lim = extrapolate(samples, ratio)
        return replace(lim, indicator="kappa_eps", j=j)
    return LelongEstimate("kappa_eps", j, samples, samples[-1][1], samples[-1][2], False, "last-value")


def hat_nu(T, setting, r, j, tau=None, quad=None):
    """(hat_nu_j, binomial combination, residual) on shared samples."""
    m = _fiber_power(T, j)
    if m < 0:
        z = Estimate(0.0, 0.0)
        return z, z, 0.0
    c1 = setting.c1
    f = setting.forms
    mixed = SumForm([(1.0, f.beta), (c1 * r * r, f.omega)])
    direct = ProductForm(PowerForm(f.omega, j), PowerForm(mixed, m)) if j else PowerForm(mixed, m)
    js = [j + q for q in range(m + 1)]
    valid = [jj for jj in js if _valid_j(setting, T, jj)]
    phis = [direct] + [_omega_beta(setting, jj, _fiber_power(T, jj)) for jj in valid]
    est = pair(_current_for(T, tau), setting.tube(r), phis, setting, quad)
    hat = _real(est, 0).scale(r ** (-2 * m))
    combo_val, combo_err = 0.0, 0.0
    for i, jj in enumerate(valid):
        q = jj - j
        nu = _real(est, i + 1).scale(r ** (-2 * _fiber_power(T, jj)))
        c = math.comb(m, q) * c1 ** q
        combo_val += c * nu.value
        combo_err += abs(c) * nu.error
    combo = Estimate(combo_val, combo_err)
    residual = abs(hat.value - combo_val) / max(1.0, abs(hat.value))
    return hat, combo, float(residual)


# --------------------------------------------------------------------------
# extrapolation

ROUNDOFF_FLOOR = 1e-13


def extrapolate(samples, ratio=2.0, indicator="sequence", j=0):
    """Limit of a geometric-schedule sequence [(r, value, error), ...]."""
    samples = sorted(((float(r), float(v), float(e)) for r, v, e in samples), key=lambda s: -s[0])
    if len(samples) < 4:
        raise LabError("insufficient-samples", "extrapolation needs at least 4 samples")
    v = np.array([s[1] for s in samples])
    e = np.array([s[2] for s in samples])
    d = np.diff(v)
    pair_err = e[:-1] + e[1:]
    quad_err = float(max(e[-1], e[-2]))
    floor = ROUNDOFF_FLOOR * float(np.max(np.abs(v)))
    monotone = bool(np.all(d >= -pair_err) or np.all(d <= pair_err))
    last3 = d[-3:]
    noise = pair_err[-3:]
    if np.all(np.abs(last3) <= 2 * noise + floor):
        limit, err, method = v[-1], quad_err + abs(d[-1]) + floor, "last-value"
    elif (np.all(last3 > 0) or np.all(last3 < 0)) and np.all(
            np.abs(last3[1:]) <= np.abs(last3[:-1]) / ratio ** 0.5):
        rho = last3[2] / last3[1]
        prev_rho = last3[1] / last3[0]
        rich = v[-1] + d[-1] * rho / (1 - rho)
        prev = v[-2] + d[-2] * prev_rho / (1 - prev_rho)
        gain = 1 + 2 / (1 - rho)
        limit, err, method = rich, abs(rich - prev) + gain * quad_err + floor, "richardson"
    else:
        limit, err, method = v[-1], abs(d[-1]) + quad_err + floor, "last-value"
    return LelongEstimate(indicator, j, samples, float(limit), float(err), monotone, method)


def _seeded(quad, idx):
    quad = quad or QuadratureSpec()
    return replace(quad, seed=quad.seed ^ idx)


def nu_sequence(T, setting, schedule, j, tau=None, quad=None, extrapolated=True):
    """nu_j over a radius schedule, with a derived seed per radius."""
    samples, seeds = [], []
    for idx, r in enumerate(schedule.radii):
        q = _seeded(quad, idx)
        est = nu_j(T, setting, r, j, tau, q)
        samples.append((r, float(est.value), float(est.error)))
        seeds.append(q.seed)
    out = extrapolate(samples, schedule.ratio, "nu", j)
    out.seeds = seeds
    return out


def nu_sequences(T, setting, schedule, tau=None, quad=None, js=None):
    """Every nu_j in [m_lower, m_upper] over the schedule on shared samples."""
    js = list(range(setting.m_lower, setting.m_upper + 1)) if js is None else list(js)
    rows = {j: [] for j in js}
    seeds = []
    for idx, r in enumerate(schedule.radii):
        q = _seeded(quad, idx)
        seeds.append(q.seed)
        vals = nu_all(T, setting, r, tau, q, js)
        for j in js:
            rows[j].append((r, float(vals[j].value), float(vals[j].error)))
    out = {}
    for j in js:
        est = extrapolate(rows[j], schedule.ratio, "nu", j)
        est.seeds = seeds
        out[j] = est
    return out


def top_index(setting, T):
    return min(setting.l, T.k - T.p)


def intrinsic_check(T, setting, tau1, tau2, j, schedule, quad=None):
    """Compare extrapolated nu_j limits under two admissible maps."""
    a = nu_sequence(T, setting, schedule, j, tau1, quad)
    b = a if tau2 is tau1 else nu_sequence(T, setting, schedule, j, tau2, quad)
    diff = abs(a.limit - b.limit)
    combined = a.error + b.error
    return {"j": j, "limit_1": a.limit, "limit_2": b.limit, "error_1": a.error, "error_2": b.error,
            "difference": diff, "combined_error": combined, "agree": bool(diff <= 2 * combined),
            "sequence_1": a, "sequence_2": b}
