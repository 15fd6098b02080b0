"""Independent reference values: radial reductions, sphere moments and
finite differences, computed without touching the package numerics."""
from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy.special import roots_legendre

GAUSS_NODES = 64


def gauss(f, a, b, n=GAUSS_NODES):
    x, w = roots_legendre(n)
    t = (a + b) / 2 + (b - a) / 2 * x
    return float((b - a) / 2 * np.sum(w * f(t)))


def sphere_area(n):
    """Area of the unit sphere S^(2n-1) in C^n."""
    return 2 * math.pi ** n / math.factorial(n - 1)


def sphere_moment(n, a):
    """int_{S^(2n-1)} |theta_1|^(2a) d sigma."""
    return 2 * math.pi ** n * math.factorial(a) * math.factorial(n - 1) / math.factorial(n - 1 + a)


def fiber_mass_alpha_beta(n, a, b, r, s=0.0):
    """int_{s<|z|<r} alpha^a ^ beta^b over C^n (a + b = n) with
    alpha = ddc log|z|^2, beta = ddc |z|^2, ddc = (i/pi) d dbar.

    The density against dV is a! b! e_a(lambda) (2/pi)^n with lambda the
    eigenvalues of alpha relative to beta: 0 radially and rho^-2 on the
    n - 1 tangential directions (the mixed discriminant of diagonal forms).
    """
    assert a + b == n
    if a >= n:
        return 0.0
    coef = math.factorial(a) * math.factorial(b) * math.comb(n - 1, a) * (2 / math.pi) ** n
    radial = gauss(lambda rho: rho ** (2 * n - 1 - 2 * a), s, r)
    return coef * sphere_area(n) * radial


def base_omega_mass(l, R=1.0):
    """int_{|w|<R} omega^l in C^l with omega = (i/pi) sum dw dwbar."""
    if l == 0:
        return 1.0
    dens = math.factorial(l) * (2 / math.pi) ** l
    return dens * sphere_area(l) * gauss(lambda rho: rho ** (2 * l - 1), 0.0, R)


def nu_alpha_top(k, l, q, j, r=0.3, R=1.0):
    """nu_j of alpha^q over Tube(ball_R, r) in the Euclidean model."""
    n = k - l
    b = k - q - j            # fiber power of beta
    if j != l:
        return 0.0
    return fiber_mass_alpha_beta(n, q, b, r) * base_omega_mass(l, R) / r ** (2 * b)


def tube_integral_radial(n, l, f_rho, r, R=1.0, angular=1.0):
    """int_Tube f(|z|) dV with an angular factor already integrated out."""
    base = math.pi ** l * R ** (2 * l) / math.factorial(l)
    return base * angular * gauss(lambda rho: f_rho(rho) * rho ** (2 * n - 1), 0.0, r)


def ddc_log_norm_mp(z, h=mpmath.mpf("1e-6")):
    """Mixed partials d^2/dz_a dzbar_b of log |z|^2 by mpmath central differences.

    Returns the (i/pi) coefficient matrix of ddc log|z|^2 at z.
    """
    mpmath.mp.dps = 40
    z = [mpmath.mpc(complex(v)) for v in z]
    n = len(z)

    def F(v):
        return mpmath.log(sum(abs(c) ** 2 for c in v))

    def dz_dzb(a, b):
        # d/dz = (d/dx - i d/dy)/2, d/dzbar = (d/dx + i d/dy)/2
        total = mpmath.mpc(0)
        for sa, da in ((1, 1), (-1j, 1j)):
            for sb, db in ((1, 1), (1j, 1j)):
                def shifted(ea, eb):
                    v = list(z)
                    v[a] += ea * h * da
                    v[b] += eb * h * db
                    return F(v)
                d2 = (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (4 * h * h)
                total += sa * sb * d2 / 4
        return complex(total)

    return np.array([[dz_dzb(a, b) for b in range(n)] for a in range(n)])
