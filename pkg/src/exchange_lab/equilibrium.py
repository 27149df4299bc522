"""Closed-form Phase-II equilibrium for ``f_star``.

The equilibrium is two-sided geometric: ``n p0 b+^n`` on the rich side,
``p0`` at zero and ``p0 b-^|n|`` on the indebted side. Mass, mean and debt
constraints reduce to a quartic in ``b+``; ``p0`` and ``b-`` follow by
back-substitution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import (AmbiguousEquilibriumError, InvalidSpecError, NoEquilibriumError,
                     NonNormalizableError)
from .model import RateFunction, WealthDistribution, debt_level, moments

DEFAULT_WINDOW = (-150, 200)
TAIL_MASS_TOL = 1e-12
RESIDUAL_TOL = 1e-10
_SCAN_POINTS = 1000
_DPS = 60


@dataclass(frozen=True)
class EquilibriumSolution:
    mu: int
    nu: int
    beta_plus: float
    beta_minus: float
    p0_star: float
    quartic: tuple
    residuals: tuple
    admissible_roots_found: int = 1

    @property
    def quartic_residual(self) -> float:
        return abs(quartic_eval(self.quartic, self.beta_plus))


def quartic_coefficients(mu: int, nu: int) -> tuple[float, float, float, float, float]:
    """Coefficients ``(c0, c1, c2, c3, c4)`` of the quartic satisfied by ``beta_plus``."""
    if mu < 1 or nu < 1:
        raise InvalidSpecError("mu and nu must be >= 1")
    a = 1.0 / (mu * (1 + nu))
    s = nu / (1 + nu)
    c0 = 1 - s - a
    c1 = a * a + 2 * s - 3
    c2 = 2 * a * a + 4
    c3 = a * a - 2 * s - 3
    c4 = a + s + 1
    return c0, c1, c2, c3, c4


def quartic_eval(coeffs, x: float) -> float:
    c0, c1, c2, c3, c4 = coeffs
    return (((c4 * x + c3) * x + c2) * x + c1) * x + c0


def _quartic_deriv(coeffs, x: float) -> float:
    _, c1, c2, c3, c4 = coeffs
    return ((4 * c4 * x + 3 * c3) * x + 2 * c2) * x + c1


def roots_in_unit_interval(coeffs, points: int = _SCAN_POINTS, dedup: float = 1e-10) -> list[float]:
    """Real roots in (0, 1): dense scan, bisection on sign changes, Newton polish."""
    xs = np.linspace(0.0, 1.0, points + 1)[1:-1]
    vals = [quartic_eval(coeffs, x) for x in xs]
    roots = []
    for k in range(len(xs) - 1):
        a, b = xs[k], xs[k + 1]
        fa, fb = vals[k], vals[k + 1]
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb > 0:
            # touching roots of even multiplicity: check the local minimum of |q|
            mid = 0.5 * (a + b)
            if abs(quartic_eval(coeffs, mid)) < 1e-14:
                roots.append(mid)
            continue
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = quartic_eval(coeffs, m)
            if fa * fm <= 0:
                b, fb = m, fm
            else:
                a, fa = m, fm
            if b - a < 1e-15:
                break
        roots.append(0.5 * (a + b))
    polished = []
    for x in roots:
        for _ in range(20):
            d = _quartic_deriv(coeffs, x)
            if d == 0:
                break
            step = quartic_eval(coeffs, x) / d
            x_new = x - step
            if not 0 < x_new < 1:
                break
            x = x_new
            if abs(step) < 1e-17:
                break
        if not any(abs(x - y) < dedup for y in polished):
            polished.append(x)
    return polished


def closed_form_residuals(beta_plus, beta_minus, p0, mu, nu) -> tuple:
    """Defects of the mass, mean and debt constraints via geometric-series sums.

    Works on floats or ``mpmath.mpf`` values alike.
    """
    bp, bm = beta_plus, beta_minus
    mass = p0 * (1 + bp / (1 - bp) ** 2 + bm / (1 - bm)) - 1
    debt = p0 * bm / (1 - bm) ** 2
    mean = p0 * (bp * bp + bp) / (1 - bp) ** 3 - debt - mu
    return abs(mass), abs(mean), abs(debt - mu * nu)


def back_substitute(beta_plus, mu: int, nu: int):
    """Return ``(p0_star, beta_minus)`` implied by a root ``beta_plus``."""
    bp = beta_plus
    p0 = (1 - bp) ** 3 * mu * (1 + nu) / (bp * bp + bp)
    # beta_minus^2 - (2 + p0/(mu nu)) beta_minus + 1 = 0; roots multiply to 1, take the smaller
    e = p0 / (2 * mu * nu)
    beta_minus = 1 / (1 + e + (2 * e + e * e) ** 0.5)
    return p0, beta_minus


def _polish(coeffs, x0: float):
    """Newton iterations on the quartic in extended precision."""
    with mpmath.workdps(_DPS):
        c = [mpmath.mpf(ci) for ci in coeffs]
        x = mpmath.mpf(x0)
        for _ in range(100):
            q = (((c[4] * x + c[3]) * x + c[2]) * x + c[1]) * x + c[0]
            dq = ((4 * c[4] * x + 3 * c[3]) * x + 2 * c[2]) * x + c[1]
            if dq == 0:
                break
            step = q / dq
            x -= step
            if abs(step) < mpmath.mpf(10) ** (-_DPS + 5):
                break
        return x


def solve_equilibrium(mu: int, nu: int) -> EquilibriumSolution:
    coeffs = quartic_coefficients(mu, nu)
    candidates = []
    with mpmath.workdps(_DPS):
        # same coefficients, recomputed in extended precision
        s = mpmath.mpf(nu) / (1 + nu)
        a = mpmath.mpf(1) / (mu * (1 + nu))
        exact = (1 - s - a, a * a + 2 * s - 3, 2 * a * a + 4, a * a - 2 * s - 3, a + s + 1)
        for root in roots_in_unit_interval(coeffs):
            bp = _polish(exact, root)
            if not 0 < bp < 1:
                continue
            p0, bm = back_substitute(bp, mu, nu)
            if not (0 < p0 < 1 and 0 < bm < 1):
                continue
            res = closed_form_residuals(bp, bm, p0, mu, nu)
            if max(res) <= RESIDUAL_TOL:
                candidates.append((float(bp), float(bm), float(p0), tuple(float(r) for r in res)))
    if not candidates:
        raise NoEquilibriumError(f"no admissible equilibrium for mu={mu}, nu={nu}")
    if len(candidates) > 1:
        roots = [c[0] for c in candidates]
        raise AmbiguousEquilibriumError(
            f"{len(candidates)} admissible roots for mu={mu}, nu={nu}: {roots}", roots)
    bp, bm, p0, res = candidates[0]
    return EquilibriumSolution(mu, nu, bp, bm, p0, coeffs, res, 1)


def _log_weights(ns: np.ndarray, sol: EquilibriumSolution, f: RateFunction) -> np.ndarray:
    """``log p_n - log p0`` from the ansatz; requires f(0) = 1."""
    logf = np.log(f.values(ns))
    out = np.zeros(ns.shape)
    zero = int(np.flatnonzero(ns == 0)[0])
    pos = ns > 0
    out[pos] = ns[pos] * math.log(sol.beta_plus) - np.cumsum(logf[zero + 1:])
    neg = ns < 0
    out[neg] = (-ns[neg] * math.log(sol.beta_minus)
                - np.cumsum(logf[:zero][::-1])[::-1])
    return out


def equilibrium_distribution(sol: EquilibriumSolution, f: RateFunction | None = None,
                             window: tuple[int, int] = DEFAULT_WINDOW) -> WealthDistribution:
    """Equilibrium mass function on ``window``.

    Raises :class:`NonNormalizableError` when the ansatz terms stop decaying
    towards either edge (e.g. exponential rates), and ``ValueError`` when the
    tail beyond the window carries more than ``1e-12`` of mass.
    """
    f = f or RateFunction.f_star()
    if f(0) != 1.0:
        raise InvalidSpecError("equilibrium ansatz assumes f(0) = 1")
    lo, hi = window
    if lo > -2 or hi < 2:
        raise ValueError("window too small")
    ns = np.arange(lo, hi + 1)
    logw = _log_weights(ns, sol, f)
    tail = 0.0
    for edge, inner in ((-1, -2), (0, 1)):
        ratio = math.exp(logw[edge] - logw[inner])
        if not ratio < 1:
            raise NonNormalizableError(
                "equilibrium terms do not decay at the window edge; the ansatz has no chance "
                "to be a probability mass function for this rate")
        tail += math.exp(logw[edge] + math.log(sol.p0_star)) * ratio / (1 - ratio)
    if tail >= TAIL_MASS_TOL:
        raise ValueError(f"tail mass beyond window {window} is about {tail:.2e}; widen the window")
    probs = sol.p0_star * np.exp(logw)
    return WealthDistribution(lo, probs, sol.mu, sol.nu)


def constraint_residuals(sol: EquilibriumSolution, f: RateFunction | None = None,
                         window: tuple[int, int] = DEFAULT_WINDOW) -> tuple[float, float, float]:
    """Mass, mean and debt defects of the constructed distribution, by window summation."""
    p = equilibrium_distribution(sol, f, window)
    mass, mean = moments(p)
    return abs(mass - 1), abs(mean - sol.mu), abs(debt_level(p) - sol.mu * sol.nu)
