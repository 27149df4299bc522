"""Two-phase mean-field dynamics on a dense wealth window.

Phase I runs ``dp/dt = Q1[p]`` while the bank still holds cash, i.e. until
the mean debt ``D[p]`` reaches ``mu * nu`` at time ``t_star``. Phase II runs
``dp/dt = Q2[p]``, where the bank's fast cash process enters through its
vacancy probability ``q0``. Both use fixed-step RK4.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (DegenerateDistributionError, InstabilityError, InvalidSpecError,
                     NotInClassGWarning, Phase1TimeoutError, TruncationWarning)
from .model import (EPS_POS, MASS_TOL, TAIL_TOL, ModelParams, RateFunction, WealthDistribution,
                    debt_level, in_s_mu_plus)

DEFAULT_DT = 0.01
DEFAULT_WINDOW = (-150, 200)
DEBT_DROP_TOL = 1e-10
MASS_DEFECT_LIMIT = 1e-6
ENTRY_DEBT_TOL = 1e-6


@dataclass(frozen=True)
class DerivedRates:
    r: float
    d: float
    r_tilde: float
    d_tilde: float
    p0: float
    q0: float
    gamma: float


@dataclass
class Diagnostics:
    times: list = field(default_factory=list)
    mass_defect: list = field(default_factory=list)
    mean_defect: list = field(default_factory=list)
    debt: list = field(default_factory=list)
    min_entry: list = field(default_factory=list)

    def record(self, t, p: np.ndarray, ns: np.ndarray, mu: float, neg: int):
        mass = p.sum()
        self.times.append(t)
        self.mass_defect.append(abs(mass - 1.0))
        self.mean_defect.append(abs(np.dot(ns, p) - mu))
        self.debt.append(-np.dot(ns[:neg], p[:neg]))
        self.min_entry.append(p.min())

    def extend(self, other: Diagnostics):
        for name in ("times", "mass_defect", "mean_defect", "debt", "min_entry"):
            getattr(self, name).extend(getattr(other, name))


@dataclass
class TwoPhaseTrajectory:
    times: list
    snapshots: list
    phase_labels: list
    t_star: float
    diagnostics: Diagnostics
    params: ModelParams | None = None

    def snapshot_at(self, t: float, tol: float = 1e-9) -> WealthDistribution:
        for s, p in zip(self.times, self.snapshots):
            if abs(s - t) <= tol:
                return p
        raise KeyError(t)


class _Operator:
    """Precomputed rate vector and index masks for one window."""

    def __init__(self, window: tuple[int, int], f: RateFunction):
        lo, hi = window
        self.lo = lo
        self.ns = np.arange(lo, hi + 1)
        self.f = f.values(self.ns)
        self.zero = -lo
        self.neg = self.ns < 0
        self.pos = self.ns > 0
        if abs(self.f[self.zero] - 1.0) > 1e-15:
            self.f0_ok = False
        else:
            self.f0_ok = True

    def q1(self, p: np.ndarray) -> np.ndarray:
        fp = self.f * p
        lam = fp.sum()
        out = -fp - lam * p
        out[:-1] += fp[1:]
        out[1:] += lam * p[:-1]
        return out

    def rates(self, p: np.ndarray) -> DerivedRates:
        z = self.zero
        fp = self.f * p
        r = p[z + 1:].sum()
        d = p[:z].sum()
        r_t = fp[z + 1:].sum()
        d_t = fp[:z].sum()
        p0 = p[z]
        if d == 0:
            q0 = 1.0
        else:
            denom = (r + p0) * (d_t + p0)
            if denom == 0:
                raise DegenerateDistributionError("bank vacancy undefined: no agent can lend or borrow")
            q0 = 1.0 - r_t * d / denom
        gamma = r_t + (d_t + p0) * (1.0 - q0)
        return DerivedRates(r, d, r_t, d_t, p0, q0, gamma)

    def q2(self, p: np.ndarray) -> np.ndarray:
        if not self.f0_ok:
            raise InvalidSpecError("Phase II operator assumes f(0) = 1")
        z = self.zero
        rt = self.rates(p)
        busy = 1.0 - rt.q0
        fp = self.f * p
        # giving flux: full rate for n >= 1, scaled by (1 - q0) for n <= 0
        give = fp.copy()
        give[:z + 1] *= busy
        out = -give
        out[:-1] += give[1:]
        # receiving at rate gamma for everybody
        out -= rt.gamma * p
        out[1:] += rt.gamma * p[:-1]
        return out


def _check_truncation(p: WealthDistribution, tail_tol: float) -> bool:
    ok = p.boundary_mass() < tail_tol
    if not ok:
        warnings.warn(f"boundary mass {p.boundary_mass():.3e} above {tail_tol:g}", TruncationWarning,
                      stacklevel=3)
    return ok


def q1_apply(p: WealthDistribution, f: RateFunction, tail_tol: float = TAIL_TOL) -> np.ndarray:
    """Phase-I right-hand side on the window of ``p``; neighbours outside count as zero."""
    _check_truncation(p, tail_tol)
    return _Operator(p.window, f).q1(np.asarray(p.probs))


def derived_rates(p: WealthDistribution, f: RateFunction) -> DerivedRates:
    return _Operator(p.window, f).rates(np.asarray(p.probs))


def bank_vacancy(p: WealthDistribution, f: RateFunction) -> float:
    """Probability that the bank's fast cash process sits at zero.

    Equals 1 when there is no indebted mass (nothing can refill the bank).
    """
    mass = p.probs.sum()
    if abs(mass - 1.0) > MASS_TOL:
        raise ValueError(f"bank vacancy needs a normalized distribution, mass = {mass}")
    return derived_rates(p, f).q0


def q2_apply(p: WealthDistribution, f: RateFunction, tail_tol: float = TAIL_TOL) -> np.ndarray:
    """Phase-II right-hand side."""
    _check_truncation(p, tail_tol)
    return _Operator(p.window, f).q2(np.asarray(p.probs))


def _rk4(rhs, p: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(p)
    k2 = rhs(p + 0.5 * h * k1)
    k3 = rhs(p + 0.5 * h * k2)
    k4 = rhs(p + h * k3)
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _debt(p: np.ndarray, ns: np.ndarray, neg: int) -> float:
    return float(-np.dot(ns[:neg], p[:neg]))


def _check_state(p: np.ndarray, t: float, dt: float):
    if p.min() < -EPS_POS * 100:
        raise InstabilityError(f"negative mass {p.min():.3e} at t={t:.4f}; try a smaller dt than {dt}")
    defect = abs(p.sum() - 1.0)
    if defect > MASS_DEFECT_LIMIT:
        raise InstabilityError(f"mass defect {defect:.3e} at t={t:.4f} exceeds {MASS_DEFECT_LIMIT}")


def _next_stop(t: float, stops: list, t_end: float) -> float:
    for s in stops:
        if s > t + 1e-12:
            return min(s, t_end)
    return t_end


def integrate_phase1(p0: WealthDistribution, params: ModelParams, dt: float = DEFAULT_DT,
                     t_max: float = 1e4, snapshot_times: Sequence[float] = ()):
    """Integrate Phase I until mean debt reaches ``mu * nu``.

    Returns ``(times, snapshots, diagnostics, t_star)`` where the last snapshot
    is the state at ``t_star``. The crossing is located by repeated linear
    interpolation of the debt over the bracketing step, re-integrating the
    partial step from the step start each time.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    mu, limit = params.mu, params.debt_limit
    if not in_s_mu_plus(p0, mu):
        raise ValueError("Phase I must start from a debt-free distribution with mass 1 and mean mu")
    op = _Operator(p0.window, params.rate)
    ns, neg = op.ns, op.zero
    rhs = op.q1
    p = np.array(p0.probs)
    t = 0.0
    stops = sorted(s for s in snapshot_times if s > 0)
    times, snaps = [0.0], [WealthDistribution(p0.window_min, p.copy(), mu, params.nu)]
    diag = Diagnostics()
    diag.record(t, p, ns, mu, neg)
    debt = _debt(p, ns, neg)
    while True:
        if t >= t_max:
            raise Phase1TimeoutError(f"mean debt {debt:.6g} below {limit} at t_max={t_max}", debt)
        h = min(dt, _next_stop(t, stops, t_max) - t)
        p_new = _rk4(rhs, p, h)
        debt_new = _debt(p_new, ns, neg)
        if debt_new < debt - DEBT_DROP_TOL:
            warnings.warn(f"mean debt decreased at t={t:.4f}; rate may not be in class G",
                          NotInClassGWarning, stacklevel=2)
        if debt_new >= limit:
            t_star, p = _locate_crossing(rhs, p, t, h, debt, debt_new, limit, ns, neg)
            _check_state(p, t_star, dt)
            diag.record(t_star, p, ns, mu, neg)
            times.append(t_star)
            snaps.append(WealthDistribution(p0.window_min, p.copy(), mu, params.nu))
            return times, snaps, diag, t_star
        t += h
        if stops and abs(t - stops[0]) < 1e-9:
            t = stops[0]
        p, debt = p_new, debt_new
        _check_state(p, t, dt)
        diag.record(t, p, ns, mu, neg)
        if stops and t == stops[0]:
            stops.pop(0)
            times.append(t)
            snaps.append(WealthDistribution(p0.window_min, p.copy(), mu, params.nu))


def _locate_crossing(rhs, p, t, h, d0, d1, limit, ns, neg, iters=8, tol=1e-13):
    """Find the partial step ``s`` in ``(0, h]`` where debt equals ``limit``."""
    lo_s, lo_d = 0.0, d0
    hi_s, hi_d = h, d1
    s, q = h, None
    for _ in range(iters):
        s = lo_s + (limit - lo_d) * (hi_s - lo_s) / (hi_d - lo_d)
        q = _rk4(rhs, p, s)
        d = _debt(q, ns, neg)
        if abs(d - limit) <= tol:
            break
        if d < limit:
            lo_s, lo_d = s, d
        else:
            hi_s, hi_d = s, d
    return t + s, q


def integrate_phase2(p: WealthDistribution, params: ModelParams, dt: float = DEFAULT_DT,
                     t_end: float = 200.0, snapshot_times: Sequence[float] = (), t_start: float = 0.0):
    """Integrate Phase II from ``t_start`` to ``t_end``.

    Returns ``(times, snapshots, diagnostics)`` with a snapshot at every
    requested time in ``(t_start, t_end]`` plus ``t_end`` itself.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    mu, nu = params.mu, params.nu
    if abs(debt_level(p) - params.debt_limit) > ENTRY_DEBT_TOL:
        raise ValueError(f"Phase II entry needs mean debt {params.debt_limit}, got {debt_level(p)}")
    op = _Operator(p.window, params.rate)
    ns, neg = op.ns, op.zero
    stops = sorted(s for s in snapshot_times if t_start < s < t_end) + [t_end]
    x = np.array(p.probs)
    t = t_start
    times, snaps = [], []
    diag = Diagnostics()
    while t < t_end - 1e-12:
        h = min(dt, stops[0] - t)
        x = _rk4(op.q2, x, h)
        t += h
        if abs(t - stops[0]) < 1e-9:
            t = stops[0]
        _check_state(x, t, dt)
        diag.record(t, x, ns, mu, neg)
        if abs(t - stops[0]) < 1e-12:
            stops.pop(0)
            times.append(t)
            snaps.append(WealthDistribution(p.window_min, x.copy(), mu, nu))
    return times, snaps, diag


def initial_delta(params: ModelParams, window: tuple[int, int] = DEFAULT_WINDOW) -> WealthDistribution:
    p = WealthDistribution.delta(params.mu, window)
    return WealthDistribution(p.window_min, p.probs, params.mu, params.nu)


def run_two_phase(params: ModelParams, p_init: WealthDistribution | None = None, dt: float = DEFAULT_DT,
                  t_end: float = 200.0, snapshot_times: Sequence[float] = (),
                  window: tuple[int, int] = DEFAULT_WINDOW, t_max_phase1: float | None = None) -> TwoPhaseTrajectory:
    """Phase I from ``p_init`` (default: everyone holds ``mu``), then Phase II until ``t_end``.

    Snapshots are taken at ``0``, every requested time, ``t_star`` and ``t_end``.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    p_init = p_init if p_init is not None else initial_delta(params, window)
    t_max = t_max_phase1 if t_max_phase1 is not None else max(1e4, t_end)
    times1, snaps1, diag, t_star = integrate_phase1(p_init, params, dt, t_max,
                                                    [s for s in snapshot_times if s < t_end])
    times, snaps = list(times1), list(snaps1)
    labels = ["I"] * len(times)
    if t_star < t_end:
        times2, snaps2, diag2 = integrate_phase2(snaps1[-1], params, dt, t_end, snapshot_times, t_star)
        diag.extend(diag2)
        times += times2
        snaps += snaps2
        labels += ["II"] * len(times2)
    return TwoPhaseTrajectory(times, snaps, labels, t_star, diag, params)
