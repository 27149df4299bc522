"""Shared domain types: rate functions, model parameters, wealth distributions.

Distributions are dense arrays over an explicit integer window. All operators
in the package only touch the neighbours ``n - 1, n, n + 1`` so dense storage
keeps the conservation sums exact up to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .errors import InvalidSpecError, UnsupportedRateError

EPS_POS = 1e-12
TAIL_TOL = 1e-10
MASS_TOL = 1e-10

RATE_KINDS = ("constant", "f_star", "f_abs", "exponential", "table")


@dataclass(frozen=True)
class RateFunction:
    """Giver-rate function ``f`` evaluated at integer wealth levels.

    Use the class constructors (:meth:`f_star`, :meth:`constant`, ...) rather
    than the raw initializer.
    """

    kind: str
    value: float = 1.0
    alpha: float = 0.0
    table: tuple = ()
    default: float = 1.0

    def __post_init__(self):
        if self.kind not in RATE_KINDS:
            raise InvalidSpecError(f"unknown rate kind {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise InvalidSpecError("constant rate must be positive")
        if self.kind == "exponential" and not self.alpha > 0:
            raise InvalidSpecError("exponential rate needs alpha > 0")
        if self.kind == "table":
            if not self.default > 0:
                raise InvalidSpecError("table default must be positive")
            for n, v in self.table:
                if not v > 0:
                    raise InvalidSpecError(f"table value at {n} must be positive, got {v}")

    @classmethod
    def f_star(cls) -> RateFunction:
        return cls("f_star")

    @classmethod
    def f_abs(cls) -> RateFunction:
        return cls("f_abs")

    @classmethod
    def constant(cls, value: float = 1.0) -> RateFunction:
        return cls("constant", value=value)

    @classmethod
    def exponential(cls, alpha: float) -> RateFunction:
        return cls("exponential", alpha=alpha)

    @classmethod
    def from_table(cls, values: Mapping[int, float], default: float = 1.0) -> RateFunction:
        return cls("table", table=tuple(sorted((int(k), v) for k, v in values.items())), default=default)

    @classmethod
    def parse(cls, name: str) -> RateFunction:
        """Parse the short CLI names ``fstar``, ``const``, ``fabs``, ``exp:ALPHA``."""
        name = name.strip().lower()
        if name in ("fstar", "f_star"):
            return cls.f_star()
        if name in ("const", "constant"):
            return cls.constant()
        if name in ("fabs", "f_abs"):
            return cls.f_abs()
        if name.startswith("exp"):
            _, _, alpha = name.partition(":")
            return cls.exponential(float(alpha or 1.0))
        raise InvalidSpecError(f"unknown rate name {name!r}")

    @property
    def short_name(self) -> str:
        return {"f_star": "fstar", "constant": "const", "f_abs": "fabs"}.get(self.kind, self.kind)

    def __call__(self, n: int) -> float:
        return float(self.exact(n)) if self.kind != "exponential" else math.exp(-self.alpha * n)

    def exact(self, n: int) -> Fraction:
        """Exact rational value at ``n``; unavailable for the exponential kind."""
        n = int(n)
        if self.kind == "f_star":
            return Fraction(1) if n <= 1 else Fraction(n - 1, n)
        if self.kind == "f_abs":
            a = abs(n)
            return Fraction(1) if a <= 1 else Fraction(a - 1, a)
        if self.kind == "constant":
            return Fraction(self.value)
        if self.kind == "table":
            return Fraction(dict(self.table).get(n, self.default))
        raise UnsupportedRateError("exponential rate has no exact rational values")

    def values(self, ns: Iterable[int] | np.ndarray) -> np.ndarray:
        """Vectorized float evaluation."""
        ns = np.asarray(ns, dtype=np.int64)
        if self.kind == "f_star":
            out = np.ones(ns.shape)
            big = ns > 1
            out[big] = (ns[big] - 1) / ns[big]
            return out
        if self.kind == "f_abs":
            a = np.abs(ns)
            out = np.ones(ns.shape)
            big = a > 1
            out[big] = (a[big] - 1) / a[big]
            return out
        if self.kind == "constant":
            return np.full(ns.shape, float(self.value))
        if self.kind == "exponential":
            return np.exp(-self.alpha * ns.astype(float))
        lookup = dict(self.table)
        return np.array([float(lookup.get(int(n), self.default)) for n in ns.ravel()]).reshape(ns.shape)

    def sup(self) -> float | None:
        """Supremum over all integers, or ``None`` when unbounded."""
        if self.kind in ("f_star", "f_abs"):
            return 1.0
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "table":
            return float(max([self.default] + [v for _, v in self.table]))
        return None


@dataclass(frozen=True)
class ModelParams:
    mu: int
    nu: int
    n_agents: int | None = None
    rate: RateFunction = field(default_factory=RateFunction.f_star)

    def __post_init__(self):
        if self.mu < 1 or self.nu < 1:
            raise InvalidSpecError("mu and nu must be positive integers")
        if self.n_agents is not None and self.n_agents < 2:
            raise InvalidSpecError("n_agents must be at least 2")

    @property
    def bank_initial(self) -> int:
        """Initial bank holdings ``N * mu * nu``."""
        if self.n_agents is None:
            raise InvalidSpecError("bank size needs n_agents")
        return self.n_agents * self.mu * self.nu

    @property
    def debt_limit(self) -> int:
        """Mean debt per agent at which the bank runs dry."""
        return self.mu * self.nu


@dataclass(frozen=True, eq=False)
class WealthDistribution:
    """Probability mass function ``p_n`` for ``n`` in ``[window_min, window_max]``."""

    window_min: int
    probs: np.ndarray
    mu: int | None = None
    nu: int | None = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-d sequence")
        window_max = self.window_min + probs.size - 1
        if self.window_min > 0 or window_max < 0:
            raise ValueError("window must contain 0")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def delta(cls, n: int, window: tuple[int, int] | None = None) -> WealthDistribution:
        lo, hi = window if window is not None else (min(0, n), max(0, n))
        probs = np.zeros(hi - lo + 1)
        probs[n - lo] = 1.0
        return cls(lo, probs)

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, float], window: tuple[int, int] | None = None) -> WealthDistribution:
        keys = [int(k) for k in mapping]
        lo, hi = window if window is not None else (min(keys + [0]), max(keys + [0]))
        probs = np.zeros(hi - lo + 1)
        for k, v in mapping.items():
            probs[int(k) - lo] += v
        return cls(lo, probs)

    @property
    def window_max(self) -> int:
        return self.window_min + self.probs.size - 1

    @property
    def window(self) -> tuple[int, int]:
        return self.window_min, self.window_max

    @property
    def ns(self) -> np.ndarray:
        return np.arange(self.window_min, self.window_max + 1)

    def __getitem__(self, n: int) -> float:
        i = n - self.window_min
        return float(self.probs[i]) if 0 <= i < self.probs.size else 0.0

    def __eq__(self, other):
        if not isinstance(other, WealthDistribution):
            return NotImplemented
        return self.window_min == other.window_min and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.window_min, self.probs.tobytes()))

    def reindex(self, window: tuple[int, int]) -> WealthDistribution:
        """Copy onto another window, padding with zeros and dropping outside entries."""
        lo, hi = window
        out = np.zeros(hi - lo + 1)
        a, b = max(lo, self.window_min), min(hi, self.window_max)
        if a <= b:
            out[a - lo:b - lo + 1] = self.probs[a - self.window_min:b - self.window_min + 1]
        return WealthDistribution(lo, out, self.mu, self.nu)

    def boundary_mass(self) -> float:
        return max(abs(self.probs[0]), abs(self.probs[-1]))

    def min_entry(self) -> float:
        return float(self.probs.min())

    def as_dict(self, drop_zeros: bool = True) -> dict[int, float]:
        return {int(n): float(v) for n, v in zip(self.ns, self.probs) if v != 0 or not drop_zeros}


def moments(p: WealthDistribution) -> tuple[float, float]:
    """Return ``(mass, mean)``."""
    return float(p.probs.sum()), float(np.dot(p.ns, p.probs))


def debt_level(p: WealthDistribution) -> float:
    """Average debt per agent, ``-sum_{n <= -1} n p_n``."""
    neg = -p.window_min
    if neg <= 0:
        return 0.0
    ns = np.arange(p.window_min, 0)
    return float(-np.dot(ns, p.probs[:neg]))


def mean_rate(p: WealthDistribution, f: RateFunction) -> float:
    return float(np.dot(f.values(p.ns), p.probs))


def is_valid(p: WealthDistribution, *, normalized=True, well_truncated=False,
             mass_tol=MASS_TOL, tail_tol=TAIL_TOL) -> bool:
    if p.min_entry() < -EPS_POS:
        return False
    if normalized and abs(p.probs.sum() - 1.0) > mass_tol:
        return False
    if well_truncated and p.boundary_mass() >= tail_tol:
        return False
    return True


def in_s_mu(p: WealthDistribution, mu: float, tol: float = MASS_TOL) -> bool:
    mass, mean = moments(p)
    return is_valid(p, mass_tol=tol) and abs(mean - mu) <= tol


def in_s_mu_plus(p: WealthDistribution, mu: float, tol: float = MASS_TOL) -> bool:
    neg = p.probs[:max(0, -p.window_min)]
    return in_s_mu(p, mu, tol) and bool(np.all(np.abs(neg) <= EPS_POS))


def in_s_mu_nu(p: WealthDistribution, mu: float, nu: float, tol: float = MASS_TOL) -> bool:
    return in_s_mu(p, mu, tol) and abs(debt_level(p) - mu * nu) <= tol


def distance(p: WealthDistribution, q: WealthDistribution, metric: str = "l2") -> float:
    """l2 or total-variation distance on the union of both windows."""
    window = (min(p.window_min, q.window_min), max(p.window_max, q.window_max))
    diff = p.reindex(window).probs - q.reindex(window).probs
    if metric == "l2":
        return float(np.sqrt(np.dot(diff, diff)))
    if metric == "tv":
        return float(0.5 * np.abs(diff).sum())
    raise ValueError(f"unknown metric {metric!r}")


# --- class G membership probe -------------------------------------------------

def class_g_expression(p: WealthDistribution, f: RateFunction) -> float:
    """Phase-I debt derivative; nonnegative on all of S_mu iff f is in class G.

    ``sum_{n<=0} f p * sum_{n>=0} p - (sum_{n>=1} f p) * sum_{n<=-1} p``
    """
    ns, probs = p.ns, p.probs
    fp = f.values(ns) * probs
    return float(fp[ns <= 0].sum() * probs[ns >= 0].sum() - fp[ns >= 1].sum() * probs[ns <= -1].sum())


def _class_g_batch(probs: np.ndarray, ns: np.ndarray, fvals: np.ndarray) -> np.ndarray:
    fp = probs * fvals
    return (fp[:, ns <= 0].sum(axis=1) * probs[:, ns >= 0].sum(axis=1)
            - fp[:, ns >= 1].sum(axis=1) * probs[:, ns <= -1].sum(axis=1))


def sample_s_mu(rng: np.random.Generator, mu: int, size: int, half_width: int = 10,
                max_batches: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``size`` random distributions in S_mu supported on ``[-W, W + 2 mu]``.

    Exponential weights are normalized, then mass is moved between the two
    extreme bins until the mean is exactly ``mu``; draws that would need a
    negative entry for that are rejected. Returns ``(ns, probs)`` with
    ``probs`` of shape ``(size, len(ns))``.
    """
    lo, hi = -half_width, half_width + 2 * mu
    ns = np.arange(lo, hi + 1)
    span = hi - lo
    kept = []
    total = 0
    for _ in range(max_batches):
        if total >= size:
            break
        batch = max(64, 2 * (size - total))
        w = rng.exponential(size=(batch, ns.size))
        w /= w.sum(axis=1, keepdims=True)
        shift = (mu - w @ ns) / span
        ok = np.where(shift >= 0, w[:, 0] >= shift, w[:, -1] >= -shift)
        w, shift = w[ok], shift[ok]
        w[:, 0] -= shift
        w[:, -1] += shift
        kept.append(w)
        total += len(w)
    probs = np.concatenate(kept)[:size]
    if len(probs) < size:
        raise RuntimeError("sampler rejected too many draws")
    return ns, probs


@dataclass(frozen=True)
class ProbeReport:
    passed: bool
    samples_checked: int
    counterexample: WealthDistribution | None = None
    margin: float | None = None
    note: str = ""


def class_g_probe(f: RateFunction, mu: int, num_samples: int, seed: int,
                  half_width: int = 10, tol: float = 1e-12) -> ProbeReport:
    """Randomized search for a distribution in S_mu violating the class-G inequality.

    A pass is evidence only; a returned counterexample is decisive.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    rng = np.random.default_rng(seed)
    checked = 0
    chunk = 4096
    while checked < num_samples:
        k = min(chunk, num_samples - checked)
        ns, probs = sample_s_mu(rng, mu, k, half_width)
        vals = _class_g_batch(probs, ns, f.values(ns))
        bad = np.flatnonzero(vals < -tol)
        if bad.size:
            i = int(bad[0])
            return ProbeReport(False, checked + i + 1, WealthDistribution(int(ns[0]), probs[i]),
                               float(vals[i]), "counterexample found")
        checked += k
    return ProbeReport(True, checked, note="no violation found; not a proof of membership")
