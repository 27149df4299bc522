"""Exact stationary law of the N-agent chain, by enumeration and in closed form.

Everything here is exact: Python integers and :class:`fractions.Fraction`.
The closed form is specific to ``f_star``, whose reversible weight is the
product of the positive holdings.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, prod
from typing import Sequence

from .errors import TooLargeError
from .model import RateFunction

_ONE = RateFunction.constant(1.0)

MAX_CONFIGS = 10**7

Configuration = tuple


def binom(m: int, k: int) -> int:
    """Binomial coefficient with the conventions the closed form needs.

    ``C(-1, -1) = 1``; otherwise 0 for ``k < 0`` or ``m < k``.
    """
    if m == -1 and k == -1:
        return 1
    if k < 0 or m < k:
        return 0
    return comb(m, k)


def theta_weight(xi: Sequence[int], f: RateFunction, bank: int = 0) -> Fraction:
    """Reversible weight ``prod_i prod_{j=-B}^{xi_i} 1/f(j)`` of a configuration."""
    if f.kind == "f_star":
        return Fraction(prod(v for v in xi if v > 0))
    return prod((_agent_weight(v, f, bank) for v in xi), start=Fraction(1))


@lru_cache(maxsize=4096)
def _agent_weight(v: int, f: RateFunction, bank: int) -> Fraction:
    w = Fraction(1)
    for j in range(-bank, v + 1):
        w /= f.exact(j)
    return w


def transition_rate(src: Sequence[int], dst: Sequence[int], f: RateFunction, bank: int) -> Fraction:
    """Rate of the jump ``src -> dst``: ``f(src_i) / N`` when agent i hands one dollar to j.

    Zero unless ``dst`` differs from ``src`` by exactly such a move and the
    move is permitted by the debt limit (giver solvent or bank not empty).
    """
    diff = [b - a for a, b in zip(src, dst)]
    if sorted(diff) != [-1] + [0] * (len(diff) - 2) + [1]:
        return Fraction(0)
    i = diff.index(-1)
    debt = sum(-v for v in src if v < 0)
    if src[i] <= 0 and debt >= bank:
        return Fraction(0)
    return f.exact(src[i]) / len(src)


def count_configurations(n_agents: int, money: int, bank: int) -> int:
    """Number of reachable configurations (sum ``money``, total debt at most ``bank``)."""
    return sum(binom(n_agents, b) * stars_bars(a, b) * binom(money + a - 1, n_agents - b - 1)
               for a in range(bank + 1) for b in range(n_agents + 1))


def iter_configurations(n_agents: int, money: int, bank: int):
    """Yield every configuration with the given sum and total debt at most ``bank``."""
    def rec(k, remaining, debt_left):
        if k == 1:
            if remaining >= -debt_left:
                yield (remaining,)
            return
        # the other k-1 agents can absorb at most debt_left dollars of debt between them
        for v in range(-debt_left, remaining + debt_left + 1):
            used = -v if v < 0 else 0
            for rest in rec(k - 1, remaining - v, debt_left - used):
                yield (v,) + rest

    if n_agents < 1:
        return
    yield from rec(n_agents, money, bank)


@dataclass(frozen=True)
class ExactDistribution:
    configs: tuple
    weights: tuple
    normalizer: Fraction
    bank: int = 0

    def probability(self, xi: Sequence[int]) -> Fraction:
        try:
            return self.weights[self.configs.index(tuple(xi))] / self.normalizer
        except ValueError:
            return Fraction(0)

    def marginal_table(self, agent: int = 0) -> dict[int, Fraction]:
        table: dict[int, Fraction] = {}
        for xi, w in zip(self.configs, self.weights):
            table[xi[agent]] = table.get(xi[agent], 0) + w
        return {n: Fraction(w) / self.normalizer for n, w in sorted(table.items())}


def enumerate_stationary(n_agents: int, money: int, bank: int, f: RateFunction,
                         max_configs: int | None = None) -> ExactDistribution:
    size = count_configurations(n_agents, money, bank)
    max_configs = MAX_CONFIGS if max_configs is None else max_configs
    if size > max_configs:
        raise TooLargeError(f"{size} configurations exceed the enumeration bound {max_configs}")
    configs = tuple(iter_configurations(n_agents, money, bank))
    weights = tuple(theta_weight(xi, f, bank) for xi in configs)
    return ExactDistribution(configs, weights, sum(weights, Fraction(0)), bank)


def marginal(dist: ExactDistribution, n: int) -> Fraction:
    """Probability that agent 0 holds ``n`` dollars."""
    total = sum((w for xi, w in zip(dist.configs, dist.weights) if xi[0] == n), Fraction(0))
    return total / dist.normalizer


# --- combinatorial identities --------------------------------------------------

def stars_bars(a: int, b: int) -> int:
    """Number of solutions of ``y_1 + ... + y_b = a`` in nonnegative integers."""
    if b == 0:
        return 1 if a == 0 else 0
    return binom(a + b - 1, b - 1)


@lru_cache(maxsize=None)
def stars_bars_brute(a: int, b: int) -> int:
    if b == 0:
        return 1 if a == 0 else 0
    if b == 1:
        return 1 if a >= 0 else 0
    return sum(stars_bars_brute(a - y, b - 1) for y in range(a + 1))


def weighted_sum_s(n: int, r: int) -> int:
    """``sum_{i=1}^n i * C(n - i + r - 1, 2r - 1)`` by direct summation."""
    return sum(i * binom(n - i + r - 1, 2 * r - 1) for i in range(1, n + 1))


def weighted_sum_u(n: int, r: int) -> int:
    """``sum_{i=1}^n i * C(n - i + r - 1, 2r)`` by direct summation."""
    return sum(i * binom(n - i + r - 1, 2 * r) for i in range(1, n + 1))


def weighted_sum_s_closed(n: int, r: int) -> int:
    return binom(n + r, 2 * r + 1)


def weighted_sum_u_closed(n: int, r: int) -> int:
    return binom(n + r, 2 * r + 2)


def product_sum(n: int, r: int) -> int:
    """``sum over x_1 + ... + x_r = n, x_i >= 0`` of ``x_1 x_2 ... x_r``, in closed form."""
    if r == 0:
        return 1 if n == 0 else 0
    return binom(n + r - 1, 2 * r - 1)


@lru_cache(maxsize=None)
@lru_cache(maxsize=None)
def product_sum_brute(n: int, r: int) -> int:
    """Same sum by recursion on the first part (no binomials involved)."""
    if r == 0:
        return 1 if n == 0 else 0
    if n < 0:
        return 0
    if r == 1:
        return n
    return sum(x * product_sum_brute(n - x, r - 1) for x in range(1, n + 1))


# --- closed form for f_star -------------------------------------------------------

def phi_count(a: int, b: int, n_agents: int, money: int, bank: int) -> int:
    """Sum of theta over configurations with total debt ``a`` and ``b`` agents at or below zero."""
    return binom(n_agents, b) * stars_bars(a, b) * product_sum(money + a, n_agents - b)


@lru_cache(maxsize=None)
def varphi(n_agents: int, money: int, bank: int) -> int:
    """Closed-form normalizer ``sum_xi theta(xi)`` for ``f_star``.

    The count of non-positive agents runs up to ``N`` inclusive so that the
    degenerate calls with ``money <= 0`` made by :func:`limiting_marginal`
    agree with enumeration.
    """
    if bank < 0:
        return 0
    return sum(phi_count(a, b, n_agents, money, bank)
               for a in range(bank + 1) for b in range(n_agents + 1))


def limiting_marginal(n: int, n_agents: int, money: int, bank: int) -> Fraction:
    """Long-run probability that a given agent holds ``n`` dollars (``f_star``)."""
    if n_agents < 1:
        raise ValueError("need at least one agent")
    if n_agents == 1:
        return Fraction(int(n == money))
    if n < -bank or n > money + bank:
        return Fraction(0)
    total = varphi(n_agents, money, bank)
    if n > 0:
        return Fraction(n * varphi(n_agents - 1, money - n, bank), total)
    return Fraction(varphi(n_agents - 1, money - n, bank + n), total)


def marginal_table(n_agents: int, money: int, bank: int, method: str = "closed-form",
                   f: RateFunction | None = None) -> dict[int, Fraction]:
    """Nonzero entries of the single-agent marginal, keyed by wealth level."""
    if method == "enumerate":
        table = enumerate_stationary(n_agents, money, bank, f or RateFunction.f_star()).marginal_table()
    elif method == "closed-form":
        if f is not None and f.kind != "f_star":
            raise ValueError("closed form is only available for f_star")
        if n_agents == 1:
            table = {money: Fraction(1)}
        else:
            table = {n: limiting_marginal(n, n_agents, money, bank) for n in range(-bank, money + bank + 1)}
    else:
        raise ValueError(f"unknown method {method!r}")
    return {n: p for n, p in sorted(table.items()) if p != 0}


def random_reachable_pair(rng: random.Random, n_agents: int, money: int, bank: int,
                          max_tries: int = 10_000):
    """Draw ``(xi_i, xi_j, i, j)``: a base configuration with sum ``money - 1`` plus one dollar at i or j.

    Both resulting configurations respect the debt limit and each is one
    permitted move away from the other.
    """
    for _ in range(max_tries):
        base = [rng.randint(-bank, money + bank) for _ in range(n_agents - 1)]
        base.append(money - 1 - sum(base))
        i, j = rng.sample(range(n_agents), 2)
        xi_i = list(base)
        xi_i[i] += 1
        xi_j = list(base)
        xi_j[j] += 1
        if all(sum(-v for v in x if v < 0) <= bank for x in (xi_i, xi_j)) and \
                transition_rate(xi_i, xi_j, _ONE, bank) and transition_rate(xi_j, xi_i, _ONE, bank):
            return tuple(base), tuple(xi_i), tuple(xi_j), i, j
    raise RuntimeError("could not draw a reachable pair")
