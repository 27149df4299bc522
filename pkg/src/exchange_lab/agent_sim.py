"""Finite-N stochastic simulation of the f-biased exchange with a collective debt limit.

Events are generated by uniformization: candidate givers arrive at the
constant rate ``sup f`` and are accepted with probability ``f(S_i) / sup f``.
Because the candidate rate does not depend on the state, averages over
candidate events equal time averages of the continuous-time chain.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidAllocationError, UnsupportedRateError
from .model import ModelParams, RateFunction, WealthDistribution

GENERATOR = "numpy.random.PCG64"
DRIFT_CHECK_EVERY = 1 << 20
_BATCH = 1 << 16

TRANSFER, THINNED, BLOCKED = "transfer", "thinned", "blocked"


@dataclass
class SystemState:
    wealth: list[int]
    bank_cash: int
    bank_initial: int
    events_total: int = 0
    events_blocked: int = 0
    candidates: int = 0
    first_empty_event: int | None = None

    @property
    def n_agents(self) -> int:
        return len(self.wealth)

    @property
    def bank_debt(self) -> int:
        return sum(-s for s in self.wealth if s < 0)

    def check(self, total_money: int | None = None) -> None:
        """Assert the bank identity (and money conservation when given)."""
        if total_money is not None:
            assert sum(self.wealth) == total_money, "money not conserved"
        assert self.bank_cash == self.bank_initial - self.bank_debt, "bank identity broken"
        assert self.bank_cash >= 0, "negative bank cash"

    def copy(self) -> SystemState:
        return SystemState(list(self.wealth), self.bank_cash, self.bank_initial, self.events_total,
                           self.events_blocked, self.candidates, self.first_empty_event)


@dataclass(frozen=True)
class Outcome:
    kind: str
    giver: int
    receiver: int | None = None


@dataclass(frozen=True)
class SimResult:
    final_state: SystemState
    histogram: WealthDistribution
    snapshots: list = field(default_factory=list)
    seed: int = 0
    params: ModelParams | None = None
    occupancy: WealthDistribution | None = None


def init_state(params: ModelParams, allocation: str | Sequence[int] = "uniform") -> SystemState:
    n = params.n_agents
    bank = params.bank_initial
    if isinstance(allocation, str):
        if allocation != "uniform":
            raise InvalidAllocationError(f"unknown allocation {allocation!r}")
        return SystemState([params.mu] * n, bank, bank)
    wealth = [int(s) for s in allocation]
    if len(wealth) != n:
        raise InvalidAllocationError(f"expected {n} agents, got {len(wealth)}")
    if any(s < 0 for s in wealth):
        raise InvalidAllocationError("initial allocation must be debt-free")
    if sum(wealth) != n * params.mu:
        raise InvalidAllocationError(f"allocation sums to {sum(wealth)}, expected {n * params.mu}")
    return SystemState(wealth, bank, bank)


def thinning_bound(f: RateFunction) -> float:
    bound = f.sup()
    if bound is None:
        raise UnsupportedRateError(f"rate {f.kind!r} is unbounded; no thinning bound exists")
    return bound


def transfer(state: SystemState, giver: int, receiver: int) -> Outcome:
    """Apply one accepted exchange attempt from ``giver`` to ``receiver`` in place."""
    if giver == receiver:
        raise ValueError("giver and receiver must differ")
    w = state.wealth
    state.events_total += 1
    s = w[giver]
    if s <= 0:
        if state.bank_cash == 0:
            state.events_blocked += 1
            return Outcome(BLOCKED, giver)
        state.bank_cash -= 1
    w[giver] = s - 1
    if w[receiver] < 0:
        state.bank_cash += 1
    w[receiver] += 1
    if state.bank_cash == 0 and state.first_empty_event is None:
        state.first_empty_event = state.events_total
    return Outcome(TRANSFER, giver, receiver)


class EventSampler:
    """Batched draws of (candidate giver, acceptance uniform, raw receiver index)."""

    def __init__(self, n_agents: int, seed: int | np.random.Generator, batch: int = _BATCH):
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(seed))
        self.n = n_agents
        self.batch = batch
        self._refill()

    def _refill(self):
        rng, b = self.rng, self.batch
        self.givers = rng.integers(0, self.n, size=b).tolist()
        self.uniforms = rng.random(b).tolist()
        self.receivers = rng.integers(0, self.n - 1, size=b).tolist()
        self.pos = 0

    def draw(self) -> tuple[int, float, int]:
        if self.pos == self.batch:
            self._refill()
        k = self.pos
        self.pos += 1
        return self.givers[k], self.uniforms[k], self.receivers[k]


def step(state: SystemState, sampler: EventSampler, f: RateFunction, f_max: float | None = None) -> Outcome:
    """One candidate event: pick a giver, thin by ``f / f_max``, then exchange."""
    if f_max is None:
        f_max = thinning_bound(f)
    state.candidates += 1
    i, u, j = sampler.draw()
    if u >= f(state.wealth[i]) / f_max:
        return Outcome(THINNED, i)
    if j >= i:
        j += 1
    return transfer(state, i, j)


def empirical_distribution(state: SystemState | Sequence[int]) -> WealthDistribution:
    wealth = state.wealth if isinstance(state, SystemState) else list(state)
    counts = Counter(wealth)
    n = len(wealth)
    return WealthDistribution.from_mapping({k: c / n for k, c in counts.items()})


class _OccupancyTracker:
    """Time-integrated level counts, updated lazily when a level's count changes."""

    def __init__(self, wealth):
        self.counts = Counter(wealth)
        self.area = Counter()
        self.since = dict.fromkeys(self.counts, 0)

    def move(self, old, new, t):
        for level, delta in ((old, -1), (new, 1)):
            c = self.counts[level]
            self.area[level] += c * (t - self.since.get(level, t))
            self.since[level] = t
            self.counts[level] = c + delta

    def distribution(self, t, n_agents):
        total = Counter(self.area)
        for level, c in self.counts.items():
            total[level] += c * (t - self.since.get(level, t))
        if t == 0:
            return WealthDistribution.from_mapping({k: c / n_agents for k, c in self.counts.items() if c})
        norm = t * n_agents
        return WealthDistribution.from_mapping({k: v / norm for k, v in total.items() if v})


def run(params: ModelParams, num_events: int, seed: int, snapshot_every: int | None = None,
        allocation: str | Sequence[int] = "uniform", track_occupancy: bool = False,
        debug: bool = False) -> SimResult:
    """Simulate until ``num_events`` exchange attempts (transfers plus blocked) occurred.

    ``track_occupancy`` additionally records the time-averaged level occupancy,
    averaged over every candidate event (thinned ones included), which is the
    continuous-time average under uniformization. ``debug`` checks the
    conservation identities after every event.
    """
    if num_events < 0:
        raise ValueError("num_events must be >= 0")
    f = params.rate
    f_max = thinning_bound(f)
    state = init_state(params, allocation)
    total_money = sum(state.wealth)
    n = state.n_agents
    sampler = EventSampler(n, seed)
    snapshots = []
    tracker = _OccupancyTracker(state.wealth) if track_occupancy else None

    accept_cache: dict[int, float] = {}
    wealth = state.wealth
    bank = state.bank_cash
    events = blocked = 0
    candidates = 0
    first_empty = None
    money, debt = total_money, state.bank_debt
    givers, uniforms, receivers, pos = sampler.givers, sampler.uniforms, sampler.receivers, sampler.pos
    batch = sampler.batch

    while events < num_events:
        if pos == batch:
            sampler._refill()
            givers, uniforms, receivers, pos = sampler.givers, sampler.uniforms, sampler.receivers, 0
        i, u, j = givers[pos], uniforms[pos], receivers[pos]
        pos += 1
        candidates += 1
        s = wealth[i]
        acc = accept_cache.get(s)
        if acc is None:
            acc = accept_cache[s] = f(s) / f_max
        if u >= acc:
            continue
        events += 1
        if s <= 0:
            if bank == 0:
                blocked += 1
                if snapshot_every and events % snapshot_every == 0:
                    snapshots.append((events, empirical_distribution(wealth)))
                continue
            bank -= 1
        if j >= i:
            j += 1
        r = wealth[j]
        if r < 0:
            bank += 1
        wealth[i] = s - 1
        wealth[j] = r + 1
        if tracker is not None:
            tracker.move(s, s - 1, candidates)
            tracker.move(r, r + 1, candidates)
        if bank == 0 and first_empty is None:
            first_empty = events
        if debug:
            # independent O(1) bookkeeping of sum and debt from the two touched agents
            money += (s - 1 - s) + (r + 1 - r)
            debt += max(0, 1 - s) - max(0, -s) + max(0, -r - 1) - max(0, -r)
            assert money == total_money, "money not conserved"
            assert bank == state.bank_initial - debt and bank >= 0, "bank identity broken"
            if events % DRIFT_CHECK_EVERY == 0:
                state.bank_cash = bank
                state.check(total_money)
        if snapshot_every and events % snapshot_every == 0:
            snapshots.append((events, empirical_distribution(wealth)))

    sampler.pos = pos
    state.bank_cash = bank
    state.events_total = events
    state.events_blocked = blocked
    state.candidates = candidates
    state.first_empty_event = first_empty
    state.check(total_money)
    occupancy = tracker.distribution(candidates, n) if tracker is not None else None
    return SimResult(state, empirical_distribution(state), snapshots, seed, params, occupancy)
