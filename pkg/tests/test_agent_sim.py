import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exchange_lab.agent_sim import (BLOCKED, THINNED, TRANSFER, EventSampler, SystemState,
                                    empirical_distribution, init_state, run, step, transfer)
from exchange_lab.errors import InvalidAllocationError, UnsupportedRateError
from exchange_lab.exact import enumerate_stationary
from exchange_lab.model import ModelParams, RateFunction, WealthDistribution, distance


def test_init_state_examples():
    s = init_state(ModelParams(1, 1, 2))
    assert s.wealth == [1, 1] and s.bank_cash == 2
    s = init_state(ModelParams(2, 1, 3))
    assert s.wealth == [2, 2, 2] and s.bank_cash == 6
    s = init_state(ModelParams(1, 1, 2), [2, 0])
    assert s.wealth == [2, 0] and s.bank_cash == 2


@pytest.mark.parametrize("alloc", [[3, 0], [1, 0], [3, -1], [1, 1, 0]])
def test_init_state_rejects_bad_allocations(alloc):
    with pytest.raises(InvalidAllocationError):
        init_state(ModelParams(1, 1, 2), alloc)


def test_transfer_examples():
    s = SystemState([1, 1], 2, 2)
    assert transfer(s, 0, 1).kind == TRANSFER
    assert s.wealth == [0, 2] and s.bank_cash == 2

    s = SystemState([0, 2], 2, 2)
    transfer(s, 0, 1)
    assert s.wealth == [-1, 3] and s.bank_cash == 1

    s = SystemState([-1, 3], 0, 1)
    out = transfer(s, 0, 1)
    assert out.kind == BLOCKED and s.wealth == [-1, 3] and s.bank_cash == 0
    assert s.events_blocked == 1 and s.events_total == 1

    s = SystemState([3, -1], 1, 2)
    transfer(s, 0, 1)
    assert s.wealth == [2, 0] and s.bank_cash == 2


def test_first_empty_event_recorded():
    s = SystemState([0, 2], 1, 1)
    transfer(s, 0, 1)
    assert s.bank_cash == 0 and s.first_empty_event == 1


def test_exponential_rate_is_rejected():
    with pytest.raises(UnsupportedRateError):
        run(ModelParams(1, 1, 5, RateFunction.exponential(0.3)), 10, 0)


def test_constant_rate_never_thins():
    s = init_state(ModelParams(1, 1, 5, RateFunction.constant()))
    sampler = EventSampler(5, 3)
    kinds = {step(s, sampler, RateFunction.constant()).kind for _ in range(5000)}
    assert THINNED not in kinds


def test_step_thins_rich_givers_under_f_star():
    s = SystemState([50, 0, 0, 0], 12, 12)
    sampler = EventSampler(4, 11)
    kinds = [step(s, sampler, RateFunction.f_star()).kind for _ in range(2000)]
    assert THINNED in kinds and TRANSFER in kinds
    s.check(50)


def test_empirical_distribution_examples():
    assert empirical_distribution([1, 1]) == WealthDistribution.delta(1)
    p = empirical_distribution([0, 2])
    assert p[0] == p[2] == 0.5
    p = empirical_distribution([-1, 0, 1, 4])
    assert [p[n] for n in (-1, 0, 1, 4)] == [0.25] * 4
    assert p.probs.sum() == 1


def test_zero_events_gives_delta_mu():
    res = run(ModelParams(1, 1, 2), 0, 5)
    assert res.histogram == WealthDistribution.delta(1)


@given(st.integers(2, 8), st.integers(1, 3), st.integers(1, 2), st.integers(0, 2**32 - 1),
       st.sampled_from(["f_star", "constant", "f_abs"]))
@settings(max_examples=40, deadline=None)
def test_conservation_and_blocking_invariants(n, mu, nu, seed, kind):
    params = ModelParams(mu, nu, n, RateFunction(kind))
    sampler = EventSampler(n, seed)
    s = init_state(params)
    for _ in range(3000):
        before = list(s.wealth), s.bank_cash
        out = step(s, sampler, params.rate)
        s.check(n * mu)
        if out.kind == BLOCKED:
            assert before[0][out.giver] <= 0 and before[1] == 0
            assert s.wealth == before[0]


def test_debug_run_checks_identities():
    res = run(ModelParams(1, 1, 50), 20000, 4, debug=True)
    res.final_state.check(50)
    assert res.final_state.events_total == 20000


def test_determinism():
    a = run(ModelParams(1, 2, 100), 5000, 99, snapshot_every=1000)
    b = run(ModelParams(1, 2, 100), 5000, 99, snapshot_every=1000)
    assert a.final_state == b.final_state
    assert a.histogram == b.histogram
    assert [k for k, _ in a.snapshots] == [1000, 2000, 3000, 4000, 5000]
    assert all(p == q for (_, p), (_, q) in zip(a.snapshots, b.snapshots))
    c = run(ModelParams(1, 2, 100), 5000, 100)
    assert c.final_state.wealth != a.final_state.wealth


@pytest.mark.parametrize("rate", [RateFunction.f_star(), RateFunction.constant()])
def test_two_agent_occupancy_matches_exact_marginal(rate):
    res = run(ModelParams(1, 1, 2, rate), 10**6, 2024, track_occupancy=True)
    exact = enumerate_stationary(2, 2, 2, rate).marginal_table()
    oracle = WealthDistribution.from_mapping({n: float(q) for n, q in exact.items()})
    assert res.occupancy.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert distance(res.occupancy, oracle, "tv") < 0.02
