import pytest

from exchange_lab.equilibrium import (DEFAULT_WINDOW, EquilibriumSolution, back_substitute,
                                      closed_form_residuals, constraint_residuals,
                                      equilibrium_distribution, quartic_coefficients, quartic_eval,
                                      roots_in_unit_interval, solve_equilibrium)
from exchange_lab.errors import NonNormalizableError
from exchange_lab.model import RateFunction, debt_level, moments


@pytest.fixture(scope="module")
def sol11():
    return solve_equilibrium(1, 1)


def test_quartic_coefficients_unit_case():
    assert quartic_coefficients(1, 1) == pytest.approx((0, -7 / 4, 9 / 2, -15 / 4, 2), abs=1e-15)
    assert abs(quartic_eval(quartic_coefficients(1, 1), 0.5852)) < 5e-4


@pytest.mark.parametrize("mu, nu", [(1, 1), (1, 5), (3, 2), (10, 10)])
def test_quartic_leading_terms_positive(mu, nu):
    c = quartic_coefficients(mu, nu)
    assert c[2] > 0 and c[4] > 0


def test_reference_values(sol11):
    assert sol11.beta_plus == pytest.approx(0.5852, abs=5e-4)
    assert sol11.p0_star == pytest.approx(0.15386, abs=5e-4)
    assert sol11.beta_minus == pytest.approx(0.6772, abs=5e-4)
    bp = sol11.beta_plus
    assert sol11.p0_star == pytest.approx((-11 + 29 * bp - 8 * bp * bp) / 21, abs=1e-6)
    assert sol11.beta_minus == pytest.approx((25 - 15 * bp + 8 * bp * bp) / 28, abs=1e-6)


def test_unit_case_reduces_to_cubic(sol11):
    bp = sol11.beta_plus
    assert abs(2 * bp**3 - 3.75 * bp**2 + 4.5 * bp - 1.75) < 1e-12
    assert sol11.quartic_residual <= 1e-12
    assert max(sol11.residuals) <= 1e-10


def test_back_substitution_consistent(sol11):
    p0, bm = back_substitute(sol11.beta_plus, 1, 1)
    assert p0 == pytest.approx(sol11.p0_star, rel=1e-12)
    assert bm / (1 - bm) ** 2 == pytest.approx(1 / p0, rel=1e-12)


def test_root_scan_finds_spurious_roots_too():
    roots = roots_in_unit_interval(quartic_coefficients(5, 7))
    assert len(roots) >= 2
    sol = solve_equilibrium(5, 7)
    assert any(abs(r - sol.beta_plus) < 1e-9 for r in roots)


@pytest.mark.parametrize("mu", range(1, 9))
@pytest.mark.parametrize("nu", range(1, 9))
def test_unique_admissible_root_sweep(mu, nu):
    sol = solve_equilibrium(mu, nu)
    assert 0 < sol.beta_plus < 1 and 0 < sol.beta_minus < 1 and 0 < sol.p0_star < 1
    assert max(sol.residuals) <= 1e-10


def test_distribution_values(sol11):
    p = equilibrium_distribution(sol11)
    assert p[1] == pytest.approx(0.15386 * 0.5852, abs=5e-5)
    assert p[-1] == pytest.approx(0.15386 * 0.6772, abs=5e-5)
    mass, mean = moments(p)
    assert abs(mass - 1) <= 1e-10 and abs(mean - 1) <= 1e-10
    assert abs(debt_level(p) - 1) <= 1e-10


def test_window_residuals(sol11):
    assert max(constraint_residuals(sol11)) <= 1e-10


def test_perturbed_beta_breaks_mean(sol11):
    bad = EquilibriumSolution(1, 1, sol11.beta_plus + 0.01, sol11.beta_minus, sol11.p0_star,
                              sol11.quartic, sol11.residuals)
    assert constraint_residuals(bad)[1] > 1e-3


def test_negative_branch_geometric_sum(sol11):
    p = equilibrium_distribution(sol11)
    bm = sol11.beta_minus
    window_sum = p.probs[: -DEFAULT_WINDOW[0]].sum()
    assert window_sum == pytest.approx(sol11.p0_star * bm / (1 - bm), abs=1e-12)


def test_f_abs_ansatz(sol11):
    p = equilibrium_distribution(sol11, RateFunction.f_abs())
    for n in (-1, -2, -5):
        assert p[n] == pytest.approx(-n * sol11.p0_star * sol11.beta_minus ** (-n), rel=1e-12)
    for n in (1, 4):
        assert p[n] == pytest.approx(n * sol11.p0_star * sol11.beta_plus ** n, rel=1e-12)


def test_exponential_rate_is_not_normalizable(sol11):
    with pytest.raises(NonNormalizableError, match="no chance"):
        equilibrium_distribution(sol11, RateFunction.exponential(0.5))


def test_too_small_window_rejected(sol11):
    with pytest.raises(ValueError, match="tail mass"):
        equilibrium_distribution(sol11, window=(-10, 10))


def test_closed_form_residual_detects_spurious_root():
    c = quartic_coefficients(5, 7)
    sol = solve_equilibrium(5, 7)
    for r in roots_in_unit_interval(c):
        if abs(r - sol.beta_plus) > 1e-6:
            p0, bm = back_substitute(r, 5, 7)
            if 0 < p0 < 1:
                assert max(closed_form_residuals(r, bm, p0, 5, 7)) > 1e-3
