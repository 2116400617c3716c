import pytest

from psmatch.errors import BoundError, DomainError
from psmatch.oracle import brute_force_ate, brute_force_match, brute_force_same, efficiency_bound

from .conftest import T4_SCORES, T4_W


def test_brute_force_match():
    assert brute_force_match(T4_SCORES, T4_W, 0, 1) == [3]
    assert sorted(brute_force_match(T4_SCORES, T4_W, 0, 2)) == [1, 3]
    with pytest.raises(BoundError):
        brute_force_match(T4_SCORES, T4_W, 0, 3)


def test_brute_force_same():
    assert brute_force_same(T4_SCORES, T4_W, 1, 2) == [1, 3]
    assert brute_force_same([0.5, 0.5, 0.5], [1, 1, 0], 1, 2) == [1, 0]


@pytest.mark.parametrize("m", [1, 2])
def test_brute_force_ate(t4, m):
    ds, scores = t4
    assert brute_force_ate(ds, scores, m) == pytest.approx(2.5)


@pytest.mark.parametrize("design, sigma", [("1", 2.4731), ("2", 2.8635)])
def test_bound_values(design, sigma):
    closed = efficiency_bound(design)
    quadrature = efficiency_bound(design, method="quadrature")
    assert closed.sigma_eff == pytest.approx(sigma, abs=1e-4)
    assert abs(closed.sigma2_eff - quadrature.sigma2_eff) < 1e-6


def test_bound_rejects_unknown_design():
    with pytest.raises(DomainError):
        efficiency_bound("flat")


def test_bound_rejects_unknown_method():
    with pytest.raises(ValueError):
        efficiency_bound("1", method="monte-carlo")
