import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from pairweight.aldist import al_cdf, al_logpdf, al_ppf, al_sample, check_loss, check_loss_grad


def test_logpdf_at_location():
    # check loss vanishes at the location, leaving the normalizing constant
    assert al_logpdf(0.0, 0.0, 1.0, 0.5) == pytest.approx(np.log(0.25), abs=1e-15)


def test_logpdf_asymmetry():
    # the two check-loss slopes differ by exactly (q - (1-q)) at unit offsets
    diff = al_logpdf(1.0, 0.0, 1.0, 0.9) - al_logpdf(-1.0, 0.0, 1.0, 0.9)
    assert diff == pytest.approx(-0.8, abs=1e-12)


@pytest.mark.parametrize("mu,tau,q", [(0.0, 1.0, 0.5), (10.0, 8.0, 0.5), (-2.0, 0.5, 0.25), (3.0, 2.0, 0.9)])
def test_density_integrates_to_one(mu, tau, q):
    value, _ = quad(lambda t: np.exp(al_logpdf(t, mu, tau, q)), mu - 50.0 / tau, mu + 50.0 / tau,
                    points=[mu], limit=200)
    assert value == pytest.approx(1.0, abs=1e-6)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        al_logpdf(0.0, 0.0, -1.0, 0.5)
    with pytest.raises(ValueError):
        al_logpdf(0.0, 0.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        al_sample(0.0, 0.0, 0.5, np.random.default_rng(0))


def test_ppf_inverts_cdf():
    p = np.linspace(0.01, 0.99, 97)
    y = al_ppf(p, 1.0, 3.0, 0.3)
    assert al_cdf(y, 1.0, 3.0, 0.3) == pytest.approx(p, abs=1e-12)


def test_sample_median_is_location():
    rng = np.random.default_rng(42)
    draws = al_sample(0.0, 1.0, 0.5, rng, size=1_000_000)
    assert abs(np.median(draws)) < 0.01


def test_sample_quantile_property():
    rng = np.random.default_rng(43)
    draws = al_sample(10.0, 8.0, 0.5, rng, size=1_000_000)
    assert np.mean(draws < 10.0) == pytest.approx(0.5, abs=0.005)


def test_histogram_matches_density():
    # oracle: the closed-form density evaluated on the bin centers
    rng = np.random.default_rng(44)
    draws = al_sample(0.0, 1.0, 0.5, rng, size=1_000_000)
    edges = np.linspace(-6, 6, 101)
    hist, _ = np.histogram(draws, bins=edges, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    assert np.max(np.abs(hist - np.exp(al_logpdf(centers, 0.0, 1.0, 0.5)))) < 0.01


@given(
    u=st.floats(-50, 50, allow_nan=False),
    q=st.floats(0.01, 0.99),
    scale=st.floats(0.1, 10),
)
def test_check_loss_properties(u, q, scale):
    assert check_loss(u, q) >= 0
    assert check_loss(0.0, q) == 0
    # positive homogeneity
    assert check_loss(scale * u, q) == pytest.approx(scale * check_loss(u, q), rel=1e-12)


def test_check_loss_grad_convention():
    assert check_loss_grad(2.0, 0.3) == pytest.approx(0.3)
    assert check_loss_grad(-2.0, 0.3) == pytest.approx(-0.7)
    assert check_loss_grad(0.0, 0.3) == pytest.approx(0.3)  # kink takes q
