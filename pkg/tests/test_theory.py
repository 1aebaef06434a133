"""Test the abridged error probability, its approximation and the worst-case search."""
import math

from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest
from scipy import integrate, special

from ql_order.errors import DegenerateComponentError, InvalidArgumentError
from ql_order.likelihood import correlation_matrix, likelihood_profile
from ql_order.signal_model import (
    ComponentParams,
    Envelope,
    Observation,
    ParamErrors,
    SignalSpec,
    apply_errors,
    constant_envelope,
    omega_step,
    synthesize,
)
from ql_order.theory import (
    DecisionStats,
    ErrorBox,
    abridged_error,
    abridged_error_approx,
    abridged_error_at,
    abridged_error_exact,
    approx_valid,
    decision_stats,
    noise_projections,
    normal_cdf,
    worst_case_abridged,
)


FREQUENCIES = [1.2075, 1.2566, 1.3057, 1.3548, 1.4039]
PHASES = [0.0, math.pi / 4, math.pi / 3, math.pi / 5, math.pi / 6]
STEP = omega_step(128)
FIVE_TONE_ERRORS = ParamErrors.from_relative(0.25, 0.02, 0.1, a0=0.4, omega_step=STEP)


def tone_spec(nu_true, nu_max):
    """Equal tones of amplitude 0.4 on 128 samples."""
    params = [ComponentParams(0.4, freq, phase) for freq, phase in zip(FREQUENCIES[:nu_max], PHASES[:nu_max])]
    return SignalSpec.from_params(params, 128, nu_true=nu_true)


def grid_abridged(r, q, rho, half_width=9.0, points=300):
    """Tensor Gauss-Legendre grid for ``1 - Pr(X > -R, Y < Q)``, truncated at ``half_width``."""
    nodes, weights = np.polynomial.legendre.leggauss(points)

    def mapped(low, high):
        half = 0.5 * (high - low)
        return low + half * (nodes + 1.0), half * weights

    x, wx = mapped(-r, half_width)
    y, wy = mapped(-half_width, q)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    det = 1.0 - rho * rho
    density = np.exp(-(xx * xx - 2 * rho * xx * yy + yy * yy) / (2 * det)) / (2 * math.pi * math.sqrt(det))
    return 1.0 - float(wx @ density @ wy)


def test_normal_cdf_values():
    """Symmetry and a familiar quantile."""
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.959963985) == pytest.approx(0.975, abs=1e-9)
    assert normal_cdf(-math.inf) == 0.0
    assert normal_cdf(math.inf) == 1.0
    with pytest.raises(InvalidArgumentError):
        normal_cdf(math.nan)


def test_normal_cdf_against_ndtr():
    """Absolute error below 1e-12 on [-8, 8]."""
    for x in np.linspace(-8.0, 8.0, 1000):
        assert abs(normal_cdf(float(x)) - float(special.ndtr(x))) < 1e-12


@given(x=st.floats(min_value=-30.0, max_value=30.0))
def test_normal_cdf_symmetry(x):
    """Phi(x) + Phi(-x) = 1."""
    assert normal_cdf(x) + normal_cdf(-x) == pytest.approx(1.0, abs=1e-14)


def test_decision_stats_validation():
    """NaN margins and correlations beyond one are rejected; rounding overshoot is clipped."""
    with pytest.raises(InvalidArgumentError):
        DecisionStats(r=math.nan, q=1.0, rho=0.0)
    with pytest.raises(InvalidArgumentError):
        DecisionStats(r=1.0, q=1.0, rho=1.0 + 1e-9)
    assert DecisionStats(r=1.0, q=1.0, rho=1.0 + 1e-13).rho == 1.0


def test_rho_zero_factorises():
    """Uncorrelated projections give 1 - Phi(R) Phi(Q)."""
    rng = np.random.default_rng(3)
    for r, q in rng.uniform(-3, 6, size=(50, 2)):
        expected = 1.0 - normal_cdf(r) * normal_cdf(q)
        stats = DecisionStats(r=r, q=q, rho=0.0)
        assert abridged_error_exact(stats) == pytest.approx(expected, abs=1e-10)
        assert abridged_error_approx(stats) == pytest.approx(abridged_error_exact(stats), abs=1e-15)


def test_quarter_plane():
    """Zero margins without correlation fail three times out of four."""
    assert abridged_error_exact(DecisionStats(r=0.0, q=0.0, rho=0.0)) == pytest.approx(0.75, abs=1e-12)


def test_exact_against_grid_integration():
    """Quadrature matches a 2-D brute-force integration of the bivariate normal."""
    assert abridged_error_exact(DecisionStats(4.0, 4.0, 0.5)) == pytest.approx(grid_abridged(4.0, 4.0, 0.5), abs=1e-6)
    rng = np.random.default_rng(17)
    for _ in range(50):
        r, q = rng.uniform(-2.0, 4.0, size=2)
        rho = rng.uniform(-0.95, 0.95)
        exact = abridged_error_exact(DecisionStats(r, q, rho))
        assert exact == pytest.approx(grid_abridged(r, q, rho), abs=1e-6)


def test_exact_with_double_quadrature():
    """Quadrature agrees with a 2-D adaptive integration of the success region."""
    r, q, rho = 2.5, 3.0, -0.6
    det = 1.0 - rho * rho

    def density(y, x):
        return math.exp(-(x * x - 2 * rho * x * y + y * y) / (2 * det)) / (2 * math.pi * math.sqrt(det))

    success, _ = integrate.dblquad(density, -r, 12.0, -12.0, q, epsabs=1e-13, epsrel=1e-11)
    assert abridged_error_exact(DecisionStats(r, q, rho)) == pytest.approx(1.0 - success, rel=1e-7)


def test_exact_infinite_margins():
    """Infinite margins switch comparisons on or off."""
    assert abridged_error_exact(DecisionStats(math.inf, math.inf, 0.3)) == 0.0
    assert abridged_error_exact(DecisionStats(-math.inf, 2.0, 0.3)) == 1.0
    assert abridged_error_exact(DecisionStats(math.inf, 1.5, 0.3)) == pytest.approx(normal_cdf(-1.5))
    assert abridged_error_exact(DecisionStats(1.5, math.inf, 0.3)) == pytest.approx(normal_cdf(-1.5))
    assert abridged_error_approx(DecisionStats(math.inf, math.inf, 0.3)) == 0.0


def test_exact_degenerate_correlation():
    """Perfectly correlated projections use the closed forms."""
    assert abridged_error_exact(DecisionStats(1.0, 2.0, 1.0)) == pytest.approx(normal_cdf(-1.0) + normal_cdf(-2.0))
    assert abridged_error_exact(DecisionStats(-3.0, 2.0, 1.0)) == 1.0
    assert abridged_error_exact(DecisionStats(1.0, 2.0, -1.0)) == pytest.approx(normal_cdf(-1.0))
    near = abridged_error_exact(DecisionStats(1.0, 2.0, 1.0 - 1e-7))
    assert near == pytest.approx(normal_cdf(-1.0) + normal_cdf(-2.0), abs=1e-3)


@settings(max_examples=60, deadline=None)
@given(
    r=st.floats(min_value=-4.0, max_value=8.0),
    q=st.floats(min_value=-4.0, max_value=8.0),
    rho=st.floats(min_value=-0.99, max_value=0.99),
    step=st.floats(min_value=0.05, max_value=2.0),
)
def test_exact_monotone_and_bounded(r, q, rho, step):
    """Larger margins never increase the error probability, which stays in [0, 1]."""
    base = abridged_error_exact(DecisionStats(r, q, rho))
    assert 0.0 <= base <= 1.0
    assert abridged_error_exact(DecisionStats(r + step, q, rho)) <= base + 1e-9
    assert abridged_error_exact(DecisionStats(r, q + step, rho)) <= base + 1e-9


def test_exact_vanishes_with_margins():
    """Growing margins drive the error probability to zero."""
    values = [abridged_error_exact(DecisionStats(m, m, 0.5)) for m in (2.0, 4.0, 6.0, 8.0)]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))
    assert values[-1] < 1e-12


def test_approx_close_to_exact():
    """The approximation is within 10 % at R = Q = 3.5, rho = 0.5."""
    stats = DecisionStats(3.5, 3.5, 0.5)
    assert abridged_error_approx(stats) == pytest.approx(abridged_error_exact(stats), rel=0.1)


def test_approx_relative_error_decreases_along_rays():
    """Relative approximation error shrinks as the smaller margin grows."""
    for rho in (-0.8, -0.3, 0.3, 0.8):
        errors = []
        for margin in (3.0, 3.5, 4.0, 4.5, 5.0):
            stats = DecisionStats(margin, margin, rho)
            exact = abridged_error_exact(stats)
            errors.append(abs(abridged_error_approx(stats) - exact) / exact)
        assert all(later <= earlier + 1e-9 for earlier, later in zip(errors, errors[1:]))


def test_approx_valid():
    """The approximation applies for min(R, Q) > 3 and |rho| < 0.9."""
    assert approx_valid(DecisionStats(4.0, 4.0, 0.0))
    assert not approx_valid(DecisionStats(2.9, 10.0, 0.0))
    assert not approx_valid(DecisionStats(10.0, 10.0, 0.95))
    result = abridged_error(DecisionStats(4.0, 4.0, 0.0))
    assert result.approx_valid
    assert result.p_exact == pytest.approx(result.p_approx, rel=1e-12)


def test_decision_stats_orthogonal_components():
    """Components with zero cross-correlation give rho = 0."""
    n_samples = 64
    step = omega_step(n_samples)
    params = [ComponentParams(1.0, k * step, 0.0) for k in (4, 5, 6)]
    stats = decision_stats(params, params, [constant_envelope(n_samples)] * 3, sigma=1.0, nu0=2)
    assert stats.rho == pytest.approx(0.0, abs=1e-12)


def test_decision_stats_grow_with_snr():
    """Without errors both margins are positive and scale as 1 / sigma."""
    spec = tone_spec(2, 3)
    first = decision_stats(spec.params, spec.params, spec.envelopes, sigma=1.0, nu0=2)
    second = decision_stats(spec.params, spec.params, spec.envelopes, sigma=0.25, nu0=2)
    assert first.r > 0 and first.q > 0
    assert second.r == pytest.approx(4 * first.r)
    assert second.q == pytest.approx(4 * first.q)
    assert second.rho == first.rho


def test_decision_stats_lowest_order():
    """With one true component there is no lower comparison."""
    spec = tone_spec(1, 2)
    stats = decision_stats(spec.params, spec.params, spec.envelopes, sigma=1.0, nu0=1)
    assert stats.r == math.inf
    assert abridged_error_exact(stats) == pytest.approx(normal_cdf(-stats.q))


def test_decision_stats_zero_amplitudes():
    """A zero measured amplitude turns the comparison into a tie."""
    spec = tone_spec(2, 3)
    measured = list(spec.params)
    measured[1] = ComponentParams(0.0, measured[1].frequency, measured[1].phase)
    assert decision_stats(spec.params, measured, spec.envelopes, 1.0, 2).r == -math.inf
    measured = list(spec.params)
    measured[2] = ComponentParams(0.0, measured[2].frequency, measured[2].phase)
    assert decision_stats(spec.params, measured, spec.envelopes, 1.0, 2).q == math.inf


def test_decision_stats_degenerate_component():
    """A vanishing reference waveform is a numerical degeneracy."""
    spec = tone_spec(2, 3)
    zero = Envelope(amp=np.zeros(128), phase=np.zeros(128))
    envelopes = [spec.envelopes[0], spec.envelopes[1], zero]
    with pytest.raises(DegenerateComponentError):
        decision_stats(spec.params, spec.params, envelopes, 1.0, 2)


def test_decision_stats_order_range():
    """nu0 + 1 components are needed."""
    spec = tone_spec(3, 3)
    with pytest.raises(InvalidArgumentError):
        decision_stats(spec.params, spec.params, spec.envelopes, 1.0, 3)


def test_rho_bounded():
    """The correlation never leaves [-1, 1] for random components and envelopes."""
    rng = np.random.default_rng(99)
    for _ in range(10_000):
        n_samples = int(rng.integers(1, 16))
        params = [
            ComponentParams(rng.uniform(-2, 2), rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi))
            for _ in range(2)
        ]
        envelopes = [
            Envelope(amp=rng.uniform(0.1, 2.0, n_samples), phase=rng.uniform(-3, 3, n_samples)) for _ in range(2)
        ]
        kmat = correlation_matrix(params, envelopes)
        rho = kmat[0, 1] / math.sqrt(kmat[0, 0] * kmat[1, 1])
        assert abs(rho) <= 1.0 + 1e-12
        if kmat[0, 0] > 0 and kmat[1, 1] > 0:
            stats = decision_stats(params[:1], params, envelopes, sigma=1.0, nu0=1)
            assert -1.0 <= stats.rho <= 1.0


def test_margins_match_likelihood_differences():
    """Likelihood differences are the margins shifted by the normalised noise projections."""
    spec = tone_spec(2, 3)
    measured = apply_errors(spec.params, FIVE_TONE_ERRORS)
    sigma = 0.8
    stats = decision_stats(spec.params, measured, spec.envelopes, sigma, 2)
    kmat = correlation_matrix(measured, spec.envelopes)
    signal = synthesize(spec, 2)
    rng = np.random.default_rng(5)
    for _ in range(20):
        noise = rng.normal(size=128)
        profile = likelihood_profile(Observation(signal + sigma * noise, sigma), measured, spec.envelopes)
        xi = noise_projections(measured, spec.envelopes, sigma, noise)
        lower = (profile[2] - profile[1]) * sigma / (measured[1].amplitude * math.sqrt(kmat[1, 1]))
        upper = (profile[3] - profile[2]) * sigma / (measured[2].amplitude * math.sqrt(kmat[2, 2]))
        assert lower - xi[1].xi == pytest.approx(stats.r, rel=1e-9, abs=1e-9)
        assert upper - xi[2].xi == pytest.approx(-stats.q, rel=1e-9, abs=1e-9)


def test_noise_projection_statistics():
    """Normalised projections are standard normal with correlation rho."""
    spec = tone_spec(2, 3)
    measured = apply_errors(spec.params, FIVE_TONE_ERRORS)
    stats = decision_stats(spec.params, measured, spec.envelopes, 1.0, 2)
    noise = np.random.default_rng(8).normal(size=(40_000, 128))
    xi = noise_projections(measured, spec.envelopes, 1.0, noise)
    low, high = xi[1].xi, xi[2].xi
    n_draws = low.size
    assert abs(low.mean()) < 4 / math.sqrt(n_draws)
    assert abs(high.mean()) < 4 / math.sqrt(n_draws)
    assert low.std() == pytest.approx(1.0, abs=4 * math.sqrt(2 / n_draws))
    corr = float(np.corrcoef(low, high)[0, 1])
    assert abs(corr - stats.rho) < 4 * (1 - stats.rho**2) / math.sqrt(n_draws)


def test_abridged_matches_empirical_neighbour_errors():
    """The probability that L(nu0) loses to a neighbour matches simulated projections."""
    spec = tone_spec(2, 3)
    measured = apply_errors(spec.params, FIVE_TONE_ERRORS)
    stats = decision_stats(spec.params, measured, spec.envelopes, 1.0, 2)
    noise = np.random.default_rng(21).normal(size=(40_000, 128))
    xi = noise_projections(measured, spec.envelopes, 1.0, noise)
    lost = (xi[1].xi <= -stats.r) | (xi[2].xi >= stats.q)
    p_hat = float(lost.mean())
    p_exact = abridged_error_exact(stats)
    assert abs(p_hat - p_exact) < 4 * math.sqrt(p_exact * (1 - p_exact) / lost.size)


def test_error_box_constructors():
    """Relative, shared, per-component and true-interval boxes."""
    box = ErrorBox.from_relative((-0.25, 0.25), (-0.02, 0.02), (-0.1, 0.1), a0=0.4, omega_step=STEP)
    np.testing.assert_allclose(box.lower, [-0.1, -0.02 * STEP, -0.1])
    np.testing.assert_allclose(box.center(), [0.0, 0.0, 0.0], atol=1e-18)
    assert box.active_dims() == [0, 1, 2]
    assert box.errors_at([0.1, 0.0, 0.0]) == ParamErrors(0.1, 0.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        ErrorBox.shared_box((1.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    measured = [ComponentParams(0.5, 1.0, 0.2)]
    box = ErrorBox.from_true_intervals(measured, [(0.3, 0.45)], [(0.99, 1.0)], [(0.2, 0.2)])
    assert not box.shared
    np.testing.assert_allclose(box.lower, [0.05, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(box.upper, [0.2, 0.01, 0.0], atol=1e-15)
    assert box.active_dims() == [0, 1]


def test_worst_case_point_box():
    """A zero-width box evaluates its single point."""
    spec = tone_spec(2, 3)
    box = ErrorBox.shared_box((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    p_max, errors = worst_case_abridged(spec, box, sigma=1.0, nu0=2)
    assert p_max == abridged_error_at(spec, ParamErrors(), 1.0, 2)
    assert errors == ParamErrors()


def test_worst_case_amplitude_only_at_corner():
    """With only amplitude errors the maximum sits at a box corner."""
    spec = tone_spec(2, 3)
    box = ErrorBox.from_relative((-0.25, 0.25), (0.0, 0.0), (0.0, 0.0), a0=0.4, omega_step=STEP)
    p_max, errors = worst_case_abridged(spec, box, sigma=1.0, nu0=2)
    dense = [abridged_error_at(spec, ParamErrors(d_amp=d), 1.0, 2) for d in np.linspace(-0.1, 0.1, 201)]
    assert p_max >= max(dense) - 1e-12
    assert abs(errors.d_amp) == pytest.approx(0.1, abs=1e-6)


def test_worst_case_dominates_center_and_nested_boxes():
    """The maximum is at least the center value and grows with the box."""
    spec = tone_spec(2, 3)
    small = ErrorBox.from_relative((-0.1, 0.1), (-0.01, 0.01), (-0.05, 0.05), a0=0.4, omega_step=STEP)
    large = ErrorBox.from_relative((-0.25, 0.25), (-0.02, 0.02), (-0.1, 0.1), a0=0.4, omega_step=STEP)
    p_small, _ = worst_case_abridged(spec, small, sigma=1.0, nu0=2, grid_points=5)
    p_large, _ = worst_case_abridged(spec, large, sigma=1.0, nu0=2, grid_points=5)
    assert p_small >= abridged_error_at(spec, small.errors_at(small.center()), 1.0, 2)
    assert p_small <= p_large + 1e-6
    assert 0.0 < p_large < 1.0


def test_worst_case_per_component_cyclic_scan():
    """Boxes beyond the product-grid limit use coordinate scans."""
    spec = tone_spec(2, 3)
    boxes = [[(-0.05, 0.05), (-0.002, 0.002), (-0.05, 0.05)]] * 3
    box = ErrorBox.per_component(boxes)
    p_max, errors = worst_case_abridged(spec, box, sigma=1.0, nu0=2, grid_points=3, refine=False)
    assert len(errors) == 3
    assert p_max >= abridged_error_at(spec, box.errors_at(box.center()), 1.0, 2)
    with pytest.raises(InvalidArgumentError):
        worst_case_abridged(spec, ErrorBox.per_component(boxes[:2]), sigma=1.0, nu0=2)
