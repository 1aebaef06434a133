"""
Abridged error probability of the quasi-likelihood order estimator.

The abridged error probability is the probability that ``L(nu0)`` fails to beat at least one of its
neighbours ``L(nu0 - 1)`` and ``L(nu0 + 1)``. With the normalised noise projections ``xi`` it reads
``1 - Pr(xi_nu0 > -R, xi_nu0+1 < Q)`` where ``(xi_nu0, xi_nu0+1)`` is a standard bivariate normal pair
with correlation ``rho``.
"""
from dataclasses import dataclass
import itertools
import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize, special

from ql_order.errors import DegenerateComponentError, InvalidArgumentError
from ql_order.likelihood import correlation_matrix, cross_correlation_matrix
from ql_order.signal_model import ComponentParams, Envelope, ParamErrors, SignalSpec, apply_errors, reference_waveform


logger = logging.getLogger(__name__)

RHO_TOLERANCE = 1e-12
DEGENERATE_RHO = 1e-10
QUADRATURE_LOWER = -12.0  # Phi(-12) < 1e-32
QUADRATURE_EPSREL = 1e-10
QUADRATURE_EPSABS = 1e-15
APPROX_MIN_MARGIN = 3.0
APPROX_MAX_RHO = 0.9
SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class DecisionStats:
    """
    Normalised decision margins and noise correlation.

    ``r`` is the margin of ``L(nu0)`` against ``L(nu0 - 1)``, ``q`` the margin against ``L(nu0 + 1)``.
    Infinite margins encode a missing or a trivially decided comparison.
    """

    r: float
    q: float
    rho: float

    def __post_init__(self):
        r, q, rho = float(self.r), float(self.q), float(self.rho)
        if math.isnan(r) or math.isnan(q):
            raise InvalidArgumentError(f"R and Q must not be NaN, got R={r}, Q={q}")
        if not math.isfinite(rho) or abs(rho) > 1.0 + RHO_TOLERANCE:
            raise InvalidArgumentError(f"|rho| must not exceed 1, got rho={rho}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "rho", max(-1.0, min(1.0, rho)))


@dataclass(frozen=True)
class NoiseProjection:
    """Noise projection ``eta`` onto a measured waveform and its normalised form ``xi``."""

    eta: Union[float, np.ndarray]
    xi: Union[float, np.ndarray]


@dataclass(frozen=True)
class AbridgedResult:
    """Exact and approximate abridged error probability."""

    p_exact: float
    p_approx: float
    approx_valid: bool


@dataclass(frozen=True)
class ErrorBox:
    """
    Closed intervals for the absolute measurement errors.

    ``intervals`` holds ``(low, high)`` pairs ordered ``(d_amp, d_freq, d_phase)``: one triple if ``shared``
    (all components carry the same errors), otherwise one triple per component in model order.
    """

    intervals: Tuple[Tuple[float, float], ...]
    shared: bool = True

    def __post_init__(self):
        intervals = tuple((float(low), float(high)) for low, high in self.intervals)
        if not intervals or len(intervals) % 3:
            raise InvalidArgumentError(f"expected a multiple of 3 intervals, got {len(intervals)}")
        if self.shared and len(intervals) != 3:
            raise InvalidArgumentError(f"a shared box has exactly 3 intervals, got {len(intervals)}")
        for low, high in intervals:
            if not (math.isfinite(low) and math.isfinite(high)) or low > high:
                raise InvalidArgumentError(f"invalid interval [{low}, {high}]")
        object.__setattr__(self, "intervals", intervals)

    @classmethod
    def shared_box(
        cls, d_amp: Tuple[float, float], d_freq: Tuple[float, float], d_phase: Tuple[float, float]
    ) -> "ErrorBox":
        """Box of absolute errors shared by all components."""
        return cls(intervals=(d_amp, d_freq, d_phase), shared=True)

    @classmethod
    def from_relative(
        cls,
        delta_a: Tuple[float, float],
        delta_omega: Tuple[float, float],
        delta_phi: Tuple[float, float],
        a0: float,
        omega_step: float,
    ) -> "ErrorBox":
        """Shared box from relative amplitude and frequency errors and absolute phase errors."""
        return cls.shared_box(
            (delta_a[0] * a0, delta_a[1] * a0),
            (delta_omega[0] * omega_step, delta_omega[1] * omega_step),
            delta_phi,
        )

    @classmethod
    def per_component(cls, boxes: Sequence[Sequence[Tuple[float, float]]]) -> "ErrorBox":
        """Box with one ``(d_amp, d_freq, d_phase)`` interval triple per component."""
        return cls(intervals=tuple(interval for triple in boxes for interval in triple), shared=False)

    @classmethod
    def from_true_intervals(
        cls,
        measured: Sequence[ComponentParams],
        amp_bounds: Sequence[Tuple[float, float]],
        freq_bounds: Sequence[Tuple[float, float]],
        phase_bounds: Sequence[Tuple[float, float]],
    ) -> "ErrorBox":
        """
        Box of errors implied by known measured values and intervals containing the true values.

        With ``true in [left, right]`` the error ``measured - true`` lies in ``[measured - right, measured - left]``.
        """
        if not len(measured) == len(amp_bounds) == len(freq_bounds) == len(phase_bounds):
            raise InvalidArgumentError("measured values and bounds must have the same number of components")
        boxes = []
        for meas, amp, freq, phase in zip(measured, amp_bounds, freq_bounds, phase_bounds):
            boxes.append(
                [
                    (meas.amplitude - amp[1], meas.amplitude - amp[0]),
                    (meas.frequency - freq[1], meas.frequency - freq[0]),
                    (meas.phase - phase[1], meas.phase - phase[0]),
                ]
            )
        return cls.per_component(boxes)

    @property
    def lower(self) -> np.ndarray:
        """Lower interval ends."""
        return np.array([low for low, _ in self.intervals])

    @property
    def upper(self) -> np.ndarray:
        """Upper interval ends."""
        return np.array([high for _, high in self.intervals])

    def center(self) -> np.ndarray:
        """Midpoint of the box."""
        return 0.5 * (self.lower + self.upper)

    def active_dims(self) -> List[int]:
        """Indices of intervals with positive width."""
        return [idx for idx, (low, high) in enumerate(self.intervals) if high > low]

    def errors_at(self, point: Sequence[float]) -> Union[ParamErrors, List[ParamErrors]]:
        """Turn a point of the box into error triples."""
        triples = [ParamErrors(*point[idx : idx + 3]) for idx in range(0, len(point), 3)]
        if self.shared:
            return triples[0]
        return triples


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    if math.isnan(x):
        raise InvalidArgumentError("normal_cdf is undefined for NaN")
    return float(0.5 * special.erfc(-x / math.sqrt(2.0)))


def normal_pdf(x: float) -> float:
    """Standard normal density."""
    return math.exp(-0.5 * x * x) / SQRT_2PI


def _sign(value: float) -> float:
    return -1.0 if value < 0.0 else 1.0


def decision_stats(
    true_params: Sequence[ComponentParams],
    measured_params: Sequence[ComponentParams],
    envelopes: Sequence[Envelope],
    sigma: float,
    nu0: int,
) -> DecisionStats:
    """
    Compute ``(R, Q, rho)`` for the true order ``nu0``.

    ``rho = K**[nu0, nu0+1] / sqrt(K**[nu0, nu0] K**[nu0+1, nu0+1])`` carries no ``sigma``: it is the
    correlation of two unit-variance projections. Negative measured amplitudes flip the orientation of
    the corresponding comparison; the flip is folded into ``R``, ``Q`` and ``rho``. A zero measured
    amplitude makes the comparison a tie: ``R = -inf`` for component ``nu0`` (the smaller order wins
    ties) and ``Q = +inf`` for component ``nu0 + 1``. For ``nu0 = 1`` there is no lower hypothesis and
    ``R = +inf``.
    """
    if nu0 < 1 or nu0 + 1 > len(measured_params):
        raise InvalidArgumentError(f"nu0={nu0} requires components 1..{nu0 + 1}, got {len(measured_params)}")
    if len(true_params) < nu0:
        raise InvalidArgumentError(f"nu0={nu0} true components required, got {len(true_params)}")
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise InvalidArgumentError(f"sigma must be positive and finite, got {sigma}")
    measured = list(measured_params[: nu0 + 1])
    kmat = correlation_matrix(measured, envelopes)
    kstar = cross_correlation_matrix(measured, list(true_params[:nu0]), envelopes)
    a_true = np.array([p.amplitude for p in true_params[:nu0]])
    a_meas = np.array([p.amplitude for p in measured])
    low, high = nu0 - 1, nu0  # 0-based rows of components nu0 and nu0 + 1
    k_low, k_high = kmat[low, low], kmat[high, high]
    if k_low <= 0.0 or k_high <= 0.0:
        raise DegenerateComponentError(
            f"zero reference waveform energy: K**[{nu0},{nu0}]={k_low}, K**[{nu0 + 1},{nu0 + 1}]={k_high}"
        )

    if nu0 == 1:
        r = math.inf
    elif a_meas[low] == 0.0:
        r = -math.inf
    else:
        margin = math.fsum(
            [math.fsum(a_true * kstar[low, :]), -0.5 * a_meas[low] * k_low]
            + [-a_meas[j] * kmat[low, j] for j in range(low)]
        )
        r = _sign(a_meas[low]) * margin / (sigma * math.sqrt(k_low))

    if a_meas[high] == 0.0:
        q = math.inf
    else:
        margin = math.fsum(
            [-math.fsum(a_true * kstar[high, :]), 0.5 * a_meas[high] * k_high]
            + [a_meas[j] * kmat[high, j] for j in range(high)]
        )
        q = _sign(a_meas[high]) * margin / (sigma * math.sqrt(k_high))

    rho = _sign(a_meas[low]) * _sign(a_meas[high]) * kmat[low, high] / math.sqrt(k_low * k_high)
    stats = DecisionStats(r=r, q=q, rho=rho)
    logger.debug(f"Decision stats nu0={nu0}, sigma={sigma}: {stats}")
    return stats


def noise_projections(
    measured: Sequence[ComponentParams], envelopes: Sequence[Envelope], sigma: float, noise: np.ndarray
) -> List[NoiseProjection]:
    """
    Project unit noise onto each measured waveform.

    ``eta_i = sigma * sum_t n(t) f_i(t) cos(omega_i t + Psi_i(t) - phi_i)`` and
    ``xi_i = eta_i / (sigma * sqrt(K**[i, i]))``. ``noise`` may hold one draw per row.
    """
    noise = np.asarray(noise, dtype=np.float64)
    kmat = correlation_matrix(measured, envelopes)
    projections = []
    for idx, (params, env) in enumerate(zip(measured, envelopes)):
        if kmat[idx, idx] <= 0.0:
            raise DegenerateComponentError(f"component {idx + 1} has a zero reference waveform")
        eta = sigma * (noise @ reference_waveform(params, env))
        projections.append(NoiseProjection(eta=eta, xi=eta / (sigma * math.sqrt(kmat[idx, idx]))))
    return projections


def _one_sided(margin: float) -> float:
    # only one comparison is active
    return normal_cdf(-margin)


def abridged_error_exact(stats: DecisionStats) -> float:
    """
    Abridged error probability by adaptive quadrature.

    Evaluated in the complementary form ``Phi(-Q) + int_{-inf}^{Q} phi(y) Phi(-(R + rho y) / sqrt(1 - rho^2)) dy``
    which equals ``1 - int_{-inf}^{Q} phi(y) Phi((R + rho y) / sqrt(1 - rho^2)) dy`` and keeps relative accuracy
    in the tails. The integral is truncated below at -12.
    """
    r, q, rho = stats.r, stats.q, stats.rho
    if r == -math.inf or q == -math.inf:
        return 1.0
    if r == math.inf:
        return _one_sided(q)
    if q == math.inf:
        return _one_sided(r)
    if rho == 0.0:
        return _clamp(normal_cdf(-q) + normal_cdf(-r) * normal_cdf(q))
    if 1.0 - abs(rho) < DEGENERATE_RHO:
        return _clamp(_abridged_degenerate(r, q, rho))

    scale = math.sqrt(1.0 - rho * rho)
    upper = min(q, -QUADRATURE_LOWER)
    tail = normal_cdf(-q)
    if upper <= QUADRATURE_LOWER:
        return _clamp(tail)

    def integrand(y: float) -> float:
        return normal_pdf(y) * normal_cdf(-(r + rho * y) / scale)

    points = None
    # inner CDF crosses 1/2 here, steeply when |rho| is near 1
    transition = -r / rho
    if QUADRATURE_LOWER < transition < upper:
        points = [transition]
    value, abserr = integrate.quad(
        integrand,
        QUADRATURE_LOWER,
        upper,
        epsabs=QUADRATURE_EPSABS,
        epsrel=QUADRATURE_EPSREL,
        limit=200,
        points=points,
    )
    logger.debug(f"Quadrature R={r}, Q={q}, rho={rho}: {value} (+- {abserr})")
    return _clamp(tail + value)


def _abridged_degenerate(r: float, q: float, rho: float) -> float:
    if rho > 0.0:
        # xi_nu0 == xi_nu0+1: success iff -R < y < Q
        if q <= -r:
            return 1.0
        return normal_cdf(-r) + normal_cdf(-q)
    # xi_nu0 == -xi_nu0+1: success iff y < min(R, Q)
    return normal_cdf(-min(r, q))


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))


def abridged_error_approx(stats: DecisionStats) -> float:
    """Asymptotic approximation ``1 - Phi(R) Phi(Q) + rho / (2 pi) exp(-R^2 / 2) exp(-Q^2 / 2)``."""
    r, q, rho = stats.r, stats.q, stats.rho
    # 1 - Phi(R) Phi(Q) written without cancellation
    base = normal_cdf(-q) + normal_cdf(-r) * normal_cdf(q)
    correction = rho / (2.0 * math.pi) * math.exp(-0.5 * r * r) * math.exp(-0.5 * q * q)
    return base + correction


def approx_valid(stats: DecisionStats) -> bool:
    """Return True where the approximation may replace the exact formula: ``min(Q, R) > 3`` and ``|rho| < 0.9``."""
    return min(stats.q, stats.r) > APPROX_MIN_MARGIN and abs(stats.rho) < APPROX_MAX_RHO


def abridged_error(stats: DecisionStats) -> AbridgedResult:
    """Exact and approximate abridged error probability with the validity flag."""
    return AbridgedResult(
        p_exact=abridged_error_exact(stats),
        p_approx=abridged_error_approx(stats),
        approx_valid=approx_valid(stats),
    )


def abridged_error_at(
    spec: SignalSpec, errors: Union[ParamErrors, Sequence[ParamErrors]], sigma: float, nu0: int
) -> float:
    """Exact abridged error probability when the measured parameters deviate from ``spec`` by ``errors``."""
    measured = apply_errors(spec.params, errors)
    return abridged_error_exact(decision_stats(spec.params, measured, spec.envelopes, sigma, nu0))


def worst_case_abridged(
    spec: SignalSpec,
    box: ErrorBox,
    sigma: float,
    nu0: int,
    grid_points: int = 11,
    max_grid_dims: int = 6,
    max_cycles: int = 4,
    refine: bool = True,
) -> Tuple[float, Union[ParamErrors, List[ParamErrors]]]:
    """
    Maximise the exact abridged error probability over the error box.

    A product grid of ``grid_points`` per active dimension is scanned when there are at most
    ``max_grid_dims`` active dimensions, otherwise cyclic coordinate scans over the same 1-D grids are run.
    The best scanned point is refined with bounded Nelder-Mead. Ties go to the lexicographically smallest
    error vector.
    """
    if grid_points < 2:
        raise InvalidArgumentError(f"grid_points must be at least 2, got {grid_points}")
    if not box.shared and len(box.intervals) != 3 * spec.nu_max:
        raise InvalidArgumentError(
            f"per-component box has {len(box.intervals) // 3} components, signal has {spec.nu_max}"
        )
    active = box.active_dims()
    base = box.lower.copy()

    def evaluate(point: np.ndarray) -> float:
        return abridged_error_at(spec, box.errors_at(point), sigma, nu0)

    if not active:
        p_point = evaluate(base)
        return p_point, box.errors_at(base)

    grids = [np.linspace(box.intervals[dim][0], box.intervals[dim][1], grid_points) for dim in active]
    if len(active) <= max_grid_dims:
        best_p, best_point = _scan_product(evaluate, base, active, grids)
    else:
        best_p, best_point = _scan_cyclic(evaluate, box.center(), active, grids, max_cycles)
    center = box.center()
    p_center = evaluate(center)
    if p_center > best_p:
        best_p, best_point = p_center, center
    logger.info(f"Grid scan over {len(active)} active dimensions: p_max={best_p}")

    if refine:
        refined_p, refined_point = _refine(evaluate, best_point, active, box)
        if refined_p is not None and refined_p > best_p:
            logger.debug(f"Refinement improved p_max from {best_p} to {refined_p}")
            best_p, best_point = refined_p, refined_point
    return best_p, box.errors_at(best_point)


def _scan_product(evaluate, base: np.ndarray, active: List[int], grids: List[np.ndarray]):
    best_p, best_point = -math.inf, base
    # itertools.product yields ascending lexicographic order; strict '>' keeps the smallest tie
    for values in itertools.product(*grids):
        point = base.copy()
        point[active] = values
        p_point = evaluate(point)
        if p_point > best_p:
            best_p, best_point = p_point, point
    return best_p, best_point


def _scan_cyclic(evaluate, start: np.ndarray, active: List[int], grids: List[np.ndarray], max_cycles: int):
    best_point = start.copy()
    best_p = evaluate(best_point)
    for cycle in range(max_cycles):
        improved = False
        for dim, grid in zip(active, grids):
            for value in grid:
                point = best_point.copy()
                point[dim] = value
                p_point = evaluate(point)
                if p_point > best_p or (p_point == best_p and tuple(point) < tuple(best_point)):
                    improved = improved or p_point > best_p
                    best_p, best_point = p_point, point
        logger.debug(f"Coordinate cycle {cycle + 1}: p_max={best_p}")
        if not improved:
            break
    return best_p, best_point


def _refine(evaluate, start: np.ndarray, active: List[int], box: ErrorBox) -> Tuple[Optional[float], np.ndarray]:
    lower, upper = box.lower[active], box.upper[active]
    x_start = start[active]

    def objective(values: np.ndarray) -> float:
        point = start.copy()
        point[active] = np.clip(values, lower, upper)
        return -evaluate(point)

    # initial simplex: one grid-scale step per dimension, pointing into the box
    simplex = [x_start]
    for idx in range(len(active)):
        step = 0.1 * (upper[idx] - lower[idx])
        vertex = x_start.copy()
        vertex[idx] = vertex[idx] + step if vertex[idx] + step <= upper[idx] else vertex[idx] - step
        simplex.append(vertex)
    result = optimize.minimize(
        objective,
        x_start,
        method="Nelder-Mead",
        bounds=list(zip(lower, upper)),
        options={"initial_simplex": np.array(simplex), "xatol": 1e-9, "fatol": 1e-12, "maxiter": 400},
    )
    if not np.isfinite(result.fun):
        return None, start
    point = start.copy()
    point[active] = np.clip(result.x, lower, upper)
    return evaluate(point), point
