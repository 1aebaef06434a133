"""
Correlation coefficients, the substituted log-likelihood and the quasi-likelihood order estimate.

All trigonometric sums are accumulated with :func:`math.fsum` (exactly rounded), so results do not depend
on summation order or BLAS blocking. The envelope product ``f_i * f_j`` is part of every correlation sum.
"""
from dataclasses import dataclass
import logging
import math
from typing import Sequence

import numpy as np

from ql_order.errors import InvalidArgumentError
from ql_order.signal_model import ComponentParams, Envelope, Observation, reference_waveform, time_index


logger = logging.getLogger(__name__)

ROLES = ("measured", "true")


@dataclass(frozen=True)
class CorrelationDecomposition:
    """Half-sums over difference (V) and sum (W) frequencies of one (i, j) pair."""

    v_cos: float
    v_sin: float
    w_cos: float
    w_sin: float
    role: str = "measured"
    """Role of component j: ``measured`` for K**, ``true`` for K*."""


@dataclass(frozen=True, eq=False)
class LikelihoodProfile:
    """Log-likelihood ``L(nu)`` for ``nu = 1..nu_max``; ``values[nu - 1]`` belongs to ``nu``."""

    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, nu: int) -> float:
        if not 1 <= nu <= self.values.size:
            raise IndexError(f"order {nu} outside 1..{self.values.size}")
        return float(self.values[nu - 1])

    def best_order(self) -> int:
        """Order maximising the profile; ties go to the smallest order."""
        return int(np.argmax(self.values)) + 1


def _check_same_length(i_env: Envelope, j_env: Envelope):
    if len(i_env) != len(j_env):
        raise InvalidArgumentError(f"envelope lengths differ ({len(i_env)} != {len(j_env)})")


def _fsum_dot(first: np.ndarray, second: np.ndarray) -> float:
    return math.fsum((first * second).tolist())


def k_double_star(i_params: ComponentParams, i_env: Envelope, j_params: ComponentParams, j_env: Envelope) -> float:
    """Correlation of two measured reference waveforms, envelopes included."""
    _check_same_length(i_env, j_env)
    return _fsum_dot(reference_waveform(i_params, i_env), reference_waveform(j_params, j_env))


def k_star(i_measured: ComponentParams, j_true: ComponentParams, i_env: Envelope, j_env: Envelope) -> float:
    """Correlation of the measured waveform of component i with the true waveform of component j."""
    _check_same_length(i_env, j_env)
    return _fsum_dot(reference_waveform(i_measured, i_env), reference_waveform(j_true, j_env))


def decompose_k(
    i_params: ComponentParams,
    i_env: Envelope,
    j_params: ComponentParams,
    j_env: Envelope,
    j_role: str = "measured",
) -> CorrelationDecomposition:
    """
    Split a correlation coefficient into phase-free half-sums.

    ``K = V_c cos(phi_i - phi_j) + V_s sin(phi_i - phi_j) + W_c cos(phi_i + phi_j) + W_s sin(phi_i + phi_j)``
    (see :func:`recompose_k`).
    """
    if j_role not in ROLES:
        raise InvalidArgumentError(f"j_role must be one of {ROLES}, got {j_role!r}")
    _check_same_length(i_env, j_env)
    t = time_index(len(i_env))
    weight = 0.5 * i_env.amp * j_env.amp
    diff = (i_params.frequency - j_params.frequency) * t + i_env.phase - j_env.phase
    total = (i_params.frequency + j_params.frequency) * t + i_env.phase + j_env.phase
    return CorrelationDecomposition(
        v_cos=_fsum_dot(weight, np.cos(diff)),
        v_sin=_fsum_dot(weight, np.sin(diff)),
        w_cos=_fsum_dot(weight, np.cos(total)),
        w_sin=_fsum_dot(weight, np.sin(total)),
        role=j_role,
    )


def recompose_k(decomposition: CorrelationDecomposition, phi_i: float, phi_j: float) -> float:
    """Rebuild the correlation coefficient from its half-sums and the two phases."""
    diff = phi_i - phi_j
    total = phi_i + phi_j
    return math.fsum(
        [
            decomposition.v_cos * math.cos(diff),
            decomposition.v_sin * math.sin(diff),
            decomposition.w_cos * math.cos(total),
            decomposition.w_sin * math.sin(total),
        ]
    )


def correlation_matrix(params: Sequence[ComponentParams], envelopes: Sequence[Envelope]) -> np.ndarray:
    """Symmetric matrix of K** coefficients for the given (measured) components."""
    _check_components(params, envelopes)
    size = len(params)
    matrix = np.empty((size, size))
    for i in range(size):
        for j in range(i, size):
            matrix[i, j] = matrix[j, i] = k_double_star(params[i], envelopes[i], params[j], envelopes[j])
    return matrix


def cross_correlation_matrix(
    measured: Sequence[ComponentParams], true: Sequence[ComponentParams], envelopes: Sequence[Envelope]
) -> np.ndarray:
    """Matrix of K* coefficients, rows over measured components, columns over true components."""
    if len(true) > len(envelopes):
        raise InvalidArgumentError(f"{len(true)} true components but only {len(envelopes)} envelopes")
    _check_components(measured, envelopes)
    matrix = np.empty((len(measured), len(true)))
    for i, meas in enumerate(measured):
        for j, tru in enumerate(true):
            matrix[i, j] = k_star(meas, tru, envelopes[i], envelopes[j])
    return matrix


def data_terms(x: Observation, measured: Sequence[ComponentParams], envelopes: Sequence[Envelope]) -> np.ndarray:
    """Correlations ``sum_t x(t) f_i(t) cos(omega_i t + Psi_i(t) - phi_i)`` of the data with each waveform."""
    _check_observation(x, measured, envelopes)
    return np.array([_fsum_dot(x.samples, reference_waveform(p, env)) for p, env in zip(measured, envelopes)])


def _check_components(params: Sequence[ComponentParams], envelopes: Sequence[Envelope]):
    if len(params) < 1:
        raise InvalidArgumentError("at least one component is required")
    if len(params) > len(envelopes):
        raise InvalidArgumentError(f"{len(params)} components but only {len(envelopes)} envelopes")
    lengths = {len(env) for env in envelopes[: len(params)]}
    if len(lengths) != 1:
        raise InvalidArgumentError(f"envelopes have different lengths {sorted(lengths)}")


def _check_observation(x: Observation, params: Sequence[ComponentParams], envelopes: Sequence[Envelope]):
    _check_components(params, envelopes)
    if len(envelopes[0]) != len(x):
        raise InvalidArgumentError(f"envelope length {len(envelopes[0])} differs from observation length {len(x)}")


def log_likelihood(
    x: Observation, nu: int, measured: Sequence[ComponentParams], envelopes: Sequence[Envelope]
) -> float:
    """Log-likelihood of order ``nu`` with the measured parameters substituted for the true ones."""
    _check_observation(x, measured, envelopes)
    if not 1 <= nu <= len(measured):
        raise InvalidArgumentError(f"nu={nu} outside 1..{len(measured)}")
    params = list(measured[:nu])
    amps = [p.amplitude for p in params]
    data = data_terms(x, params, envelopes)
    kmat = correlation_matrix(params, envelopes)
    linear = math.fsum(amps[i] * data[i] for i in range(nu))
    quadratic = math.fsum(amps[i] * amps[j] * kmat[i, j] for i in range(nu) for j in range(nu))
    return (linear - 0.5 * quadratic) / x.sigma**2


def profile_increments(amplitudes: np.ndarray, kmat: np.ndarray) -> np.ndarray:
    """
    Data-independent part of each profile step.

    Going from ``nu - 1`` to ``nu`` subtracts ``a_nu**2 K_nu,nu / 2 + a_nu * sum_{j<nu} a_j K_nu,j``.
    """
    size = amplitudes.size
    steps = np.empty(size)
    for nu in range(size):
        cross = math.fsum(amplitudes[j] * kmat[nu, j] for j in range(nu))
        steps[nu] = 0.5 * amplitudes[nu] ** 2 * kmat[nu, nu] + amplitudes[nu] * cross
    return steps


def likelihood_profile(
    x: Observation, measured: Sequence[ComponentParams], envelopes: Sequence[Envelope]
) -> LikelihoodProfile:
    """Evaluate ``L(nu)`` for every order, adding one component per step."""
    _check_observation(x, measured, envelopes)
    amps = np.array([p.amplitude for p in measured])
    data = data_terms(x, measured, envelopes)
    steps = profile_increments(amps, correlation_matrix(measured, envelopes))
    values = np.empty(amps.size)
    running = 0.0
    for nu in range(amps.size):
        running += (amps[nu] * data[nu] - steps[nu]) / x.sigma**2
        values[nu] = running
    values.setflags(write=False)
    return LikelihoodProfile(values=values)


def ql_estimate(x: Observation, measured: Sequence[ComponentParams], envelopes: Sequence[Envelope]) -> int:
    """Quasi-likelihood order estimate: the order maximising the substituted log-likelihood."""
    profile = likelihood_profile(x, measured, envelopes)
    estimate = profile.best_order()
    logger.debug(f"Likelihood profile {profile.values.tolist()} -> order {estimate}")
    return estimate


def ml_estimate(x: Observation, true_params: Sequence[ComponentParams], envelopes: Sequence[Envelope]) -> int:
    """Maximum likelihood order estimate with known parameters (quasi-likelihood without errors)."""
    return ql_estimate(x, true_params, envelopes)
