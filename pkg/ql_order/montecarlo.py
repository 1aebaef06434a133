"""
Monte Carlo estimate of the error probability ``Pr(nu_hat != nu0)`` of the quasi-likelihood estimator.

Trial ``k`` of SNR row ``s`` draws its noise from the stream keyed by ``(base_seed, s, k)``. Trials are
processed in chunks of fixed size; the chunk boundaries do not depend on the number of workers, so results
are bit-identical for any degree of parallelism.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ql_order.errors import InvalidArgumentError
from ql_order.likelihood import correlation_matrix, profile_increments
from ql_order.signal_model import ParamErrors, SignalSpec, apply_errors, reference_waveform, synthesize, unit_noise


logger = logging.getLogger(__name__)

SNR_CONVENTIONS = ("linear", "power")
DEFAULT_TRIALS = 20_000
DEFAULT_CHUNK = 1_000


def snr_to_sigma(snr_db: float, a0: float, convention: str = "linear") -> float:
    """
    Noise standard deviation for an SNR in dB.

    ``linear`` inverts ``z = a0**2 / (2 sigma)``; ``power`` inverts ``z = a0**2 / (2 sigma**2)``.
    """
    if not a0 > 0.0:
        raise InvalidArgumentError(f"a0 must be positive, got {a0}")
    ratio = 10.0 ** (snr_db / 10.0)
    if convention == "linear":
        return a0 * a0 / (2.0 * ratio)
    if convention == "power":
        return a0 / math.sqrt(2.0 * ratio)
    raise InvalidArgumentError(f"snr convention must be one of {SNR_CONVENTIONS}, got {convention!r}")


@dataclass(frozen=True, eq=False)
class TrialConfig:
    """Settings of one Monte Carlo run."""

    spec: SignalSpec
    errors: Union[ParamErrors, Tuple[ParamErrors, ...]]
    snr_db: float
    n_trials: int = DEFAULT_TRIALS
    base_seed: int = 0
    snr_convention: str = "linear"
    a0: Optional[float] = None
    """Reference amplitude of the SNR definition; the first true amplitude if not given."""
    chunk_size: int = DEFAULT_CHUNK
    workers: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise InvalidArgumentError(f"n_trials must be at least 1, got {self.n_trials}")
        if self.chunk_size < 1 or self.workers < 1:
            raise InvalidArgumentError("chunk_size and workers must be positive")
        if self.snr_convention not in SNR_CONVENTIONS:
            raise InvalidArgumentError(f"snr convention must be one of {SNR_CONVENTIONS}")
        if not isinstance(self.errors, ParamErrors):
            object.__setattr__(self, "errors", tuple(self.errors))
            if len(self.errors) != self.spec.nu_max:
                raise InvalidArgumentError(f"{self.spec.nu_max} components but {len(self.errors)} error triples")

    @property
    def sigma(self) -> float:
        """Noise standard deviation of this run."""
        a0 = self.a0 if self.a0 is not None else self.spec.params[0].amplitude
        return snr_to_sigma(self.snr_db, abs(a0), self.snr_convention)


@dataclass(frozen=True)
class McEstimate:
    """Empirical error probability with its standard error and the histogram of estimates."""

    p_err: float
    std_err: float
    n_trials: int
    nu_true: int
    counts: Tuple[int, ...] = field(default=())
    """``counts[nu - 1]`` trials returned order ``nu``."""

    @classmethod
    def from_counts(cls, counts: Sequence[int], nu_true: int) -> "McEstimate":
        """Build the estimate from the histogram of estimated orders."""
        counts = tuple(int(c) for c in counts)
        n_trials = sum(counts)
        p_err = (n_trials - counts[nu_true - 1]) / n_trials
        return cls(
            p_err=p_err,
            std_err=math.sqrt(p_err * (1.0 - p_err) / n_trials),
            n_trials=n_trials,
            nu_true=nu_true,
            counts=counts,
        )

    @property
    def error_histogram(self) -> Dict[int, int]:
        """Map of estimated order to number of trials."""
        return {nu: count for nu, count in enumerate(self.counts, start=1)}


@dataclass(frozen=True, eq=False)
class _ChunkJob:
    signal: np.ndarray
    waveforms: np.ndarray
    amplitudes: np.ndarray
    steps: np.ndarray
    sigma: float
    seed_prefix: Tuple[int, int]
    start: int
    stop: int


def _prepare(config: TrialConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    spec = config.spec
    measured = apply_errors(spec.params, config.errors)
    waveforms = np.stack([reference_waveform(p, env) for p, env in zip(measured, spec.envelopes)])
    amplitudes = np.array([p.amplitude for p in measured])
    steps = profile_increments(amplitudes, correlation_matrix(measured, spec.envelopes))
    return synthesize(spec, spec.nu_true), waveforms, amplitudes, steps


def _estimate_chunk(job: _ChunkJob) -> np.ndarray:
    n_samples = job.signal.size
    samples = np.empty((job.stop - job.start, n_samples))
    for row, trial in enumerate(range(job.start, job.stop)):
        samples[row] = job.signal + job.sigma * unit_noise(n_samples, (*job.seed_prefix, trial))
    data = samples @ job.waveforms.T
    profile = np.cumsum((job.amplitudes * data - job.steps) / job.sigma**2, axis=1)
    return np.argmax(profile, axis=1) + 1


def trial_estimates(config: TrialConfig, stream_index: int = 0, start: int = 1, stop: Optional[int] = None) -> np.ndarray:
    """Estimated orders of trials ``start..stop - 1`` (trials are numbered from 1)."""
    stop = config.n_trials + 1 if stop is None else stop
    signal, waveforms, amplitudes, steps = _prepare(config)
    job = _ChunkJob(signal, waveforms, amplitudes, steps, config.sigma, (config.base_seed, stream_index), start, stop)
    return _estimate_chunk(job)


def run_trials(config: TrialConfig, stream_index: int = 0) -> McEstimate:
    """Run ``config.n_trials`` independent trials and tally the estimated orders."""
    signal, waveforms, amplitudes, steps = _prepare(config)
    sigma = config.sigma
    jobs = [
        _ChunkJob(
            signal,
            waveforms,
            amplitudes,
            steps,
            sigma,
            (config.base_seed, stream_index),
            start,
            min(start + config.chunk_size, config.n_trials + 1),
        )
        for start in range(1, config.n_trials + 1, config.chunk_size)
    ]
    counts = np.zeros(config.spec.nu_max + 1, dtype=np.int64)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            results = list(executor.map(_estimate_chunk, jobs))
    else:
        results = [_estimate_chunk(job) for job in jobs]
    for estimates in results:
        counts += np.bincount(estimates, minlength=counts.size)
    estimate = McEstimate.from_counts(counts[1:], config.spec.nu_true)
    logger.debug(f"SNR {config.snr_db} dB (sigma={sigma}): histogram {estimate.error_histogram}")
    return estimate


def error_curve(config: TrialConfig, snr_list: Sequence[float]) -> List[Tuple[float, McEstimate]]:
    """Run one Monte Carlo estimate per SNR; row ``s`` uses the seed stream ``(base_seed, s, .)``."""
    if not snr_list:
        raise InvalidArgumentError("snr_list must not be empty")
    rows = []
    for stream_index, snr_db in enumerate(snr_list):
        estimate = run_trials(replace(config, snr_db=float(snr_db)), stream_index=stream_index)
        logger.info(f"SNR {snr_db} dB: p_err={estimate.p_err} (+- {estimate.std_err}, {estimate.n_trials} trials)")
        rows.append((float(snr_db), estimate))
    return rows


def far_error_ratio(estimate: McEstimate) -> float:
    """Empirical ``P(|nu_hat - nu0| > 1) / P(|nu_hat - nu0| = 1)``; NaN if there were no errors at all."""
    near = far = 0
    for nu, count in estimate.error_histogram.items():
        distance = abs(nu - estimate.nu_true)
        if distance == 1:
            near += count
        elif distance > 1:
            far += count
    if near == 0:
        return math.nan if far == 0 else math.inf
    return far / near
