"""
Experiment runners on top of a validated :class:`~ql_order.config.model.ExperimentConfig`.

Every runner returns ``(header, rows)``; :func:`write_csv` turns them into a CSV file with shortest
round-trip float formatting, so identical inputs give byte-identical files.
"""
import csv
import io
import logging
import math
from pathlib import Path
import sys
from typing import List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from ql_order.config.model import (
    BoxConfig,
    ErrorsConfig,
    ExperimentConfig,
    RunConfig,
    ScenarioConfig,
    SignalConfig,
    SweepConfig,
)
from ql_order.errors import ConfigError, DegenerateNormalizationError, InvalidArgumentError, SampleFileError
from ql_order.likelihood import LikelihoodProfile, likelihood_profile
from ql_order.montecarlo import TrialConfig, error_curve, snr_to_sigma
from ql_order.signal_model import (
    ComponentParams,
    Observation,
    ParamErrors,
    SignalSpec,
    apply_errors,
    constant_envelope,
    grid_frequencies,
    linear_fm_envelope,
    omega_step,
)
from ql_order.theory import ErrorBox, abridged_error, abridged_error_at, decision_stats, worst_case_abridged
from ql_order.utils import create_dirs, format_row


logger = logging.getLogger(__name__)

Table = Tuple[Tuple[str, ...], List[tuple]]

THEORY_HEADER = ("snr_db", "sigma", "r", "q", "rho", "p_exact", "p_approx", "approx_valid")
SWEEP_HEADER = ("snr_db", "p_mc", "std_err", "p_exact", "p_approx", "approx_valid")

FIVE_TONE_FREQUENCIES = [1.2075, 1.2566, 1.3057, 1.3548, 1.4039]
FIVE_TONE_PHASES = [0.0, math.pi / 4, math.pi / 3, math.pi / 5, math.pi / 6]
FIVE_TONE_SNR_GRID = [-17.5, -16.0, -14.5, -13.0, -11.5, -10.0, -8.5, -7.0, -5.5, -4.0]


def preset_five_tones() -> ExperimentConfig:
    """
    Five equal tones of amplitude 0.4 spaced by one FFT bin of a 128 sample record.

    The errors are ``delta_a = 0.25``, ``delta_omega = 0.02`` and ``delta_phi = 0.1`` with two true components
    out of three hypotheses.
    """
    return ExperimentConfig(
        scenario=ScenarioConfig(name="five_tones", description="five equal tones spaced by one FFT bin"),
        signal=SignalConfig(
            n_samples=128,
            amplitudes=[0.4] * 5,
            frequencies=FIVE_TONE_FREQUENCIES,
            phases=FIVE_TONE_PHASES,
            omega_base=0.4 * math.pi,
            bandwidth_bins=1.0,
        ),
        errors=ErrorsConfig(delta_a=0.25, delta_omega=0.02, delta_phi=0.1),
        run=RunConfig(nu_true=2, nu_max=3, snr_db=-11.0, snr_grid=FIVE_TONE_SNR_GRID),
        box=BoxConfig(delta_a=[-0.25, 0.25], delta_omega=[-0.02, 0.02], delta_phi=[-0.1, 0.1]),
        sweep=SweepConfig(variable="delta_a", grid=[0.0, 0.04, 0.08, 0.12, 0.16, 0.2, 0.24]),
    )


def reference_amplitude(config: ExperimentConfig) -> float:
    """Amplitude ``a_0`` of the SNR definition and of shared relative amplitude errors."""
    a0 = config.run.reference_amplitude
    if a0 is None:
        a0 = config.signal.amplitudes[0]
    if a0 == 0.0:
        raise InvalidArgumentError("the reference amplitude must not be zero")
    return abs(a0)


def config_omega_step(config: ExperimentConfig) -> float:
    """Frequency spacing ``omega_st`` of the config."""
    if config.signal.omega_step is not None:
        return config.signal.omega_step
    return omega_step(config.signal.n_samples, config.signal.bandwidth_bins)


def build_spec(config: ExperimentConfig) -> SignalSpec:
    """Signal model of the first ``nu_max`` configured components."""
    signal = config.signal
    nu_max = config.run.nu_max
    if signal.frequencies is not None:
        frequencies = signal.frequencies[:nu_max]
    else:
        frequencies = grid_frequencies(nu_max, config_omega_step(config), signal.omega_base)
    params = [
        ComponentParams(amplitude=amp, frequency=freq, phase=phase)
        for amp, freq, phase in zip(signal.amplitudes[:nu_max], frequencies, signal.phases[:nu_max])
    ]
    if signal.envelope == "linear_fm":
        envelope = linear_fm_envelope(signal.n_samples, signal.chirp_rate)
    else:
        envelope = constant_envelope(signal.n_samples)
    return SignalSpec.from_params(params, signal.n_samples, nu_true=config.run.nu_true, envelopes=[envelope] * nu_max)


def build_errors(config: ExperimentConfig, **overrides: float) -> Union[ParamErrors, Tuple[ParamErrors, ...]]:
    """
    Absolute measurement errors of the config.

    ``overrides`` replaces relative errors by name (``delta_a``, ``delta_omega``, ``delta_phi``); in
    ``per_component`` mode the override applies to every component.
    """
    step = config_omega_step(config)
    errors = config.errors
    if errors.mode == "shared":
        relative = {**_relative(errors), **overrides}
        return ParamErrors.from_relative(a0=reference_amplitude(config), omega_step=step, **relative)
    nu_max = config.run.nu_max
    return tuple(
        ParamErrors.from_relative(a0=abs(amplitude), omega_step=step, **{**_relative(entry), **overrides})
        for entry, amplitude in zip(errors.per_component[:nu_max], config.signal.amplitudes[:nu_max])
    )


def _relative(entry) -> dict:
    return {"delta_a": entry.delta_a, "delta_omega": entry.delta_omega, "delta_phi": entry.delta_phi}


def sigma_for(config: ExperimentConfig, snr_db: float) -> float:
    """Noise standard deviation at ``snr_db`` under the configured convention."""
    return snr_to_sigma(snr_db, reference_amplitude(config), config.run.snr_convention)


def snr_list_of(config: ExperimentConfig) -> List[float]:
    """The configured SNR grid, or the single configured SNR."""
    return list(config.run.snr_grid) or [config.run.snr_db]


def trial_config(config: ExperimentConfig, snr_db: Optional[float] = None) -> TrialConfig:
    """Monte Carlo settings of the config."""
    run = config.run
    return TrialConfig(
        spec=build_spec(config),
        errors=build_errors(config),
        snr_db=run.snr_db if snr_db is None else snr_db,
        n_trials=run.n_trials,
        base_seed=run.seed,
        snr_convention=run.snr_convention,
        a0=reference_amplitude(config),
        workers=run.workers,
    )


def estimate_order(config: ExperimentConfig, samples: np.ndarray) -> Tuple[int, LikelihoodProfile]:
    """Quasi-likelihood order estimate of recorded samples with the configured measured parameters."""
    spec = build_spec(config)
    if samples.size != spec.n_samples:
        raise InvalidArgumentError(f"expected {spec.n_samples} samples, got {samples.size}")
    measured = apply_errors(spec.params, build_errors(config))
    observation = Observation(samples=samples, sigma=sigma_for(config, config.run.snr_db))
    profile = likelihood_profile(observation, measured, spec.envelopes)
    logger.debug(f"Likelihood profile {profile.values.tolist()}")
    return profile.best_order(), profile


def theory_table(config: ExperimentConfig, snr_list: Optional[Sequence[float]] = None) -> Table:
    """Decision statistics and abridged error probabilities per SNR."""
    snr_list = snr_list_of(config) if snr_list is None else snr_list
    spec = build_spec(config)
    measured = apply_errors(spec.params, build_errors(config))
    rows = []
    for snr_db in snr_list:
        sigma = sigma_for(config, snr_db)
        stats = decision_stats(spec.params, measured, spec.envelopes, sigma, spec.nu_true)
        result = abridged_error(stats)
        rows.append((snr_db, sigma, stats.r, stats.q, stats.rho, result.p_exact, result.p_approx, result.approx_valid))
    return THEORY_HEADER, rows


def sweep_error_probability(config: ExperimentConfig, snr_list: Optional[Sequence[float]] = None) -> Table:
    """Monte Carlo error probability joined with the abridged error probability at the same settings."""
    snr_list = snr_list_of(config) if snr_list is None else list(snr_list)
    if not snr_list:
        return SWEEP_HEADER, []
    _, theory_rows = theory_table(config, snr_list)
    curve = error_curve(trial_config(config), snr_list)
    rows = []
    for (snr_db, estimate), theory_row in zip(curve, theory_rows):
        p_exact, p_approx, valid = theory_row[5:]
        rows.append((snr_db, estimate.p_err, estimate.std_err, p_exact, p_approx, valid))
    return SWEEP_HEADER, rows


def sweep_normalized(
    config: ExperimentConfig, sweep_var: Optional[str] = None, grid: Optional[Sequence[float]] = None
) -> Table:
    """
    Normalised abridged error probability ``p_a(var) / p_a(0)`` at the configured SNR.

    The other errors stay at their configured values. Only the exact abridged formula is evaluated.
    """
    sweep = config.sweep or SweepConfig()
    sweep_var = sweep.variable if sweep_var is None else sweep_var
    grid = sweep.grid if grid is None else grid
    if sweep_var not in ("delta_a", "delta_omega", "delta_phi"):
        raise InvalidArgumentError(f"cannot sweep {sweep_var!r}")
    if not grid:
        raise InvalidArgumentError("the sweep grid must not be empty")
    spec = build_spec(config)
    sigma = sigma_for(config, config.run.snr_db)
    p_zero = abridged_error_at(spec, build_errors(config, **{sweep_var: 0.0}), sigma, spec.nu_true)
    if p_zero == 0.0:
        raise DegenerateNormalizationError(f"p_a is zero at {sweep_var}=0; cannot normalise")
    rows = []
    for value in grid:
        p_a = abridged_error_at(spec, build_errors(config, **{sweep_var: value}), sigma, spec.nu_true)
        rows.append((value, p_a, p_a / p_zero))
    logger.info(f"Swept {sweep_var} over {len(rows)} values at sigma={sigma}")
    return (sweep_var, "p_a", "p_a_normalized"), rows


def box_of(config: ExperimentConfig) -> ErrorBox:
    """Shared error box of the ``[box]`` section."""
    if config.box is None:
        raise ConfigError("the configuration has no [box] section")
    return ErrorBox.from_relative(
        tuple(config.box.delta_a),
        tuple(config.box.delta_omega),
        tuple(config.box.delta_phi),
        reference_amplitude(config),
        config_omega_step(config),
    )


def worst_case_report(config: ExperimentConfig, box: Optional[ErrorBox] = None) -> Table:
    """Largest abridged error probability over the error box, its errors, and ``p_a`` without errors."""
    box = box_of(config) if box is None else box
    settings = config.box or BoxConfig()
    spec = build_spec(config)
    sigma = sigma_for(config, config.run.snr_db)
    p_max, worst = worst_case_abridged(
        spec, box, sigma, spec.nu_true, grid_points=settings.grid_points, refine=settings.refine
    )
    p_at_zero = abridged_error_at(spec, ParamErrors(), sigma, spec.nu_true)
    if isinstance(worst, ParamErrors):
        header = ("p_max", "d_amp", "d_freq", "d_phase", "p_at_zero")
        row = (p_max, *worst.as_tuple(), p_at_zero)
    else:
        names = [f"{name}_{idx}" for idx in range(1, len(worst) + 1) for name in ("d_amp", "d_freq", "d_phase")]
        header = ("p_max", *names, "p_at_zero")
        row = (p_max, *(value for errors in worst for value in errors.as_tuple()), p_at_zero)
    logger.info(f"Worst case p_a={p_max} against p_a={p_at_zero} without errors")
    return header, [row]


def doppler_speed_limit(delta_omega_abs_max: float, carrier_omega: float, wave_speed: float) -> float:
    """Largest source speed whose first order Doppler shift stays within ``delta_omega_abs_max``."""
    if not carrier_omega > 0.0:
        raise InvalidArgumentError(f"carrier_omega must be positive, got {carrier_omega}")
    if not wave_speed > 0.0:
        raise InvalidArgumentError(f"wave_speed must be positive, got {wave_speed}")
    if not delta_omega_abs_max >= 0.0:
        raise InvalidArgumentError(f"delta_omega_abs_max must be non-negative, got {delta_omega_abs_max}")
    return wave_speed * delta_omega_abs_max / carrier_omega


def read_samples(path: Union[str, Path]) -> np.ndarray:
    """Read one real sample per line (``t = 1..N_s``); blank lines are skipped."""
    values = []
    try:
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                text = line.strip()
                if not text:
                    continue
                try:
                    value = float(text)
                except ValueError:
                    raise SampleFileError(str(path), line_no, f"not a number: {text!r}") from None
                if not math.isfinite(value):
                    raise SampleFileError(str(path), line_no, f"not a finite number: {text!r}")
                values.append(value)
    except OSError as exc:
        raise ConfigError(f"cannot read samples {path}: {exc}") from exc
    if not values:
        raise SampleFileError(str(path), 0, "no samples")
    logger.info(f"Read {len(values)} samples from {path}")
    return np.array(values)


def write_csv(target: Union[str, Path, TextIO, None], header: Sequence[str], rows: Sequence[Sequence]):
    """Write a header and rows; ``None`` writes to standard output."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(format_row(row))
    if target is None:
        sys.stdout.write(buffer.getvalue())
    elif isinstance(target, (str, Path)):
        try:
            create_dirs(str(target))
            with open(target, "w", encoding="utf-8", newline="") as handle:
                handle.write(buffer.getvalue())
        except OSError as exc:
            raise ConfigError(f"cannot write {target}: {exc}") from exc
        logger.info(f"Wrote {len(rows)} rows to {target}")
    else:
        target.write(buffer.getvalue())
