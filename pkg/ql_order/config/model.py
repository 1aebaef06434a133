"""Pydantic model of the ql-order experiment configuration."""
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, Extra, StrictBool, StrictInt, StrictStr, confloat, conint, conlist, root_validator, validator


Real = confloat(allow_inf_nan=False)
Interval = conlist(Real, min_items=2, max_items=2)  # type: ignore

SWEEP_VARIABLES = ("delta_a", "delta_omega", "delta_phi")


class _Section(BaseModel):
    class Config:
        extra = Extra.forbid
        validate_assignment = True


class ScenarioConfig(_Section):
    """Section ``[scenario]``."""

    name: StrictStr = "custom"
    """Name of the scenario, used in log messages."""

    description: StrictStr = ""
    """Free text."""


class SignalConfig(_Section):
    """
    Section ``[signal]``: the true component parameters.

    The lists hold one entry per component in model order. They may be longer than ``run.nu_max``;
    only the first ``nu_max`` components enter the model.
    """

    n_samples: conint(strict=True, gt=0) = 128  # type: ignore
    """Number of samples ``N_s``."""

    amplitudes: List[Real]  # type: ignore
    """True amplitudes ``a_0i``."""

    frequencies: Optional[List[Real]] = None  # type: ignore
    """
    True frequencies ``omega_0i`` in rad/sample.

    If not given, the frequencies are placed on the grid ``(i - 1) * omega_step + omega_base``.
    """

    phases: List[Real]  # type: ignore
    """True phases ``phi_0i`` in rad."""

    envelope: Literal["constant", "linear_fm"] = "constant"
    """
    Modulation shared by all components.

    - ``constant``: plain sinusoids, ``f = 1`` and ``Psi = 0``
    - ``linear_fm``: ``f = 1`` and ``Psi(t) = chirp_rate * t**2 / 2``
    """

    chirp_rate: Real = 0.0  # type: ignore
    """Chirp rate of the ``linear_fm`` envelope in rad/sample**2."""

    omega_step: Optional[Real] = None  # type: ignore
    """
    Frequency spacing ``omega_st``.

    Defaults to ``2 * pi * bandwidth_bins / n_samples``. It also scales ``delta_omega``.
    """

    omega_base: Real = 0.4 * math.pi  # type: ignore
    """Frequency ``omega_b`` of the first grid component."""

    bandwidth_bins: confloat(gt=0, allow_inf_nan=False) = 1.0  # type: ignore
    """Spacing ``B`` of grid frequencies in FFT bins."""

    @root_validator(skip_on_failure=True)
    def check_lengths(cls, values):  # pylint: disable=no-self-argument
        """All component lists must have the same length."""
        lengths = {len(values["amplitudes"]), len(values["phases"])}
        if values.get("frequencies") is not None:
            lengths.add(len(values["frequencies"]))
        if len(lengths) != 1:
            raise ValueError(f"amplitudes, frequencies and phases differ in length: {sorted(lengths)}")
        if not values["amplitudes"]:
            raise ValueError("at least one component is required")
        return values


class ComponentErrorsConfig(_Section):
    """One entry of ``[[errors.per_component]]``."""

    delta_a: Real = 0.0  # type: ignore
    """Relative amplitude error ``Delta_a / a_0``."""

    delta_omega: Real = 0.0  # type: ignore
    """Relative frequency error ``Delta_omega / omega_step``."""

    delta_phi: Real = 0.0  # type: ignore
    """Absolute phase error in rad."""


class ErrorsConfig(ComponentErrorsConfig):
    """
    Section ``[errors]``: measurement errors of the component parameters.

    In ``shared`` mode all components carry ``delta_a``, ``delta_omega`` and ``delta_phi``, with the amplitude
    error relative to the reference amplitude. In ``per_component`` mode the list ``per_component`` holds one
    entry per component, each amplitude error relative to the amplitude of its own component.
    """

    mode: Literal["shared", "per_component"] = "shared"

    per_component: Optional[List[ComponentErrorsConfig]] = None

    @root_validator(skip_on_failure=True)
    def check_mode(cls, values):  # pylint: disable=no-self-argument
        """``per_component`` mode needs the entry list and no shared errors."""
        if values["mode"] == "per_component":
            if not values.get("per_component"):
                raise ValueError("mode 'per_component' requires a per_component list")
            shared = [name for name in ("delta_a", "delta_omega", "delta_phi") if values[name] != 0]
            if shared:
                raise ValueError(f"{', '.join(shared)} must be given per component in mode 'per_component'")
        return values


class RunConfig(_Section):
    """Section ``[run]``."""

    nu_true: conint(strict=True, gt=0) = 2  # type: ignore
    """True number of components ``nu_0``."""

    nu_max: conint(strict=True, gt=0) = 3  # type: ignore
    """Largest order hypothesis."""

    snr_db: Real = -11.0  # type: ignore
    """SNR in dB used when no grid is given."""

    snr_grid: List[Real] = []  # type: ignore
    """SNR grid in dB for ``simulate`` and ``theory``."""

    snr_convention: Literal["linear", "power"] = "linear"
    """
    Mapping of SNR to the noise standard deviation.

    - ``linear``: ``z = a_0**2 / (2 sigma)``
    - ``power``: ``z = a_0**2 / (2 sigma**2)``
    """

    reference_amplitude: Optional[Real] = None  # type: ignore
    """Amplitude ``a_0`` of the SNR definition and of relative amplitude errors; the first amplitude if unset."""

    n_trials: conint(strict=True, gt=0) = 20_000  # type: ignore
    """Monte Carlo trials per SNR."""

    seed: StrictInt = 0
    """Base seed of the noise streams."""

    workers: conint(strict=True, gt=0) = 1  # type: ignore
    """Worker processes of the Monte Carlo runs."""

    output: Optional[StrictStr] = None
    """Default CSV output path; standard output if unset."""

    @root_validator(skip_on_failure=True)
    def check_orders(cls, values):  # pylint: disable=no-self-argument
        """The true order cannot exceed the largest hypothesis."""
        if values["nu_true"] > values["nu_max"]:
            raise ValueError(f"nu_true={values['nu_true']} exceeds nu_max={values['nu_max']}")
        return values


class BoxConfig(_Section):
    """Section ``[box]``: shared error intervals searched by ``worstcase``."""

    delta_a: Interval = [0.0, 0.0]  # type: ignore
    """Interval of the relative amplitude error."""

    delta_omega: Interval = [0.0, 0.0]  # type: ignore
    """Interval of the relative frequency error."""

    delta_phi: Interval = [0.0, 0.0]  # type: ignore
    """Interval of the phase error in rad."""

    grid_points: conint(strict=True, ge=2) = 11  # type: ignore
    """Grid points per active dimension."""

    refine: StrictBool = True
    """Polish the best grid point with a bounded local search."""

    @validator("delta_a", "delta_omega", "delta_phi")
    def check_order(cls, value):  # pylint: disable=no-self-argument
        """Intervals are given as ``[low, high]``."""
        if value[0] > value[1]:
            raise ValueError(f"interval {value} is not ordered")
        return value


class SweepConfig(_Section):
    """Section ``[sweep]``: normalised abridged error probability over one error variable."""

    variable: Literal["delta_a", "delta_omega", "delta_phi"] = "delta_a"
    """Swept error variable; the other errors stay at their ``[errors]`` values."""

    grid: List[Real] = []  # type: ignore
    """Values of the swept variable."""


class ExperimentConfig(_Section):
    """Complete experiment configuration as read from a TOML file."""

    scenario: ScenarioConfig = ScenarioConfig()
    signal: SignalConfig
    errors: ErrorsConfig = ErrorsConfig()
    run: RunConfig = RunConfig()
    box: Optional[BoxConfig] = None
    sweep: Optional[SweepConfig] = None

    @root_validator(skip_on_failure=True)
    def check_components(cls, values):  # pylint: disable=no-self-argument
        """The signal and error lists must cover ``nu_max`` components."""
        nu_max = values["run"].nu_max
        n_components = len(values["signal"].amplitudes)
        if n_components < nu_max:
            raise ValueError(f"nu_max={nu_max} but the signal lists only {n_components} components")
        errors = values["errors"]
        if errors.mode == "per_component" and len(errors.per_component) < nu_max:
            raise ValueError(f"nu_max={nu_max} but only {len(errors.per_component)} per_component errors")
        return values
