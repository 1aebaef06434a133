"""
Deterministic model of modulated sinusoids and its noisy observation.

The time index runs over ``t = 1..N_s``. Arrays are stored 0-based, but every trigonometric argument is
evaluated with :func:`time_index`, so sample ``k`` of an array belongs to ``t = k + 1``.

Noise is drawn from a counter-based Philox stream keyed by a ``numpy.random.SeedSequence``; the standard
normal variates come from ``Generator.standard_normal`` (ziggurat). Both are fixed, so observations are
bit-reproducible for a given seed.
"""
from dataclasses import dataclass, field, replace
import logging
import math
import operator
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ql_order.errors import InvalidArgumentError


logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

SeedKey = Union[int, Sequence[int]]


def wrap_angle(value: float) -> float:
    """Map an angle into ``[0, 2*pi)``."""
    wrapped = math.fmod(value, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    if wrapped >= TWO_PI:
        # -tiny + 2*pi rounds up to 2*pi
        wrapped = 0.0
    return wrapped


def time_index(n_samples: int) -> np.ndarray:
    """Return ``t = 1..N_s`` as floats."""
    return np.arange(1, n_samples + 1, dtype=np.float64)


def _frozen_array(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    if array.ndim != 1:
        raise InvalidArgumentError(f"{name} must be one-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Envelope:
    """Amplitude envelope f(t) and phase envelope Psi(t), pre-sampled at ``t = 1..N_s``."""

    amp: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        amp = _frozen_array(self.amp, "envelope amplitude")
        phase = _frozen_array(self.phase, "envelope phase")
        if amp.size < 1:
            raise InvalidArgumentError("envelope must hold at least one sample")
        if amp.size != phase.size:
            raise InvalidArgumentError(
                f"envelope amplitude and phase lengths differ ({amp.size} != {phase.size})"
            )
        object.__setattr__(self, "amp", amp)
        object.__setattr__(self, "phase", phase)

    def __len__(self) -> int:
        return self.amp.size

    def is_zero(self) -> bool:
        """Return True if the amplitude envelope vanishes everywhere."""
        return not np.any(self.amp)


def constant_envelope(n_samples: int) -> Envelope:
    """Envelope of a plain sinusoid: f = 1, Psi = 0."""
    if n_samples < 1:
        raise InvalidArgumentError(f"n_samples must be positive, got {n_samples}")
    return Envelope(amp=np.ones(n_samples), phase=np.zeros(n_samples))


def linear_fm_envelope(n_samples: int, chirp_rate: float) -> Envelope:
    """Envelope of a linear FM (chirp) component: f = 1, Psi(t) = chirp_rate * t**2 / 2."""
    if n_samples < 1:
        raise InvalidArgumentError(f"n_samples must be positive, got {n_samples}")
    t = time_index(n_samples)
    return Envelope(amp=np.ones(n_samples), phase=0.5 * chirp_rate * t * t)


@dataclass(frozen=True)
class ComponentParams:
    """Amplitude, frequency (rad/sample) and phase (rad) of one sinusoid; angles are wrapped into [0, 2*pi)."""

    amplitude: float
    frequency: float
    phase: float

    def __post_init__(self):
        for name in ("amplitude", "frequency", "phase"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidArgumentError(f"component {name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "frequency", wrap_angle(self.frequency))
        object.__setattr__(self, "phase", wrap_angle(self.phase))


@dataclass(frozen=True)
class ParamErrors:
    """Absolute measurement errors of one component (or of all components in shared mode)."""

    d_amp: float = 0.0
    d_freq: float = 0.0
    d_phase: float = 0.0

    def __post_init__(self):
        for name in ("d_amp", "d_freq", "d_phase"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidArgumentError(f"error {name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_relative(
        cls, delta_a: float, delta_omega: float, delta_phi: float, a0: float, omega_step: float
    ) -> "ParamErrors":
        """Build absolute errors from ``delta_a = d_amp / a0``, ``delta_omega = d_freq / omega_step`` and ``d_phase``."""
        return cls(d_amp=delta_a * a0, d_freq=delta_omega * omega_step, d_phase=delta_phi)

    def relative(self, a0: float, omega_step: float) -> Tuple[float, float, float]:
        """Return ``(delta_a, delta_omega, delta_phi)``."""
        return self.d_amp / a0, self.d_freq / omega_step, self.d_phase

    def as_tuple(self) -> Tuple[float, float, float]:
        """Return ``(d_amp, d_freq, d_phase)``."""
        return self.d_amp, self.d_freq, self.d_phase


@dataclass(frozen=True, eq=False)
class SignalSpec:
    """
    Signal model of up to ``nu_max`` components, of which the first ``nu_true`` are present.

    ``components`` is ordered: hypothesis ``nu`` uses the first ``nu`` entries.
    """

    n_samples: int
    components: Tuple[Tuple[ComponentParams, Envelope], ...]
    nu_true: int = field(default=1)

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidArgumentError(f"n_samples must be positive, got {self.n_samples}")
        components = tuple((params, env) for params, env in self.components)
        object.__setattr__(self, "components", components)
        if not 1 <= self.nu_true <= len(components):
            raise InvalidArgumentError(f"nu_true={self.nu_true} outside 1..{len(components)}")
        for idx, (_, env) in enumerate(components):
            if len(env) != self.n_samples:
                raise InvalidArgumentError(
                    f"envelope of component {idx + 1} has length {len(env)}, expected {self.n_samples}"
                )

    @classmethod
    def from_params(
        cls,
        params: Sequence[ComponentParams],
        n_samples: int,
        nu_true: int = 1,
        envelopes: Optional[Sequence[Envelope]] = None,
    ) -> "SignalSpec":
        """Pair parameters with envelopes; constant envelopes are used if none are given."""
        if envelopes is None:
            envelopes = [constant_envelope(n_samples)] * len(params)
        if len(envelopes) != len(params):
            raise InvalidArgumentError(f"{len(params)} components but {len(envelopes)} envelopes")
        return cls(n_samples=n_samples, components=tuple(zip(params, envelopes)), nu_true=nu_true)

    @property
    def nu_max(self) -> int:
        """Largest order hypothesis."""
        return len(self.components)

    @property
    def params(self) -> List[ComponentParams]:
        """Component parameters in model order."""
        return [params for params, _ in self.components]

    @property
    def envelopes(self) -> List[Envelope]:
        """Component envelopes in model order."""
        return [env for _, env in self.components]

    def with_params(self, params: Sequence[ComponentParams]) -> "SignalSpec":
        """Return a copy with new component parameters and the same envelopes."""
        if len(params) != self.nu_max:
            raise InvalidArgumentError(f"expected {self.nu_max} parameter sets, got {len(params)}")
        return replace(self, components=tuple(zip(params, self.envelopes)))


@dataclass(frozen=True, eq=False)
class Observation:
    """Noisy samples ``x(t)`` with the per-sample noise standard deviation ``sigma``."""

    samples: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples, "observation samples"))
        sigma = float(self.sigma)
        if not (math.isfinite(sigma) and sigma > 0.0):
            raise InvalidArgumentError(f"sigma must be positive and finite, got {sigma}")
        object.__setattr__(self, "sigma", sigma)

    def __len__(self) -> int:
        return self.samples.size


def reference_waveform(params: ComponentParams, env: Envelope) -> np.ndarray:
    """Return ``f(t) * cos(omega*t + Psi(t) - phi)`` for ``t = 1..N_s`` (no amplitude)."""
    t = time_index(len(env))
    return env.amp * np.cos(params.frequency * t + env.phase - params.phase)


def synthesize(spec: SignalSpec, nu: int) -> np.ndarray:
    """Return the noiseless sum of the first ``nu`` components."""
    if not 1 <= nu <= spec.nu_max:
        raise InvalidArgumentError(f"nu={nu} outside 1..{spec.nu_max}")
    signal = np.zeros(spec.n_samples)
    for params, env in spec.components[:nu]:
        signal = signal + params.amplitude * reference_waveform(params, env)
    return signal


def seed_sequence(seed: SeedKey) -> np.random.SeedSequence:
    """
    Return the ``SeedSequence`` of an int or a tuple of ints.

    Negative entries enter the entropy by absolute value and are marked by a sign mask in the spawn key, so
    ``-1`` and ``1`` key different streams while non-negative keys are used unchanged.
    """
    scalar = isinstance(seed, (int, np.integer))
    try:
        values = [operator.index(seed)] if scalar else [operator.index(value) for value in seed]
    except TypeError as exc:
        raise InvalidArgumentError(f"invalid seed {seed!r}: {exc}") from exc
    if not values:
        raise InvalidArgumentError("seed must hold at least one integer")
    sign_mask = sum(1 << idx for idx, value in enumerate(values) if value < 0)
    entropy = [abs(value) for value in values]
    spawn_key = (sign_mask,) if sign_mask else ()
    return np.random.SeedSequence(entropy[0] if scalar else entropy, spawn_key=spawn_key)


def noise_stream(seed: SeedKey) -> np.random.Generator:
    """Return the Philox generator keyed by ``seed`` (an int or a tuple of ints)."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed)))


def unit_noise(n_samples: int, seed: SeedKey) -> np.ndarray:
    """Return ``n_samples`` i.i.d. standard normal values of the stream keyed by ``seed``."""
    return noise_stream(seed).standard_normal(n_samples)


def observe(spec: SignalSpec, sigma: float, seed: SeedKey) -> Observation:
    """Return ``synthesize(spec, nu_true) + sigma * n(t)``."""
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise InvalidArgumentError(f"sigma must be positive and finite, got {sigma}")
    signal = synthesize(spec, spec.nu_true)
    logger.debug(f"Observation of {spec.nu_true} components, sigma={sigma}, seed={seed}")
    samples = signal + sigma * unit_noise(spec.n_samples, seed)
    return Observation(samples=samples, sigma=sigma)


def apply_errors(
    true_params: Sequence[ComponentParams], errors: Union[ParamErrors, Sequence[ParamErrors]]
) -> List[ComponentParams]:
    """
    Return the measured parameters ``a0 + d_amp``, ``omega0 + d_freq``, ``phi0 + d_phase``.

    A single :class:`ParamErrors` is shared by all components.
    """
    if isinstance(errors, ParamErrors):
        errors = [errors] * len(true_params)
    if len(errors) != len(true_params):
        raise InvalidArgumentError(f"{len(true_params)} components but {len(errors)} error triples")
    return [
        ComponentParams(
            amplitude=params.amplitude + err.d_amp,
            frequency=params.frequency + err.d_freq,
            phase=params.phase + err.d_phase,
        )
        for params, err in zip(true_params, errors)
    ]


def omega_step(n_samples: int, bandwidth_bins: float = 1.0) -> float:
    """Frequency spacing ``2*pi*B / N_s``."""
    return TWO_PI * bandwidth_bins / n_samples


def grid_frequencies(nu_max: int, step: float, base: float) -> List[float]:
    """Frequencies ``(i - 1) * step + base`` for ``i = 1..nu_max``."""
    return [idx * step + base for idx in range(nu_max)]
