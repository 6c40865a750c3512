"""Simulation studies: statistics sweeps, variational optimization, estimation, HOM.

Each study is a plain function of its inputs and a master seed.  Random
streams are derived with :func:`make_rng` from ``(seed, *indices)``, so
results do not depend on execution order or on how work is split across
processes.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .circuit import IDEAL, CircuitSpec, NoiseConfig
from .estimation import (
    BayesianEstimator,
    EstimateResult,
    LatticeEstimator,
    PosteriorGrid,
    run_trial,
)
from .fisher import SingularFisherError, analytic_fisher, circuit_fisher, trace_inverse
from .fock import DistinguishabilityModel, FockState, output_distribution, two_mode_coupler
from .optimizer import NMConfig, OptimizationTrace, optimize_settings
from .sampling import make_rng

THETA_MODES = ("null", "random", "variational", "explicit")

# stream tags keep independent uses of one master seed apart
_OPT, _RANDOM_THETA, _WINDOW = 101, 102, 103


@dataclass(frozen=True)
class PriorConfig:
    """Prior used by the Bayesian estimator.

    ``kind`` is ``"window"`` (uniform box of half-width ``halfwidth`` around
    a coarse guess displaced from the truth by up to
    ``guess_fraction * halfwidth`` per axis, drawn per repetition), ``"torus"`` (uniform over the whole period) or ``"interval"``
    (one-parameter uniform prior on ``[lower, upper]``).
    """

    kind: str = "window"
    points: int = 40
    halfwidth: float = math.pi / 4
    lower: float = 0.0
    upper: float = math.pi
    guess_fraction: float = 0.5

    def __post_init__(self):
        if self.kind not in ("window", "torus", "interval"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.points < 2:
            raise ValueError("prior needs at least two points per axis")
        if not 0 < self.halfwidth <= math.pi:
            raise ValueError(f"halfwidth must lie in (0, pi], got {self.halfwidth}")
        if not 0 <= self.guess_fraction <= 1:
            raise ValueError(f"guess_fraction must lie in [0, 1], got {self.guess_fraction}")
        if self.kind == "interval" and not self.upper > self.lower:
            raise ValueError("interval prior needs upper > lower")

    @property
    def max_shift(self) -> int:
        # displacement of the coarse guess, in whole grid cells
        return int(self.guess_fraction * self.points / 2)


def nm_config_for(spec: CircuitSpec, config: NMConfig) -> NMConfig:
    """Adapt the start point's dimension to the circuit (pi/2 per phase)."""
    if config.dimension == spec.parameter_count:
        return config
    return dataclasses.replace(config, start=(math.pi / 2,) * spec.parameter_count)


# -- Fisher statistics -----------------------------------------------------------

@dataclass(frozen=True)
class FisherStats:
    events: int
    mean: float
    std: float
    singular: int
    values: np.ndarray


def fisher_statistics(spec: CircuitSpec, phi, theta, noise: NoiseConfig, events: int,
                      repetitions: int, seed: int) -> FisherStats:
    """Spread of the sampled ``Tr[F^-1]`` over independent repetitions at one N.

    Repetitions whose sampled FIM is singular are counted and left out of
    the mean and standard deviation.
    """
    values, singular = [], 0
    for rep in range(repetitions):
        f = circuit_fisher(spec, phi, theta, noise, events=events,
                           rng=make_rng(seed, events, rep))
        try:
            values.append(trace_inverse(f))
        except SingularFisherError:
            singular += 1
    v = np.array(values)
    mean = float(v.mean()) if v.size else math.nan
    std = float(v.std(ddof=1)) if v.size > 1 else math.nan
    return FisherStats(events, mean, std, singular, v)


# -- variational settings ----------------------------------------------------------

def fisher_experiment(spec: CircuitSpec, phi, noise: NoiseConfig = IDEAL,
                      events: int | None = 5000, seed: int = 0):
    """``theta -> FisherMatrix`` as measured on the device.

    ``events=None`` uses exact probabilities; otherwise every circuit setting
    is sampled with ``events`` detections from one sequential stream.
    """
    phi = np.asarray(phi, dtype=float)
    if events is None:
        return lambda theta: circuit_fisher(spec, phi, theta, noise)
    rng = make_rng(seed, _OPT)
    return lambda theta: circuit_fisher(spec, phi, theta, noise, events=events, rng=rng)


def variational_settings(spec: CircuitSpec, phi, noise: NoiseConfig = IDEAL,
                         config: NMConfig = NMConfig(), events: int | None = 5000,
                         seed: int = 0) -> tuple[np.ndarray, list[OptimizationTrace]]:
    """Run the variational loop for one phase configuration."""
    experiment = fisher_experiment(spec, phi, noise, events, seed)
    return optimize_settings(experiment, nm_config_for(spec, config), seed)


def random_settings(spec: CircuitSpec, seed: int) -> np.ndarray:
    return make_rng(seed, _RANDOM_THETA).uniform(-math.pi, math.pi, spec.parameter_count)


def exact_cost(spec: CircuitSpec, phi, theta, noise: NoiseConfig = IDEAL) -> float:
    """``Tr[F^-1]`` from exact probabilities (``inf`` when singular)."""
    try:
        return trace_inverse(analytic_fisher(spec, phi, theta, noise))
    except SingularFisherError:
        return math.inf


# -- estimation ---------------------------------------------------------------------

class TrialRunner:
    """Repeated estimation trials for one device, truth and setting ``theta``."""

    def __init__(self, spec: CircuitSpec, noise: NoiseConfig, phi_true, theta,
                 prior: PriorConfig = PriorConfig()):
        self.spec = spec
        self.noise = noise
        self.phi_true = np.asarray(phi_true, dtype=float)
        self.theta = np.asarray(theta, dtype=float)
        self.prior = prior
        p = spec.parameter_count
        if prior.kind == "window":
            self._lattice = LatticeEstimator(spec, theta, self.phi_true, prior.halfwidth,
                                             prior.points, prior.max_shift, noise)
            self._fixed = None
        else:
            if prior.kind == "interval":
                if p != 1:
                    raise ValueError("interval prior needs a one-parameter circuit")
                grid = PosteriorGrid.interval(prior.lower, prior.upper, prior.points)
            else:
                grid = PosteriorGrid.uniform(p, prior.points)
            self._fixed = BayesianEstimator(spec, theta, grid, noise)
            self._lattice = None

    def estimator(self, seed: int, rep: int):
        if self._fixed is not None:
            return self._fixed
        m = self.prior.max_shift
        shift = make_rng(seed, rep, _WINDOW).integers(-m, m + 1, self.spec.parameter_count)
        return self._lattice.view(shift)

    def trial(self, probes: int, seed: int, rep: int, estimator: str = "mean") -> EstimateResult:
        return run_trial(self.spec, self.noise, self.phi_true, self.theta, probes,
                         make_rng(seed, rep), bayes=self.estimator(seed, rep),
                         estimator=estimator)

    def run(self, probes: int, repetitions: int, seed: int,
            estimator: str = "mean") -> list[EstimateResult]:
        return [self.trial(probes, seed, rep, estimator) for rep in range(repetitions)]


@dataclass(frozen=True)
class LossSummary:
    mode: str
    theta: np.ndarray
    losses: np.ndarray
    cost: float

    @property
    def mean(self) -> float:
        return float(self.losses.mean())

    @property
    def std(self) -> float:
        return float(self.losses.std(ddof=1)) if self.losses.size > 1 else 0.0


def resolve_theta(mode: str, spec: CircuitSpec, phi, noise: NoiseConfig, seed: int,
                  config: NMConfig = NMConfig(), events: int | None = 5000,
                  explicit=None) -> np.ndarray:
    if mode == "null":
        return np.zeros(spec.parameter_count)
    if mode == "random":
        return random_settings(spec, seed)
    if mode == "variational":
        return variational_settings(spec, phi, noise, config, events, seed)[0]
    if mode == "explicit":
        if explicit is None:
            raise ValueError("explicit theta mode needs a theta vector")
        theta = np.asarray(explicit, dtype=float)
        if theta.shape != (spec.parameter_count,):
            raise ValueError(f"explicit theta needs {spec.parameter_count} entries")
        return theta
    raise ValueError(f"unknown theta mode {mode!r}; expected one of {THETA_MODES}")


def compare_settings(spec: CircuitSpec, noise: NoiseConfig, phi_true, modes, probes: int,
                     repetitions: int, seed: int, prior: PriorConfig = PriorConfig(),
                     config: NMConfig = NMConfig(), events: int | None = 5000,
                     explicit=None, estimator: str = "mean") -> dict[str, LossSummary]:
    """Mean quadratic loss for each ``theta`` mode at one truth.

    All modes share the repetition seeds, so differences between them are
    not diluted by independent sampling noise.
    """
    out = {}
    for mode in modes:
        theta = resolve_theta(mode, spec, phi_true, noise, seed, config, events, explicit)
        runner = TrialRunner(spec, noise, phi_true, theta, prior)
        results = runner.run(probes, repetitions, seed, estimator)
        out[mode] = LossSummary(mode, theta, np.array([r.quadratic_loss for r in results]),
                                exact_cost(spec, phi_true, theta, noise))
    return out


# -- phase noise ------------------------------------------------------------------

@dataclass(frozen=True)
class PosteriorShape:
    phase_noise: float
    peak_height: float
    peak_offset: float


def posterior_shape(results: list[EstimateResult], phi_true, axis: int = 0) -> PosteriorShape:
    """Median peak density and median |mean - truth| of one marginal."""
    heights, offsets = [], []
    for r in results:
        ax, w = r.posterior.marginal(axis)
        heights.append(w.max() / (ax[1] - ax[0]))
        offsets.append(abs(np.angle(np.exp(1j * (r.mean[axis] - phi_true[axis])))))
    return PosteriorShape(math.nan, float(np.median(heights)), float(np.median(offsets)))


# -- two-photon distinguishability -----------------------------------------------------

def hom_probabilities(overlap: float) -> dict[str, float]:
    """Outcome probabilities of one photon per input on a balanced coupler."""
    dist = output_distribution(two_mode_coupler(0.5), FockState((1, 1)),
                               DistinguishabilityModel(overlap))
    return {
        "coincidence": dist.prob(1, 1),
        "bunched_a": dist.prob(2, 0),
        "bunched_b": dist.prob(0, 2),
    }


def overlap_from_delay(delay, coherence_time: float) -> np.ndarray:
    """Squared overlap of two Gaussian wave packets offset by ``delay``."""
    if coherence_time <= 0:
        raise ValueError("coherence_time must be positive")
    return np.exp(-(np.asarray(delay, dtype=float) / coherence_time) ** 2)
