"""Grid-based Bayesian multiphase estimation and quadratic-loss scoring."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .circuit import IDEAL, CircuitSpec, NoiseConfig, PhaseConfig, response
from .sampling import CountRecord, draw_counts, make_rng

TWO_PI = 2 * np.pi


class DegeneratePosteriorError(FloatingPointError):
    pass


def wrap(x) -> np.ndarray:
    """Map angles to (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    return np.pi - np.mod(np.pi - x, TWO_PI)


@dataclass
class PosteriorGrid:
    """Weights on a product grid of phase values.

    Axes either tile the whole circle (``periodic``) or a window
    ``center +- halfwidth`` used as a local prior.
    """

    axes: tuple[np.ndarray, ...]
    weights: np.ndarray
    periodic: bool = True

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.weights = np.asarray(self.weights, dtype=float)
        shape = tuple(len(a) for a in self.axes)
        if self.weights.shape != shape:
            raise ValueError(f"weights shape {self.weights.shape} != grid shape {shape}")
        if np.any(self.weights < 0):
            raise ValueError("posterior weights must be non-negative")

    @classmethod
    def uniform(cls, parameters: int, points: int = 120, center=None,
                halfwidth: float = math.pi) -> "PosteriorGrid":
        if points < 2:
            raise ValueError("need at least two grid points per axis")
        if center is None:
            if halfwidth != math.pi:
                raise ValueError("a window halfwidth needs a center")
            axis = np.linspace(-np.pi, np.pi, points, endpoint=False)
            axes = (axis,) * parameters
            periodic = True
        else:
            center = np.broadcast_to(np.asarray(center, dtype=float), (parameters,))
            if not 0 < halfwidth <= math.pi:
                raise ValueError(f"halfwidth must lie in (0, pi], got {halfwidth}")
            offsets = -halfwidth + (np.arange(points) + 0.5) * (2 * halfwidth / points)
            axes = tuple(c + offsets for c in center)
            periodic = halfwidth == math.pi
        shape = (points,) * parameters
        return cls(axes, np.full(shape, 1.0 / np.prod(shape)), periodic)

    @classmethod
    def interval(cls, lower: float, upper: float, points: int) -> "PosteriorGrid":
        """One-parameter uniform prior over cell centres of ``[lower, upper]``."""
        if not upper > lower:
            raise ValueError("interval needs upper > lower")
        step = (upper - lower) / points
        axis = lower + (np.arange(points) + 0.5) * step
        return cls((axis,), np.full(points, 1.0 / points), periodic=False)

    @property
    def parameters(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    @property
    def cell_volume(self) -> float:
        return float(np.prod([a[1] - a[0] for a in self.axes]))

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def normalized(self) -> "PosteriorGrid":
        total = self.weights.sum()
        if not total > 0 or not math.isfinite(total):
            raise DegeneratePosteriorError("posterior has no mass")
        return PosteriorGrid(self.axes, self.weights / total, self.periodic)

    def marginal(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        others = tuple(k for k in range(self.parameters) if k != axis)
        return self.axes[axis], self.weights.sum(axis=others)

    def entropy(self) -> float:
        w = self.weights[self.weights > 0]
        return float(-(w * np.log(w)).sum())

    def mode(self) -> np.ndarray:
        idx = np.unravel_index(np.argmax(self.weights), self.shape)
        return np.array([a[i] for a, i in zip(self.axes, idx)])

    def peak_density(self) -> float:
        """Largest posterior density (weight per unit phase volume)."""
        return float(self.weights.max() / self.cell_volume)

    def marginals_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "phase", "weight"])
        for k in range(self.parameters):
            axis, weights = self.marginal(k)
            for a, m in zip(axis, weights):
                w.writerow([k + 1, f"{a:.10g}", f"{m:.10g}"])
        return buf.getvalue()


def likelihood_table(grid: PosteriorGrid, likelihood: Callable[[np.ndarray], np.ndarray],
                     chunk: int = 100_000) -> np.ndarray:
    """Log-probabilities of every outcome at every grid node: ``(n_nodes, n_out)``."""
    nodes = grid.nodes()
    parts = []
    for start in range(0, len(nodes), chunk):
        p = np.asarray(likelihood(nodes[start:start + chunk]), dtype=float)
        with np.errstate(divide="ignore"):
            parts.append(np.log(np.clip(p, 0.0, None)))
    return np.concatenate(parts, axis=0)


def bayesian_update(prior: PosteriorGrid, counts, likelihood=None,
                    table: np.ndarray | None = None) -> PosteriorGrid:
    """Posterior proportional to ``prior * prod_x P(x|phi)^counts(x)``, in log space.

    Pass a precomputed ``table`` from :func:`likelihood_table` to reuse the
    likelihood across many updates on the same grid.
    """
    c = np.asarray(getattr(counts, "counts", counts), dtype=float)
    if table is None:
        if likelihood is None:
            raise ValueError("need either a likelihood or a precomputed table")
        table = likelihood_table(prior, likelihood)
    if table.shape != (prior.weights.size, c.size):
        raise ValueError(f"likelihood table {table.shape} does not match grid/counts")
    seen = c > 0
    loglik = table[:, seen] @ c[seen] if seen.any() else np.zeros(len(table))
    with np.errstate(divide="ignore"):
        logw = np.log(prior.weights.ravel()) + loglik
    top = logw.max()
    if not math.isfinite(top):
        raise DegeneratePosteriorError("every grid node has zero likelihood")
    w = np.exp(logw - top)
    w /= w.sum()
    return PosteriorGrid(prior.axes, w.reshape(prior.shape), prior.periodic)


@dataclass
class EstimateResult:
    mean: np.ndarray
    quadratic_loss: float
    variance: np.ndarray
    resultant: np.ndarray
    prior_only: bool = False
    mode: np.ndarray | None = None
    peak_density: float | None = None
    posterior: PosteriorGrid | None = field(default=None, repr=False)

    @property
    def weak_resultant(self) -> bool:
        """True when some circular mean is ill-defined (near-uniform marginal)."""
        return bool(np.any(self.resultant < 1e-3))


def quadratic_loss(estimate, truth) -> float:
    d = wrap(np.asarray(estimate, dtype=float) - np.asarray(truth, dtype=float))
    return float(d @ d)


def point_estimate(post: PosteriorGrid, phi_true, estimator: str = "mean") -> EstimateResult:
    """Circular mean (or mode) of the posterior and its quadratic loss."""
    means, resultants = [], []
    for k in range(post.parameters):
        axis, w = post.marginal(k)
        z = np.sum(w * np.exp(1j * axis))
        means.append(np.angle(z))
        resultants.append(abs(z))
    mean = wrap(np.array(means))
    mean[mean == np.pi] = -np.pi
    resultant = np.array(resultants)
    mode = post.mode()
    if estimator == "mean":
        point = mean
    elif estimator == "mode":
        point = mode
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return EstimateResult(
        mean=mean,
        quadratic_loss=quadratic_loss(point, phi_true),
        variance=1.0 - resultant,
        resultant=resultant,
        mode=mode,
        peak_density=post.peak_density(),
        posterior=post,
    )


class BayesianEstimator:
    """Reusable estimator for one device model, setting ``theta`` and prior grid.

    The estimator's likelihood knows the device's visibility and photon
    overlap but not any phase offset in the true phases.
    """

    def __init__(self, spec: CircuitSpec, theta, prior: PosteriorGrid,
                 noise: NoiseConfig = IDEAL):
        self.spec = spec
        self.theta = np.asarray(theta, dtype=float)
        self.prior = prior
        self.model_noise = noise.without_phase_noise()
        if prior.parameters != spec.parameter_count:
            raise ValueError(
                f"prior has {prior.parameters} axes, circuit has {spec.parameter_count} phases"
            )
        self._table = None

    def likelihood(self, phi) -> np.ndarray:
        return response(self.spec, PhaseConfig(phi, np.broadcast_to(self.theta, np.shape(phi))),
                        self.model_noise).probabilities

    @property
    def table(self) -> np.ndarray:
        if self._table is None:
            self._table = likelihood_table(self.prior, self.likelihood)
        return self._table

    def update(self, counts) -> PosteriorGrid:
        return bayesian_update(self.prior, counts, table=self.table)


class LatticeEstimator:
    """Likelihood tabulated once on a regular lattice around ``center``.

    Each trial's prior is a uniform window of ``points`` nodes per axis
    (half-width ``halfwidth``), displaced from ``center`` by a whole number
    of lattice cells, at most ``max_shift`` per axis.  Windows are slices of
    one table, so many trials with different prior windows stay cheap.
    """

    def __init__(self, spec: CircuitSpec, theta, center, halfwidth: float, points: int,
                 max_shift: int, noise: NoiseConfig = IDEAL):
        if points < 2:
            raise ValueError("need at least two grid points per axis")
        if max_shift < 0:
            raise ValueError("max_shift must be >= 0")
        if not 0 < halfwidth <= math.pi:
            raise ValueError(f"halfwidth must lie in (0, pi], got {halfwidth}")
        self.spec = spec
        self.theta = np.asarray(theta, dtype=float)
        self.points = points
        self.max_shift = max_shift
        self.model_noise = noise.without_phase_noise()
        p = spec.parameter_count
        center = np.broadcast_to(np.asarray(center, dtype=float), (p,))
        step = 2 * halfwidth / points
        span = points + 2 * max_shift
        offsets = -halfwidth - max_shift * step + (np.arange(span) + 0.5) * step
        self.axes = tuple(c + offsets for c in center)
        lattice = PosteriorGrid(self.axes, np.ones((span,) * p), periodic=False)
        self._table = likelihood_table(lattice, self.likelihood).reshape((span,) * p + (-1,))

    def likelihood(self, phi) -> np.ndarray:
        return response(self.spec, PhaseConfig(phi, np.broadcast_to(self.theta, np.shape(phi))),
                        self.model_noise).probabilities

    def view(self, shift) -> "_WindowView":
        shift = np.asarray(shift, dtype=int)
        if shift.shape != (len(self.axes),) or np.any(np.abs(shift) > self.max_shift):
            raise ValueError(f"shift must have {len(self.axes)} entries within +-{self.max_shift}")
        sl = tuple(slice(self.max_shift + s, self.max_shift + s + self.points) for s in shift)
        axes = tuple(a[s] for a, s in zip(self.axes, sl))
        table = self._table[sl].reshape(-1, self._table.shape[-1])
        prior = PosteriorGrid(axes, np.full((self.points,) * len(axes), 1.0 / self.points ** len(axes)),
                              periodic=False)
        return _WindowView(self.theta, prior, table)


@dataclass
class _WindowView:
    theta: np.ndarray
    prior: PosteriorGrid
    table: np.ndarray

    def update(self, counts) -> PosteriorGrid:
        return bayesian_update(self.prior, counts, table=self.table)


def run_trial(spec: CircuitSpec, noise: NoiseConfig, phi_true, theta, probes: int, seed,
              prior: PosteriorGrid | None = None, estimator: str = "mean",
              bayes: BayesianEstimator | None = None) -> EstimateResult:
    """Simulate ``probes`` detections at ``(phi_true, theta)`` and score the estimate.

    With ``probes == 0`` the result is the prior-only estimate, flagged as
    such.  A shared ``bayes`` estimator avoids recomputing the likelihood
    table across repetitions.
    """
    if probes < 0:
        raise ValueError("probes must be >= 0")
    phi_true = np.asarray(phi_true, dtype=float)
    if bayes is None:
        prior = prior or PosteriorGrid.uniform(spec.parameter_count)
        bayes = BayesianEstimator(spec, theta, prior, noise)
    elif not np.allclose(bayes.theta, theta):
        raise ValueError("shared estimator was built for different settings")
    rng = make_rng(seed)
    truth = response(spec, PhaseConfig(phi_true, theta), noise)
    counts = CountRecord(truth.outcomes, draw_counts(truth.probabilities, probes, rng))
    post = bayes.prior if probes == 0 else bayes.update(counts)
    result = point_estimate(post, phi_true, estimator)
    result.prior_only = probes == 0
    return result
