"""Reconfigurable interferometer models.

A circuit is ``section_b @ phase_layer(phi + theta) @ section_a``: two
static multiport sections sandwiching one layer of internal phase shifts,
with the last mode as the phase reference.  ``phi`` holds the phases to be
estimated and ``theta`` the measurement settings; both act on the same
arms, so only their sum enters the physics.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fock import (
    DistinguishabilityModel,
    FockState,
    OutcomeDistribution,
    check_unitary,
    embed,
    output_distribution,
    two_mode_coupler,
)


@dataclass(frozen=True)
class CircuitSpec:
    """Interferometer layout: two static sections and an input probe."""

    section_a: np.ndarray
    section_b: np.ndarray
    probe: FockState
    name: str = "custom"

    def __post_init__(self):
        a = check_unitary(self.section_a)
        b = check_unitary(self.section_b)
        if a.shape != b.shape:
            raise ValueError(f"section shapes differ: {a.shape} vs {b.shape}")
        if self.probe.modes != a.shape[0]:
            raise ValueError(
                f"probe has {self.probe.modes} modes, sections have {a.shape[0]}"
            )
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "section_a", a)
        object.__setattr__(self, "section_b", b)

    @property
    def modes(self) -> int:
        return self.section_a.shape[0]

    @property
    def parameter_count(self) -> int:
        return self.modes - 1

    @property
    def photons(self) -> int:
        return self.probe.photons

    def with_probe(self, probe: FockState) -> "CircuitSpec":
        return CircuitSpec(self.section_a, self.section_b, probe, self.name)

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        def rows(u):
            return [[[float(z.real), float(z.imag)] for z in row] for row in u]

        return {
            "name": self.name,
            "modes": self.modes,
            "parameter_count": self.parameter_count,
            "probe": list(self.probe.occupations),
            "section_a": rows(self.section_a),
            "section_b": rows(self.section_b),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitSpec":
        def mat(rows):
            return np.array([[complex(re, im) for re, im in row] for row in rows])

        spec = cls(
            section_a=mat(data["section_a"]),
            section_b=mat(data["section_b"]),
            probe=FockState(tuple(data["probe"])),
            name=data.get("name", "custom"),
        )
        if "modes" in data and data["modes"] != spec.modes:
            raise ValueError(f"declared modes {data['modes']} != matrix size {spec.modes}")
        if "parameter_count" in data and data["parameter_count"] != spec.parameter_count:
            raise ValueError(
                f"parameter_count must be modes - 1 = {spec.parameter_count}, "
                f"got {data['parameter_count']}"
            )
        return spec

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CircuitSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PhaseConfig:
    """Parameters of interest ``phi`` and measurement settings ``theta``."""

    phi: np.ndarray
    theta: np.ndarray = field(default=None)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        theta = np.zeros_like(phi) if self.theta is None else np.asarray(self.theta, dtype=float)
        if phi.shape[-1] != theta.shape[-1]:
            raise ValueError(f"phi has {phi.shape[-1]} entries, theta has {theta.shape[-1]}")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(theta))):
            raise ValueError("phases must be finite")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "theta", theta)

    @property
    def total(self) -> np.ndarray:
        return self.phi + self.theta


@dataclass(frozen=True)
class NoiseConfig:
    visibility: float = 1.0
    phase_noise: float = 0.0
    overlap: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility}")
        if not (self.phase_noise >= 0.0 and math.isfinite(self.phase_noise)):
            raise ValueError(f"phase_noise must be finite and >= 0, got {self.phase_noise}")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap must lie in [0, 1], got {self.overlap}")

    @property
    def is_ideal(self) -> bool:
        return self.visibility == 1.0 and self.phase_noise == 0.0 and self.overlap == 1.0

    def without_phase_noise(self) -> "NoiseConfig":
        return NoiseConfig(self.visibility, 0.0, self.overlap)


IDEAL = NoiseConfig()


def phase_layer(phases, modes: int) -> np.ndarray:
    """Diagonal unitary ``diag(exp(i*phases), 1, ...)``; trailing modes get phase 0.

    ``phases`` may be batched with shape ``(..., p)``.
    """
    phases = np.asarray(phases, dtype=float)
    p = phases.shape[-1]
    if p > modes:
        raise ValueError(f"{p} phases for {modes} modes")
    diag = np.ones(phases.shape[:-1] + (modes,), dtype=complex)
    diag[..., :p] = np.exp(1j * np.mod(phases, 2 * np.pi))
    out = np.zeros(diag.shape + (modes,), dtype=complex)
    idx = np.arange(modes)
    out[..., idx, idx] = diag
    return out


def _unitary_from_total(spec: CircuitSpec, total) -> np.ndarray:
    total = np.asarray(total, dtype=float)
    if total.shape[-1] != spec.parameter_count:
        raise ValueError(
            f"circuit takes {spec.parameter_count} phases, got {total.shape[-1]}"
        )
    diag = np.ones(total.shape[:-1] + (spec.modes,), dtype=complex)
    diag[..., :-1] = np.exp(1j * total)
    # section_b @ diag(d) @ section_a without building the diagonal matrix
    return (spec.section_b * diag[..., None, :]) @ spec.section_a


def build_unitary(spec: CircuitSpec, cfg: PhaseConfig) -> np.ndarray:
    return _unitary_from_total(spec, cfg.total)


def response(
    spec: CircuitSpec, cfg: PhaseConfig, noise: NoiseConfig = IDEAL
) -> OutcomeDistribution:
    """Outcome distribution at the operating point ``phi + phase_noise + theta``.

    Finite visibility mixes the ideal distribution with the uniform one over
    the outcome set.
    """
    total = cfg.phi + noise.phase_noise + cfg.theta
    u = _unitary_from_total(spec, total)
    model = DistinguishabilityModel(noise.overlap if spec.photons == 2 else 1.0)
    dist = output_distribution(u, spec.probe, model)
    if noise.visibility == 1.0:
        return dist
    v = noise.visibility
    probs = v * dist.probabilities + (1.0 - v) / len(dist)
    return OutcomeDistribution(dist.outcomes, probs)


def response_fn(spec: CircuitSpec, noise: NoiseConfig = IDEAL, phi=None):
    """Return ``theta -> probabilities`` (or ``phi -> probabilities`` if phi is None).

    The returned callable takes arrays with a trailing phase axis and
    returns a probability array with a trailing outcome axis.
    """
    if phi is None:
        return lambda x: response(spec, PhaseConfig(x), noise).probabilities
    phi = np.asarray(phi, dtype=float)
    return lambda theta: response(spec, PhaseConfig(phi, theta), noise).probabilities


def outcome_labels(spec: CircuitSpec) -> tuple[FockState, ...]:
    return response(spec, PhaseConfig(np.zeros(spec.parameter_count))).outcomes


# -- built-in layouts ---------------------------------------------------------

def _dual_layer_section(modes: int = 4) -> np.ndarray:
    bs = two_mode_coupler(0.5)
    first = embed(bs, modes, (0, 1)) @ embed(bs, modes, (2, 3))
    second = embed(bs, modes, (0, 2)) @ embed(bs, modes, (1, 3))
    return second @ first


SINGLE_PHOTON_PROBE = FockState((1, 0, 0, 0))
TWO_PHOTON_PROBE = FockState((1, 1, 0, 0))


def default_device(probe: str | FockState = "single") -> CircuitSpec:
    """Four-mode device: each section is couplers on (1,2),(3,4) then (1,3),(2,4).

    ``probe`` is ``"single"`` (photon in mode 1), ``"two"`` (one photon in
    each of modes 1 and 2) or an explicit :class:`FockState`.
    """
    if isinstance(probe, str):
        probe = {"single": SINGLE_PHOTON_PROBE, "two": TWO_PHOTON_PROBE}[probe]
    section = _dual_layer_section(4)
    return CircuitSpec(section, section, probe, name="default-4mode")


def reference_device() -> CircuitSpec:
    """Two-mode Mach-Zehnder (one phase) probed by a single photon."""
    bs = two_mode_coupler(0.5)
    return CircuitSpec(bs, bs, FockState((1, 0)), name="reference-2mode")
