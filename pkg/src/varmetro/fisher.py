"""Classical and quantum Fisher information for the phase sensor."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .circuit import IDEAL, CircuitSpec, NoiseConfig, PhaseConfig, response
from .fock import output_amplitudes
from .sampling import draw_counts, make_rng
from .shift_rules import ShiftRule, jacobian, rule_for_photons

PROBABILITY_FLOOR = 1e-12
SINGULAR_COST = 1e6


class SingularFisherError(np.linalg.LinAlgError):
    """The FIM cannot be inverted: some phase combination is not informative."""


@dataclass(frozen=True)
class FisherMatrix:
    entries: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.entries, dtype=float)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ValueError(f"Fisher matrix must be square, got {f.shape}")
        object.__setattr__(self, "entries", f)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.entries, self.entries.T, atol=tol, rtol=0))

    def is_psd(self, tol: float = 1e-9) -> bool:
        sym = (self.entries + self.entries.T) / 2
        return bool(np.linalg.eigvalsh(sym).min() >= -tol)

    def trace_inverse(self, regularization: float = 0.0) -> float:
        return trace_inverse(self, regularization)


def fim(probabilities, gradients) -> FisherMatrix:
    """``F_ij = sum_x d_i P(x) d_j P(x) / P(x)``, skipping outcomes with P below the floor.

    ``probabilities`` is an :class:`OutcomeDistribution` or a vector;
    ``gradients`` has one row per phase.
    """
    p = np.asarray(getattr(probabilities, "probabilities", probabilities), dtype=float)
    g = np.atleast_2d(np.asarray(gradients, dtype=float))
    if p.ndim != 1 or g.shape[1] != p.shape[0]:
        raise ValueError(
            f"gradients of shape {g.shape} do not match {p.shape[0]} outcome probabilities"
        )
    keep = p >= PROBABILITY_FLOOR
    gk = g[:, keep]
    f = (gk / p[keep]) @ gk.T
    return FisherMatrix((f + f.T) / 2)


def trace_inverse(f: FisherMatrix, regularization: float = 0.0) -> float:
    """``Tr[(F + reg * I)^-1]``; raises :class:`SingularFisherError` if not invertible."""
    if regularization < 0:
        raise ValueError(f"regularization must be >= 0, got {regularization}")
    m = np.asarray(getattr(f, "entries", f), dtype=float)
    m = m + regularization * np.eye(m.shape[0])
    eig = np.linalg.eigvalsh((m + m.T) / 2)
    scale = max(1.0, float(np.abs(eig).max()))
    if eig.min() <= 1e-12 * scale:
        raise SingularFisherError(
            f"Fisher matrix is singular (smallest eigenvalue {eig.min():.3g})"
        )
    return float(np.sum(1.0 / eig))


def cost_or_fallback(f: FisherMatrix, regularization: float = 0.0,
                     fallback: float = SINGULAR_COST) -> float:
    """Inverse-trace cost with a large finite value for singular matrices."""
    try:
        return trace_inverse(f, regularization)
    except SingularFisherError:
        return fallback


# -- circuit-level FIM ---------------------------------------------------------

def circuit_fisher(
    spec: CircuitSpec,
    phi,
    theta,
    noise: NoiseConfig = IDEAL,
    events: int | None = None,
    rng: np.random.Generator | None = None,
    rule: ShiftRule | None = None,
) -> FisherMatrix:
    """FIM at ``(phi, theta)`` from shift-rule gradients taken through ``theta``.

    With ``events=None`` exact probabilities are used.  Otherwise every
    circuit setting (the base point and each shifted point) is measured with
    ``events`` detected events, as on hardware.
    """
    phi = np.asarray(phi, dtype=float)
    rule = rule or rule_for_photons(spec.photons)

    if events is None:
        def measure(th):
            return response(spec, PhaseConfig(phi, th), noise).probabilities
    else:
        if rng is None:
            raise ValueError("sampled FIM needs an rng")

        def measure(th):
            p = response(spec, PhaseConfig(phi, th), noise).probabilities
            return draw_counts(p, events, rng) / events

    base = measure(np.asarray(theta, dtype=float))
    grads = jacobian(measure, theta, rule)
    return fim(base, grads)


def acquisitions_per_fim(spec: CircuitSpec, rule: ShiftRule | None = None) -> int:
    rule = rule or rule_for_photons(spec.photons)
    return 1 + len(rule) * spec.parameter_count


def analytic_fisher(spec: CircuitSpec, phi, theta, noise: NoiseConfig = IDEAL,
                    h: float = 1e-6) -> FisherMatrix:
    """FIM from central finite differences of exact probabilities (reference path)."""
    total = np.asarray(phi, dtype=float) + np.asarray(theta, dtype=float)

    def prob(t):
        return response(spec, PhaseConfig(t), noise).probabilities

    grads = []
    for i in range(spec.parameter_count):
        e = np.zeros(spec.parameter_count)
        e[i] = h
        grads.append((prob(total + e) - prob(total - e)) / (2 * h))
    return fim(prob(total), np.array(grads))


# -- quantum Fisher information --------------------------------------------------

def qfi_pure(amplitudes, occupations, phases=None, tol: float = 1e-9) -> FisherMatrix:
    """QFI of ``|psi(phi)> = sum_s a_s exp(i n_s . phi) |s>``.

    ``occupations`` has one row per basis state and one column per phase
    (photon numbers of the phase-carrying modes).
    """
    a = np.asarray(amplitudes, dtype=complex)
    n = np.asarray(occupations, dtype=float)
    norm = np.vdot(a, a).real
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state is not normalized (norm^2 = {norm:.6g})")
    if phases is not None:
        a = a * np.exp(1j * (n @ np.asarray(phases, dtype=float)))
    d = 1j * n.T * a  # row i is d_i |psi>
    overlap = d.conj() @ d.T  # <d_i psi | d_j psi>
    berry = d.conj() @ a  # <d_i psi | psi>
    q = 4 * np.real(overlap - np.outer(berry, berry.conj()))
    return FisherMatrix((q + q.T) / 2)


def device_qfi(spec: CircuitSpec) -> FisherMatrix:
    """QFI of the probe after the first section (measurement-independent)."""
    outcomes, amps = output_amplitudes(spec.section_a, spec.probe)
    occ = np.array([o.occupations[: spec.parameter_count] for o in outcomes])
    return qfi_pure(amps, occ)


@dataclass(frozen=True)
class CRBReport:
    trace_inverse: float
    fisher: FisherMatrix
    probes: int = 1
    qcrb_trace_inverse: float | None = None

    def __post_init__(self):
        if self.probes < 1:
            raise ValueError("probes must be >= 1")

    @property
    def crb(self) -> float:
        return self.trace_inverse / self.probes

    @property
    def qcrb(self) -> float | None:
        if self.qcrb_trace_inverse is None:
            return None
        return self.qcrb_trace_inverse / self.probes

    def to_dict(self) -> dict:
        return {
            "trace_inverse": self.trace_inverse,
            "crb": self.crb,
            "probes": self.probes,
            "qcrb_trace_inverse": self.qcrb_trace_inverse,
            "fisher": self.fisher.entries.tolist(),
            "symmetric": self.fisher.is_symmetric(),
            "psd": self.fisher.is_psd(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "CRBReport":
        return cls(
            trace_inverse=float(data["trace_inverse"]),
            fisher=FisherMatrix(np.array(data["fisher"])),
            probes=int(data.get("probes", 1)),
            qcrb_trace_inverse=data.get("qcrb_trace_inverse"),
        )
