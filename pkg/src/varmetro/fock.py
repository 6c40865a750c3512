"""Linear-optical propagation of one- and two-photon Fock states.

Transition amplitudes are matrix permanents of submatrices of the mode
unitary.  All functions accept a single ``(m, m)`` unitary or a stack of
them with shape ``(..., m, m)``; the leading axes are carried through to
the returned probabilities so that whole phase grids can be evaluated in
one call.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

UNITARITY_TOL = 1e-10
MAX_PHOTONS = 2


class UnsupportedProbeError(ValueError):
    """Raised for probes outside the one/two photon range."""


@dataclass(frozen=True)
class FockState:
    """Occupation-number vector of an m-mode bosonic state."""

    occupations: tuple[int, ...]

    def __post_init__(self):
        occ = tuple(int(n) for n in self.occupations)
        if not occ:
            raise ValueError("a Fock state needs at least one mode")
        if any(n < 0 for n in occ):
            raise ValueError(f"negative occupation in {occ}")
        object.__setattr__(self, "occupations", occ)

    @classmethod
    def from_modes(cls, modes: int, *occupied: int) -> "FockState":
        """Build a state with one photon in each listed (0-based) mode."""
        occ = [0] * modes
        for k in occupied:
            occ[k] += 1
        return cls(tuple(occ))

    @property
    def modes(self) -> int:
        return len(self.occupations)

    @property
    def photons(self) -> int:
        return sum(self.occupations)

    def mode_list(self) -> list[int]:
        """Mode index of every photon, repeated by occupation."""
        return [k for k, n in enumerate(self.occupations) for _ in range(n)]

    def __str__(self):
        return "|" + ",".join(map(str, self.occupations)) + ">"


@dataclass(frozen=True)
class DistinguishabilityModel:
    """Squared wave-packet overlap of a photon pair (1 = indistinguishable)."""

    overlap: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap must lie in [0, 1], got {self.overlap}")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities over a fixed, ordered list of output patterns.

    ``probabilities`` may carry leading batch axes; the last axis always
    indexes ``outcomes``.
    """

    outcomes: tuple[FockState, ...]
    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.shape[-1] != len(self.outcomes):
            raise ValueError(
                f"{probs.shape[-1]} probabilities for {len(self.outcomes)} outcomes"
            )
        object.__setattr__(self, "probabilities", probs)

    def __len__(self):
        return len(self.outcomes)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        if self.probabilities.ndim != 1:
            raise ValueError("as_dict needs an unbatched distribution")
        return {o.occupations: float(p) for o, p in zip(self.outcomes, self.probabilities)}

    def prob(self, *occupations: int) -> float:
        return self.as_dict()[tuple(occupations)]


def is_unitary(u: np.ndarray, tol: float = UNITARITY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim < 2 or u.shape[-1] != u.shape[-2]:
        return False
    eye = np.eye(u.shape[-1])
    dev = np.linalg.norm(u @ np.conj(np.swapaxes(u, -1, -2)) - eye, axis=(-2, -1))
    return bool(np.all(dev < tol))


def check_unitary(u: np.ndarray, tol: float = UNITARITY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"mode unitary must be square, got shape {u.shape}")
    if not is_unitary(u, tol):
        dev = np.linalg.norm(u @ u.conj().T - np.eye(len(u)))
        raise ValueError(f"matrix is not unitary (Frobenius deviation {dev:.3g})")
    return u


@lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=int).reshape(-1, n)


def permanent(matrix: np.ndarray) -> complex | np.ndarray:
    """Permanent by direct expansion over permutations.

    Works on the last two axes, so a stack ``(..., n, n)`` returns an
    array of permanents.  Intended for n <= 4.
    """
    a = np.asarray(matrix)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    n = a.shape[-1]
    if n > 4:
        raise ValueError(f"direct permanent expansion limited to n <= 4, got {n}")
    if n == 0:
        return np.ones(a.shape[:-2], dtype=a.dtype)[()]
    perms = _permutations(n)
    rows = np.arange(n)
    # a[..., rows, perms] -> (..., n!, n)
    terms = a[..., rows, perms]
    return np.prod(terms, axis=-1).sum(axis=-1)[()]


@lru_cache(maxsize=None)
def outcome_patterns(modes: int, photons: int) -> tuple[FockState, ...]:
    """All occupation patterns of ``photons`` in ``modes``, lexicographic."""
    pats = set()
    for combo in itertools.combinations_with_replacement(range(modes), photons):
        occ = [0] * modes
        for k in combo:
            occ[k] += 1
        pats.add(tuple(occ))
    return tuple(FockState(p) for p in sorted(pats))


def _factorial_norm(state: FockState) -> float:
    return float(np.prod([math.factorial(n) for n in state.occupations]))


def output_amplitudes(u: np.ndarray, probe: FockState) -> tuple[tuple[FockState, ...], np.ndarray]:
    """Fock-basis amplitudes of ``probe`` after ``u`` (indistinguishable photons)."""
    u = np.asarray(u, dtype=complex)
    n = probe.photons
    if n < 1 or n > MAX_PHOTONS:
        raise UnsupportedProbeError(f"only 1- or 2-photon probes are supported, got {n}")
    outcomes, sub, out_norm = _submatrices(u, probe)
    return outcomes, permanent(sub) / np.sqrt(out_norm * _factorial_norm(probe))


def _submatrices(u, probe):
    m = u.shape[-1]
    if probe.modes != m:
        raise ValueError(f"probe has {probe.modes} modes, unitary has {m}")
    outcomes = outcome_patterns(m, probe.photons)
    cols = np.array(probe.mode_list())
    rows = np.array([o.mode_list() for o in outcomes])  # (n_out, n)
    sub = u[..., rows[:, :, None], cols[None, None, :]]  # (..., n_out, n, n)
    out_norm = np.array([_factorial_norm(o) for o in outcomes])
    return outcomes, sub, out_norm


def output_distribution(
    u: np.ndarray,
    probe: FockState,
    model: DistinguishabilityModel | None = None,
) -> OutcomeDistribution:
    """Output pattern probabilities for ``probe`` sent through ``u``.

    Two-photon probes with ``model.overlap < 1`` are a convex mixture of the
    fully indistinguishable (permanent) and fully distinguishable
    (classical) distributions.
    """
    model = model or DistinguishabilityModel()
    u = np.asarray(u, dtype=complex)
    if u.ndim < 2 or u.shape[-1] != u.shape[-2]:
        raise ValueError(f"mode unitary must be square, got shape {u.shape}")
    n = probe.photons
    if n < 1 or n > MAX_PHOTONS:
        raise UnsupportedProbeError(f"only 1- or 2-photon probes are supported, got {n}")
    if n == 1 and model.overlap != 1.0:
        raise ValueError("distinguishability only applies to two-photon probes")

    outcomes, sub, out_norm = _submatrices(u, probe)

    if n == 1:
        probs = np.abs(sub[..., 0, 0]) ** 2
    else:
        probs = np.zeros(sub.shape[:-2])
        if model.overlap > 0.0:
            amp = permanent(sub) / np.sqrt(out_norm * _factorial_norm(probe))
            probs = probs + model.overlap * np.abs(amp) ** 2
        if model.overlap < 1.0:
            classical = permanent(np.abs(sub) ** 2).real / out_norm
            probs = probs + (1.0 - model.overlap) * classical
    return OutcomeDistribution(outcomes, probs)


def two_mode_coupler(reflectivity: float = 0.5) -> np.ndarray:
    """Symmetric directional coupler, ``[[t, i r], [i r, t]]``."""
    r = math.sqrt(reflectivity)
    t = math.sqrt(1.0 - reflectivity)
    return np.array([[t, 1j * r], [1j * r, t]], dtype=complex)


def embed(block: np.ndarray, modes: int, targets: tuple[int, int]) -> np.ndarray:
    """Identity on ``modes`` with a 2x2 ``block`` acting on ``targets``."""
    u = np.eye(modes, dtype=complex)
    idx = np.array(targets)
    u[np.ix_(idx, idx)] = block
    return u
