"""Parameter-shift rules for phase derivatives of outcome probabilities.

A rule is a list of ``(coefficient, shift)`` terms; the derivative of a
probability along phase ``i`` is ``sum(c * P(phases + s * e_i))``.  For a
phase generated by a photon-number operator with ``k`` photons the
probabilities are trigonometric polynomials of degree ``k`` in that phase,
so a rule is exact when ``sum(c * sin(j * s)) == j`` and
``sum(c * cos(j * s)) == 0`` for every frequency ``j = 0..k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class DegenerateSpectrumError(ValueError):
    pass


class SingularShiftSystemError(ValueError):
    pass


@dataclass(frozen=True)
class ShiftRule:
    terms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "terms", tuple((float(c), float(s)) for c, s in self.terms)
        )

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    @property
    def shifts(self) -> np.ndarray:
        return np.array([s for _, s in self.terms])

    def __len__(self):
        return len(self.terms)

    def frequency_response(self, frequency: float) -> tuple[float, float]:
        """Return ``(sum c sin(f s), sum c cos(f s))`` for one frequency."""
        c, s = self.coefficients, self.shifts
        return float(c @ np.sin(frequency * s)), float(c @ np.cos(frequency * s))

    def is_exact_for(self, max_frequency: int, tol: float = 1e-12) -> bool:
        for f in range(max_frequency + 1):
            sin_sum, cos_sum = self.frequency_response(f)
            if abs(sin_sum - f) > tol or abs(cos_sum) > tol:
                return False
        return True


def standard_rule(lambda1: float, lambda2: float) -> ShiftRule:
    """Two-term rule for a generator with eigenvalues ``{lambda1, lambda2}``."""
    if lambda1 == lambda2:
        raise DegenerateSpectrumError("generator spectrum needs two distinct eigenvalues")
    r = abs(lambda1 - lambda2) / 2
    shift = math.pi / (4 * r)
    return ShiftRule(((r, shift), (-r, -shift)))


def solve_shift_coefficients(alpha: float, beta: float) -> tuple[float, float]:
    """Solve ``d1 sin a - d2 sin b = 1/2`` and ``d1 sin 2a - d2 sin 2b = 1``."""
    a = np.array(
        [[math.sin(alpha), -math.sin(beta)], [math.sin(2 * alpha), -math.sin(2 * beta)]]
    )
    det = np.linalg.det(a)
    if abs(det) < 1e-12 * max(1.0, np.abs(a).max() ** 2):
        raise SingularShiftSystemError(
            f"no unique coefficients for shifts alpha={alpha:g}, beta={beta:g}"
        )
    d1, d2 = np.linalg.solve(a, [0.5, 1.0])
    return float(d1), float(d2)


def four_term_rule(alpha: float = math.pi / 4, beta: float = math.pi / 2) -> ShiftRule:
    """Four-term rule for a generator spectrum {0, 1, 2}.

    With the default shifts the coefficients are ``d1 = 1`` and
    ``d2 = (sqrt(2) - 1) / 2``.
    """
    if alpha == math.pi / 4 and beta == math.pi / 2:
        d1, d2 = 1.0, (math.sqrt(2) - 1) / 2
    else:
        d1, d2 = solve_shift_coefficients(alpha, beta)
    return ShiftRule(((d1, alpha), (-d1, -alpha), (-d2, beta), (d2, -beta)))


def rule_for_photons(photons: int) -> ShiftRule:
    """Select the rule matching the number-operator spectrum {0, ..., photons}."""
    if photons == 1:
        return standard_rule(0, 1)
    if photons == 2:
        return four_term_rule()
    raise ValueError(f"no shift rule routed for {photons}-photon probes")


def evaluations_per_gradient(rule: ShiftRule, parameters: int) -> int:
    """Circuit settings needed for one FIM: the base point plus all shifts."""
    return 1 + len(rule) * parameters


def gradient(
    prob_fn: Callable[[np.ndarray], np.ndarray],
    index: int,
    base_phases,
    rule: ShiftRule,
) -> np.ndarray:
    """Derivative of every outcome probability with respect to phase ``index``."""
    base = np.asarray(base_phases, dtype=float)
    if not 0 <= index < base.shape[-1]:
        raise IndexError(f"parameter index {index} out of range for {base.shape[-1]} phases")
    total = 0.0
    for coeff, shift in rule.terms:
        point = base.copy()
        point[..., index] += shift
        total = total + coeff * np.asarray(prob_fn(point), dtype=float)
    return total


def jacobian(prob_fn, base_phases, rule: ShiftRule) -> np.ndarray:
    """Rows are gradients for each phase: shape ``(p, n_outcomes)``."""
    base = np.asarray(base_phases, dtype=float)
    return np.stack([gradient(prob_fn, i, base, rule) for i in range(base.shape[-1])])
