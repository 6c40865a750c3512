"""Finite-statistics simulation of outcome counts."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fock import FockState, OutcomeDistribution


def make_rng(seed, *stream) -> np.random.Generator:
    """Generator for one independent stream derived from a master seed.

    ``make_rng(seed, rep)`` gives repetition ``rep`` its own stream, so
    repetitions can run in any order or in parallel.
    """
    if isinstance(seed, np.random.Generator):
        if stream:
            raise ValueError("cannot derive a stream from an existing Generator")
        return seed
    entropy = [int(seed)] + [int(s) for s in stream]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class CountRecord:
    outcomes: tuple[FockState, ...]
    counts: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (len(self.outcomes),):
            raise ValueError(f"{counts.shape} counts for {len(self.outcomes)} outcomes")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "total": self.total,
            "counts": [
                {"pattern": list(o.occupations), "count": int(c)}
                for o, c in zip(self.outcomes, self.counts)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CountRecord":
        outcomes = tuple(FockState(tuple(e["pattern"])) for e in data["counts"])
        rec = cls(outcomes, np.array([e["count"] for e in data["counts"]]), data.get("seed"))
        if "total" in data and data["total"] != rec.total:
            raise ValueError(f"total {data['total']} does not match counts sum {rec.total}")
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CountRecord":
        return cls.from_dict(json.loads(text))


def draw_counts(probabilities, n: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial counts from ``n`` independent categorical draws.

    Draws are made by inverting the cumulative distribution with one
    uniform variate per event, so nearby distributions sampled with the same
    stream give nearly identical counts.
    """
    if n < 0:
        raise ValueError(f"number of events must be >= 0, got {n}")
    p = np.asarray(probabilities, dtype=float)
    if n == 0:
        return np.zeros(p.shape[-1], dtype=np.int64)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="right")
    np.minimum(idx, len(p) - 1, out=idx)
    return np.bincount(idx, minlength=len(p)).astype(np.int64)


def sample(dist: OutcomeDistribution, n: int, seed=0) -> CountRecord:
    if dist.probabilities.ndim != 1:
        raise ValueError("sample needs an unbatched distribution")
    rng = make_rng(seed)
    counts = draw_counts(dist.probabilities, n, rng)
    return CountRecord(dist.outcomes, counts, seed if isinstance(seed, int) else None)


def estimate(rec: CountRecord) -> OutcomeDistribution:
    if rec.total == 0:
        raise ValueError("cannot estimate probabilities from zero events")
    return OutcomeDistribution(rec.outcomes, rec.counts / rec.total)


def derive_seed(seed: int, *indices: int) -> int:
    """Integer seed for one task, derived from a master seed and task indices."""
    ss = np.random.SeedSequence([int(seed)] + [int(i) for i in indices])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
