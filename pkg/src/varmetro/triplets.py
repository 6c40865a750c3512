"""Built-in phase triplets for the single- and two-photon studies.

``s1..s10`` are the two-photon configurations, ``sbar1..sbar6`` the
single-photon ones.  Reference them as ``paper:s3`` or ``paper:sbar1``.
"""
from __future__ import annotations

import numpy as np

TRIPLETS: dict[str, tuple[float, float, float]] = {
    "s1": (-0.588, 1.302, 0.511),
    "s2": (-0.636, 1.379, -0.024),
    "s3": (-0.153, 0.902, 0.587),
    "s4": (0.830, 2.263, 0.703),
    "s5": (-0.723, 1.938, -1.241),
    "s6": (0.863, 1.132, 0.111),
    "s7": (-0.617, 1.037, -0.369),
    "s8": (1.498, 0.776, 0.571),
    "s9": (0.777, 2.330, 0.204),
    "s10": (0.210, 1.436, -0.150),
    "sbar1": (1.856, -1.782, -0.896),
    "sbar2": (0.748, 2.741, -2.225),
    "sbar3": (0.768, 2.636, -1.582),
    "sbar4": (0.701, 2.452, -0.978),
    "sbar5": (0.796, 2.322, 0.160),
    "sbar6": (0.834, 2.277, 0.706),
}

PREFIX = "paper:"


def resolve(ref: str) -> np.ndarray:
    """Look up ``paper:<name>``; raises ``KeyError`` for unknown names."""
    if not ref.startswith(PREFIX):
        raise KeyError(f"built-in triplets are referenced as {PREFIX}<name>, got {ref!r}")
    name = ref[len(PREFIX):]
    if name not in TRIPLETS:
        raise KeyError(f"unknown triplet {ref!r}; known: {', '.join(TRIPLETS)}")
    return np.array(TRIPLETS[name])


def expand(ref: str) -> list[str]:
    """Expand ranges like ``paper:s1..s10`` into single references."""
    if ".." not in ref:
        return [ref]
    head, tail = ref.split("..", 1)
    if not head.startswith(PREFIX):
        raise KeyError(f"range {ref!r} must start with {PREFIX}")
    first = head[len(PREFIX):]
    stem = first.rstrip("0123456789")
    if tail.rstrip("0123456789") != stem or tail == stem:
        raise KeyError(f"range {ref!r} mixes triplet families")
    lo, hi = int(first[len(stem):]), int(tail[len(stem):])
    if lo > hi:
        raise KeyError(f"empty range {ref!r}")
    names = [f"{PREFIX}{stem}{k}" for k in range(lo, hi + 1)]
    for n in names:
        resolve(n)
    return names
