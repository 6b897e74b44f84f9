"""Latent activity profiles u(t) that decide when evidence becomes visible."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..labels import INTERMITTENT, REGIMES, SHORT_LOCAL

RAMP_FRAMES = 3
SHORT_WINDOW = (8, 16)
INTERMITTENT_WINDOWS = (2, 4)
DUTY_CYCLE = (0.3, 0.6)
MIN_WINDOW = 4
MIN_GAP = 4


@dataclass(frozen=True)
class ActivityProfile:
    """Per-frame activity in [0, 1] with the windows where it is fully on."""

    u: np.ndarray
    regime: str
    onsets: Tuple[int, ...]
    lengths: Tuple[int, ...]

    @property
    def duty_cycle(self) -> float:
        return sum(self.lengths) / len(self.u)


def _ramped(frames: int, onsets: Tuple[int, ...], lengths: Tuple[int, ...]) -> np.ndarray:
    """Ones inside each window, linear 3-frame ramps outside its edges."""

    u = np.zeros(frames)
    steps = np.arange(1, RAMP_FRAMES + 1) / (RAMP_FRAMES + 1)
    for onset, length in zip(onsets, lengths):
        end = onset + length
        u[onset:end] = 1.0
        for k, level in enumerate(steps[::-1], start=1):
            if onset - k >= 0:
                u[onset - k] = max(u[onset - k], level)
            if end - 1 + k < frames:
                u[end - 1 + k] = max(u[end - 1 + k], level)
    return u


def _split(total: int, parts: int, minimum: int, rng: np.random.Generator) -> np.ndarray:
    extra = total - parts * minimum
    return minimum + rng.multinomial(extra, np.full(parts, 1.0 / parts))


def _short_local(frames: int, rng: np.random.Generator) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    length = min(int(rng.integers(SHORT_WINDOW[0], SHORT_WINDOW[1] + 1)), frames)
    onset = int(rng.integers(0, frames - length + 1))
    return (onset,), (length,)


def _intermittent(frames: int, rng: np.random.Generator) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    low = math.ceil(DUTY_CYCLE[0] * frames)
    high = math.floor(DUTY_CYCLE[1] * frames)
    count = int(rng.integers(INTERMITTENT_WINDOWS[0], INTERMITTENT_WINDOWS[1] + 1))
    # Shrink the window count until the minimum layout fits the horizon.
    while count > 1 and count * MIN_WINDOW + (count - 1) * MIN_GAP > frames:
        count -= 1
    high = min(high, frames - (count - 1) * MIN_GAP)
    low = max(min(low, high), count * MIN_WINDOW)
    total = int(rng.integers(low, max(low, high) + 1))

    lengths = _split(total, count, MIN_WINDOW, rng)
    free = frames - total - (count - 1) * MIN_GAP
    gaps = rng.multinomial(max(free, 0), np.full(count + 1, 1.0 / (count + 1)))
    onsets = []
    cursor = int(gaps[0])
    for index, length in enumerate(lengths):
        onsets.append(cursor)
        cursor += int(length) + MIN_GAP + int(gaps[index + 1])
    return tuple(onsets), tuple(int(length) for length in lengths)


def sample_activity_profile(regime: str, rng: np.random.Generator, frames: int = 64) -> ActivityProfile:
    """Draw u(t) for ``regime``: one 8-16 frame window, or 2-4 windows at 30-60% duty."""

    if regime not in REGIMES:
        raise ValueError(f"Unknown regime '{regime}'; expected one of {REGIMES}.")
    if regime == SHORT_LOCAL:
        onsets, lengths = _short_local(frames, rng)
    else:
        onsets, lengths = _intermittent(frames, rng)
    return ActivityProfile(u=_ramped(frames, onsets, lengths), regime=regime, onsets=onsets, lengths=lengths)


__all__ = ["ActivityProfile", "INTERMITTENT", "SHORT_LOCAL", "sample_activity_profile"]
