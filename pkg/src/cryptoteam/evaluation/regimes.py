"""Boom and bust segmentation of a weekly index by 15% trough-to-peak moves."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

THRESHOLD = 0.15


class Regime(str, Enum):
    Boom = "Boom"
    Bust = "Bust"
    Neither = "Neither"


@dataclass(frozen=True)
class RegimeSegment:
    start_week: int
    end_week: int
    kind: Regime
    change: float

    def contains(self, week: int) -> bool:
        """Whether the return of ``week`` (level[week-1] to level[week]) falls in the segment."""
        return self.start_week < week <= self.end_week

    def to_dict(self) -> dict[str, object]:
        return {"start_week": self.start_week, "end_week": self.end_week, "kind": self.kind.value, "change": self.change}


def detect_regimes(
    levels: Sequence[float],
    weeks: Sequence[int] | None = None,
    threshold: float = THRESHOLD,
) -> list[RegimeSegment]:
    """Greedy first-crossing zigzag.

    A trough is confirmed once the level rises more than ``threshold`` above
    it, a peak once the level falls more than ``threshold`` below it. Moves
    between confirmed extrema become Boom or Bust segments; everything else
    becomes Neither. Segments share endpoints and cover the whole series.
    """
    n = len(levels)
    if n < 2:
        raise ValueError("need at least 2 levels")
    if any(v <= 0 for v in levels):
        raise ValueError("levels must be positive")
    weeks = list(range(n)) if weeks is None else list(weeks)
    if len(weeks) != n:
        raise ValueError("weeks and levels differ in length")

    def move(a: int, b: int) -> float:
        return levels[b] / levels[a] - 1.0

    # (start, end, kind) on positions
    spans: list[tuple[int, int, Regime]] = []
    phase: Regime | None = None
    start = 0  # confirmed extreme opening the current phase
    hi = lo = 0
    for i in range(1, n):
        if phase is None:
            if levels[i] > levels[hi]:
                hi = i
            if levels[i] < levels[lo]:
                lo = i
            if move(lo, i) > threshold:
                phase, start, hi = Regime.Boom, lo, i
            elif move(hi, i) < -threshold:
                phase, start, lo = Regime.Bust, hi, i
            if phase is not None and start > 0:
                spans.append((0, start, Regime.Neither))
        elif phase is Regime.Boom:
            if levels[i] > levels[hi]:
                hi = i
            elif move(hi, i) < -threshold:
                spans.append((start, hi, Regime.Boom))
                phase, start, lo = Regime.Bust, hi, i
        else:
            if levels[i] < levels[lo]:
                lo = i
            elif move(lo, i) > threshold:
                spans.append((start, lo, Regime.Bust))
                phase, start, hi = Regime.Boom, lo, i
    if phase is None:
        spans.append((0, n - 1, Regime.Neither))
    else:
        extreme = hi if phase is Regime.Boom else lo
        spans.append((start, extreme, phase))
        if extreme < n - 1:
            spans.append((extreme, n - 1, Regime.Neither))
    return [RegimeSegment(weeks[a], weeks[b], kind, move(a, b)) for a, b, kind in spans]


def regime_weeks(segments: Sequence[RegimeSegment], kind: Regime) -> list[int]:
    """Return weeks that fall in segments of ``kind``."""
    out = []
    for seg in segments:
        if seg.kind is kind:
            out.extend(range(seg.start_week + 1, seg.end_week + 1))
    return out
