"""Quintile labels and the floor-boundary partition shared by factors and portfolios."""

from __future__ import annotations

from collections.abc import Mapping
from enum import IntEnum


class QuintileLabel(IntEnum):
    VeryLow = 1
    Low = 2
    Medium = 3
    High = 4
    VeryHigh = 5

    @property
    def text(self) -> str:
        """Human-readable form used in prompts ("Very High")."""
        return {1: "Very Low", 2: "Low", 3: "Medium", 4: "High", 5: "Very High"}[self.value]

    @classmethod
    def from_text(cls, text: str) -> QuintileLabel:
        key = text.replace(" ", "").lower()
        for label in cls:
            if label.name.lower() == key:
                return label
        raise ValueError(f"unknown quintile label {text!r}")


def bucket_bounds(n: int, buckets: int = 5) -> list[int]:
    """Upper rank (1-based, inclusive) of each bucket: ``floor(n * i / buckets)``."""
    return [n * i // buckets for i in range(1, buckets + 1)]


def sort_ascending(values: Mapping[str, float]) -> list[str]:
    """Keys ordered by value, ties broken by ascending key."""
    return sorted(values, key=lambda k: (values[k], k))


def partition(values: Mapping[str, float]) -> list[list[str]]:
    """Split keys into five buckets by ascending value.

    Bucket ``i`` holds ranks ``(floor(N(i-1)/5), floor(N i/5)]``; the first
    bucket starts at rank 1. Requires at least five keys.
    """
    n = len(values)
    if n < 5:
        raise ValueError(f"need at least 5 values for a quintile split, got {n}")
    ordered = sort_ascending(values)
    out, lower = [], 0
    for upper in bucket_bounds(n):
        out.append(ordered[lower:upper])
        lower = upper
    return out
