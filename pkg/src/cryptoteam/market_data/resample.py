"""Daily-to-weekly alignment."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from datetime import date, timedelta

from ..errors import DataOrderError
from .types import Candle, WeeklyAssetRecord

MONDAY = 0
WEEKDAYS = {"monday": 0, "tuesday": 1, "wednesday": 2, "thursday": 3, "friday": 4, "saturday": 5, "sunday": 6}


def parse_weekday(value: int | str) -> int:
    if isinstance(value, int):
        if not 0 <= value <= 6:
            raise ValueError(f"weekday out of range: {value}")
        return value
    try:
        return WEEKDAYS[value.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown weekday {value!r}") from None


def week_start_of(day: date, week_boundary: int = MONDAY) -> date:
    """First day of the week containing ``day``; weeks start on ``week_boundary``."""
    return day - timedelta(days=(day.weekday() - week_boundary) % 7)


def week_index_of(day: date, origin: date, week_boundary: int = MONDAY) -> int:
    return (week_start_of(day, week_boundary) - week_start_of(origin, week_boundary)).days // 7


def check_ordered(candles: Sequence[Candle]) -> None:
    for prev, cur in zip(candles, candles[1:]):
        if cur.date <= prev.date:
            kind = "duplicate" if cur.date == prev.date else "unordered"
            raise DataOrderError(f"{kind} daily input at {cur.date} (after {prev.date})")


def resample_daily_to_weekly(
    candles: Sequence[Candle],
    week_boundary: int | str = MONDAY,
    *,
    asset_id: str = "",
    market_caps: Mapping[date, float] | None = None,
    origin: date | None = None,
) -> list[WeeklyAssetRecord]:
    """Group a daily candle series into complete calendar weeks.

    Weeks start on ``week_boundary`` (0 = Monday, the ISO convention). A
    leading week that does not start on the boundary and a trailing week that
    does not reach its last day are dropped. Days missing inside a kept week
    are forward-filled from the previous close with zero volume and flagged.

    ``week_index`` counts weeks from ``origin`` (default: the first complete
    week); weeks before the origin are skipped.
    """
    if not candles:
        return []
    check_ordered(candles)
    boundary = parse_weekday(week_boundary)

    first, last = candles[0].date, candles[-1].date
    start = week_start_of(first, boundary)
    if start != first:
        start += timedelta(days=7)
    stop = week_start_of(last, boundary)
    if last != stop + timedelta(days=6):
        stop -= timedelta(days=7)
    if stop < start:
        return []
    base = week_start_of(origin, boundary) if origin is not None else start

    by_date = {c.date: c for c in candles}
    caps = dict(market_caps or {})
    prev_close: float | None = None
    last_cap: float | None = None
    # seed previous close/cap from history before the first complete week
    for c in candles:
        if c.date >= start:
            break
        prev_close = c.close
        if c.date in caps:
            last_cap = caps[c.date]

    before = by_date.get(start - timedelta(days=1))
    prior_week_close = before.close if before is not None else None
    records: list[WeeklyAssetRecord] = []
    week = start
    while week <= stop:
        days: list[Candle] = []
        filled = 0
        for offset in range(7):
            day = week + timedelta(days=offset)
            candle = by_date.get(day)
            if candle is None:
                if prev_close is None:
                    # cannot fill before any observed close; only possible for the first week
                    break
                candle = Candle(day, prev_close, prev_close, prev_close, prev_close, 0.0)
                filled += 1
            if day in caps:
                last_cap = caps[day]
            days.append(candle)
            prev_close = candle.close
        if len(days) == 7:
            index = (week - base).days // 7
            if index >= 0:
                weekly_return = days[-1].close / prior_week_close - 1.0 if prior_week_close is not None else None
                flags = (f"filled_days={filled}",) if filled else ()
                records.append(
                    WeeklyAssetRecord(
                        asset_id=asset_id,
                        week_index=index,
                        week_start=week,
                        daily_candles=tuple(days),
                        market_cap_last_day=last_cap,
                        weekly_return=weekly_return,
                        quality_flags=flags,
                    )
                )
            prior_week_close = days[-1].close
        else:
            prior_week_close = None
        week += timedelta(days=7)
    return records
