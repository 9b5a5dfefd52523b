"""30-day candlestick charts with volume bars and a moving-average overlay.

Rendering is done directly with Pillow so that output bytes depend only on
the inputs, the fixed palette and the Pillow/zlib build: no fonts, no
timestamps, no PNG metadata.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Literal

from PIL import Image, ImageDraw

from .market_data.types import Candle

WINDOW_DAYS = 30

PALETTES = {
    "default": {
        "background": (255, 255, 255),
        "up": (38, 166, 91),
        "down": (214, 48, 49),
        "flat": (110, 110, 110),
        "ma": (31, 97, 204),
        "grid": (232, 232, 232),
        "axis": (160, 160, 160),
    }
}

DayStyle = Literal["up", "down", "flat"]


@dataclass(frozen=True)
class ChartSpec:
    asset_id: str
    end_date: date
    window_days: int = WINDOW_DAYS
    width: int = 900
    height: int = 600
    style: str = "default"

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("chart dimensions must be positive")
        if self.window_days < 1:
            raise ValueError("window_days must be at least 1")
        if self.style not in PALETTES:
            raise ValueError(f"unknown style {self.style!r}")


@dataclass(frozen=True)
class RenderedChart:
    png: bytes
    sha256: str
    day_styles: tuple[DayStyle, ...]


def compute_moving_average(closes: Sequence[float], window: int = WINDOW_DAYS) -> list[float]:
    """Trailing mean; point ``i`` averages the last ``min(i + 1, window)`` closes."""
    if window < 1:
        raise ValueError("window must be at least 1")
    out = []
    for i in range(len(closes)):
        chunk = closes[max(0, i - window + 1) : i + 1]
        out.append(math.fsum(chunk) / len(chunk))
    return out


def classify_days(candles: Sequence[Candle]) -> tuple[DayStyle, ...]:
    """Per-day body style used by the renderer."""
    return tuple("up" if c.close > c.open else "down" if c.close < c.open else "flat" for c in candles)


def _validate(spec: ChartSpec, candles: Sequence[Candle]) -> None:
    if len(candles) != spec.window_days:
        raise ValueError(f"expected {spec.window_days} candles, got {len(candles)}")
    for prev, cur in zip(candles, candles[1:]):
        if cur.date <= prev.date:
            raise ValueError(f"candles not chronological at {cur.date}")
    for c in candles:
        if c.volume < 0 or c.low > min(c.open, c.close) or c.high < max(c.open, c.close):
            raise ValueError(f"invalid candle on {c.date}")
    if candles[-1].date != spec.end_date:
        raise ValueError(f"last candle {candles[-1].date} does not match end_date {spec.end_date}")


def render_chart(
    spec: ChartSpec,
    candles: Sequence[Candle],
    *,
    ma_history: Sequence[float] = (),
) -> RenderedChart:
    """Render ``candles`` to PNG.

    ``ma_history`` holds closes preceding the window; when given, the moving
    average warms up on it instead of on the window alone.
    """
    _validate(spec, candles)
    palette = PALETTES[spec.style]
    styles = classify_days(candles)

    closes = [c.close for c in candles]
    ma = compute_moving_average([*ma_history, *closes], WINDOW_DAYS)[-len(candles) :]

    w, h = spec.width, spec.height
    margin_l, margin_r, margin_t, margin_b = 20, 20, 20, 20
    gap = 10
    plot_h = h - margin_t - margin_b - gap
    price_h = int(plot_h * 0.75)
    vol_top = margin_t + price_h + gap
    vol_h = plot_h - price_h
    plot_w = w - margin_l - margin_r

    lo = min(min(c.low for c in candles), min(ma))
    hi = max(max(c.high for c in candles), max(ma))
    if hi == lo:
        hi, lo = hi + 1.0, lo - 1.0
    vmax = max(c.volume for c in candles) or 1.0

    def y_price(p: float) -> int:
        return margin_t + round((hi - p) / (hi - lo) * (price_h - 1))

    slot = plot_w / len(candles)
    body_half = max(1, int(slot * 0.35))

    img = Image.new("RGB", (w, h), palette["background"])
    draw = ImageDraw.Draw(img)
    for frac in (0.25, 0.5, 0.75):
        y = margin_t + round(frac * (price_h - 1))
        draw.line([(margin_l, y), (w - margin_r, y)], fill=palette["grid"])
    draw.rectangle([margin_l, margin_t, w - margin_r, margin_t + price_h - 1], outline=palette["axis"])
    draw.rectangle([margin_l, vol_top, w - margin_r, vol_top + vol_h - 1], outline=palette["axis"])

    for i, (c, style) in enumerate(zip(candles, styles)):
        color = palette[style]
        x = margin_l + round((i + 0.5) * slot)
        draw.line([(x, y_price(c.high)), (x, y_price(c.low))], fill=color)
        top, bottom = sorted((y_price(c.open), y_price(c.close)))
        draw.rectangle([x - body_half, top, x + body_half, bottom], fill=color)
        bar = round(c.volume / vmax * (vol_h - 2))
        if bar > 0:
            draw.rectangle([x - body_half, vol_top + vol_h - 1 - bar, x + body_half, vol_top + vol_h - 2], fill=color)

    points = [(margin_l + round((i + 0.5) * slot), y_price(v)) for i, v in enumerate(ma)]
    if len(points) > 1:
        draw.line(points, fill=palette["ma"], width=2)

    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False, compress_level=6)
    png = buf.getvalue()
    return RenderedChart(png, hashlib.sha256(png).hexdigest(), styles)


class ChartIndex:
    """PNG files at ``charts/{asset}/{week}.png`` plus ``charts/index.json``."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.index_path = self.root / "index.json"
        self._entries: dict[str, dict[str, str]] = (
            json.loads(self.index_path.read_text(encoding="utf-8")) if self.index_path.exists() else {}
        )

    @staticmethod
    def key(asset_id: str, week_index: int) -> str:
        return f"{asset_id}/{week_index}"

    def write(self, asset_id: str, week_index: int, chart: RenderedChart) -> Path:
        path = self.root / asset_id / f"{week_index}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        if not path.exists() or path.read_bytes() != chart.png:
            path.write_bytes(chart.png)
        self._entries[self.key(asset_id, week_index)] = {
            "path": path.relative_to(self.root).as_posix(),
            "sha256": chart.sha256,
        }
        return path

    def get(self, asset_id: str, week_index: int) -> dict[str, str] | None:
        return self._entries.get(self.key(asset_id, week_index))

    def save(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        self.index_path.write_text(json.dumps(dict(sorted(self._entries.items())), indent=2) + "\n", encoding="utf-8")
        return self.index_path
