"""Prompt rendering, training-example assembly and fine-tune dataset export."""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

from ..errors import ConfigError, TemplateError
from ..factors import CRYPTO_FIELDS, DISPLAY_NAMES, MARKET_FIELDS, CryptoFactorVector, MarketFactorVector, Trend
from ..market_data.types import MARKET, NewsHeadline
from ..quintiles import QuintileLabel
from ..roles import RoleId

SLOT = re.compile(r"\{([a-z_]+)\}")
NEWS_LIMIT = 50
LITERATURE_SEPARATOR = "\n\n---\n\n"
CHART_INFO = "The 30-day candlestick chart of {crypto} is attached as an image."


class TemplateId(str, Enum):
    ExplainInstruction = "explain_instruction"
    MktExplain = "mkt_explain"
    NewsExplain = "news_explain"
    CryptoExplain = "crypto_explain"
    VisionExplain = "vision_explain"
    FineTuneInstruction = "finetune_instruction"
    FineTuneUser = "finetune_user"
    PredictInstruction = "predict_instruction"
    PredictUser = "predict_user"


@dataclass(frozen=True)
class PromptTemplate:
    template_id: TemplateId
    body: str
    version: str

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(SLOT.findall(self.body)))

    def render(self, slots: Mapping[str, str]) -> str:
        for name in self.slots:
            if name not in slots:
                raise TemplateError(name, self.template_id.name)
        # single pass: slot values are never re-scanned for markers
        return SLOT.sub(lambda m: str(slots[m.group(1)]), self.body)


def template_version() -> str:
    return resources.files(__package__).joinpath("templates/VERSION").read_text(encoding="utf-8").strip()


@lru_cache(maxsize=None)
def load_template(template_id: TemplateId | str) -> PromptTemplate:
    tid = template_id if isinstance(template_id, TemplateId) else TemplateId[template_id]
    body = resources.files(__package__).joinpath(f"templates/{tid.value}.txt").read_text(encoding="utf-8")
    return PromptTemplate(tid, body, template_version())


def render_template(template_id: TemplateId | str, slots: Mapping[str, str]) -> str:
    """Substitute ``slots`` into a template; a missing slot raises ``TemplateError``."""
    return load_template(template_id).render(slots)


def target_slots(market: bool) -> dict[str, str]:
    """Slot values that differ between market and single-crypto prompts."""
    if market:
        return {
            "target": "market trend",
            "subject_phrase": "market trend",
            "trend_name": "Market trend",
            "domain": "market",
        }
    return {
        "target": "price trend",
        "subject_phrase": "price trend of a cryptocurrency",
        "trend_name": "Price trend",
        "domain": "cryptocurrency",
    }


def factors_to_text(
    vector: CryptoFactorVector | MarketFactorVector,
    labels: Mapping[str, QuintileLabel],
) -> str:
    """One ``NAME: Label`` line per factor in table order; missing values read ``N/A``."""
    names = MARKET_FIELDS if isinstance(vector, MarketFactorVector) else CRYPTO_FIELDS
    lines = []
    for name in names:
        value = getattr(vector, name)
        label = labels.get(name)
        text = label.text if value is not None and label is not None else "N/A"
        lines.append(f"{DISPLAY_NAMES[name]}: {text}")
    return "\n".join(lines)


def news_to_text(headlines: Sequence[NewsHeadline], limit: int = NEWS_LIMIT) -> str:
    """The ``limit`` most recent headlines, oldest first, one per line."""
    recent = sorted(headlines, key=lambda h: (h.published_at, h.title))[-limit:] if limit > 0 else []
    if not recent:
        return "No headlines."
    return "\n".join(f"{h.published_at.date().isoformat()}: {h.title}" for h in recent)


class Modality(str, Enum):
    factors = "factors"
    news = "news"
    chart = "chart"


@dataclass(frozen=True)
class TrainingExample:
    subject: str
    week_index: int
    modality: Modality
    ground_truth: Trend
    info_text: str | None = None
    image_ref: str | None = None
    explanation: str = ""
    # (source, week) pairs the slots were filled from
    provenance: tuple[tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        if self.modality is Modality.chart:
            if not self.image_ref:
                raise ValueError("chart examples need an image_ref")
        elif self.info_text is None:
            raise ValueError(f"{self.modality.value} examples need info_text")

    @property
    def is_market(self) -> bool:
        return self.subject == MARKET

    @property
    def expert(self) -> RoleId:
        if self.modality is Modality.chart:
            return RoleId.Technical
        if self.modality is Modality.news:
            return RoleId.News
        return RoleId.MarketFactor if self.is_market else RoleId.CryptoFactor


@dataclass(frozen=True)
class FineTuneRecord:
    messages: tuple[dict[str, Any], ...]
    expert: RoleId
    subject: str = ""
    week_index: int = -1

    def to_json(self) -> str:
        return json.dumps({"messages": list(self.messages)}, ensure_ascii=False)


def assistant_text(trend: Trend, explanation: str, *, market: bool) -> str:
    return f"{target_slots(market)['trend_name']}: {trend.value}\nExplanation: {explanation}"


def subject_name(subject: str) -> str:
    return "the cryptocurrency market" if subject == MARKET else subject


def user_content(text: str, image_ref: str | None) -> str | list[dict[str, Any]]:
    """Plain text, or text plus an image part when an image is attached."""
    if image_ref is None:
        return text
    return [{"type": "text", "text": text}, {"type": "image_url", "image_url": {"url": image_ref}}]


def example_info(example: TrainingExample) -> str:
    if example.modality is Modality.chart:
        return CHART_INFO.format(crypto=example.subject)
    return example.info_text or ""


def build_finetune_record(example: TrainingExample) -> FineTuneRecord:
    """System/user/assistant turns for one annotated training example."""
    if not example.explanation.strip():
        raise ValueError(f"{example.subject} week {example.week_index}: empty explanation")
    slots = target_slots(example.is_market)
    system = render_template(TemplateId.FineTuneInstruction, slots)
    user = render_template(
        TemplateId.FineTuneUser, {**slots, "crypto": subject_name(example.subject), "info": example_info(example)}
    )
    messages = (
        {"role": "system", "content": system},
        {"role": "user", "content": user_content(user, example.image_ref if example.modality is Modality.chart else None)},
        {"role": "assistant", "content": assistant_text(example.ground_truth, example.explanation.strip(), market=example.is_market)},
    )
    return FineTuneRecord(messages, example.expert, example.subject, example.week_index)


def export_finetune_dataset(records: Iterable[FineTuneRecord], expert: RoleId | str, out_dir: str | Path) -> Path:
    """Write the records of one expert to ``{out_dir}/{expert}.jsonl``."""
    role = expert if isinstance(expert, RoleId) else RoleId(expert)
    chosen = [r for r in records if r.expert is role]
    if not chosen:
        raise ValueError(f"no fine-tune records for {role.dataset_name}")
    path = Path(out_dir) / f"{role.dataset_name}.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(r.to_json() + "\n" for r in chosen), encoding="utf-8")
    return path


def load_finetune_dataset(path: str | Path) -> list[list[dict[str, Any]]]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line)["messages"] for line in fh if line.strip()]


def load_literature(root: str | Path, role: RoleId) -> str:
    """Concatenate the literature corpus mapped to an expert.

    Looks for ``{root}/{dataset_name}.txt`` or ``{root}/{dataset_name}/*.txt``.
    """
    base = Path(root)
    single = base / f"{role.dataset_name}.txt"
    folder = base / role.dataset_name
    parts: list[str] = []
    if single.is_file():
        parts.append(single.read_text(encoding="utf-8").strip())
    if folder.is_dir():
        parts.extend(p.read_text(encoding="utf-8").strip() for p in sorted(folder.glob("*.txt")))
    parts = [p for p in parts if p]
    if not parts:
        raise ConfigError(f"missing literature for modality {role.dataset_name!r} under {base}")
    return LITERATURE_SEPARATOR.join(parts)


_EXPLAIN_TEMPLATE = {
    RoleId.MarketFactor: TemplateId.MktExplain,
    RoleId.News: TemplateId.NewsExplain,
    RoleId.CryptoFactor: TemplateId.CryptoExplain,
    RoleId.Technical: TemplateId.VisionExplain,
}


def explanation_messages(example: TrainingExample, literature: str) -> tuple[str, str]:
    """(system, user) text for annotating one training pair with an explanation."""
    slots = target_slots(example.is_market)
    system = render_template(TemplateId.ExplainInstruction, slots)
    user = render_template(
        _EXPLAIN_TEMPLATE[example.expert],
        {
            **slots,
            "crypto": example.subject,
            "literature": literature,
            "info": example.info_text or "",
            "trend": example.ground_truth.value,
        },
    )
    return system, user


def prediction_messages(subject: str, info: str) -> tuple[str, str]:
    """(system, user) text for an expert prediction about ``subject``."""
    slots = target_slots(subject == MARKET)
    return (
        render_template(TemplateId.PredictInstruction, slots),
        render_template(TemplateId.PredictUser, {**slots, "info": info}),
    )


@dataclass
class SlotProvenance:
    """Collects (source, week) references while assembling a prompt."""

    items: list[tuple[str, int]] = field(default_factory=list)

    def add(self, source: str, week_index: int) -> None:
        if (source, week_index) not in self.items:
            self.items.append((source, week_index))

    def freeze(self) -> tuple[tuple[str, int], ...]:
        return tuple(sorted(self.items))
