"""Prompt templates, training examples and fine-tune dataset export."""

from .forge import (
    CHART_INFO,
    NEWS_LIMIT,
    FineTuneRecord,
    Modality,
    PromptTemplate,
    SlotProvenance,
    TemplateId,
    TrainingExample,
    assistant_text,
    build_finetune_record,
    example_info,
    explanation_messages,
    export_finetune_dataset,
    factors_to_text,
    load_finetune_dataset,
    load_literature,
    load_template,
    news_to_text,
    prediction_messages,
    render_template,
    subject_name,
    target_slots,
    template_version,
    user_content,
)

__all__ = [
    "CHART_INFO",
    "NEWS_LIMIT",
    "FineTuneRecord",
    "Modality",
    "PromptTemplate",
    "SlotProvenance",
    "TemplateId",
    "TrainingExample",
    "assistant_text",
    "build_finetune_record",
    "example_info",
    "explanation_messages",
    "export_finetune_dataset",
    "factors_to_text",
    "load_finetune_dataset",
    "load_literature",
    "load_template",
    "news_to_text",
    "prediction_messages",
    "render_template",
    "subject_name",
    "target_slots",
    "template_version",
    "user_content",
]
