"""Expert agents: requests, providers, parsing, annotation and fine-tuning."""

from .core import (
    FALLBACK_FALL,
    FALLBACK_RISE,
    LOG_FLOOR,
    SkippedExample,
    annotate_batch,
    annotate_explanation,
    annotation_request,
    classification_token,
    format_reminder,
    parse_prediction_output,
    predict,
    rise_logprob,
)
from .finetune import (
    FineTunePending,
    FineTuneService,
    JobStatus,
    OpenAIFineTuneService,
    RoleBindings,
    ScriptedFineTuneService,
    launch_finetune,
    pending_path,
)
from .log import JsonlLog, PredictionLog
from .providers import ChatProvider, OpenAIChatProvider, ScriptedProvider, chat_payload, parse_chat_response, tokenize
from .types import AgentPrediction, AgentRole, Completion, CompletionRequest, ProviderConfig, TokenLogprob

__all__ = [
    "FALLBACK_FALL",
    "FALLBACK_RISE",
    "LOG_FLOOR",
    "AgentPrediction",
    "AgentRole",
    "ChatProvider",
    "Completion",
    "CompletionRequest",
    "FineTunePending",
    "FineTuneService",
    "JobStatus",
    "JsonlLog",
    "OpenAIChatProvider",
    "OpenAIFineTuneService",
    "PredictionLog",
    "ProviderConfig",
    "RoleBindings",
    "ScriptedFineTuneService",
    "ScriptedProvider",
    "SkippedExample",
    "TokenLogprob",
    "annotate_batch",
    "annotate_explanation",
    "annotation_request",
    "chat_payload",
    "classification_token",
    "format_reminder",
    "launch_finetune",
    "parse_chat_response",
    "parse_prediction_output",
    "pending_path",
    "predict",
    "rise_logprob",
    "tokenize",
]
