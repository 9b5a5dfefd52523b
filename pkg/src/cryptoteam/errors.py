"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CryptoTeamError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CryptoTeamError):
    """Invalid or inconsistent run configuration."""


class DataOrderError(CryptoTeamError, ValueError):
    """Input series is not strictly ordered by date."""


class IngestionError(CryptoTeamError):
    """Provider payload does not match the expected schema."""

    def __init__(self, field: str, message: str = "") -> None:
        self.field = field
        super().__init__(f"ingestion error on {field!r}" + (f": {message}" if message else ""))


class ProviderError(CryptoTeamError):
    """Non-retryable provider failure (rejection, unsupported mode)."""


class RetryableError(CryptoTeamError):
    """Transient failure (network, timeout, 5xx, rate limit); safe to retry."""


class NoLabelError(CryptoTeamError):
    """Ground truth requested for a week whose next-week return is unknown."""


class InsufficientDataError(CryptoTeamError, ValueError):
    """Not enough observations for the requested computation."""


class ParseError(CryptoTeamError, ValueError):
    """Model output does not follow the expected two-field format."""


class TemplateError(CryptoTeamError, KeyError):
    """Template rendering failed, typically a missing slot."""

    def __init__(self, slot: str, template_id: str = "") -> None:
        self.slot = slot
        self.template_id = template_id
        super().__init__(f"missing slot {slot!r}" + (f" in template {template_id}" if template_id else ""))

    def __str__(self) -> str:
        return self.args[0]


class UndefinedMetricError(CryptoTeamError, ValueError):
    """Metric is undefined for the given input (empty, zero variance...)."""


class StageError(CryptoTeamError):
    """A pipeline stage failed; the run manifest records where."""

    def __init__(self, stage: str, week_index: int | None, cause: BaseException) -> None:
        self.stage = stage
        self.week_index = week_index
        self.cause = cause
        super().__init__(f"stage {stage!r} failed at week {week_index}: {cause}")
