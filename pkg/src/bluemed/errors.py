"""Exception hierarchy for the pipeline."""


class BluemedError(Exception):
    """Base class for all pipeline errors."""


class IngestError(BluemedError):
    """Corpus ingestion failed (empty input, unreadable file, duplicate doc id)."""


class IndexError_(BluemedError):
    """Retrieval index misuse: empty index, dimension mismatch, unknown chunk id."""


class ProviderError(BluemedError):
    """Model provider failed after retries. Carries the pipeline stage tag."""

    def __init__(self, message: str, stage: str = "") -> None:
        super().__init__(message)
        self.stage = stage


class TransportError(BluemedError):
    """Transient transport failure; eligible for retry."""


class CredentialError(BluemedError):
    """Required credential env var is missing at startup."""


class PromptError(BluemedError):
    """Prompt template could not be rendered (missing placeholders or exemplars)."""

    def __init__(self, message: str, missing: list[str] | None = None) -> None:
        super().__init__(message)
        self.missing = missing or []


class ArgumentParseError(BluemedError):
    """No classification label could be extracted from an expert's output."""


class ConfigError(BluemedError):
    """Run configuration is invalid (unknown keys, bad values, missing files)."""


class DatasetError(BluemedError):
    """Evaluation dataset failed schema validation."""


class TranscriptError(BluemedError):
    """Transcript file is missing or has an unsupported schema version."""
