"""Exception hierarchy shared across the package."""


class LlmPsychError(Exception):
    """Base class for package errors."""


class DataError(LlmPsychError):
    """Input data violates a schema or a precondition of an analysis."""


class ProviderError(LlmPsychError):
    """Terminal failure while talking to a completion provider."""


class AuthError(ProviderError):
    pass


class TransientProviderError(ProviderError):
    """Retryable failure (rate limit, 5xx, network). Raised only after retries are exhausted."""


class CampaignAborted(ProviderError):
    """An elicitation campaign stopped early; completed slots are in the checkpoint."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
