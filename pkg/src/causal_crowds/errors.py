"""Exception types shared across the package."""


class CausalCrowdsError(Exception):
    """Base class for all package errors."""


class CoincidentAgents(CausalCrowdsError):
    """Two agents occupy the same position within 1e-9 m."""


class LengthMismatch(CausalCrowdsError):
    """Trajectory operands have different step counts."""


class InsufficientNonCausal(CausalCrowdsError):
    """A joint removal asked for more non-causal agents than the scene has."""


class RetryExhausted(CausalCrowdsError):
    """Scene rejection sampling failed too many times."""


class IoFailure(CausalCrowdsError):
    """A dataset file is missing or unreadable."""


class DigestMismatch(CausalCrowdsError):
    """Stored content digest does not match the file bytes."""


class ParseError(CausalCrowdsError):
    """A dataset line is malformed; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class InvariantViolation(CausalCrowdsError):
    """A loaded record violates a schema invariant."""


class UnknownScene(CausalCrowdsError):
    """A prediction references a scene id absent from the split."""


class UnknownAgent(CausalCrowdsError):
    """A prediction references an agent id absent from the scene."""


class MissingFactual(CausalCrowdsError):
    """A prediction set lacks the mandatory factual entry."""


class MissingCounterfactual(CausalCrowdsError):
    """A prediction set lacks a counterfactual entry needed for scoring."""


class MissingPair(CausalCrowdsError):
    """Paired factual/perturbed predictions required but absent."""


class ZeroNormEmbedding(CausalCrowdsError):
    """Cosine distance is undefined for a (near-)zero embedding."""


class DivergedLoss(CausalCrowdsError):
    """Training loss became non-finite."""
