"""Exception types shared across the extraction pipeline."""


class TrialFactsError(Exception):
    """Base class for all errors raised by this package."""


class KnowledgeBaseError(TrialFactsError):
    """Raised when a vocabulary file is malformed or violates an invariant."""


class UnknownIdError(KnowledgeBaseError):
    """Raised when an id is looked up that does not exist in the knowledge base."""


class EmbeddingFormatError(TrialFactsError):
    """Raised when an embedding text file does not match the declared format."""


class GrammarError(TrialFactsError):
    """Raised when a grammar file contains a production CYK cannot use."""


class BoundContradictionError(TrialFactsError):
    """Raised when a parsed attribute constraint has lower > upper after unit
    normalization. The aggregator records these as contradictions."""

    def __init__(self, attribute_id: str, lower: float, upper: float):
        super().__init__(
            f"contradictory bounds for {attribute_id}: lower {lower} > upper {upper}"
        )
        self.attribute_id = attribute_id
        self.lower = lower
        self.upper = upper


class TagIngestError(TrialFactsError):
    """Raised when an external tag file disagrees with the preprocessed corpus."""


class IngestError(TrialFactsError):
    """Raised when the trial corpus file cannot be read at all."""


class PatientDataError(TrialFactsError):
    """Raised when a patient record has the wrong value type for a fact."""


class EvalMismatchError(TrialFactsError):
    """Raised when predictions reference trials absent from the gold set."""

    def __init__(self, unmatched_ids):
        super().__init__(
            "predictions reference trials missing from gold set: "
            + ", ".join(sorted(unmatched_ids))
        )
        self.unmatched_ids = set(unmatched_ids)
