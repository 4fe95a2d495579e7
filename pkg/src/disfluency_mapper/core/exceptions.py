"""Custom exceptions for disfluency-mapper."""

from typing import Optional


class DisfluencyMapperError(Exception):
    """Base exception for disfluency-mapper."""

    pass


class ConfigError(DisfluencyMapperError):
    """Raised when a configuration value cannot be resolved."""

    pass


# Annotation codec


class AnnotationError(DisfluencyMapperError):
    """Raised when bracket or BIO annotation is malformed."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (position {position})")
        self.reason = message
        self.position = position

    def __reduce__(self):
        return (self.__class__, (self.reason, self.position))


class UnbalancedBracketsError(AnnotationError):
    """Raised when "[" and "]" (or curly codes) do not balance."""

    pass


class StrayPlusError(AnnotationError):
    """Raised when "+" appears outside any bracket."""

    pass


class InvalidLabelSequenceError(AnnotationError):
    """Raised when a BIO label sequence violates the label grammar."""

    pass


class IndexOutOfRangeError(AnnotationError):
    """Raised when a span points outside its token sequence."""

    pass


# Ingest


class IngestError(DisfluencyMapperError):
    """Raised when an input file cannot be parsed."""

    def __init__(
        self, message: str, line_no: Optional[int] = None, path: Optional[str] = None
    ) -> None:
        location = ""
        if path is not None:
            location = f"{path}:{line_no}" if line_no is not None else path
        elif line_no is not None:
            location = f"line {line_no}"
        super().__init__(f"{location}: {message}" if location else message)
        self.line_no = line_no
        self.path = path
        self.reason = message

    def __reduce__(self):
        return (self.__class__, (self.reason, self.line_no, self.path))


class MalformedLineError(IngestError):
    """Raised when a source annotation line does not follow the grammar."""

    pass


class MalformedRecordError(IngestError):
    """Raised when a target word record does not follow the grammar."""

    pass


class SchemaViolationError(IngestError):
    """Raised when a canonical record misses or misuses a field."""

    def __init__(
        self, field: str, line_no: Optional[int] = None, path: Optional[str] = None
    ) -> None:
        super().__init__(f"schema violation in field '{field}'", line_no, path)
        self.field = field

    def __reduce__(self):
        return (self.__class__, (self.field, self.line_no, self.path))


# Alignment


class AlignmentError(DisfluencyMapperError):
    """Raised when an alignment is inconsistent with its sequences."""

    pass


class MismatchedAlignmentError(AlignmentError):
    """Raised when alignment indices exceed the aligned sequences."""

    pass


class EmptyCorpusError(AlignmentError):
    """Raised when a corpus statistic has no words to divide by."""

    pass


# Decoding


class DecodingError(DisfluencyMapperError):
    """Raised when label transfer fails."""

    pass


class UnsatisfiableConstraintsError(DecodingError):
    """Raised when no valid label sequence satisfies the constraints."""

    def __init__(self, position: int, unit: Optional[str] = None) -> None:
        where = f" in unit {unit}" if unit else ""
        super().__init__(f"Unsatisfiable constraints{where} at position {position}")
        self.position = position
        self.unit = unit

    def __reduce__(self):
        return (self.__class__, (self.position, self.unit))


# Segmentation


class SegmentationError(DisfluencyMapperError):
    """Raised when target words cannot be paired with slash units."""

    pass


class OrphanWordError(SegmentationError):
    """Raised when a target word has no slash unit to attach to."""

    def __init__(self, position: int) -> None:
        super().__init__(f"Target word at position {position} has no slash unit")
        self.position = position

    def __reduce__(self):
        return (self.__class__, (self.position,))


# Analysis


class AnalysisError(DisfluencyMapperError):
    """Raised when a corpus analysis cannot be computed."""

    pass


class PMIDomainError(AnalysisError, ValueError):
    """Raised when PMI is asked for outside its domain."""

    pass


class EmptyCategoryError(AnalysisError):
    """Raised when an error category has no tokens."""

    def __init__(self, category: str) -> None:
        super().__init__(f"Error category '{category}' has no tokens")
        self.category = category

    def __reduce__(self):
        return (self.__class__, (self.category,))


class FragmentDivisionError(AnalysisError, ZeroDivisionError):
    """Raised when fragment statistics have no source fragments."""

    pass


class LexiconError(AnalysisError):
    """Raised when word lists are missing or overlap."""

    pass


# Metrics


class MetricsError(DisfluencyMapperError):
    """Raised when two labelings cannot be compared."""

    pass


class LengthMismatchError(MetricsError):
    """Raised when gold and predicted units differ in length."""

    def __init__(self, unit: str) -> None:
        super().__init__(f"Gold and predicted labels differ for unit {unit}")
        self.unit = unit

    def __reduce__(self):
        return (self.__class__, (self.unit,))
