"""Exception hierarchy shared by the pipeline stages."""

from __future__ import annotations


class PainClfError(Exception):
    """Base class for data and runtime errors raised by painclf."""


class CorpusError(PainClfError, ValueError):
    """A corpus record failed validation."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class LexiconError(PainClfError, ValueError):
    pass


class SpanError(PainClfError, ValueError):
    pass


class AnnotationError(PainClfError, ValueError):
    pass


class DegenerateKappaError(AnnotationError):
    """Chance agreement is 1 but observed agreement is not, so kappa is 0/0."""


class ResolutionIgnoredWarning(UserWarning):
    """A resolution entry targeted a span that already had a label."""


class TrainingError(PainClfError, ValueError):
    pass


class ModelFormatError(PainClfError, ValueError):
    pass


class EvaluationError(PainClfError, ValueError):
    pass
