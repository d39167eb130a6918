"""Exception types raised across the package."""


class FlowMotsError(Exception):
    """Base class for all package errors."""


class ShapeError(FlowMotsError, ValueError):
    """Array or mask dimensions do not agree."""


class EmptyMask(FlowMotsError, ValueError):
    """A mask with no foreground pixels was given where one is required."""


class DegenerateBox(FlowMotsError, ValueError):
    """A box with zero area was given where a positive area is required."""


class FrameOrderError(FlowMotsError, ValueError):
    """Frames were delivered out of order or repeated."""


class UndefinedLoss(FlowMotsError, ValueError):
    """The loss has no valid term for the given batch."""


class UndefinedScores(FlowMotsError, ValueError):
    """Scores cannot be computed because there is no ground truth."""


class InvalidAnnotations(FlowMotsError, ValueError):
    """Annotations violate the non-overlap or unique-id constraints."""


class SpecError(FlowMotsError, ValueError):
    """A synthetic scene description cannot be realized."""


class ParseError(FlowMotsError, ValueError):
    """Malformed input text; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
