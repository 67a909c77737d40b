"""Exception types shared across the toolkit."""

from __future__ import annotations


class ShortcutLabError(Exception):
    """Base class for all errors raised by this package."""


class GraphError(ShortcutLabError, ValueError):
    """Malformed or disconnected graph input."""


class ClipUndefined(ShortcutLabError, ValueError):
    def __init__(self, msg: str = "clip undefined"):
        super().__init__(msg)


class ValidationError(ShortcutLabError):
    """A structure failed one of its defining clauses."""


class ConstructionShortfall(ShortcutLabError):
    """A constructive step produced fewer parts than its guarantee."""

    def __init__(self, msg: str, *, got: int | None = None, need: int | None = None):
        detail = f" (got {got}, need {need})" if got is not None else ""
        super().__init__(f"construction shortfall: {msg}{detail}")
        self.got = got
        self.need = need


class HypothesisViolated(ShortcutLabError):
    def __init__(self, msg: str):
        super().__init__(f"hypothesis violated: {msg}")


class Infeasible(ShortcutLabError):
    def __init__(self, msg: str):
        super().__init__(f"infeasible: {msg}")


class NonTermination(ShortcutLabError):
    def __init__(self, msg: str):
        super().__init__(f"non-termination: {msg}")


class BandwidthExceeded(ShortcutLabError):
    """A node program tried to push more bits over an edge than allowed."""


class LocalityViolation(ShortcutLabError):
    """A plain-mode node program asked for non-local information."""
