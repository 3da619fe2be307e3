"""Exception hierarchy of the compiler.

Law violations are never raised: they are `Finding` entries of a `LawReport`
(see choreo.category). Exceptions below signal structural impossibility or
bad input.
"""

from __future__ import annotations

from collections.abc import Sequence


class ChoreoError(Exception):
    """Base class of every error raised by the choreo package."""


class GestureError(ChoreoError):
    """Invalid pose, curve, movement or homotopy."""


class NotAFunctorError(GestureError):
    """A realization maps an arrow to a movement whose endpoints do not match the vertex images."""

    def __init__(self, arrow: str, detail: str) -> None:
        super().__init__(f"not a functor: arrow '{arrow}' {detail}")
        self.arrow = arrow


class CategoryError(ChoreoError):
    """Composition or checker precondition failed."""


class NonComposableError(CategoryError):
    """Target pose of the first movement is not the source pose of the second."""

    def __init__(self, target: str, source: str, detail: str = "") -> None:
        msg = f"non-composable: '{target}' does not match '{source}'"
        super().__init__(f"{msg} ({detail})" if detail else msg)
        self.target = target
        self.source = source


class NotParallelError(CategoryError):
    """Two movements do not share source and target poses."""

    def __init__(self, detail: str) -> None:
        super().__init__(f"not parallel 1-cells: {detail}")


class PathBudgetExceeded(CategoryError):
    """Path enumeration would exceed the configured cutoff."""


class PulseError(ChoreoError):
    """Invalid pulse track argument or transform precondition."""


class ChoreographyError(ChoreoError):
    """Choreography-level precondition failed (marks, dancers, trajectories)."""


class ScriptError(ChoreoError):
    """Error located in a choreography script."""

    def __init__(self, message: str, line: int, column: int, expected: Sequence[str] = ()) -> None:
        self.message = message
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        text = f"{line}:{column}: {message}"
        if self.expected:
            text += " (expected " + ", ".join(self.expected) + ")"
        super().__init__(text)


class ParseError(ScriptError):
    """Lexical or syntax error."""


class SemanticError(ScriptError):
    """Undeclared name, duplicate declaration or arity mismatch."""


class ElaborationError(ChoreoError):
    """The script describes something that cannot be built (duration mismatch, wrong endpoints)."""
