"""Choreography scripts: lexer, recursive-descent parser, syntax tree and canonical printer.

Every statement starts with a keyword and every list is comma-separated, so one
token of lookahead decides each step. Names are checked in declaration order:
a statement may only refer to what was declared above it. The grammar is
documented in docs/GRAMMAR.md.
"""

from __future__ import annotations

import re
import math
from typing import NamedTuple
from dataclasses import field, dataclass
from collections.abc import Mapping, Callable

from logger.logger import app_logger

from choreo.errors import ParseError, SemanticError
from choreo.gesture import STANCES, DEFAULT_KEYPOINTS

HOLD = "hold"

STATEMENT_KEYWORDS = (
    "title",
    "skeleton",
    "pose",
    "move",
    "pulse",
    "style",
    "choreography",
    "valzer",
    "group",
    "smooth",
    "swap",
    "apply",
)
KEYWORDS = frozenset(
    STATEMENT_KEYWORDS
    + (
        "default",
        "keypoints",
        "edges",
        "stance",
        "at",
        "shift",
        "mirror",
        "linear",
        "bezier",
        "via",
        "beats",
        "samples",
        "bpm",
        "meter",
        "bars",
        "accents",
        "scale",
        "rotate",
        "translate",
        "dancers",
        "mark",
        HOLD,
        "strength",
        "passes",
    )
)

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*")
_NUMBER = re.compile(r"-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_PUNCT = frozenset("{}(),:=")
_ESCAPES = {"\\": "\\", '"': '"', "n": "\n"}


class Pos(NamedTuple):
    line: int
    column: int


NOWHERE = Pos(0, 0)


class Token(NamedTuple):
    kind: str  # name, keyword, number, string, punct, eof
    text: str
    pos: Pos


# ---- Syntax tree ----
# Source positions never take part in equality: a reprinted script parses to an equal tree.


@dataclass(frozen=True)
class Ref:
    """A name as written, with where it was written."""

    name: str
    pos: Pos = field(default=NOWHERE, compare=False)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Node:
    pos: Pos = field(default=NOWHERE, compare=False, kw_only=True)


class KeypointAt(NamedTuple):
    label: Ref
    x: float
    y: float


class Entry(NamedTuple):
    """`dancer value` inside a mark (value is a pose) or an interval (a move or `hold`)."""

    dancer: Ref
    value: Ref


@dataclass(frozen=True)
class Title(Node):
    text: str


@dataclass(frozen=True)
class SkeletonDecl(Node):
    name: Ref
    default: bool = False
    keypoints: tuple[Ref, ...] = ()
    edges: tuple[tuple[Ref, Ref], ...] = ()


@dataclass(frozen=True)
class PoseDecl(Node):
    name: Ref
    skeleton: Ref
    points: tuple[KeypointAt, ...]


@dataclass(frozen=True)
class StanceDecl(Node):
    name: Ref
    skeleton: Ref
    stance: Ref
    at: tuple[float, float] | None = None


@dataclass(frozen=True)
class ShiftedPose(Node):
    name: Ref
    base: Ref
    offset: tuple[float, float]


@dataclass(frozen=True)
class MirroredPose(Node):
    name: Ref
    base: Ref
    axis: float | None = None


@dataclass(frozen=True)
class MoveDecl(Node):
    name: Ref
    source: Ref
    target: Ref
    kind: str  # linear | bezier
    via: tuple[Ref, ...]
    beats: float
    samples: int | None = None


@dataclass(frozen=True)
class PulseDecl(Node):
    bpm: float | None = None
    meter: int | None = None
    bars: int | None = None
    accents: tuple[float, ...] = ()


@dataclass(frozen=True)
class StyleDecl(Node):
    name: Ref
    scale: float | None = None
    rotate: float | None = None
    translate: tuple[float, float] | None = None
    mirror: bool = False


@dataclass(frozen=True)
class MarkDecl(Node):
    name: Ref
    beat: float
    entries: tuple[Entry, ...]


@dataclass(frozen=True)
class IntervalDecl(Node):
    source: Ref
    target: Ref
    entries: tuple[Entry, ...]


@dataclass(frozen=True)
class ChoreographyDecl(Node):
    dancers: tuple[Ref, ...]
    marks: tuple[MarkDecl, ...]
    intervals: tuple[IntervalDecl, ...]


@dataclass(frozen=True)
class Valzer(Node):
    alpha: float


@dataclass(frozen=True)
class Group(Node):
    k: int


@dataclass(frozen=True)
class Smooth(Node):
    dancer: Ref
    source: Ref
    target: Ref
    strength: float
    passes: int | None = None


@dataclass(frozen=True)
class Swap(Node):
    mark: Ref


@dataclass(frozen=True)
class Apply(Node):
    style: Ref


POSE_STATEMENTS = (PoseDecl, StanceDecl, ShiftedPose, MirroredPose)
DIRECTIVES = (Valzer, Group, Smooth, Swap, Apply)


@dataclass(frozen=True)
class ChoreoScript:
    statements: tuple[Node, ...] = ()

    def _of(self, *types) -> list:
        return [s for s in self.statements if isinstance(s, types)]

    @property
    def title(self) -> str | None:
        titles = self._of(Title)
        return titles[0].text if titles else None

    @property
    def skeletons(self) -> list[SkeletonDecl]:
        return self._of(SkeletonDecl)

    @property
    def poses(self) -> list[Node]:
        return self._of(*POSE_STATEMENTS)

    @property
    def moves(self) -> list[MoveDecl]:
        return self._of(MoveDecl)

    @property
    def styles(self) -> list[StyleDecl]:
        return self._of(StyleDecl)

    @property
    def pulse(self) -> PulseDecl | None:
        blocks = self._of(PulseDecl)
        return blocks[0] if blocks else None

    @property
    def choreography(self) -> ChoreographyDecl | None:
        blocks = self._of(ChoreographyDecl)
        return blocks[0] if blocks else None

    @property
    def directives(self) -> list[Node]:
        return self._of(*DIRECTIVES)


# ---- Lexer ----


def tokenize(text: str) -> list[Token]:
    """Splits a script into tokens; `#` starts a comment running to the end of the line."""
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch in " \t\r\ufeff":
            i, col = i + 1, col + 1
            continue
        if ch == "#":
            stop = text.find("\n", i)
            stop = len(text) if stop < 0 else stop
            col += stop - i
            i = stop
            continue
        pos = Pos(line, col)
        if text.startswith("->", i):
            tokens.append(Token("punct", "->", pos))
            i, col = i + 2, col + 2
            continue
        if ch in _PUNCT:
            tokens.append(Token("punct", ch, pos))
            i, col = i + 1, col + 1
            continue
        if ch == '"':
            value, length = _read_string(text, i, pos)
            tokens.append(Token("string", value, pos))
            i, col = i + length, col + length
            continue
        m = _NUMBER.match(text, i) or _NAME.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {ch!r}", line, col)
        word = m.group(0)
        if _NAME.fullmatch(word):
            kind = "keyword" if word in KEYWORDS else "name"
        else:
            kind = "number"
        tokens.append(Token(kind, word, pos))
        i, col = m.end(), col + len(word)
    tokens.append(Token("eof", "", Pos(line, col)))
    return tokens


def _read_string(text: str, start: int, pos: Pos) -> tuple[str, int]:
    out = []
    i = start + 1
    while i < len(text):
        ch = text[i]
        if ch == '"':
            return "".join(out), i + 1 - start
        if ch == "\n":
            break
        if ch == "\\":
            esc = text[i + 1 : i + 2]
            if esc not in _ESCAPES:
                raise ParseError(f"unknown escape '\\{esc}' in string", pos.line, pos.column + i - start)
            out.append(_ESCAPES[esc])
            i += 2
            continue
        out.append(ch)
        i += 1
    raise ParseError("unterminated string", *pos)


# ---- Parser ----


class _Parser:
    def __init__(self, tokens: list[Token]) -> None:
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def _advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def _at(self, text: str) -> bool:
        return self.tok.kind in ("keyword", "punct") and self.tok.text == text

    def _accept(self, text: str) -> Token | None:
        return self._advance() if self._at(text) else None

    def _error(self, expected: tuple[str, ...]) -> ParseError:
        t = self.tok
        found = "end of input" if t.kind == "eof" else f"'{t.text}'"
        return ParseError(f"unexpected {found}", t.pos.line, t.pos.column, expected)

    def _expect(self, text: str) -> Token:
        if not self._at(text):
            raise self._error((f"'{text}'",))
        return self._advance()

    def _name(self, what: str = "name") -> Ref:
        t = self.tok
        if t.kind == "keyword":
            raise ParseError(f"'{t.text}' is a reserved word", t.pos.line, t.pos.column, (what,))
        if t.kind != "name":
            raise self._error((what,))
        self._advance()
        return Ref(t.text, t.pos)

    def _number(self) -> float:
        t = self.tok
        if t.kind != "number":
            raise self._error(("number",))
        self._advance()
        value = float(t.text)
        if not math.isfinite(value):
            raise ParseError(f"number '{t.text}' is out of range", *t.pos)
        return value

    def _integer(self, what: str) -> int:
        t = self.tok
        value = self._number()
        if not value.is_integer():
            raise ParseError(f"{what} must be an integer, got {t.text}", *t.pos)
        return int(value)

    def _point(self) -> tuple[float, float]:
        self._expect("(")
        x = self._number()
        self._expect(",")
        y = self._number()
        self._expect(")")
        return x, y

    def _listed(self, item: Callable[[], object]) -> tuple:
        items = [item()]
        while self._accept(","):
            items.append(item())
        return tuple(items)

    def parse(self) -> ChoreoScript:
        statements = []
        while self.tok.kind != "eof":
            t = self.tok
            handler = _STATEMENTS.get(t.text) if t.kind == "keyword" else None
            if handler is None:
                raise self._error(tuple(f"'{k}'" for k in STATEMENT_KEYWORDS))
            statements.append(handler(self))
        return ChoreoScript(tuple(statements))

    # -- statements --

    def _title(self) -> Title:
        pos = self._advance().pos
        t = self.tok
        if t.kind != "string":
            raise self._error(("string",))
        self._advance()
        return Title(t.text, pos=pos)

    def _skeleton(self) -> SkeletonDecl:
        pos = self._advance().pos
        name = self._name("skeleton name")
        if self._accept("default"):
            return SkeletonDecl(name, True, pos=pos)
        self._expect("{")
        keypoints: tuple[Ref, ...] = ()
        edges: tuple[tuple[Ref, Ref], ...] = ()
        while not self._accept("}"):
            if self._accept("keypoints"):
                keypoints += self._listed(lambda: self._name("keypoint"))
            elif self._accept("edges"):
                edges += self._listed(self._edge)
            else:
                raise self._error(("'keypoints'", "'edges'", "'}'"))
        return SkeletonDecl(name, False, keypoints, edges, pos=pos)

    def _edge(self) -> tuple[Ref, Ref]:
        a = self._name("keypoint")
        self._expect(":")
        return a, self._name("keypoint")

    def _pose(self) -> Node:
        pos = self._advance().pos
        name = self._name("pose name")
        if self._accept("="):
            base = self._name("pose")
            if self._accept("shift"):
                return ShiftedPose(name, base, self._point(), pos=pos)
            if self._accept("mirror"):
                axis = self._number() if self.tok.kind == "number" else None
                return MirroredPose(name, base, axis, pos=pos)
            raise self._error(("'shift'", "'mirror'"))
        if not self._accept(":"):
            raise self._error(("':'", "'='"))
        skeleton = self._name("skeleton")
        if self._accept("stance"):
            stance = self._name("stance")
            at = self._point() if self._accept("at") else None
            return StanceDecl(name, skeleton, stance, at, pos=pos)
        if not self._accept("{"):
            raise self._error(("'stance'", "'{'"))
        points = []
        while not self._accept("}"):
            label = self._name("keypoint")
            x, y = self._point()
            points.append(KeypointAt(label, x, y))
            if not self._accept(","):
                self._expect("}")
                break
        return PoseDecl(name, skeleton, tuple(points), pos=pos)

    def _move(self) -> MoveDecl:
        pos = self._advance().pos
        name = self._name("move name")
        self._expect(":")
        source = self._name("pose")
        self._expect("->")
        target = self._name("pose")
        via: tuple[Ref, ...] = ()
        if self._accept("linear"):
            kind = "linear"
        elif self._accept("bezier"):
            kind = "bezier"
            self._expect("via")
            via = self._listed(lambda: self._name("pose"))
        else:
            raise self._error(("'linear'", "'bezier'"))
        self._expect("beats")
        beats = self._number()
        samples = self._integer("samples") if self._accept("samples") else None
        return MoveDecl(name, source, target, kind, via, beats, samples, pos=pos)

    def _pulse(self) -> PulseDecl:
        pos = self._advance().pos
        self._expect("{")
        values: dict[str, object] = {}
        while not self._accept("}"):
            t = self.tok
            if t.text in values and t.kind == "keyword":
                raise ParseError(f"'{t.text}' given twice in the pulse block", *t.pos)
            if self._accept("bpm"):
                values["bpm"] = self._number()
            elif self._accept("meter"):
                values["meter"] = self._integer("meter")
            elif self._accept("bars"):
                values["bars"] = self._integer("bars")
            elif self._accept("accents"):
                values["accents"] = self._listed(self._number)
            else:
                raise self._error(("'bpm'", "'meter'", "'bars'", "'accents'", "'}'"))
        return PulseDecl(pos=pos, **values)  # type: ignore[arg-type]

    def _style(self) -> StyleDecl:
        pos = self._advance().pos
        name = self._name("style name")
        self._expect("{")
        values: dict[str, object] = {}
        while not self._accept("}"):
            t = self.tok
            if t.text in values and t.kind == "keyword":
                raise ParseError(f"'{t.text}' given twice in style '{name}'", *t.pos)
            if self._accept("scale"):
                values["scale"] = self._number()
            elif self._accept("rotate"):
                values["rotate"] = self._number()
            elif self._accept("translate"):
                values["translate"] = self._point()
            elif self._accept("mirror"):
                values["mirror"] = True
            else:
                raise self._error(("'scale'", "'rotate'", "'translate'", "'mirror'", "'}'"))
        return StyleDecl(name, pos=pos, **values)  # type: ignore[arg-type]

    def _choreography(self) -> ChoreographyDecl:
        pos = self._advance().pos
        self._expect("{")
        dancers: tuple[Ref, ...] = ()
        marks: list[MarkDecl] = []
        intervals: list[IntervalDecl] = []
        while not self._accept("}"):
            t = self.tok
            if self._accept("dancers"):
                if dancers:
                    raise ParseError("'dancers' given twice", *t.pos)
                dancers = self._listed(lambda: self._name("dancer"))
            elif self._accept("mark"):
                name = self._name("mark name")
                self._expect("at")
                beat = self._number()
                marks.append(MarkDecl(name, beat, self._entries("pose"), pos=t.pos))
            elif t.kind == "name":
                source = self._name("mark")
                self._expect("->")
                target = self._name("mark")
                intervals.append(IntervalDecl(source, target, self._entries("move"), pos=t.pos))
            else:
                raise self._error(("'dancers'", "'mark'", "mark name", "'}'"))
        return ChoreographyDecl(dancers, tuple(marks), tuple(intervals), pos=pos)

    def _entries(self, what: str) -> tuple[Entry, ...]:
        self._expect("{")
        entries: list[Entry] = []
        while not self._accept("}"):
            dancer = self._name("dancer")
            t = self.tok
            value = Ref(HOLD, t.pos) if what == "move" and self._accept(HOLD) else self._name(what)
            entries.append(Entry(dancer, value))
            if not self._accept(","):
                self._expect("}")
                break
        return tuple(entries)

    def _valzer(self) -> Valzer:
        pos = self._advance().pos
        return Valzer(self._number(), pos=pos)

    def _group(self) -> Group:
        pos = self._advance().pos
        return Group(self._integer("group size"), pos=pos)

    def _smooth(self) -> Smooth:
        pos = self._advance().pos
        dancer = self._name("dancer")
        source = self._name("mark")
        self._expect("->")
        target = self._name("mark")
        self._expect("strength")
        strength = self._number()
        passes = self._integer("passes") if self._accept("passes") else None
        return Smooth(dancer, source, target, strength, passes, pos=pos)

    def _swap(self) -> Swap:
        pos = self._advance().pos
        self._expect("at")
        return Swap(self._name("mark"), pos=pos)

    def _apply(self) -> Apply:
        pos = self._advance().pos
        return Apply(self._name("style"), pos=pos)


_STATEMENTS: dict[str, Callable[[_Parser], Node]] = {
    "title": _Parser._title,
    "skeleton": _Parser._skeleton,
    "pose": _Parser._pose,
    "move": _Parser._move,
    "pulse": _Parser._pulse,
    "style": _Parser._style,
    "choreography": _Parser._choreography,
    "valzer": _Parser._valzer,
    "group": _Parser._group,
    "smooth": _Parser._smooth,
    "swap": _Parser._swap,
    "apply": _Parser._apply,
}


# ---- Semantic checks ----


def _fail(message: str, where: Ref | Node | Pos) -> SemanticError:
    pos = where if isinstance(where, Pos) else where.pos
    return SemanticError(message, pos.line, pos.column)


class _Checker:  # pylint: disable=invalid-name
    """Walks the statements in order, keeping what has been declared so far."""

    def __init__(self) -> None:
        self.skeletons: dict[str, tuple[str, ...] | None] = {}  # None: default keypoints
        self.poses: dict[str, str] = {}  # pose -> skeleton
        self.moves: dict[str, MoveDecl] = {}
        self.styles: set[str] = set()
        self.title: Title | None = None
        self.pulse: PulseDecl | None = None
        self.meter = 4
        self.choreography: ChoreographyDecl | None = None

    def check(self, script: ChoreoScript, end: Pos) -> None:
        for s in script.statements:
            getattr(self, f"_{type(s).__name__}")(s)
        if self.pulse is None:
            raise _fail("missing pulse block", end)
        if self.choreography is None:
            raise _fail("missing choreography block", end)

    @staticmethod
    def _lookup(table, ref: Ref, what: str):
        if ref.name not in table:
            raise _fail(f"undeclared {what} '{ref.name}'", ref)
        return table[ref.name] if isinstance(table, Mapping) else ref.name

    @staticmethod
    def _fresh(table, ref: Ref, what: str) -> None:
        if ref.name in table:
            raise _fail(f"duplicate {what} '{ref.name}'", ref)

    def _Title(self, s: Title) -> None:
        if self.title is not None:
            raise _fail("duplicate title", s)
        self.title = s

    def _SkeletonDecl(self, s: SkeletonDecl) -> None:
        self._fresh(self.skeletons, s.name, "skeleton")
        if s.default:
            self.skeletons[s.name.name] = None
            return
        if not s.keypoints:
            raise _fail(f"skeleton '{s.name}' declares no keypoints", s.name)
        seen: set[str] = set()
        for k in s.keypoints:
            self._fresh(seen, k, "keypoint")
            seen.add(k.name)
        for a, b in s.edges:
            self._lookup(seen, a, "keypoint")
            self._lookup(seen, b, "keypoint")
        self.skeletons[s.name.name] = tuple(k.name for k in s.keypoints)

    def _keypoints_of(self, skeleton: Ref) -> tuple[str, ...]:
        labels = self._lookup(self.skeletons, skeleton, "skeleton")
        return DEFAULT_KEYPOINTS if labels is None else labels

    def _PoseDecl(self, s: PoseDecl) -> None:
        self._fresh(self.poses, s.name, "pose")
        labels = self._keypoints_of(s.skeleton)
        given: set[str] = set()
        for p in s.points:
            if p.label.name not in labels:
                raise _fail(f"skeleton '{s.skeleton}' has no keypoint '{p.label}'", p.label)
            if p.label.name in given:
                raise _fail(f"keypoint '{p.label}' given twice", p.label)
            given.add(p.label.name)
        missing = [k for k in labels if k not in given]
        if missing:
            raise _fail(
                f"pose '{s.name}' gives {len(given)} of {len(labels)} keypoints (missing: {', '.join(missing)})", s.name
            )
        self.poses[s.name.name] = s.skeleton.name

    def _StanceDecl(self, s: StanceDecl) -> None:
        self._fresh(self.poses, s.name, "pose")
        labels = self._keypoints_of(s.skeleton)
        table = self._lookup(STANCES, s.stance, "stance")
        missing = [k for k in labels if k not in table]
        if missing:
            raise _fail(f"stance '{s.stance}' has no position for keypoints: {', '.join(missing)}", s.stance)
        self.poses[s.name.name] = s.skeleton.name

    def _ShiftedPose(self, s: ShiftedPose) -> None:
        self._fresh(self.poses, s.name, "pose")
        self.poses[s.name.name] = self._lookup(self.poses, s.base, "pose")

    def _MirroredPose(self, s: MirroredPose) -> None:
        self._fresh(self.poses, s.name, "pose")
        self.poses[s.name.name] = self._lookup(self.poses, s.base, "pose")

    def _MoveDecl(self, s: MoveDecl) -> None:
        self._fresh(self.moves, s.name, "move")
        skeletons = {self._lookup(self.poses, r, "pose") for r in (s.source, s.target, *s.via)}
        if len(skeletons) > 1:
            raise _fail(f"move '{s.name}' mixes poses of skeletons {', '.join(sorted(skeletons))}", s.name)
        if not s.beats > 0:
            raise _fail(f"move '{s.name}' must last more than 0 beats", s.name)
        if s.samples is not None and s.samples < 2:
            raise _fail(f"move '{s.name}' needs at least 2 samples", s.name)
        self.moves[s.name.name] = s

    def _PulseDecl(self, s: PulseDecl) -> None:
        if self.pulse is not None:
            raise _fail("a script has exactly one pulse block", s)
        if s.bpm is not None and not s.bpm > 0:
            raise _fail("bpm must be > 0", s)
        if (s.meter is not None and s.meter < 1) or (s.bars is not None and s.bars < 1):
            raise _fail("meter and bars must be >= 1", s)
        if any(not 0.0 <= a <= 1.0 for a in s.accents):
            raise _fail("accents must lie in [0, 1]", s)
        self.pulse = s
        self.meter = s.meter if s.meter is not None else 4

    def _StyleDecl(self, s: StyleDecl) -> None:
        self._fresh(self.styles, s.name, "style")
        if s.scale is not None and not s.scale > 0:
            raise _fail(f"style '{s.name}' needs a scale > 0", s.name)
        self.styles.add(s.name.name)

    def _ChoreographyDecl(self, s: ChoreographyDecl) -> None:
        if self.choreography is not None:
            raise _fail("a script has exactly one choreography block", s)
        if not s.dancers:
            raise _fail("choreography declares no dancers", s)
        dancers: set[str] = set()
        for d in s.dancers:
            self._fresh(dancers, d, "dancer")
            dancers.add(d.name)
        if not s.marks:
            raise _fail("choreography declares no marks", s)
        marks: dict[str, int] = {}
        for i, m in enumerate(s.marks):
            self._fresh(marks, m.name, "mark")
            if i and not m.beat > s.marks[i - 1].beat:
                raise _fail(f"mark '{m.name}' must come after beat {s.marks[i - 1].beat:g}", m.name)
            self._entries(m.entries, dancers, m, self.poses, "pose")
            marks[m.name.name] = i
        covered: set[int] = set()
        for iv in s.intervals:
            a = self._lookup(marks, iv.source, "mark")
            b = self._lookup(marks, iv.target, "mark")
            if b != a + 1:
                raise _fail(f"interval {iv.source} -> {iv.target} does not join consecutive marks", iv)
            if a in covered:
                raise _fail(f"duplicate interval {iv.source} -> {iv.target}", iv)
            covered.add(a)
            self._entries(iv.entries, dancers, iv, self.moves, "move")
        for i in range(len(s.marks) - 1):
            if i not in covered:
                later = s.marks[i + 1]
                raise _fail(f"no movement between marks '{s.marks[i].name}' and '{later.name}'", later)
        self.choreography = s

    def _entries(self, entries, dancers: set[str], owner: Node, table, what: str) -> None:
        given: set[str] = set()
        for e in entries:
            self._lookup(dancers, e.dancer, "dancer")
            if e.dancer.name in given:
                raise _fail(f"dancer '{e.dancer}' assigned twice", e.dancer)
            given.add(e.dancer.name)
            if not (what == "move" and e.value.name == HOLD):
                self._lookup(table, e.value, what)
        missing = sorted(dancers - given)
        if missing:
            raise _fail(f"no {what} for dancers: {', '.join(missing)}", owner)

    def _consecutive(self, source: Ref, target: Ref) -> None:
        assert self.choreography is not None
        names = [m.name.name for m in self.choreography.marks]
        a = self._lookup(names, source, "mark")
        b = self._lookup(names, target, "mark")
        if names.index(b) != names.index(a) + 1:
            raise _fail(f"{source} -> {target} does not join consecutive marks", source)

    def _needs(self, block: object, what: str, s: Node) -> None:
        if block is None:
            raise _fail(f"'{type(s).__name__.lower()}' must follow the {what} block", s)

    def _Valzer(self, s: Valzer) -> None:
        self._needs(self.pulse, "pulse", s)
        if not 0.0 <= s.alpha < 1.0:
            raise _fail("valzer alpha must lie in [0, 1)", s)
        if self.meter != 3:
            raise _fail(f"valzer needs a ternary meter, the pulse has {self.meter}", s)

    def _Group(self, s: Group) -> None:
        self._needs(self.pulse, "pulse", s)
        if s.k < 1:
            raise _fail("group size must be >= 1", s)
        self.meter = self.meter // s.k if self.meter % s.k == 0 else 1

    def _Smooth(self, s: Smooth) -> None:
        self._needs(self.choreography, "choreography", s)
        assert self.choreography is not None
        self._lookup({d.name for d in self.choreography.dancers}, s.dancer, "dancer")
        self._consecutive(s.source, s.target)
        if not 0.0 <= s.strength <= 1.0:
            raise _fail("smoothing strength must lie in [0, 1]", s)
        if s.passes is not None and s.passes < 0:
            raise _fail("smoothing passes must be >= 0", s)

    def _Swap(self, s: Swap) -> None:
        self._needs(self.choreography, "choreography", s)
        assert self.choreography is not None
        self._lookup({m.name.name for m in self.choreography.marks}, s.mark, "mark")
        if len(self.choreography.dancers) != 2:
            raise _fail(f"swap needs exactly two dancers, found {len(self.choreography.dancers)}", s)

    def _Apply(self, s: Apply) -> None:
        self._lookup(self.styles, s.style, "style")


def parse(text: str) -> ChoreoScript:
    """Parses and checks a script.

    :raises ParseError: lexical or syntax error, with the expected tokens.
    :raises SemanticError: undeclared or duplicate name, arity mismatch.
    """
    tokens = tokenize(text)
    script = _Parser(tokens).parse()
    _Checker().check(script, tokens[-1].pos)
    app_logger.info("Parsed script: %d statements", len(script.statements))
    return script


def parse_file(path: str) -> ChoreoScript:
    with open(path, encoding="utf-8-sig") as f:
        return parse(f.read())


# ---- Printer ----


def _num(v: float) -> str:
    if isinstance(v, int):
        return str(v)
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _pt(p: tuple[float, float]) -> str:
    return f"({_num(p[0])}, {_num(p[1])})"


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _entries_text(entries: tuple[Entry, ...]) -> str:
    if not entries:
        return "{ }"
    return "{ " + ", ".join(f"{e.dancer} {e.value}" for e in entries) + " }"


def _print_statement(s: Node) -> list[str]:  # pylint: disable=too-many-return-statements
    if isinstance(s, Title):
        return [f"title {_quote(s.text)}"]
    if isinstance(s, SkeletonDecl):
        if s.default:
            return [f"skeleton {s.name} default"]
        body = [f"  keypoints {', '.join(k.name for k in s.keypoints)}"]
        if s.edges:
            body.append("  edges " + ", ".join(f"{a}:{b}" for a, b in s.edges))
        return [f"skeleton {s.name} {{", *body, "}"]
    if isinstance(s, PoseDecl):
        body = [f"  {p.label} {_pt((p.x, p.y))}" for p in s.points]
        body = [line + "," for line in body[:-1]] + body[-1:]
        return [f"pose {s.name} : {s.skeleton} {{", *body, "}"]
    if isinstance(s, StanceDecl):
        at = f" at {_pt(s.at)}" if s.at is not None else ""
        return [f"pose {s.name} : {s.skeleton} stance {s.stance}{at}"]
    if isinstance(s, ShiftedPose):
        return [f"pose {s.name} = {s.base} shift {_pt(s.offset)}"]
    if isinstance(s, MirroredPose):
        axis = f" {_num(s.axis)}" if s.axis is not None else ""
        return [f"pose {s.name} = {s.base} mirror{axis}"]
    if isinstance(s, MoveDecl):
        how = "linear" if s.kind == "linear" else "bezier via " + ", ".join(v.name for v in s.via)
        samples = f" samples {s.samples}" if s.samples is not None else ""
        return [f"move {s.name} : {s.source} -> {s.target} {how} beats {_num(s.beats)}{samples}"]
    if isinstance(s, PulseDecl):
        body = [f"  {key} {_num(getattr(s, key))}" for key in ("bpm", "meter", "bars") if getattr(s, key) is not None]
        if s.accents:
            body.append("  accents " + ", ".join(_num(a) for a in s.accents))
        return ["pulse {", *body, "}"]
    if isinstance(s, StyleDecl):
        body = [f"  {key} {_num(getattr(s, key))}" for key in ("scale", "rotate") if getattr(s, key) is not None]
        if s.translate is not None:
            body.append(f"  translate {_pt(s.translate)}")
        if s.mirror:
            body.append("  mirror")
        return [f"style {s.name} {{", *body, "}"]
    if isinstance(s, ChoreographyDecl):
        body = [f"  dancers {', '.join(d.name for d in s.dancers)}"]
        body += [f"  mark {m.name} at {_num(m.beat)} {_entries_text(m.entries)}" for m in s.marks]
        body += [f"  {iv.source} -> {iv.target} {_entries_text(iv.entries)}" for iv in s.intervals]
        return ["choreography {", *body, "}"]
    if isinstance(s, Valzer):
        return [f"valzer {_num(s.alpha)}"]
    if isinstance(s, Group):
        return [f"group {s.k}"]
    if isinstance(s, Smooth):
        passes = f" passes {s.passes}" if s.passes is not None else ""
        return [f"smooth {s.dancer} {s.source} -> {s.target} strength {_num(s.strength)}{passes}"]
    if isinstance(s, Swap):
        return [f"swap at {s.mark}"]
    if isinstance(s, Apply):
        return [f"apply {s.style}"]
    raise TypeError(f"cannot print {type(s).__name__}")


def print_script(script: ChoreoScript) -> str:
    """Canonical text of a script: parse(print_script(s)) == s."""
    lines: list[str] = []
    for s in script.statements:
        lines.extend(_print_statement(s))
    return "\n".join(lines) + "\n"
