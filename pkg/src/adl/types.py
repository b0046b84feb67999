"""The type universe: base types plus recursively applicable constructors.

Types are immutable and compare structurally (view field order is
significant).  `render_type` / `parse_type` convert between Type values and
their concrete spelling, e.g. ``connection[string]`` or
``function[integer, real] -> boolean``.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Type:
    def __str__(self) -> str:
        return render_type(self)


@dataclass(frozen=True)
class IntegerT(Type):
    pass


@dataclass(frozen=True)
class RealT(Type):
    pass


@dataclass(frozen=True)
class BooleanT(Type):
    pass


@dataclass(frozen=True)
class StringT(Type):
    pass


@dataclass(frozen=True)
class AnyT(Type):
    """Infinite union; runtime values carry a witness type alongside."""


@dataclass(frozen=True)
class BehaviourT(Type):
    """Type of an executing process."""


@dataclass(frozen=True)
class LocationT(Type):
    of: Type


@dataclass(frozen=True)
class SequenceT(Type):
    of: Type


@dataclass(frozen=True)
class ViewT(Type):
    fields: tuple[tuple[str, Type], ...]


@dataclass(frozen=True)
class FunctionT(Type):
    params: tuple[Type, ...]
    result: Type


@dataclass(frozen=True)
class ConnectionT(Type):
    payload: tuple[Type, ...]


@dataclass(frozen=True)
class AbstractionT(Type):
    params: tuple[Type, ...]


@dataclass(frozen=True)
class UnitT(Type):
    """Internal type of completed statements (assignment, bare sends).

    Not spellable in source; usable only in statement position.
    """


@dataclass(frozen=True)
class ErrorT(Type):
    """Internal poison type used by the checker to avoid error cascades."""


INTEGER = IntegerT()
REAL = RealT()
BOOLEAN = BooleanT()
STRING = StringT()
ANY = AnyT()
BEHAVIOUR = BehaviourT()
UNIT = UnitT()
ERROR = ErrorT()

#: Element type of the sequence returned by decompose.
DECOMPOSED_ELEM = ViewT((
    ("label", STRING),
    ("bhvr", BEHAVIOUR),
    ("connections", SequenceT(ViewT((("name", STRING), ("conn", ANY))))),
))
DECOMPOSED_SEQ = SequenceT(DECOMPOSED_ELEM)


def type_equal(a: Type, b: Type) -> bool:
    """Structural equality; distinct constructors never compare equal."""
    return a == b


def render_type(t: Type) -> str:
    if isinstance(t, IntegerT):
        return "integer"
    if isinstance(t, RealT):
        return "real"
    if isinstance(t, BooleanT):
        return "boolean"
    if isinstance(t, StringT):
        return "string"
    if isinstance(t, AnyT):
        return "any"
    if isinstance(t, BehaviourT):
        return "behaviour"
    if isinstance(t, LocationT):
        return f"location[{render_type(t.of)}]"
    if isinstance(t, SequenceT):
        return f"sequence[{render_type(t.of)}]"
    if isinstance(t, ViewT):
        inner = ", ".join(f"{n}: {render_type(ft)}" for n, ft in t.fields)
        return f"view[{inner}]"
    if isinstance(t, FunctionT):
        inner = ", ".join(render_type(p) for p in t.params)
        return f"function[{inner}] -> {render_type(t.result)}"
    if isinstance(t, ConnectionT):
        inner = ", ".join(render_type(p) for p in t.payload)
        return f"connection[{inner}]"
    if isinstance(t, AbstractionT):
        inner = ", ".join(render_type(p) for p in t.params)
        return f"abstraction[{inner}]"
    if isinstance(t, UnitT):
        return "<completed>"
    if isinstance(t, ErrorT):
        return "<error>"
    raise TypeError(f"unknown type {t!r}")


class TypeSyntaxError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.message = message
        self.pos = pos


class _TypeParser:
    """Tiny standalone recursive-descent parser for type spellings."""

    BASES = {
        "integer": INTEGER,
        "real": REAL,
        "boolean": BOOLEAN,
        "string": STRING,
        "any": ANY,
        "behaviour": BEHAVIOUR,
    }

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str):
        raise TypeSyntaxError(message, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        self.skip_ws()
        if not self.text.startswith(ch, self.pos):
            self.error(f"expected {ch!r}")
        self.pos += len(ch)

    def word(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        if start == self.pos:
            self.error("expected a type name")
        return self.text[start:self.pos]

    def type_list(self) -> tuple[Type, ...]:
        items: list[Type] = []
        if self.peek() == "]":
            return ()
        items.append(self.parse())
        while self.peek() == ",":
            self.expect(",")
            items.append(self.parse())
        return tuple(items)

    def parse(self) -> Type:
        name = self.word()
        if name in self.BASES:
            return self.BASES[name]
        if name == "location":
            self.expect("[")
            inner = self.parse()
            self.expect("]")
            return LocationT(inner)
        if name == "sequence":
            self.expect("[")
            inner = self.parse()
            self.expect("]")
            return SequenceT(inner)
        if name == "view":
            self.expect("[")
            fields: list[tuple[str, Type]] = []
            if self.peek() != "]":
                while True:
                    fname = self.word()
                    self.expect(":")
                    fields.append((fname, self.parse()))
                    if self.peek() != ",":
                        break
                    self.expect(",")
            self.expect("]")
            names = [n for n, _ in fields]
            if len(names) != len(set(names)):
                self.error("duplicate view field name")
            return ViewT(tuple(fields))
        if name == "connection":
            self.expect("[")
            payload = self.type_list()
            self.expect("]")
            return ConnectionT(payload)
        if name == "abstraction":
            self.expect("[")
            params = self.type_list()
            self.expect("]")
            return AbstractionT(params)
        if name == "function":
            self.expect("[")
            params = self.type_list()
            self.expect("]")
            self.expect("->")
            return FunctionT(params, self.parse())
        self.error(f"unknown type name {name!r}")


def parse_type(text: str) -> Type:
    """Parse a concrete type spelling; raises TypeSyntaxError on bad input."""
    p = _TypeParser(text)
    t = p.parse()
    p.skip_ws()
    if p.pos != len(text):
        p.error("trailing input after type")
    return t
