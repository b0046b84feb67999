"""Concrete syntax: lexer, parser, and pretty-printer.

Text and hyper-code are interconvertible; link tokens `@[id:hint]` carry
value ids through the text form.  Comments run from `!` to end of line.

`::` is overloaded in the source: with an integer right operand it is
1-based sequence indexing; `NAME::NAME` is only meaningful inside a
compose `where` clause, anywhere else it is a syntax error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from adl import hypercode as H
from adl.types import (
    ANY,
    BEHAVIOUR,
    BOOLEAN,
    INTEGER,
    REAL,
    STRING,
    AbstractionT,
    ConnectionT,
    FunctionT,
    LocationT,
    SequenceT,
    Type,
    ViewT,
)
from adl.types import parse_type  # re-exported; annotation syntax is shared

__all__ = ["parse", "parse_program", "render", "parse_type", "ParseError", "ParseFailure"]


@dataclass
class SourceSpan:
    start: int
    end: int
    line: int
    column: int


@dataclass
class ParseError:
    span: SourceSpan
    message: str
    expected: list = field(default_factory=list)

    def __str__(self):
        return f"{self.span.line}:{self.span.column}: {self.message}"


class ParseFailure(Exception):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


### Lexer

KEYWORDS = {
    "value", "abstraction", "function", "replicate", "choose", "or", "via",
    "send", "receive", "connection", "location", "deref", "compose", "and",
    "where", "unifies", "as", "decompose", "view", "sequence", "if", "then",
    "else", "while", "do", "free", "any", "project", "not", "true", "false",
}

PUNCT = [
    "::", ":=", "->", "++", "<=", ">=", "~=",
    "{", "}", "(", ")", "[", "]", ",", ";", ".", ":", "=", "<", ">",
    "+", "-", "*", "/",
]


@dataclass
class Tok:
    kind: str  # NAME KW INT REAL STRING LINK OP EOF
    value: object
    span: SourceSpan


def _is_name_start(c):
    return c.isalpha() or c == "_"


def _is_name_char(c):
    return c.isalnum() or c == "_"


def tokenize(text: str):
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)

    def span(start, scol, end):
        return SourceSpan(start, end, line, scol)

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "!":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start, scol = i, col
        if _is_name_start(c):
            while i < n and _is_name_char(text[i]):
                i += 1
            word = text[start:i]
            col += i - start
            kind = "KW" if word in KEYWORDS else "NAME"
            toks.append(Tok(kind, word, span(start, scol, i)))
            continue
        if c.isdigit():
            while i < n and text[i].isdigit():
                i += 1
            is_real = False
            if i + 1 < n and text[i] == "." and text[i + 1].isdigit():
                is_real = True
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    is_real = True
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            word = text[start:i]
            col += i - start
            if is_real:
                toks.append(Tok("REAL", float(word), span(start, scol, i)))
            else:
                toks.append(Tok("INT", int(word), span(start, scol, i)))
            continue
        if c == '"':
            i += 1
            out = []
            while i < n and text[i] != '"':
                ch = text[i]
                if ch == "\n":
                    raise ParseFailure([ParseError(span(start, scol, i), "unterminated string")])
                if ch == "\\":
                    if i + 1 >= n:
                        break
                    esc = text[i + 1]
                    out.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    i += 2
                else:
                    out.append(ch)
                    i += 1
            if i >= n:
                raise ParseFailure([ParseError(span(start, scol, i), "unterminated string")])
            i += 1
            col += i - start
            toks.append(Tok("STRING", "".join(out), span(start, scol, i)))
            continue
        if c == "@":
            # link token: @[INT] or @[INT:NAME]
            j = i + 1
            if j < n and text[j] == "[":
                j += 1
                ds = j
                while j < n and text[j].isdigit():
                    j += 1
                if j > ds:
                    vid = int(text[ds:j])
                    hint = None
                    if j < n and text[j] == ":":
                        j += 1
                        hs = j
                        while j < n and _is_name_char(text[j]):
                            j += 1
                        hint = text[hs:j]
                    if j < n and text[j] == "]":
                        j += 1
                        col += j - i
                        toks.append(Tok("LINK", (vid, hint), span(start, scol, j)))
                        i = j
                        continue
            raise ParseFailure([ParseError(span(start, scol, i + 1), "malformed link token")])
        for p in PUNCT:
            if text.startswith(p, i):
                i += len(p)
                col += len(p)
                toks.append(Tok("OP", p, span(start, scol, i)))
                break
        else:
            raise ParseFailure([ParseError(span(start, scol, i + 1), f"unexpected character {c!r}")])
    toks.append(Tok("EOF", None, SourceSpan(n, n, line, col)))
    return toks


### Parser

# Tokens that can begin an expression; used to spot empty send payloads.
_EXPR_KWS = {
    "via", "replicate", "choose", "compose", "decompose", "connection",
    "location", "view", "sequence", "any", "project", "deref", "abstraction",
    "function", "not", "true", "false",
}


def _starts_expr(t: Tok) -> bool:
    if t.kind in ("NAME", "INT", "REAL", "STRING", "LINK"):
        return True
    if t.kind == "KW":
        return t.value in _EXPR_KWS
    if t.kind == "OP":
        return t.value in ("(", "{", "-")
    return False


_TYPE_BASES = {"integer": INTEGER, "real": REAL, "boolean": BOOLEAN,
               "string": STRING, "any": ANY, "behaviour": BEHAVIOUR}


class _P:
    def __init__(self, toks, store):
        self.toks = toks
        self.i = 0
        self.store = store

    def peek(self, k=0) -> Tok:
        j = min(self.i + k, len(self.toks) - 1)
        return self.toks[j]

    def next(self) -> Tok:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def at_op(self, *vals) -> bool:
        t = self.peek()
        return t.kind == "OP" and t.value in vals

    def at_kw(self, *vals) -> bool:
        t = self.peek()
        return t.kind == "KW" and t.value in vals

    def expect_op(self, v) -> Tok:
        t = self.peek()
        if t.kind == "OP" and t.value == v:
            return self.next()
        raise self.fail(f"expected {v!r}", [v])

    def expect_kw(self, v) -> Tok:
        t = self.peek()
        if t.kind == "KW" and t.value == v:
            return self.next()
        raise self.fail(f"expected {v!r}", [v])

    def expect_name(self, what="name") -> str:
        t = self.peek()
        if t.kind == "NAME":
            return self.next().value
        raise self.fail(f"expected {what}", ["NAME"])

    def fail(self, msg, expected=None) -> ParseFailure:
        t = self.peek()
        where = "end of input" if t.kind == "EOF" else f"{t.value!r}"
        return ParseFailure([ParseError(t.span, f"{msg}, found {where}", expected or [])])

    ### types over the token stream

    def parse_type_t(self) -> Type:
        t = self.peek()
        if t.kind == "NAME" and t.value in _TYPE_BASES:
            self.next()
            return _TYPE_BASES[t.value]
        if t.kind == "KW" and t.value == "any":
            self.next()
            return ANY
        if t.kind == "KW" and t.value in ("location", "sequence", "connection",
                                          "view", "abstraction", "function"):
            ctor = self.next().value
            if ctor in ("location", "sequence"):
                self.expect_op("[")
                inner = self.parse_type_t()
                self.expect_op("]")
                return LocationT(inner) if ctor == "location" else SequenceT(inner)
            if ctor in ("connection", "abstraction"):
                self.expect_op("[")
                args = []
                if not self.at_op("]"):
                    args.append(self.parse_type_t())
                    while self.at_op(","):
                        self.next()
                        args.append(self.parse_type_t())
                self.expect_op("]")
                return ConnectionT(tuple(args)) if ctor == "connection" else AbstractionT(tuple(args))
            if ctor == "view":
                self.expect_op("[")
                fields = []
                seen = set()
                if self.at_op("]"):
                    self.next()
                    return ViewT(())
                while True:
                    fname = self.expect_name("view field name")
                    self.expect_op(":")
                    fty = self.parse_type_t()
                    if fname in seen:
                        raise self.fail(f"duplicate view field {fname!r}")
                    seen.add(fname)
                    fields.append((fname, fty))
                    if self.at_op(","):
                        self.next()
                        continue
                    break
                self.expect_op("]")
                return ViewT(tuple(fields))
            # function
            self.expect_op("[")
            args = []
            if not self.at_op("]"):
                args.append(self.parse_type_t())
                while self.at_op(","):
                    self.next()
                    args.append(self.parse_type_t())
            self.expect_op("]")
            self.expect_op("->")
            return FunctionT(tuple(args), self.parse_type_t())
        raise self.fail("expected a type")

    def parse_params(self):
        """( NAME : type {, NAME : type} )  -- parens already not consumed."""
        self.expect_op("(")
        params = []
        if not self.at_op(")"):
            while True:
                pname = self.expect_name("parameter name")
                self.expect_op(":")
                params.append((pname, self.parse_type_t()))
                if self.at_op(","):
                    self.next()
                    continue
                break
        self.expect_op(")")
        return tuple(params)

    ### statements

    def parse_program(self) -> H.Node:
        items = []
        errors = []
        while self.peek().kind != "EOF":
            while self.at_op(";"):
                self.next()
            if self.peek().kind == "EOF":
                break
            try:
                items.append(self.parse_statement())
            except ParseFailure as e:
                errors.extend(e.errors)
                self._skip_to_item()
                continue
            if self.at_op(";"):
                self.next()
            elif self.peek().kind != "EOF":
                errors.append(ParseError(self.peek().span, "expected ';' between items"))
                self._skip_to_item()
        if errors:
            raise ParseFailure(errors)
        return H.Node("program", items)

    def _skip_to_item(self):
        depth = 0
        while self.peek().kind != "EOF":
            t = self.next()
            if t.kind == "OP":
                if t.value in ("{", "(", "["):
                    depth += 1
                elif t.value in ("}", ")", "]"):
                    depth -= 1
                elif t.value == ";" and depth <= 0:
                    return

    def parse_statement(self, no_or=False) -> H.Node:
        t = self.peek()
        if t.kind == "KW":
            if t.value == "value":
                self.next()
                name = self.expect_name("binding name")
                self.expect_op("=")
                e = self.parse_expr(no_or=no_or)
                return H.Node("val", [e], {"name": name}, t.span)
            if t.value == "free":
                self.next()
                self.expect_op("{")
                names = [self.expect_name()]
                while self.at_op(","):
                    self.next()
                    names.append(self.expect_name())
                self.expect_op("}")
                return H.Node("free", attrs={"names": tuple(names)}, span=t.span)
            if t.value == "if":
                self.next()
                cond = self.parse_expr()
                self.expect_kw("then")
                then = self.parse_body(no_or=no_or)
                kids = [cond, then]
                if self.at_kw("else"):
                    self.next()
                    kids.append(self.parse_body(no_or=no_or))
                return H.Node("if", kids, span=t.span)
            if t.value == "while":
                self.next()
                cond = self.parse_expr()
                self.expect_kw("do")
                body = self.parse_body(no_or=no_or)
                return H.Node("while", [cond, body], span=t.span)
        e = self.parse_expr(no_or=no_or)
        if self.at_op(":="):
            self.next()
            rhs = self.parse_expr(no_or=no_or)
            return H.Node("assign", [e, rhs], span=e.span)
        return e

    def parse_body(self, no_or=False) -> H.Node:
        """A brace block, or a single statement normalized into one."""
        if self.at_op("{"):
            return self.parse_block()
        stmt = self.parse_statement(no_or=no_or)
        return H.Node("block", [stmt], span=stmt.span)

    def parse_block(self) -> H.Node:
        t = self.expect_op("{")
        items = []
        while not self.at_op("}"):
            while self.at_op(";"):
                self.next()
            if self.at_op("}"):
                break
            items.append(self.parse_statement())
            if self.at_op(";"):
                self.next()
            elif not self.at_op("}"):
                raise self.fail("expected ';' or '}' in block")
        self.expect_op("}")
        return H.Node("block", items, span=t.span)

    ### expressions

    def parse_expr(self, no_or=False, no_and=False) -> H.Node:
        return self._or(no_or, no_and)

    def _or(self, no_or, no_and):
        left = self._and(no_and)
        while not no_or and self.at_kw("or"):
            t = self.next()
            right = self._and(no_and)
            left = H.Node("bin", [left, right], {"op": "or"}, t.span)
        return left

    def _and(self, no_and):
        left = self._not()
        while not no_and and self.at_kw("and"):
            t = self.next()
            right = self._not()
            left = H.Node("bin", [left, right], {"op": "and"}, t.span)
        return left

    def _not(self):
        if self.at_kw("not"):
            t = self.next()
            return H.Node("un", [self._not()], {"op": "not"}, t.span)
        return self._cmp()

    def _cmp(self):
        left = self._add()
        if self.at_op("=", "~=", "<", "<=", ">", ">="):
            t = self.next()
            right = self._add()
            return H.Node("bin", [left, right], {"op": t.value}, t.span)
        return left

    def _add(self):
        left = self._mul()
        while self.at_op("+", "-", "++"):
            t = self.next()
            right = self._mul()
            left = H.Node("bin", [left, right], {"op": t.value}, t.span)
        return left

    def _mul(self):
        left = self._unary()
        while self.at_op("*", "/"):
            t = self.next()
            right = self._unary()
            left = H.Node("bin", [left, right], {"op": t.value}, t.span)
        return left

    def _unary(self):
        if self.at_op("-"):
            t = self.next()
            return H.Node("un", [self._unary()], {"op": "-"}, t.span)
        if self.at_kw("deref"):
            t = self.next()
            return H.Node("deref", [self._unary()], span=t.span)
        if self.at_kw("decompose"):
            t = self.next()
            return H.Node("decomp", [self._unary()], span=t.span)
        return self._postfix()

    def _postfix(self):
        e = self._primary()
        while True:
            if self.at_op("("):
                t = self.next()
                args = []
                if not self.at_op(")"):
                    args.append(self.parse_expr())
                    while self.at_op(","):
                        self.next()
                        args.append(self.parse_expr())
                self.expect_op(")")
                e = H.Node("app", [e] + args, span=t.span)
                continue
            if self.at_op("::"):
                t = self.next()
                idx = self.peek()
                if idx.kind != "INT":
                    raise self.fail("'::' outside a where clause takes an integer index")
                self.next()
                e = H.Node("idx", [e], {"index": idx.value}, t.span)
                continue
            if self.at_op("."):
                t = self.next()
                fname = self.expect_name("field name")
                e = H.Node("dot", [e], {"field": fname}, t.span)
                continue
            return e

    def _primary(self):
        t = self.peek()
        if t.kind == "INT":
            self.next()
            return H.Node("lit", attrs={"t": "integer", "v": t.value}, span=t.span)
        if t.kind == "REAL":
            self.next()
            return H.Node("lit", attrs={"t": "real", "v": t.value}, span=t.span)
        if t.kind == "STRING":
            self.next()
            return H.Node("lit", attrs={"t": "string", "v": t.value}, span=t.span)
        if t.kind == "LINK":
            self.next()
            vid, hint = t.value
            if self.store is not None and not self.store.has(vid):
                raise ParseFailure([ParseError(t.span, f"link to unknown value id {vid}")])
            return H.make_link(vid, hint)
        if t.kind == "NAME":
            self.next()
            return H.Node("name", attrs={"name": t.value}, span=t.span)
        if t.kind == "OP" and t.value == "(":
            self.next()
            e = self.parse_expr()
            self.expect_op(")")
            return e
        if t.kind == "OP" and t.value == "{":
            return self.parse_block()
        if t.kind != "KW":
            raise self.fail("expected an expression")
        kw = t.value
        if kw in ("true", "false"):
            self.next()
            return H.Node("lit", attrs={"t": "boolean", "v": kw == "true"}, span=t.span)
        if kw == "via":
            self.next()
            conn = self._unary()
            if self.at_kw("send"):
                self.next()
                args = []
                if _starts_expr(self.peek()):
                    args.append(self.parse_expr(no_or=True, no_and=True))
                    while self.at_op(","):
                        self.next()
                        args.append(self.parse_expr(no_or=True, no_and=True))
                return H.Node("send", [conn] + args, span=t.span)
            if self.at_kw("receive"):
                self.next()
                binders = []
                if self.peek().kind == "NAME" and self.peek(1).kind == "OP" \
                        and self.peek(1).value == ":":
                    while True:
                        bname = self.expect_name("binder name")
                        self.expect_op(":")
                        binders.append((bname, self.parse_type_t()))
                        if self.at_op(","):
                            self.next()
                            continue
                        break
                return H.Node("recv", [conn], {"binders": tuple(binders)}, t.span)
            raise self.fail("expected 'send' or 'receive' after connection")
        if kw == "replicate":
            self.next()
            return H.Node("rep", [self.parse_body()], span=t.span)
        if kw == "choose":
            self.next()
            self.expect_op("{")
            branches = [self.parse_body(no_or=True)]
            while self.at_kw("or"):
                self.next()
                branches.append(self.parse_body(no_or=True))
            self.expect_op("}")
            if len(branches) < 2:
                raise self.fail("choose needs at least two branches")
            return H.Node("choose", branches, span=t.span)
        if kw == "compose":
            return self._compose(t)
        if kw == "connection":
            self.next()
            self.expect_op("(")
            payload = []
            if not self.at_op(")"):
                payload.append(self.parse_type_t())
                while self.at_op(","):
                    self.next()
                    payload.append(self.parse_type_t())
            self.expect_op(")")
            return H.Node("connnew", attrs={"payload": tuple(payload)}, span=t.span)
        if kw == "location":
            self.next()
            self.expect_op("(")
            e = self.parse_expr()
            self.expect_op(")")
            return H.Node("locnew", [e], span=t.span)
        if kw == "view":
            self.next()
            self.expect_op("{")
            names, exprs = [], []
            while True:
                fname = self.expect_name("view field name")
                self.expect_op("=")
                exprs.append(self.parse_expr())
                if fname in names:
                    raise self.fail(f"duplicate view field {fname!r}")
                names.append(fname)
                if self.at_op(","):
                    self.next()
                    continue
                break
            self.expect_op("}")
            return H.Node("viewlit", exprs, {"names": tuple(names)}, t.span)
        if kw == "sequence":
            self.next()
            self.expect_op("{")
            items = []
            if not self.at_op("}"):
                items.append(self.parse_expr())
                while self.at_op(","):
                    self.next()
                    items.append(self.parse_expr())
            self.expect_op("}")
            return H.Node("seqlit", items, span=t.span)
        if kw == "any":
            self.next()
            self.expect_op("(")
            e = self.parse_expr()
            self.expect_op(")")
            return H.Node("anyin", [e], span=t.span)
        if kw == "project":
            self.next()
            self.expect_op("(")
            e = self.parse_expr()
            self.expect_op(",")
            ty = self.parse_type_t()
            self.expect_op(")")
            return H.Node("anyout", [e], {"ty": ty}, t.span)
        if kw == "abstraction":
            self.next()
            params = self.parse_params()
            body = self.parse_body()
            return H.Node("abs", [body], {"params": params}, t.span)
        if kw == "function":
            self.next()
            params = self.parse_params()
            self.expect_op("->")
            result = self.parse_type_t()
            self.expect_op("{")
            body = self.parse_expr()
            self.expect_op("}")
            return H.Node("fun", [body], {"params": params, "result": result}, t.span)
        raise self.fail("expected an expression")

    def _compose(self, t):
        self.expect_kw("compose")
        self.expect_op("{")
        labels, parts = [], []
        while True:
            label = None
            if self.peek().kind == "NAME" and self.peek(1).kind == "KW" \
                    and self.peek(1).value == "as":
                label = self.next().value
                self.next()
            labels.append(label)
            parts.append(self.parse_expr(no_and=True))
            if self.at_kw("and"):
                self.next()
                continue
            break
        unifs = []
        if self.at_kw("where"):
            self.next()
            self.expect_op("{")
            while True:
                ll = self.expect_name("part label")
                self.expect_op("::")
                ln = self.expect_name("connection name")
                self.expect_kw("unifies")
                rl = self.expect_name("part label")
                self.expect_op("::")
                rn = self.expect_name("connection name")
                unifs.append((ll, ln, rl, rn))
                if self.at_op(","):
                    self.next()
                    continue
                break
            self.expect_op("}")
        self.expect_op("}")
        return H.Node("comp", parts,
                      {"labels": tuple(labels), "unifs": tuple(unifs)}, t.span)


def parse_program(text: str, store=None) -> H.Node:
    toks = tokenize(text)
    return _P(toks, store).parse_program()


def parse(text: str, store=None) -> H.Node:
    """Parse a whole program.  Raises ParseFailure carrying every
    top-level error found, not only the first."""
    return parse_program(text, store)


def parse_expr_text(text: str, store=None) -> H.Node:
    toks = tokenize(text)
    p = _P(toks, store)
    e = p.parse_expr()
    if p.peek().kind != "EOF":
        raise p.fail("trailing input after expression")
    return e


### Renderer

_BIN_PREC = {"or": 1, "and": 2, "=": 4, "~=": 4, "<": 4, "<=": 4, ">": 4,
             ">=": 4, "+": 5, "-": 5, "++": 5, "*": 6, "/": 6}
_UN_PREC = {"not": 3, "-": 7}
_POSTFIX = 8
_ATOM = 9


def render(h: H.Node) -> str:
    """Canonical text for a tree; reparsing yields a structurally equal
    tree (single-statement bodies are normalized into blocks either way)."""
    r = _Renderer()
    if h.kind == "program":
        return r.items(h.children, 0)
    if h.kind == "block":
        return r.stmt(h, 0)
    return r.expr(h, 0, 0)


class _Renderer:
    def items(self, items, ind):
        return ";\n".join(self.stmt(i, ind) for i in items)

    def pad(self, ind):
        return "  " * ind

    def stmt(self, n: H.Node, ind) -> str:
        p = self.pad(ind)
        k = n.kind
        if k == "val":
            return f"{p}value {n.attrs['name']} = {self.expr(n.children[0], 0, ind)}"
        if k == "assign":
            return (f"{p}{self.expr(n.children[0], _POSTFIX, ind)} := "
                    f"{self.expr(n.children[1], 0, ind)}")
        if k == "free":
            return p + "free{ " + ", ".join(n.attrs["names"]) + " }"
        if k == "if":
            out = (f"{p}if {self.expr(n.children[0], 0, ind)} then "
                   + self.body(n.children[1], ind))
            if len(n.children) == 3:
                out += " else " + self.body(n.children[2], ind)
            return out
        if k == "while":
            return (f"{p}while {self.expr(n.children[0], 0, ind)} do "
                    + self.body(n.children[1], ind))
        if k == "block":
            return p + self.block_text(n, ind)
        return p + self.expr(n, 0, ind)

    def body(self, n: H.Node, ind) -> str:
        """Render a body block; single simple statements stay brace-less."""
        if n.kind == "block" and len(n.children) == 1 \
                and n.children[0].kind not in ("block",):
            return self.stmt(n.children[0], 0)
        return self.block_text(n, ind)

    def block_text(self, n: H.Node, ind) -> str:
        if not n.children:
            return "{ }"
        inner = ";\n".join(self.stmt(c, ind + 1) for c in n.children)
        return "{\n" + inner + "\n" + self.pad(ind) + "}"

    def expr(self, n: H.Node, prec: int, ind) -> str:
        text, myprec = self._expr(n, ind)
        if myprec < prec:
            return "(" + text + ")"
        return text

    def _expr(self, n: H.Node, ind):
        k = n.kind
        if k == "lit":
            t, v = n.attrs["t"], n.attrs["v"]
            if t == "integer":
                return str(v), _ATOM
            if t == "real":
                return repr(float(v)), _ATOM
            if t == "boolean":
                return ("true" if v else "false"), _ATOM
            esc = v.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
            return f'"{esc}"', _ATOM
        if k == "name":
            return n.attrs["name"], _ATOM
        if k == "link":
            hint = n.attrs.get("hint")
            return (f"@[{n.attrs['id']}:{hint}]" if hint else f"@[{n.attrs['id']}]"), _ATOM
        if k == "bin":
            op = n.attrs["op"]
            pr = _BIN_PREC[op]
            # left-assoc: right child needs a strictly higher context;
            # comparisons are non-associative so both sides do.
            lctx = pr if pr != 4 else pr + 1
            l = self.expr(n.children[0], lctx if pr == 4 else pr, ind)
            r = self.expr(n.children[1], pr + 1, ind)
            return f"{l} {op} {r}", pr
        if k == "un":
            op = n.attrs["op"]
            pr = _UN_PREC[op]
            inner = self.expr(n.children[0], pr, ind)
            return (f"not {inner}" if op == "not" else f"-{inner}"), pr
        if k == "deref":
            return "deref " + self.expr(n.children[0], 7, ind), 7
        if k == "decomp":
            return "decompose " + self.expr(n.children[0], 7, ind), 7
        if k == "app":
            f = self.expr(n.children[0], _POSTFIX, ind)
            args = ", ".join(self.expr(c, 0, ind) for c in n.children[1:])
            return f"{f}({args})", _POSTFIX
        if k == "idx":
            return f"{self.expr(n.children[0], _POSTFIX, ind)}::{n.attrs['index']}", _POSTFIX
        if k == "dot":
            return f"{self.expr(n.children[0], _POSTFIX, ind)}.{n.attrs['field']}", _POSTFIX
        if k == "block":
            return self.block_text(n, ind), _ATOM
        if k == "send":
            conn = self.expr(n.children[0], 7, ind)
            if len(n.children) > 1:
                args = ", ".join(self.expr(c, 3, ind) for c in n.children[1:])
                return f"via {conn} send {args}", 0
            return f"via {conn} send", 0
        if k == "recv":
            conn = self.expr(n.children[0], 7, ind)
            binders = n.attrs["binders"]
            if binders:
                bs = ", ".join(f"{b} : {_ty_text(t)}" for b, t in binders)
                return f"via {conn} receive {bs}", 0
            return f"via {conn} receive", 0
        if k == "rep":
            return "replicate " + self.block_text(n.children[0], ind), 0
        if k == "choose":
            p1 = self.pad(ind + 1)
            branches = []
            for c in n.children:
                # Branches always keep braces so a branch body can never
                # swallow the separating `or`.
                body = c if c.kind == "block" else H.block([c])
                branches.append(p1 + self.block_text(body, ind + 1))
            sep = "\n" + self.pad(ind) + "or\n"
            return "choose {\n" + sep.join(branches) + "\n" + self.pad(ind) + "}", 0
        if k == "comp":
            p1 = self.pad(ind + 1)
            parts = []
            for label, c in zip(n.attrs["labels"], n.children):
                prefix = f"{label} as " if label else ""
                parts.append(p1 + prefix + self.expr(c, 3, ind + 1))
            out = "compose {\n" + ("\n" + self.pad(ind) + "and\n").join(parts)
            unifs = n.attrs["unifs"]
            if unifs:
                us = ",\n".join(
                    f"{p1}  {ll}::{ln} unifies {rl}::{rn}" for ll, ln, rl, rn in unifs
                )
                out += "\n" + p1 + "where {\n" + us + "\n" + p1 + "}"
            return out + "\n" + self.pad(ind) + "}", 0
        if k == "connnew":
            return "connection(" + ", ".join(_ty_text(t) for t in n.attrs["payload"]) + ")", _ATOM
        if k == "locnew":
            return "location(" + self.expr(n.children[0], 0, ind) + ")", _ATOM
        if k == "viewlit":
            fs = ", ".join(
                f"{name} = {self.expr(c, 0, ind)}"
                for name, c in zip(n.attrs["names"], n.children)
            )
            return "view{ " + fs + " }", _ATOM
        if k == "seqlit":
            if not n.children:
                return "sequence{ }", _ATOM
            return "sequence{ " + ", ".join(self.expr(c, 0, ind) for c in n.children) + " }", _ATOM
        if k == "anyin":
            return "any(" + self.expr(n.children[0], 0, ind) + ")", _ATOM
        if k == "anyout":
            return ("project(" + self.expr(n.children[0], 0, ind) + ", "
                    + _ty_text(n.attrs["ty"]) + ")"), _ATOM
        if k == "abs":
            ps = ", ".join(f"{p} : {_ty_text(t)}" for p, t in n.attrs["params"])
            return f"abstraction({ps}) " + self.block_text(n.children[0], ind), 0
        if k == "fun":
            ps = ", ".join(f"{p} : {_ty_text(t)}" for p, t in n.attrs["params"])
            return (f"function({ps}) -> {_ty_text(n.attrs['result'])} "
                    + "{ " + self.expr(n.children[0], 0, ind) + " }"), 0
        if k in ("val", "assign", "free", "if", "while"):
            # Statement nodes reached through expression context (bodies).
            return self.stmt(n, 0), 0
        raise H.HyperCodeError(f"cannot render node kind {k!r}")


def _ty_text(t: Type) -> str:
    from adl.types import render_type
    return render_type(t)
