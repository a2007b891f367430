"""Predicate language used for individuation, comprehension, rule guards and
conditional mandatory fields.

Grammar (concrete syntax, keywords lowercase and case-sensitive):

    formula  := or
    or       := and ('or' and)*
    and      := unary ('and' unary)*
    unary    := 'not' unary | atom
    atom     := compare | in_set | exists | '(' formula ')'
    compare  := path op literal
    op       := '=' | '!=' | '<' | '<=' | '>' | '>='
    path     := ident ('.' ident)*
    in_set   := path 'in' ident
    exists   := 'exists' ident 'in' ident ':' formula
    literal  := 'quoted text' | integer | decimal | 'true' | 'false'
              | date YYYY-MM-DD | 'null' | 'self'

`self` as a path root denotes the binding's subject; as a literal it denotes
the subject's identifier (so reference attributes can be compared against the
subject, e.g. `t.employee = self`).  Comparing an absent attribute value is
false, never an error; `!= null` is the presence test.  Dotted paths follow
reference attributes one hop per dot, at most 4 dots.
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass
from typing import Any, Iterator, Mapping, Optional

from .errors import (
    DepthExceeded,
    ParseError,
    TypeMismatch,
    UnknownAttribute,
    UnknownDomain,
)
from .model import AttributeSpec

MAX_DEPTH = 16
MAX_HOPS = 4

KEYWORDS = frozenset({"and", "or", "not", "exists", "in", "true", "false", "null", "self"})
OPS = ("!=", "<=", ">=", "=", "<", ">")

MISSING = object()


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    ltype: str  # text | integer | decimal | boolean | date | null | self
    value: Any = None


@dataclass(frozen=True)
class Compare:
    path: tuple[str, ...]
    op: str
    literal: Literal


@dataclass(frozen=True)
class InConcept:
    path: tuple[str, ...]
    domain: str


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Not:
    item: Any


@dataclass(frozen=True)
class Exists:
    var: str
    domain: str
    body: Any


Node = Any


def referenced_domains(node: Node) -> frozenset[str]:
    out: set[str] = set()

    def walk(n: Node) -> None:
        if isinstance(n, InConcept):
            out.add(n.domain)
        elif isinstance(n, Exists):
            out.add(n.domain)
            walk(n.body)
        elif isinstance(n, (And, Or)):
            for it in n.items:
                walk(it)
        elif isinstance(n, Not):
            walk(n.item)

    walk(node)
    return frozenset(out)


@dataclass(frozen=True)
class Formula:
    ast: Node
    text: str
    referenced_domains: frozenset[str]

    def __str__(self) -> str:
        return self.text


def make_formula(ast: Node) -> Formula:
    return Formula(ast=ast, text=to_text(ast), referenced_domains=referenced_domains(ast))


# --------------------------------------------------------------------------
# Tokenizer
# --------------------------------------------------------------------------

_DATE_RE = re.compile(r"\d{4}-\d{2}-\d{2}(?!\d)")
_NUM_RE = re.compile(r"-?\d+(\.\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | kw | op | str | int | dec | date | lparen | rparen | dot | colon | eof
    value: Any
    pos: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        m = _DATE_RE.match(text, i)
        if m:
            try:
                d = _dt.date.fromisoformat(m.group(0))
            except ValueError:
                raise ParseError(i, "a valid date", m.group(0))
            toks.append(Token("date", d, i))
            i = m.end()
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            m = _NUM_RE.match(text, i)
            lit = m.group(0)
            if "." in lit:
                toks.append(Token("dec", float(lit), i))
            else:
                toks.append(Token("int", int(lit), i))
            i = m.end()
            continue
        if ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise ParseError(i, "closing quote", "end of input")
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            toks.append(Token("str", "".join(buf), i))
            i = j + 1
            continue
        for op in OPS:
            if text.startswith(op, i):
                toks.append(Token("op", op, i))
                i += len(op)
                break
        else:
            if ch == "(":
                toks.append(Token("lparen", ch, i))
                i += 1
            elif ch == ")":
                toks.append(Token("rparen", ch, i))
                i += 1
            elif ch == ".":
                toks.append(Token("dot", ch, i))
                i += 1
            elif ch == ":":
                toks.append(Token("colon", ch, i))
                i += 1
            else:
                m = _IDENT_RE.match(text, i)
                if not m:
                    raise ParseError(i, "a token", ch)
                word = m.group(0)
                kind = "kw" if word in KEYWORDS else "ident"
                toks.append(Token(kind, word, i))
                i = m.end()
    toks.append(Token("eof", None, n))
    return toks


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.depth = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, value: Any = None) -> Token:
        t = self.peek()
        if t.kind != kind or (value is not None and t.value != value):
            want = value if value is not None else kind
            raise ParseError(t.pos, str(want), self._show(t))
        return self.next()

    def _show(self, t: Token) -> str:
        return "end of input" if t.kind == "eof" else str(t.value)

    def _enter(self) -> None:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise DepthExceeded(self.peek().pos, MAX_DEPTH)

    def _leave(self) -> None:
        self.depth -= 1

    def parse(self) -> Node:
        node = self.formula()
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(t.pos, "end of input", self._show(t))
        return node

    def formula(self) -> Node:
        self._enter()
        try:
            items = [self.conjunction()]
            while self.peek().kind == "kw" and self.peek().value == "or":
                self.next()
                items.append(self.conjunction())
            return items[0] if len(items) == 1 else Or(tuple(items))
        finally:
            self._leave()

    def conjunction(self) -> Node:
        items = [self.unary()]
        while self.peek().kind == "kw" and self.peek().value == "and":
            self.next()
            items.append(self.unary())
        return items[0] if len(items) == 1 else And(tuple(items))

    def unary(self) -> Node:
        t = self.peek()
        if t.kind == "kw" and t.value == "not":
            self.next()
            self._enter()
            try:
                return Not(self.unary())
            finally:
                self._leave()
        return self.atom()

    def atom(self) -> Node:
        t = self.peek()
        if t.kind == "lparen":
            self.next()
            self._enter()
            try:
                inner = self.formula()
            finally:
                self._leave()
            self.expect("rparen")
            return inner
        if t.kind == "kw" and t.value == "exists":
            return self.exists()
        if t.kind == "ident" or (t.kind == "kw" and t.value == "self"):
            path = self.path()
            nxt = self.peek()
            if nxt.kind == "kw" and nxt.value == "in":
                self.next()
                dom = self.expect("ident")
                return InConcept(path, dom.value)
            if nxt.kind == "op":
                op = self.next().value
                lit = self.literal()
                return Compare(path, op, lit)
            raise ParseError(nxt.pos, "comparison operator or 'in'", self._show(nxt))
        raise ParseError(t.pos, "a condition", self._show(t))

    def exists(self) -> Node:
        self.expect("kw", "exists")
        var = self.expect("ident")
        self.expect("kw", "in")
        dom = self.expect("ident")
        self.expect("colon")
        self._enter()
        try:
            body = self.formula()
        finally:
            self._leave()
        return Exists(var.value, dom.value, body)

    def path(self) -> tuple[str, ...]:
        t = self.peek()
        if t.kind == "kw" and t.value == "self":
            self.next()
            segs = ["self"]
        else:
            segs = [self.expect("ident").value]
        hops = 0
        while self.peek().kind == "dot":
            dot = self.next()
            hops += 1
            if hops > MAX_HOPS:
                raise ParseError(dot.pos, f"at most {MAX_HOPS} path hops", "deeper path")
            segs.append(self.expect("ident").value)
        return tuple(segs)

    def literal(self) -> Literal:
        t = self.peek()
        if t.kind == "str":
            self.next()
            return Literal("text", t.value)
        if t.kind == "int":
            self.next()
            return Literal("integer", t.value)
        if t.kind == "dec":
            self.next()
            return Literal("decimal", t.value)
        if t.kind == "date":
            self.next()
            return Literal("date", t.value)
        if t.kind == "kw":
            if t.value == "true":
                self.next()
                return Literal("boolean", True)
            if t.value == "false":
                self.next()
                return Literal("boolean", False)
            if t.value == "null":
                self.next()
                return Literal("null")
            if t.value == "self":
                self.next()
                return Literal("self")
        raise ParseError(t.pos, "literal", self._show(t))


def parse(text: str) -> Formula:
    if not isinstance(text, str):
        raise ParseError(0, "a character string", type(text).__name__)
    ast = _Parser(text).parse()
    return Formula(ast=ast, text=to_text(ast), referenced_domains=referenced_domains(ast))


# --------------------------------------------------------------------------
# Printer (canonical form; parse(to_text(ast)) reproduces ast exactly)
# --------------------------------------------------------------------------


def _fmt_decimal(v: float) -> str:
    # exact positional notation; the grammar has no exponent form
    from decimal import Decimal

    s = format(Decimal(repr(v)), "f")
    if "." not in s:
        s += ".0"
    return s


def _lit_text(lit: Literal) -> str:
    if lit.ltype == "text":
        return "'" + str(lit.value).replace("'", "''") + "'"
    if lit.ltype == "integer":
        return str(lit.value)
    if lit.ltype == "decimal":
        return _fmt_decimal(lit.value)
    if lit.ltype == "boolean":
        return "true" if lit.value else "false"
    if lit.ltype == "date":
        return lit.value.isoformat()
    if lit.ltype == "null":
        return "null"
    if lit.ltype == "self":
        return "self"
    raise ValueError(f"bad literal {lit!r}")


def to_text(node: Node) -> str:
    # Exists bodies extend to the end of the enclosing formula, so an Exists
    # that is an operand of anything must be parenthesized to round-trip.
    if isinstance(node, Or):
        parts = []
        for it in node.items:
            s = to_text(it)
            if isinstance(it, (Or, Exists)):
                s = f"({s})"
            parts.append(s)
        return " or ".join(parts)
    if isinstance(node, And):
        parts = []
        for it in node.items:
            s = to_text(it)
            if isinstance(it, (Or, And, Exists)):
                s = f"({s})"
            parts.append(s)
        return " and ".join(parts)
    if isinstance(node, Not):
        s = to_text(node.item)
        if isinstance(node.item, (Or, And, Exists)):
            s = f"({s})"
        return f"not {s}"
    if isinstance(node, Exists):
        return f"exists {node.var} in {node.domain}: {to_text(node.body)}"
    if isinstance(node, Compare):
        return f"{'.'.join(node.path)} {node.op} {_lit_text(node.literal)}"
    if isinstance(node, InConcept):
        return f"{'.'.join(node.path)} in {node.domain}"
    raise ValueError(f"bad node {node!r}")


# --------------------------------------------------------------------------
# Static checking against schemas
# --------------------------------------------------------------------------

_ORDERING_OPS = frozenset({"<", "<=", ">", ">="})
_EQ_OPS = frozenset({"=", "!="})


def _literal_matches(attr_type: str, lit: Literal) -> bool:
    if lit.ltype == "null":
        return True
    if lit.ltype == "self":
        return attr_type == "reference"
    if attr_type in ("integer", "decimal"):
        return lit.ltype in ("integer", "decimal")
    if attr_type == "reference":
        return lit.ltype == "integer"
    return attr_type == lit.ltype


def check_formula(formula: Formula, subject_domain: str, store: Any, state: int) -> None:
    """Validate paths, domains and literal types against schemas at `state`.

    `store` must expose schema_at(domain, state) -> attribute specs and raise
    UnknownDomain for unknown names.  Raises UnknownAttribute or TypeMismatch
    on violations.
    """

    root_schema = store.schema_at(subject_domain, state)

    def specs_by_name(schema: tuple[AttributeSpec, ...]) -> dict[str, AttributeSpec]:
        return {a.name: a for a in schema}

    def path_spec(path: tuple[str, ...], env: dict[str, str]) -> Optional[AttributeSpec]:
        """Final attribute spec of a path, or None when the path denotes the
        subject/variable itself (bare `self` or bare variable)."""
        segs = list(path)
        if segs[0] == "self":
            schema = root_schema
            segs = segs[1:]
        elif segs[0] in env:
            schema = store.schema_at(env[segs[0]], state)
            segs = segs[1:]
        else:
            schema = root_schema
        if not segs:
            return None
        spec = None
        for k, seg in enumerate(segs):
            lookup = specs_by_name(schema)
            if seg not in lookup:
                raise UnknownAttribute(f"attribute {seg!r} not in schema")
            spec = lookup[seg]
            if k < len(segs) - 1:
                if spec.value_type != "reference":
                    raise TypeMismatch(f"cannot navigate through non-reference {seg!r}")
                schema = store.schema_at(spec.ref_target, state)
        return spec

    def walk(n: Node, env: dict[str, str]) -> None:
        if isinstance(n, Compare):
            spec = path_spec(n.path, env)
            attr_type = spec.value_type if spec else "reference"
            lit = n.literal
            if not _literal_matches(attr_type, lit):
                raise TypeMismatch(
                    f"{'.'.join(n.path)}: {attr_type} attribute vs {lit.ltype} literal"
                )
            if n.op in _ORDERING_OPS and (
                attr_type in ("boolean", "reference") or lit.ltype in ("null", "self")
            ):
                raise TypeMismatch(f"ordering comparison not defined for {attr_type}")
        elif isinstance(n, InConcept):
            store.schema_at(n.domain, state)  # raises UnknownDomain
            spec = path_spec(n.path, env)
            if spec is not None and spec.value_type != "reference":
                raise TypeMismatch(f"{'.'.join(n.path)}: membership needs a reference")
        elif isinstance(n, Exists):
            store.schema_at(n.domain, state)
            walk(n.body, {**env, n.var: n.domain})
        elif isinstance(n, (And, Or)):
            for it in n.items:
                walk(it, env)
        elif isinstance(n, Not):
            walk(n.item, env)

    walk(formula.ast, {})


def level_of(formula: Formula, store: Any, state: int) -> int:
    """Max level among domains the formula references; 0 when it references
    none (pure attribute formulas constrain nothing)."""
    lvl = 0
    for d in formula.referenced_domains:
        lvl = max(lvl, store.domain_level(d, state))
    return lvl


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SubjectView:
    """What a formula sees of one object: identity, schema owner, values."""

    id: Optional[int]
    concept: str
    values: Mapping[str, Any]


@dataclass(frozen=True)
class Binding:
    subject: SubjectView
    vars: Mapping[str, SubjectView] = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.vars is None:
            object.__setattr__(self, "vars", {})


class _Ctx:
    __slots__ = ("store", "state", "subject")

    def __init__(self, store: Any, state: int, subject: SubjectView):
        self.store = store
        self.state = state
        self.subject = subject


def _resolve_path(path: tuple[str, ...], ctx: _Ctx, view: SubjectView, env: Mapping) -> Any:
    """Value a path denotes, MISSING when any hop is absent.  A bare subject
    or variable path resolves to that object's id."""
    segs = path
    if segs[0] == "self":
        cur: Any = ctx.subject
        segs = segs[1:]
    elif segs[0] in env:
        cur = env[segs[0]]
        segs = segs[1:]
    else:
        cur = view
    if not segs:
        return cur.id if cur.id is not None else MISSING
    val: Any = MISSING
    for k, seg in enumerate(segs):
        val = cur.values.get(seg, MISSING)
        if val is None:
            val = MISSING
        if val is MISSING:
            return MISSING
        if k < len(segs) - 1:
            nxt = ctx.store.view_of(val, ctx.state)
            if nxt is None:
                return MISSING
            cur = nxt
    return val


_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _compile(node: Node):
    """Compile to a closure(ctx, view, env) -> bool."""
    if isinstance(node, Or):
        fns = [_compile(it) for it in node.items]

        def f_or(ctx, view, env):
            return any(fn(ctx, view, env) for fn in fns)

        return f_or
    if isinstance(node, And):
        fns = [_compile(it) for it in node.items]

        def f_and(ctx, view, env):
            return all(fn(ctx, view, env) for fn in fns)

        return f_and
    if isinstance(node, Not):
        fn = _compile(node.item)
        return lambda ctx, view, env: not fn(ctx, view, env)
    if isinstance(node, Exists):
        body = _compile(node.body)
        dom = node.domain
        var = node.var

        def f_exists(ctx, view, env):
            for member in ctx.store.members_at(dom, ctx.state):
                mv = ctx.store.view_of(member, ctx.state)
                if mv is None:
                    continue
                if body(ctx, view, {**env, var: mv}):
                    return True
            return False

        return f_exists
    if isinstance(node, InConcept):
        path = node.path
        dom = node.domain

        def f_in(ctx, view, env):
            v = _resolve_path(path, ctx, view, env)
            if v is MISSING:
                return False
            return v in ctx.store.members_at(dom, ctx.state)

        return f_in
    if isinstance(node, Compare):
        path = node.path
        lit = node.literal
        op = node.op
        if lit.ltype == "null":
            if op == "=":
                # A present value never equals null and an absent one fails
                # the atom, so `= null` is constant false.
                return lambda ctx, view, env: False

            def f_nonnull(ctx, view, env):
                return _resolve_path(path, ctx, view, env) is not MISSING

            return f_nonnull
        if lit.ltype == "self":
            cmp_self = _CMP[op]

            def f_self(ctx, view, env):
                v = _resolve_path(path, ctx, view, env)
                if v is MISSING or ctx.subject.id is None:
                    return False
                return cmp_self(v, ctx.subject.id)

            return f_self
        litval = lit.value
        cmp_fn = _CMP[op]

        def f_cmp(ctx, view, env):
            v = _resolve_path(path, ctx, view, env)
            if v is MISSING:
                return False
            try:
                return cmp_fn(v, litval)
            except TypeError:
                return False

        return f_cmp
    raise ValueError(f"bad node {node!r}")


class CompiledFormula:
    """Reusable compiled form; evaluation is pure and thread-safe."""

    def __init__(self, formula: Formula):
        self.formula = formula
        self._fn = _compile(formula.ast)

    def run(self, store: Any, state: int, subject: SubjectView, env: Mapping | None = None) -> bool:
        ctx = _Ctx(store, state, subject)
        return bool(self._fn(ctx, subject, env or {}))


def evaluate(formula: Formula, binding: Binding, state: int, store: Any) -> bool:
    """Two-valued truth of `formula` for `binding` at `state`.

    Checks referenced domains and attributes against the schemas first, so
    unknown names raise instead of silently evaluating false.
    """
    check_formula(formula, binding.subject.concept, store, state)
    compiled = CompiledFormula(formula)
    ctx = _Ctx(store, state, binding.subject)
    return bool(compiled._fn(ctx, binding.subject, dict(binding.vars)))


def iter_satisfying(
    formula: Formula, store: Any, domain: str, state: int
) -> Iterator[int]:
    """Members of `domain` at `state` satisfying `formula` (subject = member)."""
    compiled = CompiledFormula(formula)
    for member in store.members_at(domain, state):
        mv = store.view_of(member, state)
        if mv is None:
            continue
        ctx = _Ctx(store, state, mv)
        if compiled._fn(ctx, mv, {}):
            yield member
