"""Continuous-logic sentences over the pure metric language.

Formulas are trees over a fixed basis of connectives, all of which map
[0, 1]-valued arguments back into [0, 1]:

    Const(c)            constant c in [0, 1]
    Dist(u, v)          the distance between the points bound to u and v
    Min(...), Max(...)  pointwise lattice operations
    TruncAdd(a, b)      min(a + b, 1)
    TruncSub(a, b)      max(a - b, 0)
    Prod(...)           ordinary product
    AbsDiff(a, b)       |a - b|
    Sup(x, body)        supremum of body over all points bound to x
    Inf(y, body)        infimum of body over all points bound to y

Sentences (no free variables) evaluate on a finite metric space by exhaustive
iteration of the quantifiers over its points.  The module also provides the
concrete text grammar, the universal-existential "kind" sentence constructor
with its distinctness guard, and the one-point-extension axiom family used by
the experiments.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from .rng import substream
from .spaces import FiniteMetricSpace, extract_substructure, is_katetov, validate_space


class Formula:
    """Base class for formula nodes; all nodes are immutable."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Const(Formula):
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"constant {v} outside [0, 1]")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Dist(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Min(Formula):
    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))


@dataclass(frozen=True)
class Max(Formula):
    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))


@dataclass(frozen=True)
class Prod(Formula):
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))


@dataclass(frozen=True)
class TruncAdd(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class TruncSub(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class AbsDiff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Sup(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Inf(Formula):
    var: str
    body: Formula


class UnboundVariableError(ValueError):
    def __init__(self, name: str, line: int | None = None, col: int | None = None):
        self.name = name
        self.line = line
        self.col = col
        pos = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(f"unbound variable {name!r}{pos}")


class SentenceSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"{message} at line {line}, column {col}")


class ConstantRangeError(SentenceSyntaxError):
    pass


class EmptySpaceError(ValueError):
    pass


def free_variables(formula: Formula) -> frozenset:
    """Variables occurring in the formula that no quantifier binds."""
    t = type(formula)
    if t is Const:
        return frozenset()
    if t is Dist:
        return frozenset((formula.left, formula.right))
    if t in (Min, Max):
        out = frozenset()
        for item in formula.items:
            out |= free_variables(item)
        return out
    if t is Prod:
        out = frozenset()
        for item in formula.factors:
            out |= free_variables(item)
        return out
    if t in (TruncAdd, TruncSub, AbsDiff):
        return free_variables(formula.left) | free_variables(formula.right)
    if t in (Sup, Inf):
        return free_variables(formula.body) - {formula.var}
    raise TypeError(f"not a formula node: {formula!r}")


def is_quantifier_free(formula: Formula) -> bool:
    t = type(formula)
    if t in (Sup, Inf):
        return False
    if t in (Const, Dist):
        return True
    if t in (Min, Max):
        return all(is_quantifier_free(i) for i in formula.items)
    if t is Prod:
        return all(is_quantifier_free(i) for i in formula.factors)
    return is_quantifier_free(formula.left) and is_quantifier_free(formula.right)


def quantifier_count(formula: Formula) -> int:
    """Total number of quantifier nodes (the exhaustive-evaluation exponent
    for prenex formulas)."""
    t = type(formula)
    if t in (Sup, Inf):
        return 1 + quantifier_count(formula.body)
    if t in (Const, Dist):
        return 0
    if t in (Min, Max):
        return sum(quantifier_count(i) for i in formula.items)
    if t is Prod:
        return sum(quantifier_count(i) for i in formula.factors)
    return quantifier_count(formula.left) + quantifier_count(formula.right)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(formula: Formula, space: FiniteMetricSpace, env: Mapping[str, int] | None = None) -> float:
    """Value of the formula on the space, in [0, 1].

    ``env`` binds any free variables to point indices.  Quantifiers iterate
    exhaustively over all points (the same point may witness several nested
    quantifiers); Sup stops early at 1 and Inf at 0.
    """
    n = space.size
    if n == 0:
        raise EmptySpaceError("cannot evaluate on an empty space")
    scope = dict(env) if env else {}
    missing = free_variables(formula) - scope.keys()
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    for name, p in scope.items():
        if not (0 <= p < n):
            raise IndexError(f"env binds {name!r} to point {p}, out of range for {n} points")
    rows = space.dist.tolist()
    return _eval(formula, rows, n, scope)


def _eval(f, rows, n, env):
    t = f.__class__
    if t is Dist:
        return rows[env[f.left]][env[f.right]]
    if t is Const:
        return f.value
    if t is Min:
        best = 1.0
        for item in f.items:
            v = _eval(item, rows, n, env)
            if v < best:
                best = v
                if best <= 0.0:
                    break
        return best
    if t is Max:
        best = 0.0
        for item in f.items:
            v = _eval(item, rows, n, env)
            if v > best:
                best = v
                if best >= 1.0:
                    break
        return best
    if t is Prod:
        out = 1.0
        for item in f.factors:
            out *= _eval(item, rows, n, env)
            if out <= 0.0:
                return 0.0
        return out
    if t is TruncAdd:
        v = _eval(f.left, rows, n, env) + _eval(f.right, rows, n, env)
        return 1.0 if v > 1.0 else v
    if t is TruncSub:
        v = _eval(f.left, rows, n, env) - _eval(f.right, rows, n, env)
        return 0.0 if v < 0.0 else v
    if t is AbsDiff:
        return abs(_eval(f.left, rows, n, env) - _eval(f.right, rows, n, env))
    if t is Sup:
        var, body = f.var, f.body
        saved = env.get(var)
        best = 0.0
        for p in range(n):
            env[var] = p
            v = _eval(body, rows, n, env)
            if v > best:
                best = v
                if best >= 1.0:
                    break
        if saved is None:
            del env[var]
        else:
            env[var] = saved
        return best
    if t is Inf:
        var, body = f.var, f.body
        saved = env.get(var)
        best = 1.0
        for p in range(n):
            env[var] = p
            v = _eval(body, rows, n, env)
            if v < best:
                best = v
                if best <= 0.0:
                    break
        if saved is None:
            del env[var]
        else:
            env[var] = saved
        return best
    raise TypeError(f"not a formula node: {f!r}")


@dataclass(frozen=True)
class SampledValue:
    """Result of sampled evaluation: the exact value on a random subset of
    the points.  For Sup-rooted sentences this is a lower bound for the value
    on the full space.  Never a silent substitute for exact evaluation."""

    value: float
    sample_size: int
    seed: int


def evaluate_on_sample(
    formula: Formula, space: FiniteMetricSpace, sample_size: int, seed: int
) -> SampledValue:
    """Evaluate a sentence with quantifiers restricted to a seeded uniform
    random subset of ``sample_size`` points (without replacement)."""
    if free_variables(formula):
        raise UnboundVariableError(sorted(free_variables(formula))[0])
    if sample_size < 1:
        raise ValueError("sample_size must be positive")
    s = min(sample_size, space.size)
    idx = substream(seed).choice(space.size, size=s, replace=False)
    sub = extract_substructure(space, idx)
    return SampledValue(evaluate(formula, sub), s, int(seed))


# ---------------------------------------------------------------------------
# Concrete syntax
#
#   sentence := quant
#   quant    := ("sup" IDENT | "inf" IDENT) quant | expr
#   expr     := term { ("+" | "-.") term }        left-assoc truncated ops
#   term     := factor { "*" factor }
#   factor   := NUMBER | "d" "(" IDENT "," IDENT ")"
#             | "min" "(" expr {"," expr} ")" | "max" "(" expr {"," expr} ")"
#             | "abs" "(" expr "-" expr ")" | "(" expr ")"
#
# NUMBER is a plain decimal literal in [0, 1]; IDENT is [A-Za-z_][A-Za-z0-9_]*
# minus the reserved words (sup inf min max abs d).  Whitespace is free.
# Shadowing a quantified variable in a nested quantifier is an error.
# ---------------------------------------------------------------------------

RESERVED = frozenset({"sup", "inf", "min", "max", "abs", "d"})

_TOKEN_RE = re.compile(
    r"(?P<WS>\s+)"
    r"|(?P<NUMBER>\d+\.\d*|\.\d+|\d+)"
    r"|(?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<TRUNCSUB>-\.)"
    r"|(?P<SYM>[()+,*-])"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # NUMBER, IDENT, or the symbol itself
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SentenceSyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        tok = m.group()
        col = pos - line_start + 1
        if kind == "WS":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = pos + tok.rindex("\n") + 1
        elif kind == "NUMBER":
            tokens.append(_Token("NUMBER", tok, line, col))
        elif kind == "IDENT":
            tokens.append(_Token("IDENT", tok, line, col))
        elif kind == "TRUNCSUB":
            tokens.append(_Token("-.", tok, line, col))
        else:
            tokens.append(_Token(tok, tok, line, col))
        pos = m.end()
    tokens.append(_Token("EOF", "", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, allow_free: bool):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.scope: list[str] = []
        self.allow_free = allow_free

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise SentenceSyntaxError(
                f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col
            )
        return self.advance()

    def parse(self) -> Formula:
        f = self.quant()
        tok = self.peek()
        if tok.kind != "EOF":
            raise SentenceSyntaxError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
        return f

    def quant(self) -> Formula:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text in ("sup", "inf"):
            self.advance()
            name_tok = self.expect("IDENT")
            name = name_tok.text
            if name in RESERVED:
                raise SentenceSyntaxError(
                    f"reserved word {name!r} cannot be a variable", name_tok.line, name_tok.col
                )
            if name in self.scope:
                raise SentenceSyntaxError(
                    f"variable {name!r} shadows an enclosing quantifier", name_tok.line, name_tok.col
                )
            self.scope.append(name)
            body = self.quant()
            self.scope.pop()
            return Sup(name, body) if tok.text == "sup" else Inf(name, body)
        return self.expr()

    def expr(self) -> Formula:
        left = self.term()
        while self.peek().kind in ("+", "-."):
            op = self.advance()
            right = self.term()
            left = TruncAdd(left, right) if op.kind == "+" else TruncSub(left, right)
        return left

    def term(self) -> Formula:
        factors = [self.factor()]
        while self.peek().kind == "*":
            self.advance()
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Prod(tuple(factors))

    def factor(self) -> Formula:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            value = float(tok.text)
            if value > 1.0:
                raise ConstantRangeError(f"constant {tok.text} outside [0, 1]", tok.line, tok.col)
            return Const(value)
        if tok.kind == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind == "IDENT":
            if tok.text == "d":
                self.advance()
                self.expect("(")
                u = self.variable_use()
                self.expect(",")
                v = self.variable_use()
                self.expect(")")
                return Dist(u, v)
            if tok.text in ("min", "max"):
                self.advance()
                self.expect("(")
                items = [self.expr()]
                while self.peek().kind == ",":
                    self.advance()
                    items.append(self.expr())
                self.expect(")")
                return Min(tuple(items)) if tok.text == "min" else Max(tuple(items))
            if tok.text == "abs":
                self.advance()
                self.expect("(")
                left = self.expr()
                self.expect("-")
                right = self.expr()
                self.expect(")")
                return AbsDiff(left, right)
            if tok.text in ("sup", "inf"):
                raise SentenceSyntaxError(
                    "quantifiers are only allowed as a prefix", tok.line, tok.col
                )
        raise SentenceSyntaxError(
            f"expected a factor, found {tok.text or 'end of input'!r}", tok.line, tok.col
        )

    def variable_use(self) -> str:
        tok = self.expect("IDENT")
        name = tok.text
        if name in RESERVED:
            raise SentenceSyntaxError(
                f"reserved word {name!r} cannot be a variable", tok.line, tok.col
            )
        if name not in self.scope and not self.allow_free:
            raise UnboundVariableError(name, tok.line, tok.col)
        return name


def parse_formula(text: str) -> Formula:
    """Parse a formula; free variables are allowed (bind them via ``env``
    when evaluating)."""
    return _Parser(text, allow_free=True).parse()


def parse_sentence(text: str) -> Formula:
    """Parse a closed sentence; an out-of-scope variable is an error at its
    first use position."""
    return _Parser(text, allow_free=False).parse()


# Printing.  Levels: 0 = expr (+, -.), 1 = term (*), 2 = factor.
_LEVEL_EXPR, _LEVEL_TERM, _LEVEL_FACTOR = 0, 1, 2


def _format_const(v: float) -> str:
    return np.format_float_positional(v, unique=True, trim="0")


def _render(f: Formula, required: int) -> str:
    t = type(f)
    if t is Const:
        return _format_const(f.value)
    if t is Dist:
        return f"d({f.left},{f.right})"
    if t is Min:
        return "min(" + ", ".join(_render(i, _LEVEL_EXPR) for i in f.items) + ")"
    if t is Max:
        return "max(" + ", ".join(_render(i, _LEVEL_EXPR) for i in f.items) + ")"
    if t is AbsDiff:
        return f"abs({_render(f.left, _LEVEL_EXPR)} - {_render(f.right, _LEVEL_EXPR)})"
    if t is Prod:
        body = " * ".join(_render(i, _LEVEL_FACTOR) for i in f.factors)
        return body if required <= _LEVEL_TERM else f"({body})"
    if t in (TruncAdd, TruncSub):
        op = "+" if t is TruncAdd else "-."
        body = f"{_render(f.left, _LEVEL_EXPR)} {op} {_render(f.right, _LEVEL_TERM)}"
        return body if required <= _LEVEL_EXPR else f"({body})"
    if t in (Sup, Inf):
        raise ValueError("quantifiers can only be printed in prefix position")
    raise TypeError(f"not a formula node: {f!r}")


def to_text(formula: Formula) -> str:
    """Render a formula in the concrete grammar; parsing the result yields a
    structurally identical tree.  Only prenex quantification is printable."""
    parts = []
    body = formula
    while type(body) in (Sup, Inf):
        parts.append(("sup" if type(body) is Sup else "inf") + f" {body.var}")
        body = body.body
    if not is_quantifier_free(body):
        raise ValueError("formula has quantifiers in non-prefix position")
    parts.append(_render(body, _LEVEL_EXPR))
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Kind sentences and the one-point-extension axiom family
# ---------------------------------------------------------------------------


def fmin(items: Iterable[Formula]) -> Formula:
    """Min over a sequence; empty -> Const(1), singleton collapses."""
    items = tuple(items)
    if not items:
        return Const(1.0)
    return items[0] if len(items) == 1 else Min(items)


def fmax(items: Iterable[Formula]) -> Formula:
    """Max over a sequence; empty -> Const(0), singleton collapses."""
    items = tuple(items)
    if not items:
        return Const(0.0)
    return items[0] if len(items) == 1 else Max(items)


def fprod(factors: Iterable[Formula]) -> Formula:
    """Product over a sequence; empty -> Const(1), singleton collapses."""
    factors = tuple(factors)
    if not factors:
        return Const(1.0)
    return factors[0] if len(factors) == 1 else Prod(factors)


def scaled(formula: Formula, factor: float) -> Formula:
    """ceil(factor)-fold truncated sum of the formula, a monotone stand-in
    for multiplication by factor >= 1 on [0, 1]."""
    if factor < 1.0:
        raise ValueError("scaling factor must be at least 1")
    m = math.ceil(factor)
    out = formula
    for _ in range(m - 1):
        out = TruncAdd(out, formula)
    return out


def x_var(i: int) -> str:
    return f"x{i + 1}"


def y_var(j: int) -> str:
    return f"y{j + 1}"


def _distinctness_guard(n: int) -> Formula:
    # Product over ordered pairs i != j, so it vanishes on repeated points;
    # empty product (n = 1) is the constant 1.
    return fprod(
        Dist(x_var(i), x_var(j)) for i in range(n) for j in range(n) if i != j
    )


@dataclass(frozen=True)
class KindSentenceSpec:
    """A universal-existential sentence with the distinctness guard:
    sup over n x-variables, inf over k y-variables of
    min(prod_{i != j} d(x_i, x_j), matrix)."""

    n: int
    k: int
    matrix: Formula

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("need at least one universal and one existential variable")
        if not is_quantifier_free(self.matrix):
            raise ValueError("matrix must be quantifier-free")
        allowed = {x_var(i) for i in range(self.n)} | {y_var(j) for j in range(self.k)}
        extra = free_variables(self.matrix) - allowed
        if extra:
            raise ValueError(f"matrix uses variables outside x1..x{self.n}, y1..y{self.k}: {sorted(extra)}")


def make_kind_sentence(spec: KindSentenceSpec) -> Formula:
    """Build the guarded sup-inf sentence for the spec."""
    body: Formula = Min((_distinctness_guard(spec.n), spec.matrix))
    for j in reversed(range(spec.k)):
        body = Inf(y_var(j), body)
    for i in reversed(range(spec.n)):
        body = Sup(x_var(i), body)
    return body


class InvalidTargetError(ValueError):
    """Raised when an extension-axiom target is not a metric configuration or
    the prescribed distances are not Katetov-admissible for it."""


@dataclass(frozen=True)
class ExtensionAxiomSpec:
    """Parameters of one extension axiom.

    ``base`` is the n-point target configuration, ``distances`` the
    prescribed distances of the sought witness point to an approximate copy
    of the configuration, and ``slack`` (>= 1) the factor by which copy error
    relaxes the witness requirement.
    """

    base: FiniteMetricSpace
    distances: tuple
    slack: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "distances", tuple(float(v) for v in self.distances))
        if self.slack < 1.0:
            raise ValueError("slack must be at least 1")


def make_extension_axiom(spec: ExtensionAxiomSpec) -> Formula:
    """Sentence asserting every approximate copy of the target configuration
    has a point at approximately the prescribed distances.

    The matrix is max_i |d(x_i, y) - r_i| truncated-minus slack * max_{i<j}
    |d(x_i, x_j) - D_ij|, wrapped as a kind sentence with one existential
    variable.  Its value on a space is small iff witnesses exist wherever
    copies do.
    """
    base = spec.base
    if base.pseudometric:
        raise InvalidTargetError("target configuration must be a metric space")
    try:
        validate_space(base.dist, pseudometric=False)
    except ValueError as exc:
        raise InvalidTargetError(f"target configuration is not a valid metric space: {exc}") from exc
    if len(spec.distances) != base.size:
        raise InvalidTargetError(
            f"{len(spec.distances)} prescribed distances for {base.size} target points"
        )
    if not is_katetov(base, np.asarray(spec.distances)):
        raise InvalidTargetError("prescribed distances violate the Katetov condition")

    n = base.size
    y = y_var(0)
    match = fmax(
        AbsDiff(Dist(x_var(i), y), Const(spec.distances[i])) for i in range(n)
    )
    deviations = [
        AbsDiff(Dist(x_var(i), x_var(j)), Const(float(base.dist[i, j])))
        for i in range(n)
        for j in range(i + 1, n)
    ]
    slack_term = Const(0.0) if not deviations else scaled(fmax(deviations), spec.slack)
    matrix = TruncSub(match, slack_term)
    return make_kind_sentence(KindSentenceSpec(n, 1, matrix))


# ---------------------------------------------------------------------------
# Structural classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    is_sentence: bool
    is_quantifier_free: bool
    is_forall_exists: bool
    is_kind: bool
    n: Union[int, None] = None
    k: Union[int, None] = None


def _peel_prefix(formula: Formula) -> tuple[list[str], list[str], Formula]:
    xs: list[str] = []
    node = formula
    while type(node) is Sup:
        xs.append(node.var)
        node = node.body
    ys: list[str] = []
    while type(node) is Inf:
        ys.append(node.var)
        node = node.body
    return xs, ys, node


def classify(formula: Formula) -> Classification:
    """Purely structural report: sentence-hood, quantifier-freeness,
    sup*-inf* prefix form, and exact kind shape (guard product included)."""
    sentence = not free_variables(formula)
    qf = is_quantifier_free(formula)
    xs, ys, matrix = _peel_prefix(formula)
    forall_exists = sentence and is_quantifier_free(matrix)
    kind = (
        forall_exists
        and len(xs) >= 1
        and len(ys) >= 1
        and type(matrix) is Min
        and len(matrix.items) == 2
        and _is_canonical_guard(matrix.items[0], xs)
    )
    return Classification(
        is_sentence=sentence,
        is_quantifier_free=qf,
        is_forall_exists=forall_exists,
        is_kind=kind,
        n=len(xs) if kind else None,
        k=len(ys) if kind else None,
    )


def _is_canonical_guard(guard: Formula, xs: list[str]) -> bool:
    n = len(xs)
    if n == 1:
        return guard == Const(1.0)
    expected = tuple(Dist(xs[i], xs[j]) for i in range(n) for j in range(n) if i != j)
    return type(guard) is Prod and guard.factors == expected


def kind_parts(formula: Formula) -> tuple[list[str], list[str], Formula]:
    """Decompose a kind sentence into (x variables, y variables, matrix);
    raises ValueError if the formula is not kind."""
    if not classify(formula).is_kind:
        raise ValueError("formula is not a kind universal-existential sentence")
    xs, ys, matrix = _peel_prefix(formula)
    return xs, ys, matrix.items[1]
