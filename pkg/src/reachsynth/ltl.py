"""Co-safe LTL over finite traces: AST, parser, normalisation, progression.

Formulas are immutable trees built from ``true``, ``false``, atoms, negation
(on atoms only, after normalisation), conjunction, disjunction, strong next
``X`` and until ``U``.  ``F p`` is stored as ``true U p``.  The ``always``
operator is rejected: it falls outside the co-safe fragment, whose formulas
are decided by finite trace prefixes.

Concrete syntax (ASCII): ``! X F U & | ->`` with precedence
``! > X,F > U > & > | > ->`` and right-associative ``U``.

Everything here is a pure function over immutable formulas; concurrent use
needs no coordination.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

Symbol = frozenset  # set of atom names observed at one time instant


class LtlError(ValueError):
    """Base class for formula construction errors."""


class LtlSyntaxError(LtlError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownAtomError(LtlError):
    pass


class NotCosafeError(LtlError):
    pass


@dataclass(frozen=True)
class Formula:
    def __str__(self) -> str:
        return formula_to_str(self)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Step(Formula):
    """Residual of a discharged next-obligation: 'one more symbol follows'.

    Produced by progression only (e.g. of ``X true``); never parsed directly.
    Semantically equal to ``F true``, which is how it prints.
    """


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    children: tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    children: tuple[Formula, ...]


@dataclass(frozen=True)
class Next(Formula):
    child: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


TRUE = TrueF()
FALSE = FalseF()
STEP = Step()

_KIND_RANK = {TrueF: 0, FalseF: 1, Step: 2, Atom: 3, Not: 4, Next: 5, Until: 6, And: 7, Or: 8}


def _sort_key(f: Formula) -> tuple[int, str]:
    return (_KIND_RANK[type(f)], formula_to_str(f))


def atoms_of(f: Formula) -> frozenset[str]:
    """All atomic proposition names occurring in ``f``."""
    match f:
        case Atom(name):
            return frozenset({name})
        case Not(child) | Next(child):
            return atoms_of(child)
        case And(children) | Or(children):
            out: frozenset[str] = frozenset()
            for c in children:
                out |= atoms_of(c)
            return out
        case Until(left, right):
            return atoms_of(left) | atoms_of(right)
        case _:
            return frozenset()


def is_cosafe(f: Formula) -> bool:
    """True iff negation occurs only directly above atoms (no ``always``
    exists in this AST, so the syntactic check reduces to negation depth)."""
    match f:
        case Not(child):
            return isinstance(child, Atom)
        case And(children) | Or(children):
            return all(is_cosafe(c) for c in children)
        case Next(child):
            return is_cosafe(child)
        case Until(left, right):
            return is_cosafe(left) and is_cosafe(right)
        case _:
            return True


def _nnf(f: Formula, negated: bool) -> Formula:
    """Push negations down to atoms; reject negated temporal operators,
    whose duals (weak next, release, always) leave the co-safe fragment."""
    match f:
        case TrueF():
            return FALSE if negated else TRUE
        case FalseF():
            return TRUE if negated else FALSE
        case Step():
            if negated:
                raise NotCosafeError("negation over a step residual is not co-safe")
            return f
        case Atom():
            return Not(f) if negated else f
        case Not(child):
            return _nnf(child, not negated)
        case And(children):
            parts = tuple(_nnf(c, negated) for c in children)
            return Or(parts) if negated else And(parts)
        case Or(children):
            parts = tuple(_nnf(c, negated) for c in children)
            return And(parts) if negated else Or(parts)
        case Next(child):
            if negated:
                raise NotCosafeError("negated 'X' requires weak next, outside the co-safe fragment")
            return Next(_nnf(child, False))
        case Until(left, right):
            if negated:
                raise NotCosafeError("negated 'U' requires release, outside the co-safe fragment")
            return Until(_nnf(left, False), _nnf(right, False))
    raise TypeError(f"unknown formula node {f!r}")


@lru_cache(maxsize=1 << 16)
def canonical(f: Formula) -> Formula:
    """Canonical form: negation-normal with Boolean structure flattened to a
    two-level disjunction of conjunctions over temporal/literal leaves,
    sorted, constant-folded, duplicate- and subsumption-free.  Equal
    canonical objects denote the same residual obligation, which makes
    automaton states comparable by equality."""
    match f:
        case TrueF() | FalseF() | Step() | Atom() | Not(Atom()):
            return f
        case Not():
            return canonical(_nnf(f, False))
        case Next(child):
            c = canonical(child)
            if c == FALSE:
                return FALSE
            return Next(c)
        case Until(left, right):
            l, r = canonical(left), canonical(right)
            if r == TRUE:
                # l U true holds on exactly the nonempty suffixes
                return STEP
            if r == FALSE:
                return FALSE
            if l == FALSE or l == r:
                return r
            return Until(l, r)
        case And(children):
            return _conjoin(tuple(canonical(c) for c in children))
        case Or(children):
            return _disjoin(tuple(canonical(c) for c in children))
    raise TypeError(f"unknown formula node {f!r}")


def _dnf_of(f: Formula) -> list[frozenset]:
    """Disjunct list (sets of conjunct leaves) of a canonical formula."""
    if f == TRUE:
        return [frozenset()]
    if f == FALSE:
        return []
    if isinstance(f, Or):
        return [frozenset(c.children) if isinstance(c, And) else frozenset((c,))
                for c in f.children]
    if isinstance(f, And):
        return [frozenset(f.children)]
    return [frozenset((f,))]


def _clean_conjunct(leaves: frozenset) -> frozenset | None:
    """None when the conjunction is unsatisfiable (complementary literals);
    STEP is dropped beside any other leaf, which already implies it."""
    for leaf in leaves:
        if isinstance(leaf, Not) and leaf.child in leaves:
            return None
    if STEP in leaves and len(leaves) > 1:
        leaves = leaves - {STEP}
    return leaves


def _from_dnf(disjuncts: Iterable[frozenset]) -> Formula:
    cleaned = set()
    for d in disjuncts:
        c = _clean_conjunct(d)
        if c is None:
            continue
        if not c:
            return TRUE
        cleaned.add(c)
    if not cleaned:
        return FALSE
    if frozenset((STEP,)) in cleaned:
        # every leaf implies 'one more symbol follows'
        return STEP
    minimal = [d for d in cleaned if not any(e < d for e in cleaned)]
    terms = []
    for d in sorted(minimal, key=lambda d: (len(d), sorted(map(_sort_key, d)))):
        leaves = tuple(sorted(d, key=_sort_key))
        terms.append(leaves[0] if len(leaves) == 1 else And(leaves))
    return terms[0] if len(terms) == 1 else Or(tuple(terms))


def _conjoin(parts: tuple[Formula, ...]) -> Formula:
    acc = [frozenset()]
    for p in parts:
        if p == FALSE:
            return FALSE
        if p == TRUE:
            continue
        nxt = []
        for d in _dnf_of(p):
            for a in acc:
                nxt.append(a | d)
        acc = nxt
        if not acc:
            return FALSE
    return _from_dnf(acc)


def _disjoin(parts: tuple[Formula, ...]) -> Formula:
    acc: list[frozenset] = []
    for p in parts:
        if p == TRUE:
            return TRUE
        acc.extend(_dnf_of(p))
    return _from_dnf(acc)


def normalize(f: Formula) -> Formula:
    """Negation-normal canonical form; raises NotCosafeError when negation
    cannot be pushed to the atoms within the fragment."""
    return canonical(_nnf(f, False))


# -- parsing ---------------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(->|[()&|!]|[A-Za-z_][A-Za-z0-9_]*)")
_KEYWORDS = {"true", "false", "X", "U", "F", "G"}


def _tokenize(text: str) -> Iterator[tuple[str, int]]:
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or not m.group(1):
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise LtlSyntaxError(f"unexpected character {stripped[0]!r}", pos)
        yield m.group(1), m.start(1)
        pos = m.end()


class _Parser:
    def __init__(self, text: str, ap_universe: frozenset[str]):
        self.text = text
        self.tokens = list(_tokenize(text)) + [("<end>", len(text))]
        self.i = 0
        self.aps = ap_universe

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def pos(self) -> int:
        return self.tokens[self.i][1]

    def take(self) -> str:
        tok = self.tokens[self.i][0]
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        if self.peek() != tok:
            raise LtlSyntaxError(f"expected {tok!r}, found {self.peek()!r}", self.pos())
        self.take()

    def formula(self) -> Formula:
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            right = self.formula()  # right associative
            return Or((Not(left), right))
        return left

    def disjunction(self) -> Formula:
        parts = [self.conjunction()]
        while self.peek() == "|":
            self.take()
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conjunction(self) -> Formula:
        parts = [self.until_expr()]
        while self.peek() == "&":
            self.take()
            parts.append(self.until_expr())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def until_expr(self) -> Formula:
        left = self.unary()
        if self.peek() == "U":
            self.take()
            right = self.until_expr()  # right associative
            return Until(left, right)
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok == "X":
            self.take()
            return Next(self.unary())
        if tok == "F":
            self.take()
            return Until(TRUE, self.unary())
        if tok == "G":
            raise NotCosafeError("the 'always' operator is excluded from the co-safe fragment")
        return self.atom_expr()

    def atom_expr(self) -> Formula:
        tok = self.peek()
        if tok == "(":
            self.take()
            f = self.formula()
            self.expect(")")
            return f
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if tok == "<end>":
            raise LtlSyntaxError("unexpected end of formula", self.pos())
        if tok in _KEYWORDS or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            raise LtlSyntaxError(f"unexpected token {tok!r}", self.pos())
        self.take()
        if tok not in self.aps:
            raise UnknownAtomError(f"unknown atomic proposition {tok!r}")
        return Atom(tok)


def parse(text: str, ap_universe: Iterable[str]) -> Formula:
    """Parse concrete syntax into the normalised canonical AST.

    Raises LtlSyntaxError / UnknownAtomError / NotCosafeError.
    """
    parser = _Parser(text, frozenset(ap_universe))
    f = parser.formula()
    if parser.peek() != "<end>":
        raise LtlSyntaxError(f"trailing input {parser.peek()!r}", parser.pos())
    return normalize(f)


# -- printing --------------------------------------------------------------

_PREC = {Or: 1, And: 2, Until: 3, Next: 4, Not: 5}
# implication never appears after normalisation


def _wrap(f: Formula, parent_prec: int) -> str:
    prec = _PREC.get(type(f), 6)
    s = formula_to_str(f)
    return f"({s})" if prec < parent_prec else s


@lru_cache(maxsize=1 << 16)
def formula_to_str(f: Formula) -> str:
    match f:
        case TrueF():
            return "true"
        case FalseF():
            return "false"
        case Step():
            return "F true"
        case Atom(name):
            return name
        case Not(child):
            return "!" + _wrap(child, 6)
        case Next(child):
            return "X " + _wrap(child, 5)
        case Until(left, right):
            if left == TRUE:
                return "F " + _wrap(right, 5)
            return _wrap(left, 4) + " U " + _wrap(right, 3)
        case And(children):
            return " & ".join(_wrap(c, 3) for c in children)
        case Or(children):
            return " | ".join(_wrap(c, 2) for c in children)
    raise TypeError(f"unknown formula node {f!r}")


# -- progression -----------------------------------------------------------

@lru_cache(maxsize=1 << 16)
def progress(f: Formula, sigma: Symbol) -> Formula:
    """Residual obligation after observing ``sigma``, in canonical form.

    ``f`` must be canonical.  A residual equal to TRUE means the formula is
    satisfied whatever follows; FALSE means it can no longer be satisfied.
    """
    match f:
        case TrueF() | FalseF():
            return f
        case Step():
            return TRUE
        case Atom(name):
            return TRUE if name in sigma else FALSE
        case Not(Atom(name)):
            return FALSE if name in sigma else TRUE
        case And(children):
            return _conjoin(tuple(progress(c, sigma) for c in children))
        case Or(children):
            return _disjoin(tuple(progress(c, sigma) for c in children))
        case Next(child):
            # a discharged X true still demands that some position follows
            return STEP if child == TRUE else child
        case Until(left, right):
            keep = _conjoin((progress(left, sigma), f))
            return _disjoin((progress(right, sigma), keep))
    raise TypeError(f"unknown formula node {f!r}")


def eval_trace(f: Formula, trace: Sequence[Symbol]) -> bool:
    """Finite-trace satisfaction by folding progression over the trace; the
    trace satisfies ``f`` iff the residual reaches TRUE at or before the
    last symbol."""
    if not trace:
        raise ValueError("trace must be nonempty")
    residual = canonical(f)
    for sigma in trace:
        if residual == TRUE:
            return True
        if residual == FALSE:
            return False
        residual = progress(residual, sigma)
    return residual == TRUE
