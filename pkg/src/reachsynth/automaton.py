"""Deterministic finite automata for co-safe formulas.

Translation progresses the canonical formula over an explicit symbol
alphabet; every residual becomes a state, ``true`` the accepting state and
``false`` the (hidden) dead state.  The result is Hopcroft-minimised before
public state names are assigned, so structurally equal languages always
yield the same automaton.

Construction is single-threaded; a built automaton is immutable and can be
shared across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .ltl import (
    FALSE,
    TRUE,
    And,
    Atom,
    Formula,
    Not,
    Or,
    Symbol,
    atoms_of,
    formula_to_str,
    progress,
)

DEAD = "__dead__"


class StateCapExceededError(RuntimeError):
    pass


def _symbol_key(s: Symbol):
    return (len(s), tuple(sorted(s)))


def full_alphabet(atoms: frozenset[str]) -> tuple[Symbol, ...]:
    """All subsets of ``atoms``, in deterministic order."""
    names = sorted(atoms)
    out = [frozenset()]
    for k in range(1, len(names) + 1):
        out.extend(frozenset(c) for c in combinations(names, k))
    return tuple(sorted(out, key=_symbol_key))


@dataclass(eq=False)
class DfaEdge:
    source: str
    target: str
    symbols: frozenset
    guard: Formula

    def __repr__(self):
        return f"DfaEdge({self.source}->{self.target} on {formula_to_str(self.guard)})"


@dataclass(eq=False)
class Dfa:
    """Guard-labelled DFA with a single accepting state.

    The dead state is kept out of ``states``/``edges``; ``delta`` returns
    None for symbols leading there.  ``accepting`` is None when the formula
    is unsatisfiable.
    """

    states: tuple[str, ...]
    initial: str
    accepting: str | None
    atoms: tuple[str, ...]
    alphabet: tuple[Symbol, ...]
    edges: tuple[DfaEdge, ...]
    state_formulas: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        self._atom_set = frozenset(self.atoms)
        self._delta = {}
        for e in self.edges:
            for s in e.symbols:
                self._delta[(e.source, s)] = e.target

    def delta(self, state: str, symbol: Symbol) -> str | None:
        """Successor state, or None for the dead state.  Atoms outside the
        automaton's own alphabet are ignored."""
        return self._delta.get((state, frozenset(symbol) & self._atom_set))

    def edge(self, source: str, target: str) -> DfaEdge | None:
        for e in self.edges:
            if e.source == source and e.target == target:
                return e
        return None

    def has_self_loop(self, state: str) -> bool:
        return self.edge(state, state) is not None

    def accepts(self, word) -> bool:
        """Run ``word``; accept iff the accepting state is entered at or
        before the last symbol.  A missing transition traps in dead."""
        state = self.initial
        if state == self.accepting:
            return True
        for sigma in word:
            nxt = self.delta(state, sigma)
            if nxt is None:
                return False
            state = nxt
            if state == self.accepting:
                return True
        return False

    def transition_count(self) -> int:
        """Number of non-self-loop edges (the convention used when reporting
        automaton size; self-loops are stay conditions, not moves)."""
        return sum(1 for e in self.edges if e.source != e.target)


def successors(d: Dfa, q: str) -> tuple[str, ...]:
    """One-hop successor states of ``q`` (including ``q`` on a self-loop)."""
    if q not in d.states:
        raise KeyError(f"unknown state {q!r}")
    return tuple(sorted({e.target for e in d.edges if e.source == q}))


# -- guard minimisation ------------------------------------------------------

def _minimize_boolean(on: set[int], dont_care: set[int], n_bits: int) -> list[tuple[int, int]]:
    """Quine-McCluskey: list of (value, care_mask) prime implicants covering
    ``on`` using ``dont_care`` freely.  Deterministic."""
    full_mask = (1 << n_bits) - 1
    current = {(m, full_mask) for m in on | dont_care}
    primes: set[tuple[int, int]] = set()
    while current:
        merged = set()
        used = set()
        for a in current:
            for bit in range(n_bits):
                b = (a[0] ^ (1 << bit), a[1])
                if b in current and a[1] & (1 << bit):
                    m = (a[0] & ~(1 << bit), a[1] & ~(1 << bit))
                    merged.add(m)
                    used.add(a)
                    used.add(b)
        primes |= current - used
        current = merged
    # greedy cover of the on-set, essential implicants first
    def covers(imp, m):
        return (m & imp[1]) == imp[0]

    remaining = set(on)
    chosen: list[tuple[int, int]] = []
    ordered = sorted(primes)
    while remaining:
        counts = {imp: sum(1 for m in remaining if covers(imp, m)) for imp in ordered}
        essential = None
        for m in sorted(remaining):
            c = [imp for imp in ordered if covers(imp, m)]
            if len(c) == 1:
                essential = c[0]
                break
        pick = essential or max(ordered, key=lambda imp: (counts[imp], imp))
        chosen.append(pick)
        remaining -= {m for m in remaining if covers(pick, m)}
        ordered.remove(pick)
    return sorted(chosen)


def guard_formula(symbols: frozenset, alphabet: tuple[Symbol, ...], atoms: tuple[str, ...]) -> Formula:
    """Simplified Boolean condition satisfied by exactly ``symbols`` among
    the alphabet (off-alphabet symbols act as don't-cares)."""
    if not atoms:
        return TRUE
    idx = {a: i for i, a in enumerate(atoms)}

    def mask(sym: Symbol) -> int:
        return sum(1 << idx[a] for a in sym if a in idx)

    on = {mask(s) for s in symbols}
    present = {mask(s) for s in alphabet}
    dont_care = set(range(1 << len(atoms))) - present
    if on | dont_care >= set(range(1 << len(atoms))):
        return TRUE
    implicants = _minimize_boolean(on, dont_care, len(atoms))
    terms = []
    for value, care in implicants:
        lits: list[Formula] = []
        for i, a in enumerate(atoms):
            if care & (1 << i):
                lits.append(Atom(a) if value & (1 << i) else Not(Atom(a)))
        terms.append(And(tuple(lits)) if len(lits) != 1 else lits[0])
    if not terms:
        return TRUE
    return Or(tuple(terms)) if len(terms) > 1 else terms[0]


# -- construction ------------------------------------------------------------

def translate(f: Formula, alphabet: tuple[Symbol, ...] | None = None,
              state_cap: int = 10_000) -> Dfa:
    """Translate a canonical co-safe formula into a minimised DFA.

    ``alphabet`` defaults to all subsets of the formula's atoms; a caller
    may restrict it (geometric feasibility is normally applied afterwards
    with prune_infeasible so that pruned transitions remain reportable).
    """
    from .ltl import canonical

    f = canonical(f)
    atoms = tuple(sorted(atoms_of(f)))
    if alphabet is None:
        alphabet = full_alphabet(frozenset(atoms))
    alphabet = tuple(sorted({frozenset(s) for s in alphabet}, key=_symbol_key))

    order: list[Formula] = [f]
    index = {f: 0}
    trans: list[list[int]] = []
    frontier = [f]
    while frontier:
        g = frontier.pop(0)
        row = []
        for sigma in alphabet:
            h = progress(g, sigma)
            if h not in index:
                if len(index) >= state_cap:
                    raise StateCapExceededError(
                        f"automaton construction exceeded {state_cap} states")
                index[h] = len(order)
                order.append(h)
                frontier.append(h)
            row.append(index[h])
        trans.append(row)
    if TRUE not in index:
        index[TRUE] = len(order)
        order.append(TRUE)
        trans.append([index[TRUE]] * len(alphabet))
    if FALSE not in index:
        index[FALSE] = len(order)
        order.append(FALSE)
        trans.append([index[FALSE]] * len(alphabet))

    blocks = _hopcroft(trans, accepting={index[TRUE]})
    labels = [formula_to_str(g) for g in order]
    return _emit(labels, trans, blocks, alphabet, atoms, initial=0,
                 accepting_state=index[TRUE], dead_state=index[FALSE])


def _hopcroft(trans: list[list[int]], accepting: set[int]) -> list[int]:
    """Partition refinement over an explicit complete transition table.
    Returns block id per state."""
    n = len(trans)
    n_sym = len(trans[0]) if trans else 0
    non_accepting = frozenset(range(n)) - accepting
    partition = {frozenset(accepting)}
    if non_accepting:
        partition.add(non_accepting)
    work = {frozenset(accepting)}
    preimage = [[set() for _ in range(n_sym)] for _ in range(n)]
    for s, row in enumerate(trans):
        for a, t in enumerate(row):
            preimage[t][a].add(s)
    while work:
        target = work.pop()
        for a in range(n_sym):
            x = set()
            for t in target:
                x |= preimage[t][a]
            if not x:
                continue
            for block in list(partition):
                inter = block & x
                diff = block - x
                if inter and diff:
                    partition.remove(block)
                    partition.add(frozenset(inter))
                    partition.add(frozenset(diff))
                    if block in work:
                        work.remove(block)
                        work.add(frozenset(inter))
                        work.add(frozenset(diff))
                    else:
                        work.add(frozenset(inter) if len(inter) <= len(diff) else frozenset(diff))
    block_of = [0] * n
    for i, block in enumerate(sorted(partition, key=lambda b: min(b))):
        for s in block:
            block_of[s] = i
    return block_of


def _emit(labels, trans, block_of, alphabet, atoms, initial,
          accepting_state, dead_state) -> Dfa:
    n_blocks = max(block_of) + 1
    block_trans = {}
    for s, row in enumerate(trans):
        b = block_of[s]
        if b in block_trans:
            continue
        block_trans[b] = [block_of[t] for t in row]
    acc_block = block_of[accepting_state]
    dead_block = block_of[dead_state]
    init_block = block_of[initial]

    # public names by BFS over sorted symbols; accepting named qF
    names: dict[int, str] = {}

    def name_for(b: int, counter: list[int]) -> str:
        if b == acc_block and b != init_block:
            return "qF"
        name = f"q{counter[0]}"
        counter[0] += 1
        return name

    counter = [0]
    queue = [init_block]
    names[init_block] = name_for(init_block, counter)
    while queue:
        b = queue.pop(0)
        for a in range(len(alphabet)):
            t = block_trans[b][a]
            if t == dead_block or t in names:
                continue
            names[t] = name_for(t, counter)
            queue.append(t)

    formulas = {}
    for s, label in enumerate(labels):
        b = block_of[s]
        if b in names and names[b] not in formulas:
            formulas[names[b]] = label

    edges = []
    for b, name in sorted(names.items(), key=lambda kv: kv[1]):
        by_target: dict[int, set] = {}
        for a, t in enumerate(block_trans[b]):
            if t == dead_block or t not in names:
                continue
            by_target.setdefault(t, set()).add(alphabet[a])
        for t in sorted(by_target, key=lambda t: names[t]):
            syms = frozenset(by_target[t])
            edges.append(DfaEdge(name, names[t], syms, guard_formula(syms, alphabet, atoms)))

    state_names = tuple(sorted(names.values(), key=lambda s: (s == "qF", len(s), s)))
    accepting = names.get(acc_block) if acc_block != dead_block else None
    if acc_block not in names:
        accepting = None
    return Dfa(
        states=state_names,
        initial=names[init_block],
        accepting=accepting,
        atoms=atoms,
        alphabet=alphabet,
        edges=tuple(edges),
        state_formulas=formulas,
    )


def minimize(d: Dfa, alphabet: tuple[Symbol, ...] | None = None) -> Dfa:
    """Hopcroft minimisation of an explicit DFA over ``alphabet`` (defaults
    to the automaton's own); the dead state is materialised for
    completeness and hidden again afterwards."""
    alphabet = tuple(sorted({frozenset(s) for s in (alphabet or d.alphabet)}, key=_symbol_key))
    order = list(d.states) + [DEAD]
    idx = {s: i for i, s in enumerate(order)}
    trans = []
    for s in order:
        row = []
        for sigma in alphabet:
            t = d.delta(s, sigma) if s != DEAD else None
            row.append(idx[t] if t is not None else idx[DEAD])
        trans.append(row)
    if d.accepting is None:
        return d
    blocks = _hopcroft(trans, accepting={idx[d.accepting]})
    return _emit(order, trans, blocks, alphabet, d.atoms,
                 initial=idx[d.initial], accepting_state=idx[d.accepting],
                 dead_state=idx[DEAD])


def prune_infeasible(d: Dfa, workspace_or_symbols) -> Dfa:
    """Remove edges no geometrically feasible symbol can enable.

    Accepts a Workspace (uses its feasible_symbols) or an iterable of
    symbols.  A warning is attached when pruning disconnects the initial
    state from the accepting state.
    """
    if hasattr(workspace_or_symbols, "feasible_symbols"):
        feasible = workspace_or_symbols.feasible_symbols()
    else:
        feasible = {frozenset(s) for s in workspace_or_symbols}
    atom_set = frozenset(d.atoms)
    feasible = {s & atom_set for s in feasible}
    kept = tuple(e for e in d.edges if e.symbols & feasible)
    warnings = list(d.warnings)
    if d.accepting is not None and not _reaches(kept, d.initial, d.accepting):
        warnings.append(
            f"accepting state {d.accepting} unreachable from {d.initial} after pruning; "
            "verification will return False")
    return Dfa(
        states=d.states,
        initial=d.initial,
        accepting=d.accepting,
        atoms=d.atoms,
        alphabet=d.alphabet,
        edges=kept,
        state_formulas=dict(d.state_formulas),
        warnings=tuple(warnings),
    )


def _reaches(edges, source, target) -> bool:
    adj: dict[str, set[str]] = {}
    for e in edges:
        adj.setdefault(e.source, set()).add(e.target)
    seen = {source}
    stack = [source]
    while stack:
        s = stack.pop()
        if s == target:
            return True
        for t in adj.get(s, ()):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return False


def to_dot(d: Dfa) -> str:
    """Graphviz text; self-loop guards are printed inside the node label so
    edge lines correspond to forward transitions."""
    lines = ["digraph dfa {", "  rankdir=LR;"]
    for s in sorted(d.states):
        label = s
        loop = d.edge(s, s)
        if loop is not None:
            label += r"\n[stay: " + formula_to_str(loop.guard) + "]"
        shape = "doublecircle" if s == d.accepting else "circle"
        lines.append(f'  "{s}" [shape={shape}, label="{label}"];')
    for e in sorted(d.edges, key=lambda e: (e.source, e.target)):
        if e.source == e.target:
            continue
        lines.append(f'  "{e.source}" -> "{e.target}" [label="{formula_to_str(e.guard)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
