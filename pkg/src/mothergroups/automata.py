"""Exact arithmetic for rooted-tree automorphisms given by wreath recursion.

Words over a finite alphabet {0..m-1} form an m-ary tree; an automaton
state acts on a word letter by letter, emitting a permuted letter and
handing the rest of the word to one of its section states.  Everything
here is value-semantic and exact: permutations, single automaton states
(generators), products of generators (group words), the induced action
on letter words, sections, an exact identity/equality decision, and the
activity-growth classification of a state diagram.

Digit convention: position 1 of a letter word is the digit read FIRST by
an automaton.  Display strings put position 1 rightmost, so the string
"012020010" reads 0,1,0,0,2,0,2,1,0 from the right.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence


class CapExceeded(Exception):
    """A closure or recursion exceeded its configured resource cap."""


DEFAULT_STATE_CAP = 10**6


# ---------------------------------------------------------------------------
# Permutations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Perm:
    """Permutation of {0..m-1}, acting on the right: x -> images[x]."""

    images: tuple[int, ...]

    def __post_init__(self):
        n = len(self.images)
        if sorted(self.images) != list(range(n)):
            raise ValueError(f"not a permutation of 0..{n - 1}: {self.images}")

    @property
    def m(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, m: int) -> "Perm":
        return cls(tuple(range(m)))

    @classmethod
    def from_cycles(cls, cycles: Sequence[Sequence[int]], m: int) -> "Perm":
        images = list(range(m))
        for cyc in cycles:
            for a, b in zip(cyc, cyc[1:] + type(cyc)([cyc[0]])):
                if not 0 <= a < m:
                    raise ValueError(f"cycle entry {a} out of range for m={m}")
                images[a] = b
        perm = cls(tuple(images))
        return perm

    def __call__(self, x: int) -> int:
        return self.images[x]

    def __mul__(self, other: "Perm") -> "Perm":
        # right-action composition: x.(self*other) = (x.self).other
        if other.m != self.m:
            raise ValueError("permutation size mismatch")
        return Perm(tuple(other.images[i] for i in self.images))

    def inverse(self) -> "Perm":
        inv = [0] * self.m
        for i, j in enumerate(self.images):
            inv[j] = i
        return Perm(tuple(inv))

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.images))

    def fixes(self, x: int) -> bool:
        return self.images[x] == x

    def cycles(self) -> list[tuple[int, ...]]:
        seen = set()
        out = []
        for i in range(self.m):
            if i in seen or self.images[i] == i:
                continue
            cyc = [i]
            j = self.images[i]
            while j != i:
                seen.add(j)
                cyc.append(j)
                j = self.images[j]
            out.append(tuple(cyc))
        return out

    def cycle_string(self) -> str:
        cycs = self.cycles()
        if not cycs:
            return "id"
        return "".join("(" + "".join(str(x) for x in c) + ")" for c in cycs)

    def __str__(self) -> str:
        return self.cycle_string()


_CYCLE_RE = re.compile(r"\((\d+)\)")


def parse_perm(text: str, m: int) -> Perm:
    """Parse cycle notation like ``(01)(2)`` or ``id`` (digits are single chars)."""
    text = text.strip()
    if text in ("id", "()", ""):
        return Perm.identity(m)
    pos = 0
    cycles = []
    while pos < len(text):
        match = _CYCLE_RE.match(text, pos)
        if not match:
            raise ValueError(f"bad permutation token {text!r} at position {pos}")
        cycles.append([int(ch) for ch in match.group(1)])
        pos = match.end()
    return Perm.from_cycles(cycles, m)


def all_perms(m: int) -> list[Perm]:
    return [Perm(p) for p in itertools.permutations(range(m))]


# ---------------------------------------------------------------------------
# Wreath elements: automorphisms of two tree levels fixing vertex 0
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WreathElem:
    """Element of Sym(m) wr Sym(m-1): pi permutes the nonzero letters
    {1..m-1} (stored as a Perm of size m fixing 0); taus[a-1] is applied
    to the letter following trigger letter a, indexed by the ORIGINAL
    (pre-pi) value of that letter."""

    pi: Perm
    taus: tuple[Perm, ...]

    def __post_init__(self):
        m = self.pi.m
        if not self.pi.fixes(0):
            raise ValueError("pi must fix 0 (it permutes nonzero letters)")
        if len(self.taus) != m - 1:
            raise ValueError(f"need {m - 1} tau permutations, got {len(self.taus)}")
        for t in self.taus:
            if t.m != m:
                raise ValueError("tau size mismatch")

    @property
    def m(self) -> int:
        return self.pi.m

    @classmethod
    def identity(cls, m: int) -> "WreathElem":
        return cls(Perm.identity(m), tuple(Perm.identity(m) for _ in range(m - 1)))

    def tau(self, letter: int) -> Perm:
        """Permutation applied to the follower of trigger letter ``letter``."""
        if not 1 <= letter < self.m:
            raise ValueError(f"trigger letter {letter} out of range")
        return self.taus[letter - 1]

    def inverse(self) -> "WreathElem":
        pinv = self.pi.inverse()
        # reading the already-permuted letter b, undo with tau[b.pi^-1]^-1
        taus = tuple(self.taus[pinv(b) - 1].inverse() for b in range(1, self.m))
        return WreathElem(pinv, taus)

    def __mul__(self, other: "WreathElem") -> "WreathElem":
        # semidirect product law: (pi;tau)(pi';tau') = (pi*pi'; u -> tau_u * tau'_{u.pi})
        if other.m != self.m:
            raise ValueError("wreath element size mismatch")
        taus = tuple(self.taus[u - 1] * other.taus[self.pi(u) - 1]
                     for u in range(1, self.m))
        return WreathElem(self.pi * other.pi, taus)

    def is_identity(self) -> bool:
        return self.pi.is_identity() and all(t.is_identity() for t in self.taus)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Generator:
    """One automaton state in lambda-normal form.

    Either a root permutation (``perm`` set, degree -1) or a triggered
    wreath element (``trigger``/``elem`` set): if the first ``len(trigger)``
    nonzero letters of the input spell ``trigger``, the next nonzero
    letter u is permuted by ``elem.pi`` and the letter after it by
    ``elem.tau(u)``; otherwise the state acts trivially.
    """

    m: int
    perm: Optional[Perm] = None
    trigger: Optional[tuple[int, ...]] = None
    elem: Optional[WreathElem] = None

    def __post_init__(self):
        if (self.perm is None) == (self.trigger is None):
            raise ValueError("exactly one of perm / (trigger, elem) required")
        if self.perm is not None:
            if self.perm.m != self.m:
                raise ValueError("perm size mismatch")
        else:
            if self.elem is None or self.elem.m != self.m:
                raise ValueError("elem missing or size mismatch")
            if any(not 1 <= a < self.m for a in self.trigger):
                raise ValueError("trigger letters must be nonzero")

    # -- classification ----------------------------------------------------

    @property
    def is_root_perm(self) -> bool:
        return self.perm is not None

    @property
    def degree(self) -> int:
        """-1 for a root permutation, trigger length otherwise."""
        return -1 if self.is_root_perm else len(self.trigger)

    def is_trivial(self) -> bool:
        """Structurally the identity automorphism."""
        if self.is_root_perm:
            return self.perm.is_identity()
        return self.elem.is_identity()

    # -- wreath recursion ---------------------------------------------------

    def root_perm(self) -> Perm:
        """Action on the first letter read."""
        if self.is_root_perm:
            return self.perm
        if self.trigger:
            return Perm.identity(self.m)
        return self.elem.pi

    def section(self, digit: int) -> Optional["Generator"]:
        """State after reading ``digit``; None means the identity state."""
        if not 0 <= digit < self.m:
            raise ValueError(f"digit {digit} out of range for m={self.m}")
        if self.is_root_perm:
            return None
        if self.trigger:
            if digit == 0:
                return self
            if digit == self.trigger[0]:
                nxt = Generator(self.m, trigger=self.trigger[1:], elem=self.elem)
                return None if nxt.is_trivial() else nxt
            return None
        # empty trigger: waiting for the target nonzero letter
        if digit == 0:
            return self
        tau = self.elem.tau(digit)
        if tau.is_identity():
            return None
        return Generator(self.m, perm=tau)

    def inverse(self) -> "Generator":
        if self.is_root_perm:
            return Generator(self.m, perm=self.perm.inverse())
        return Generator(self.m, trigger=self.trigger, elem=self.elem.inverse())

    # -- serialization -------------------------------------------------------

    def token(self) -> str:
        """Text form: ``rho:<cycles>`` or ``lam:<trigger>:<pi>:<tau1>,...``.

        The trigger is written in display order (first-read letter rightmost).
        """
        if self.is_root_perm:
            return f"rho:{self.perm.cycle_string()}"
        trig = "".join(str(a) for a in reversed(self.trigger)) or "-"
        taus = ",".join(t.cycle_string() for t in self.elem.taus)
        return f"lam:{trig}:{self.elem.pi.cycle_string()}:{taus}"

    def __str__(self) -> str:
        return self.token()


def parse_generator(token: str, m: int) -> Generator:
    """Inverse of :meth:`Generator.token`."""
    parts = token.strip().split(":")
    kind = parts[0]
    if kind == "rho":
        if len(parts) != 2:
            raise ValueError(f"bad rho token {token!r}: expected rho:<cycles>")
        return Generator(m, perm=parse_perm(parts[1], m))
    if kind == "lam":
        if len(parts) != 4:
            raise ValueError(
                f"bad lam token {token!r}: expected lam:<trigger>:<pi>:<taus>")
        trig_text = parts[1]
        if trig_text == "-":
            trigger: tuple[int, ...] = ()
        else:
            if not trig_text.isdigit():
                raise ValueError(f"bad trigger {trig_text!r} in {token!r}")
            trigger = tuple(int(ch) for ch in reversed(trig_text))
        pi = parse_perm(parts[2], m)
        tau_parts = parts[3].split(",")
        if len(tau_parts) != m - 1:
            raise ValueError(
                f"expected {m - 1} tau entries in {token!r}, got {len(tau_parts)}")
        taus = tuple(parse_perm(t, m) for t in tau_parts)
        return Generator(m, trigger=trigger, elem=WreathElem(pi, taus))
    raise ValueError(f"unknown generator token kind {kind!r} in {token!r}")


# ---------------------------------------------------------------------------
# Letter words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LetterWord:
    """Finite word over {0..m-1}; digits[0] is read first (displayed rightmost)."""

    m: int
    digits: tuple[int, ...]

    def __post_init__(self):
        if any(not 0 <= d < self.m for d in self.digits):
            raise ValueError(f"digits out of range for m={self.m}: {self.digits}")

    @classmethod
    def from_value(cls, value: int, length: int, m: int) -> "LetterWord":
        if not 0 <= value < m**length:
            raise ValueError(f"value {value} out of range for {length} digits")
        digits = []
        for _ in range(length):
            digits.append(value % m)
            value //= m
        return cls(m, tuple(digits))

    @classmethod
    def from_display(cls, text: str, m: int) -> "LetterWord":
        return cls(m, tuple(int(ch) for ch in reversed(text)))

    @property
    def value(self) -> int:
        v = 0
        for d in reversed(self.digits):
            v = v * self.m + d
        return v

    def __len__(self) -> int:
        return len(self.digits)

    def display(self) -> str:
        return "".join(str(d) for d in reversed(self.digits))

    def __str__(self) -> str:
        return self.display()

    def count_nonzero(self) -> int:
        return sum(1 for d in self.digits if d != 0)


# ---------------------------------------------------------------------------
# Group words and the action
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupWord:
    """Product of generators, applied left to right; empty = identity."""

    m: int
    letters: tuple[Generator, ...] = ()

    def __post_init__(self):
        if any(g.m != self.m for g in self.letters):
            raise ValueError("alphabet size mismatch inside word")

    @classmethod
    def from_letters(cls, letters: Iterable[Generator], m: Optional[int] = None) -> "GroupWord":
        letters = tuple(letters)
        if m is None:
            if not letters:
                raise ValueError("cannot infer m from an empty word")
            m = letters[0].m
        return cls(m, letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        if other.m != self.m:
            raise ValueError("alphabet size mismatch")
        return GroupWord(self.m, self.letters + other.letters)

    def inverse(self) -> "GroupWord":
        return GroupWord(self.m, tuple(g.inverse() for g in reversed(self.letters)))

    def canonical(self) -> "GroupWord":
        """Drop structurally trivial letters (no further rewriting)."""
        return GroupWord(self.m, tuple(g for g in self.letters if not g.is_trivial()))

    def token(self) -> str:
        return ";".join(g.token() for g in self.letters)

    def __str__(self) -> str:
        return self.token() or "<empty>"


def parse_word(text: str, m: int) -> GroupWord:
    text = text.strip()
    if not text:
        return GroupWord(m)
    return GroupWord(m, tuple(parse_generator(tok, m) for tok in text.split(";")))


def act_generator(g: Generator, v: LetterWord) -> LetterWord:
    """Run the automaton from state ``g`` over ``v``."""
    if g.m != v.m:
        raise ValueError(f"alphabet mismatch: generator m={g.m}, word m={v.m}")
    out = []
    state: Optional[Generator] = g
    for d in v.digits:
        if state is None:
            out.append(d)
            continue
        out.append(state.root_perm()(d))
        state = state.section(d)
    return LetterWord(v.m, tuple(out))


def act(w: GroupWord | Generator, v: LetterWord) -> LetterWord:
    """Image of ``v`` under ``w`` (letters applied left to right)."""
    if isinstance(w, Generator):
        return act_generator(w, v)
    for g in w.letters:
        v = act_generator(g, v)
    return v


def section_generator(g: Generator, v: LetterWord) -> Optional[Generator]:
    """State of ``g`` after reading all of ``v``; None = identity."""
    if g.m != v.m:
        raise ValueError("alphabet mismatch")
    state: Optional[Generator] = g
    for d in v.digits:
        if state is None:
            return None
        state = state.section(d)
    return state


def section(w: GroupWord, v: LetterWord) -> GroupWord:
    """Section of a word at ``v``: acts on whatever follows ``v``.

    Computed letterwise: the i-th letter is sectioned at the image of
    ``v`` under the preceding letters.  Identity sections are dropped.
    """
    if w.m != v.m:
        raise ValueError("alphabet mismatch")
    out = []
    cur = v
    for g in w.letters:
        s = section_generator(g, cur)
        if s is not None and not s.is_trivial():
            out.append(s)
        cur = act_generator(g, cur)
    return GroupWord(w.m, tuple(out))


def root_perm(w: GroupWord) -> Perm:
    """Product of the letters' first-letter permutations."""
    p = Perm.identity(w.m)
    for g in w.letters:
        p = p * g.root_perm()
    return p


def _section_at_digit(letters: tuple[Generator, ...], digit: int, m: int
                      ) -> tuple[tuple[Generator, ...], int]:
    """One-level section of a letter tuple; returns (section word, output digit)."""
    out = []
    d = digit
    for g in letters:
        s = g.section(d)
        if s is not None and not s.is_trivial():
            out.append(s)
        d = g.root_perm()(d)
    return tuple(out), d


# ---------------------------------------------------------------------------
# Word problem: closure under sections
# ---------------------------------------------------------------------------

def _closure(word: GroupWord, cap: int) -> tuple[list[tuple[Generator, ...]],
                                                 list[list[tuple[int, int]]],
                                                 list[bool]]:
    """Section closure of a word.

    Returns (states, edges, active) where states[i] is a canonical letter
    tuple, edges[i][digit] = (output digit, child state index), and
    active[i] is True iff the state is a nontrivial automorphism.
    """
    m = word.m
    start = word.canonical().letters
    index: dict[tuple[Generator, ...], int] = {start: 0}
    states = [start]
    edges: list[list[tuple[int, int]]] = []
    pos = 0
    while pos < len(states):
        letters = states[pos]
        pos += 1
        row = []
        for digit in range(m):
            child, out_digit = _section_at_digit(letters, digit, m)
            if child not in index:
                if len(index) >= cap:
                    raise CapExceeded(
                        f"section closure exceeded cap of {cap} states")
                index[child] = len(states)
                states.append(child)
            row.append((out_digit, index[child]))
        edges.append(row)

    # a state is a nontrivial automorphism iff its root permutation moves a
    # digit or some reachable state's does; propagate along reverse edges
    n = len(states)
    active = [any(edges[i][d][0] != d for d in range(m)) for i in range(n)]
    rev: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for d in range(m):
            rev[edges[i][d][1]].append(i)
    stack = [i for i in range(n) if active[i]]
    while stack:
        j = stack.pop()
        for i in rev[j]:
            if not active[i]:
                active[i] = True
                stack.append(i)
    return states, edges, active


def is_identity(w: GroupWord, cap: int = DEFAULT_STATE_CAP) -> bool:
    """Exact word-problem decision via section closure.

    Terminates because sections of a length-L word have length <= L and
    each letter ranges over the finite state set of its own automaton.
    Raises :class:`CapExceeded` (never a wrong answer) past the cap.
    """
    _, _, active = _closure(w, cap)
    return not active[0]


def equal(a: GroupWord, b: GroupWord, cap: int = DEFAULT_STATE_CAP) -> bool:
    return is_identity(a * b.inverse(), cap)


# ---------------------------------------------------------------------------
# Moore diagrams and activity growth
# ---------------------------------------------------------------------------

@dataclass
class MooreDiagram:
    """Section-closed state diagram of a group word."""

    m: int
    states: list[tuple[Generator, ...]]
    edges: list[list[tuple[int, int]]]  # edges[i][digit] = (output digit, state)
    active: list[bool]

    @property
    def start(self) -> int:
        return 0

    def state_word(self, i: int) -> GroupWord:
        return GroupWord(self.m, self.states[i])

    def active_count(self) -> int:
        return sum(self.active)


def build_moore_diagram(w: GroupWord, cap: int = DEFAULT_STATE_CAP) -> MooreDiagram:
    if cap <= 0:
        raise ValueError("cap must be positive")
    states, edges, active = _closure(w, cap)
    return MooreDiagram(w.m, states, edges, active)


EXPONENTIAL = float("inf")


def activity_degree(dg: MooreDiagram):
    """Growth exponent of the number of nonidentity sections per level.

    Returns None for the identity, ``EXPONENTIAL`` if some strongly
    connected component of the active-state digraph carries two distinct
    cycles, and otherwise (max number of cycles met along a directed
    path through active states) - 1.
    """
    act_nodes = [i for i, a in enumerate(dg.active) if a]
    if not act_nodes:
        return None
    # multi-edges between active states, one per input digit
    adj: dict[int, list[int]] = {i: [] for i in act_nodes}
    for i in act_nodes:
        for d in range(dg.m):
            j = dg.edges[i][d][1]
            if dg.active[j]:
                adj[i].append(j)

    comp = _sccs(adj)
    node_comp = {}
    for ci, nodes in enumerate(comp):
        for v in nodes:
            node_comp[v] = ci

    # a component is cyclic iff it contains a cycle: more than one node,
    # or a self-loop; two distinct cycles iff its edge count (with digit
    # multiplicity) exceeds its node count or a node has 2 internal edges
    cyclic = []
    for ci, nodes in enumerate(comp):
        nset = set(nodes)
        internal = sum(1 for v in nodes for u in adj[v] if u in nset)
        if internal == 0:
            cyclic.append(False)
        elif internal > len(nodes):
            return EXPONENTIAL
        else:
            # strongly connected with internal edges and #edges <= #nodes
            # forces exactly one simple cycle
            cyclic.append(True)

    # longest path in the condensation, counting cyclic components
    order = _topo_order_condensation(comp, adj, node_comp)
    best = [0] * len(comp)
    for ci in order:
        score = best[ci] + (1 if cyclic[ci] else 0)
        best[ci] = score
        nset = set(comp[ci])
        for v in comp[ci]:
            for u in adj[v]:
                cj = node_comp[u]
                if cj != ci and best[cj] < score:
                    best[cj] = score
    peak = max(best)
    return peak - 1


def _sccs(adj: dict[int, list[int]]) -> list[list[int]]:
    """Tarjan strongly connected components, iterative."""
    index_of: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = itertools.count()

    for root in adj:
        if root in index_of:
            continue
        work = [(root, iter(adj[root]))]
        index_of[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for u in it:
                if u not in index_of:
                    index_of[u] = low[u] = next(counter)
                    stack.append(u)
                    on_stack.add(u)
                    work.append((u, iter(adj[u])))
                    advanced = True
                    break
                if u in on_stack:
                    low[v] = min(low[v], index_of[u])
            if advanced:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index_of[v]:
                comp = []
                while True:
                    u = stack.pop()
                    on_stack.discard(u)
                    comp.append(u)
                    if u == v:
                        break
                out.append(comp)
    return out


def _topo_order_condensation(comp, adj, node_comp) -> list[int]:
    """Topological order of the SCC condensation (sources first)."""
    n = len(comp)
    indeg = [0] * n
    seen = set()
    for ci, nodes in enumerate(comp):
        for v in nodes:
            for u in adj[v]:
                cj = node_comp[u]
                if cj != ci and (ci, cj) not in seen:
                    seen.add((ci, cj))
                    indeg[cj] += 1
    order = [i for i in range(n) if indeg[i] == 0]
    pos = 0
    seen2 = set()
    while pos < len(order):
        ci = order[pos]
        pos += 1
        for v in comp[ci]:
            for u in adj[v]:
                cj = node_comp[u]
                if cj != ci and (ci, cj) not in seen2:
                    seen2.add((ci, cj))
                    indeg[cj] -= 1
                    if indeg[cj] == 0:
                        order.append(cj)
    return order


def activity_count(w: GroupWord, level: int, cap: int = DEFAULT_STATE_CAP) -> int:
    """Number of level-``level`` words whose section of ``w`` is nontrivial."""
    if level < 0:
        raise ValueError("level must be >= 0")
    dg = build_moore_diagram(w, cap)
    counts = {i: 1 if dg.active[i] else 0 for i in range(len(dg.states))}
    for _ in range(level):
        counts = {
            i: sum(counts[dg.edges[i][d][1]] for d in range(dg.m))
            for i in range(len(dg.states))
        }
    return counts[0]
