"""Finite fractal mother graphs and the zero-ray boundary action.

Vertices of the level-n graph are integer encodings of length-n letter
words (digit at reading position i has weight m^(i-1)).  Edges join a
vertex to its image under each generator of the generating multiset;
the conductance of an edge is the number of generators realizing it,
and fixed points are recorded as loops.  Loops never enter resistance
computations but are needed for the exact degree count.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .automata import Generator, GroupWord, LetterWord, act
from .mother import ModelParams, enumerate_generating_multiset, multiset_size


class BudgetExceeded(Exception):
    """A graph build was larger than the configured vertex budget."""


DEFAULT_VERTEX_BUDGET = 2_000_000


# ---------------------------------------------------------------------------
# Vectorized generator action on a digit matrix
# ---------------------------------------------------------------------------

def digits_matrix(n: int, m: int, values: Optional[np.ndarray] = None) -> np.ndarray:
    """(N, n) uint8 matrix; column i holds the digit at reading position i+1."""
    if values is None:
        values = np.arange(m**n, dtype=np.int64)
    cols = []
    v = values.copy()
    for _ in range(n):
        cols.append(v % m)
        v //= m
    if not cols:
        return np.zeros((len(values), 0), dtype=np.uint8)
    return np.stack(cols, axis=1).astype(np.uint8)


def encode_digits(digits: np.ndarray, m: int) -> np.ndarray:
    n = digits.shape[1]
    weights = (m ** np.arange(n, dtype=np.int64))
    return digits.astype(np.int64) @ weights


def bulk_action(g: Generator, digits: np.ndarray, m: int) -> np.ndarray:
    """Apply one generator to every row of a digit matrix at once.

    Row semantics must match :func:`mothergroups.automata.act`; the unit
    tests cross-check this exhaustively on small alphabets.
    """
    N, n = digits.shape
    out = digits.copy()
    if g.is_root_perm:
        if n > 0:
            table = np.array(g.perm.images, dtype=np.uint8)
            out[:, 0] = table[digits[:, 0]]
        return out

    if n == 0:
        return out
    k = len(g.trigger)
    nz = digits != 0
    rank = np.cumsum(nz, axis=1)
    ok = np.ones(N, dtype=bool)
    for t in range(k):
        hit = nz & (rank == t + 1)
        has = hit.any(axis=1)
        pos = hit.argmax(axis=1)
        ok &= has
        rows = np.nonzero(ok)[0]
        ok[rows] &= digits[rows, pos[rows]] == g.trigger[t]
    hit = nz & (rank == k + 1)
    has = hit.any(axis=1)
    pos = hit.argmax(axis=1)
    ok &= has
    rows = np.nonzero(ok)[0]
    if rows.size == 0:
        return out
    p = pos[rows]
    u = digits[rows, p].astype(np.int64)
    pi_table = np.array(g.elem.pi.images, dtype=np.uint8)
    out[rows, p] = pi_table[u]
    # follower letter, when it exists, moves by tau indexed by the original u
    tau_table = np.zeros((m, m), dtype=np.uint8)
    for a in range(1, m):
        tau_table[a] = g.elem.tau(a).images
    inb = p + 1 < n
    r2, p2, u2 = rows[inb], p[inb] + 1, u[inb]
    out[r2, p2] = tau_table[u2, digits[r2, p2]]
    return out


# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------

@dataclass
class SchreierGraph:
    """Weighted multigraph on m^n vertices with loop counts kept aside."""

    d: int
    m: int
    n: int
    conduct: dict[tuple[int, int], int]
    loops: np.ndarray
    num_vertices: int
    vertex_weights: Optional[np.ndarray] = None  # set for symmetry quotients
    _adj: Optional[list[list[tuple[int, float]]]] = field(default=None, repr=False)

    def degree_with_loops(self, v: int) -> int:
        deg = int(self.loops[v])
        for (a, b), c in self.conduct.items():
            if a == v or b == v:
                deg += c
        return deg

    def degree_vector(self) -> np.ndarray:
        deg = self.loops.astype(np.int64).copy()
        for (a, b), c in self.conduct.items():
            deg[a] += c
            deg[b] += c
        return deg

    def adjacency(self) -> list[list[tuple[int, float]]]:
        if self._adj is None:
            adj: list[list[tuple[int, float]]] = [[] for _ in range(self.num_vertices)]
            for (a, b), c in self.conduct.items():
                adj[a].append((b, c))
                adj[b].append((a, c))
            self._adj = adj
        return self._adj

    def components(self) -> np.ndarray:
        """Component id per vertex, by BFS."""
        comp = np.full(self.num_vertices, -1, dtype=np.int64)
        adj = self.adjacency()
        cid = 0
        for s in range(self.num_vertices):
            if comp[s] >= 0:
                continue
            comp[s] = cid
            q = deque([s])
            while q:
                u = q.popleft()
                for w, _ in adj[u]:
                    if comp[w] < 0:
                        comp[w] = cid
                        q.append(w)
            cid += 1
        return comp

    def is_connected(self) -> bool:
        return self.num_vertices == 0 or int(self.components().max()) == 0


def build_graph(p: ModelParams, n: int,
                budget: int = DEFAULT_VERTEX_BUDGET) -> SchreierGraph:
    """Level-n mother graph for the full generating multiset."""
    N = p.m**n
    if N > budget:
        raise BudgetExceeded(f"{N} vertices exceed budget {budget}")
    ms = enumerate_generating_multiset(p)
    digits = digits_matrix(n, p.m)
    values = np.arange(N, dtype=np.int64)
    loops = np.zeros(N, dtype=np.int64)
    key_parts = []
    for g in ms:
        img = encode_digits(bulk_action(g, digits, p.m), p.m)
        moved = img != values
        loops += ~moved
        u = values[moved]
        v = img[moved]
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        key_parts.append(lo * N + hi)
    conduct: dict[tuple[int, int], int] = {}
    if key_parts:
        keys = np.concatenate(key_parts)
        uniq, counts = np.unique(keys, return_counts=True)
        # each unordered edge is reported once from each endpoint
        assert (counts % 2 == 0).all(), "generator multiset not inverse-closed?"
        for key, c in zip(uniq.tolist(), (counts // 2).tolist()):
            conduct[(key // N, key % N)] = int(c)
    return SchreierGraph(p.d, p.m, n, conduct, loops, N)


def root(n: int) -> int:
    return 0


def antiroot(n: int, m: int, x: int = 1) -> int:
    """Vertex with digit x at position n, zeros elsewhere."""
    if not 1 <= x < m:
        raise ValueError(f"antiroot digit {x} must be in 1..{m - 1}")
    if n < 1:
        raise ValueError("antiroot needs n >= 1")
    return x * m ** (n - 1)


def antiroot_set(n: int, m: int) -> list[int]:
    return [antiroot(n, m, x) for x in range(1, m)]


def count_nonzero(v: int, m: int) -> int:
    c = 0
    while v:
        if v % m:
            c += 1
        v //= m
    return c


def build_quasi_model(p: ModelParams, n: int,
                      budget: int = DEFAULT_VERTEX_BUDGET) -> SchreierGraph:
    """Unit-conductance model: u ~ v iff they differ in one digit and at
    most d+1 of the digits read earlier are nonzero."""
    N = p.m**n
    if N > budget:
        raise BudgetExceeded(f"{N} vertices exceed budget {budget}")
    digits = digits_matrix(n, p.m)
    nz = digits != 0
    prefix = np.zeros((N, n), dtype=np.int64)
    if n > 1:
        prefix[:, 1:] = np.cumsum(nz[:, :-1], axis=1)
    values = np.arange(N, dtype=np.int64)
    conduct: dict[tuple[int, int], int] = {}
    for pos in range(n):
        okrows = prefix[:, pos] <= p.d + 1
        base = values[okrows]
        cur = digits[okrows, pos].astype(np.int64)
        for delta in range(1, p.m):
            newd = (cur + delta) % p.m
            v = base + (newd - cur) * p.m**pos
            lo = np.minimum(base, v)
            hi = np.maximum(base, v)
            for a, b in zip(lo.tolist(), hi.tolist()):
                conduct[(a, b)] = 1
    return SchreierGraph(p.d, p.m, n, conduct, np.zeros(N, dtype=np.int64), N)


def _bfs_distances(adj: list[list[tuple[int, float]]], source: int) -> np.ndarray:
    dist = np.full(len(adj), -1, dtype=np.int64)
    dist[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        for w, _ in adj[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def distortion_report(p: ModelParams, n: int,
                      budget: int = DEFAULT_VERTEX_BUDGET) -> tuple[int, int]:
    """(max model-distance over real edges, max real-distance over model edges)."""
    g = build_graph(p, n, budget)
    q = build_quasi_model(p, n, budget)
    out = []
    for src_graph, edges in ((q, g.conduct), (g, q.conduct)):
        adj = src_graph.adjacency()
        worst = 0
        cache: dict[int, np.ndarray] = {}
        for (u, v) in edges:
            if u not in cache:
                cache[u] = _bfs_distances(adj, u)
            dd = int(cache[u][v])
            if dd < 0:
                raise AssertionError("graphs disagree on connectivity")
            worst = max(worst, dd)
        out.append(worst)
    return out[0], out[1]


def induced_embedding_check(p: ModelParams, n: int,
                            budget: int = DEFAULT_VERTEX_BUDGET) -> bool:
    """True iff the level-(n+1) subgraph induced on vertices < m^n equals
    the level-n graph with loops erased, conductances included."""
    small = build_graph(p, n, budget)
    big = build_graph(p, n + 1, budget)
    N = p.m**n
    induced = {e: c for e, c in big.conduct.items() if e[0] < N and e[1] < N}
    return induced == small.conduct


def induced_edge_sets_match(p: ModelParams, n: int,
                            budget: int = DEFAULT_VERTEX_BUDGET) -> bool:
    """Same comparison ignoring conductance multiplicities."""
    small = build_graph(p, n, budget)
    big = build_graph(p, n + 1, budget)
    N = p.m**n
    induced = {e for e in big.conduct if e[0] < N and e[1] < N}
    return induced == set(small.conduct)


# ---------------------------------------------------------------------------
# Symmetry quotient
# ---------------------------------------------------------------------------

def nonzero_pattern(v: int, m: int, n: int) -> int:
    """Bitmask of nonzero digit positions (bit i = reading position i+1)."""
    mask = 0
    for i in range(n):
        if v % m:
            mask |= 1 << i
        v //= m
    return mask


def quotient_by_symmetry(p: ModelParams, n: int,
                         budget: int = DEFAULT_VERTEX_BUDGET) -> SchreierGraph:
    """Identify vertices that differ only by relabeling nonzero digits.

    Classes are indexed by the binary pattern of nonzero positions; the
    class of pattern y collects (m-1)^(#y) vertices.  Edge conductances
    are summed over identified pairs; intra-class edges become loops and
    are dropped from the conductance map.
    """
    g = build_graph(p, n, budget)
    N = p.m**n
    digits = digits_matrix(n, p.m)
    masks = np.zeros(N, dtype=np.int64)
    for i in range(n):
        masks |= (digits[:, i] != 0).astype(np.int64) << i
    conduct: dict[tuple[int, int], int] = {}
    loops = np.zeros(2**n, dtype=np.int64)
    for (u, v), c in g.conduct.items():
        cu, cv = int(masks[u]), int(masks[v])
        if cu == cv:
            loops[cu] += c
            continue
        key = (min(cu, cv), max(cu, cv))
        conduct[key] = conduct.get(key, 0) + c
    weights = np.array([(p.m - 1) ** bin(y).count("1") for y in range(2**n)],
                       dtype=np.int64)
    return SchreierGraph(p.d, p.m, n, conduct, loops, 2**n,
                         vertex_weights=weights)


# ---------------------------------------------------------------------------
# Boundary points and the infinite graph's neighborhood oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryPoint:
    """Finitely supported one-sided infinite word (default digit 0).

    ``entries`` holds (position, digit) pairs with digit != 0, sorted by
    position; positions start at 1.
    """

    m: int
    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        for pos, dig in self.entries:
            if pos < 1 or not 1 <= dig < self.m:
                raise ValueError(f"bad boundary entry {(pos, dig)}")
        if list(self.entries) != sorted(self.entries):
            raise ValueError("entries must be sorted by position")

    @classmethod
    def zero_ray(cls, m: int) -> "BoundaryPoint":
        return cls(m)

    @classmethod
    def from_digits(cls, digits: Iterable[int], m: int) -> "BoundaryPoint":
        entries = tuple((i + 1, d) for i, d in enumerate(digits) if d != 0)
        return cls(m, entries)

    def digit(self, pos: int) -> int:
        for q, d in self.entries:
            if q == pos:
                return d
        return 0

    def max_support(self) -> int:
        return self.entries[-1][0] if self.entries else 0

    def prefix(self, length: int) -> LetterWord:
        digs = [0] * length
        for pos, d in self.entries:
            if pos <= length:
                digs[pos - 1] = d
        return LetterWord(self.m, tuple(digs))

    def display(self, length: Optional[int] = None) -> str:
        length = length or max(self.max_support(), 1)
        return "..." + self.prefix(length).display()


def act_boundary(g: Generator, pt: BoundaryPoint) -> BoundaryPoint:
    """Image of a finitely supported point; the automaton is run over the
    support plus a two-digit margin, past which it can no longer act."""
    length = pt.max_support() + 2
    moved = act(GroupWord.from_letters([g], m=pt.m), pt.prefix(length))
    return BoundaryPoint.from_digits(moved.digits, pt.m)


def act_boundary_word(w: GroupWord, pt: BoundaryPoint) -> BoundaryPoint:
    for g in w.letters:
        pt = act_boundary(g, pt)
    return pt


def neighbors_infinite(pt: BoundaryPoint, p: ModelParams
                       ) -> list[tuple[int, BoundaryPoint]]:
    """(generator index, image) for every generator of the multiset."""
    ms = enumerate_generating_multiset(p)
    return [(i, act_boundary(g, pt)) for i, g in enumerate(ms)]


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

EDGES_SCHEMA = "mothergroups.edges.v1"
LOOPS_SCHEMA = "mothergroups.loops.v1"


def edges_csv(g: SchreierGraph) -> str:
    lines = [f"# schema={EDGES_SCHEMA} d={g.d} m={g.m} n={g.n}", "u,v,conductance"]
    for (u, v) in sorted(g.conduct):
        lines.append(f"{u},{v},{g.conduct[(u, v)]}")
    return "\n".join(lines) + "\n"


def loops_csv(g: SchreierGraph) -> str:
    lines = [f"# schema={LOOPS_SCHEMA} d={g.d} m={g.m} n={g.n}", "vertex,count"]
    for v in range(g.num_vertices):
        c = int(g.loops[v])
        if c:
            lines.append(f"{v},{c}")
    return "\n".join(lines) + "\n"


def dot_export(g: SchreierGraph) -> str:
    out = ["graph mothergraph {"]
    for v in range(g.num_vertices):
        label = LetterWord.from_value(v, g.n, g.m).display() or "e"
        out.append(f'  v{v} [label="{label}"];')
    for (u, v) in sorted(g.conduct):
        c = g.conduct[(u, v)]
        attr = f' [label="{c}"]' if c != 1 else ""
        out.append(f"  v{u} -- v{v}{attr};")
    out.append("}")
    return "\n".join(out) + "\n"
