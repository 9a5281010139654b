"""Effective resistances and current flows on the mother graphs.

The graph is viewed as a resistor network with edge conductances equal
to generator multiplicities (loops carry no current and are ignored).
Terminal sets are contracted to supernodes, which is exact for the
set-to-set resistances used here.  Systems are solved densely below a
size threshold and by Jacobi-preconditioned conjugate gradients above
it; a dense pseudoinverse oracle is kept for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mother import ModelParams
from .schreier import SchreierGraph, antiroot, antiroot_set, build_graph, root


class SolverError(Exception):
    """The iterative solver failed to reach the requested residual."""


DENSE_LIMIT = 4200
DEFAULT_TOL = 1e-10


# ---------------------------------------------------------------------------
# Flows
# ---------------------------------------------------------------------------

@dataclass
class FlowAssignment:
    """Antisymmetric edge flow, stored once per unordered edge (u < v)."""

    graph: SchreierGraph
    values: dict[tuple[int, int], float] = field(default_factory=dict)

    def flow(self, u: int, v: int) -> float:
        if u < v:
            return self.values.get((u, v), 0.0)
        return -self.values.get((v, u), 0.0)

    def set_flow(self, u: int, v: int, f: float) -> None:
        if u == v:
            raise ValueError("no flow on loops")
        key = (u, v) if u < v else (v, u)
        if key not in self.graph.conduct:
            raise ValueError(f"({u},{v}) is not a graph edge")
        if u < v:
            self.values[(u, v)] = f
        else:
            self.values[(v, u)] = -f

    def add(self, other: "FlowAssignment", scale: float = 1.0) -> "FlowAssignment":
        if other.graph is not self.graph:
            raise ValueError("flows live on different graphs")
        out = FlowAssignment(self.graph, dict(self.values))
        for e, f in other.values.items():
            out.values[e] = out.values.get(e, 0.0) + scale * f
        return out

    def scaled(self, c: float) -> "FlowAssignment":
        return FlowAssignment(self.graph, {e: c * f for e, f in self.values.items()})

    def reversed(self) -> "FlowAssignment":
        return self.scaled(-1.0)

    def divergence(self) -> dict[int, float]:
        """Net outflow per vertex (only vertices touched by the support)."""
        div: dict[int, float] = {}
        for (u, v), f in self.values.items():
            if f == 0.0:
                continue
            div[u] = div.get(u, 0.0) + f
            div[v] = div.get(v, 0.0) - f
        return div

    def energy(self) -> float:
        """Sum of f(e)^2 / c(e) over the support."""
        total = 0.0
        for e, f in self.values.items():
            if f != 0.0:
                total += f * f / self.graph.conduct[e]
        return total

    def support(self) -> set[tuple[int, int]]:
        return {e for e, f in self.values.items() if f != 0.0}

    def vertices(self) -> set[int]:
        out = set()
        for (u, v), f in self.values.items():
            if f != 0.0:
                out.add(u)
                out.add(v)
        return out


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class ResistanceReport:
    d: int
    m: int
    n: int
    pair: str
    value: float
    residual: float
    iterations: int
    method: str

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


@dataclass
class Profile:
    d: int
    m: int
    family: str
    entries: dict[int, ResistanceReport] = field(default_factory=dict)

    def value(self, n: int) -> float:
        return self.entries[n].value

    def values(self) -> dict[int, float]:
        return {n: r.value for n, r in sorted(self.entries.items())}

    def to_csv(self) -> str:
        lines = [f"# schema=mothergroups.profile.v1 d={self.d} m={self.m}"
                 f" family={self.family}", "n,value,residual,iters"]
        for n, r in sorted(self.entries.items()):
            lines.append(f"{n},{r.value:.12g},{r.residual:.3g},{r.iterations}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Laplacian solves
# ---------------------------------------------------------------------------

def _laplacian_coo(num_vertices: int, conduct: dict[tuple[int, int], int]):
    rows, cols, vals = [], [], []
    for (u, v), c in conduct.items():
        rows += [u, v, u, v]
        cols += [v, u, u, v]
        vals += [-float(c), -float(c), float(c), float(c)]
    return sp.coo_matrix((vals, (rows, cols)),
                         shape=(num_vertices, num_vertices)).tocsr()


def _contract(graph: SchreierGraph, groups: Sequence[Sequence[int]]
              ) -> tuple[dict[tuple[int, int], float], np.ndarray, int]:
    """Merge each vertex group into one supernode.

    Returns (conductances on the contracted graph, vertex -> node map,
    node count).  Groups take node ids 0..len(groups)-1.
    """
    node_of = np.full(graph.num_vertices, -1, dtype=np.int64)
    for gi, grp in enumerate(groups):
        for v in grp:
            if node_of[v] != -1:
                raise ValueError("terminal sets overlap")
            node_of[v] = gi
    nxt = len(groups)
    for v in range(graph.num_vertices):
        if node_of[v] == -1:
            node_of[v] = nxt
            nxt += 1
    cond: dict[tuple[int, int], float] = {}
    for (u, v), c in graph.conduct.items():
        a, b = int(node_of[u]), int(node_of[v])
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        cond[key] = cond.get(key, 0.0) + c
    return cond, node_of, nxt


def _solve_grounded(cond: dict[tuple[int, int], float], nodes: int,
                    injection: np.ndarray, ground: int, tol: float
                    ) -> tuple[np.ndarray, float, int, str]:
    """Solve L phi = injection with phi[ground] = 0.

    Returns (potentials, relative residual of the full system, iterations,
    method).  Dense below DENSE_LIMIT, otherwise preconditioned CG.
    """
    L = _laplacian_coo(nodes, cond)
    keep = np.array([i for i in range(nodes) if i != ground], dtype=np.int64)
    A = L[keep][:, keep].tocsr()
    b = injection[keep]
    iters = 0
    if nodes <= DENSE_LIMIT:
        x = np.linalg.solve(A.toarray(), b)
        method = "dense"
    else:
        diag = A.diagonal()
        M = sp.diags(1.0 / diag)

        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=200 * nodes,
                          M=M, callback=cb)
        iters = count[0]
        if info != 0:
            raise SolverError(f"conjugate gradient failed (info={info})")
        method = "pcg"
    phi = np.zeros(nodes)
    phi[keep] = x
    res_vec = L @ phi - injection
    bnorm = np.linalg.norm(injection)
    residual = float(np.linalg.norm(res_vec) / bnorm) if bnorm else 0.0
    if residual > max(tol * 100, 1e-8):
        raise SolverError(f"residual {residual:.3e} above tolerance")
    return phi, residual, iters, method


def effective_resistance(graph: SchreierGraph, A: Iterable[int], B: Iterable[int],
                         tol: float = DEFAULT_TOL) -> ResistanceReport:
    """Resistance between vertex sets, each contracted to a supernode."""
    A = sorted(set(A))
    B = sorted(set(B))
    if not A or not B:
        raise ValueError("terminal sets must be nonempty")
    label = f"{A}->{B}"
    if A == B:
        return ResistanceReport(graph.d, graph.m, graph.n, label, 0.0, 0.0, 0, "guard")
    if set(A) & set(B):
        raise ValueError("terminal sets overlap")
    comp = graph.components()
    if len({int(comp[v]) for v in A} | {int(comp[v]) for v in B}) > 1:
        return ResistanceReport(graph.d, graph.m, graph.n, label,
                                math.inf, 0.0, 0, "disconnected")
    cond, _, nodes = _contract(graph, [A, B])
    injection = np.zeros(nodes)
    injection[0] = 1.0
    injection[1] = -1.0
    phi, residual, iters, method = _solve_grounded(cond, nodes, injection, 1, tol)
    return ResistanceReport(graph.d, graph.m, graph.n, label,
                            float(phi[0]), residual, iters, method)


def current_flow(graph: SchreierGraph, A: Iterable[int], B: Iterable[int],
                 tol: float = DEFAULT_TOL) -> FlowAssignment:
    """Unit current flow between contracted terminal sets."""
    A = sorted(set(A))
    B = sorted(set(B))
    cond, node_of, nodes = _contract(graph, [A, B])
    injection = np.zeros(nodes)
    injection[0] = 1.0
    injection[1] = -1.0
    phi, _, _, _ = _solve_grounded(cond, nodes, injection, 1, tol)
    pot = phi[node_of]
    flow = FlowAssignment(graph)
    for (u, v), c in graph.conduct.items():
        f = c * (pot[u] - pot[v])
        if f != 0.0:
            flow.values[(u, v)] = f
    return flow


def current_flow_between_measures(graph: SchreierGraph,
                                  sources: dict[int, float],
                                  sinks: dict[int, float],
                                  tol: float = DEFAULT_TOL) -> FlowAssignment:
    """Current flow whose divergence is +sources and -sinks pointwise.

    No contraction happens, so this equals the average of pairwise unit
    current flows weighted by the product measure (current is linear in
    the injection vector).
    """
    if abs(sum(sources.values()) - 1.0) > 1e-12 or abs(sum(sinks.values()) - 1.0) > 1e-12:
        raise ValueError("source and sink measures must each have mass 1")
    injection = np.zeros(graph.num_vertices)
    for v, w in sources.items():
        injection[v] += w
    for v, w in sinks.items():
        injection[v] -= w
    ground = next(iter(sinks))
    phi, _, _, _ = _solve_grounded(
        {e: float(c) for e, c in graph.conduct.items()},
        graph.num_vertices, injection, ground, tol)
    flow = FlowAssignment(graph)
    for (u, v), c in graph.conduct.items():
        f = c * (phi[u] - phi[v])
        if f != 0.0:
            flow.values[(u, v)] = f
    return flow


# ---------------------------------------------------------------------------
# Dense pseudoinverse oracle
# ---------------------------------------------------------------------------

def dense_resistance(graph: SchreierGraph, A: Iterable[int], B: Iterable[int]) -> float:
    """Independent cross-check via the Laplacian pseudoinverse."""
    A = sorted(set(A))
    B = sorted(set(B))
    if A == B:
        return 0.0
    cond, _, nodes = _contract(graph, [A, B])
    if nodes > 6000:
        raise ValueError("dense oracle limited to small graphs")
    L = _laplacian_coo(nodes, cond).toarray()
    pinv = np.linalg.pinv(L)
    e = np.zeros(nodes)
    e[0], e[1] = 1.0, -1.0
    return float(e @ pinv @ e)


def grounded_inverse(graph: SchreierGraph, ground: int = 0) -> np.ndarray:
    """Full inverse of the Laplacian with one vertex grounded.

    res(u, v) = G[u,u] + G[v,v] - 2 G[u,v] with G indexed by original
    vertices (row/col of the ground vertex are zero).
    """
    L = _laplacian_coo(graph.num_vertices,
                       {e: float(c) for e, c in graph.conduct.items()})
    keep = np.array([i for i in range(graph.num_vertices) if i != ground])
    Ad = L[keep][:, keep].toarray()
    inv = np.linalg.inv(Ad)
    G = np.zeros((graph.num_vertices, graph.num_vertices))
    G[np.ix_(keep, keep)] = inv
    return G


def pair_resistance_from_inverse(G: np.ndarray, u: int, v: int) -> float:
    return float(G[u, u] + G[v, v] - 2.0 * G[u, v])


# ---------------------------------------------------------------------------
# Gray code structure of the degree-0 binary graph
# ---------------------------------------------------------------------------

def graycode_index(v: int, m: int = 2) -> int:
    """Path position of a vertex of the degree-0 binary graph.

    Bit k of the result is the parity of the input bits at positions
    >= k; this is the standard Gray-code decode and is bijective.
    """
    if m != 2:
        raise ValueError("gray coding applies to the binary alphabet only")
    out = v
    v >>= 1
    while v:
        out ^= v
        v >>= 1
    return out


# ---------------------------------------------------------------------------
# Profiles and searches
# ---------------------------------------------------------------------------

PAIR_FAMILIES = ("root-antiroot", "root-antiroot-set")


def terminal_sets(family: str, n: int, m: int) -> tuple[list[int], list[int]]:
    if family == "root-antiroot":
        return [root(n)], [antiroot(n, m)]
    if family == "root-antiroot-set":
        return [root(n)], antiroot_set(n, m)
    raise ValueError(f"unknown pair family {family!r};"
                     f" expected one of {PAIR_FAMILIES}")


def resistance_profile(p: ModelParams, family: str, n_values: Iterable[int],
                       tol: float = DEFAULT_TOL,
                       graphs: Optional[dict[int, SchreierGraph]] = None,
                       threads: int = 1) -> Profile:
    """One resistance report per level, for a fixed terminal family."""
    n_values = sorted(set(n_values))
    for n in n_values:
        terminal_sets(family, n, p.m)  # validate family before any work
    prof = Profile(p.d, p.m, family)

    def solve_one(n: int) -> tuple[int, ResistanceReport]:
        g = graphs[n] if graphs and n in graphs else build_graph(p, n)
        A, B = terminal_sets(family, n, p.m)
        return n, effective_resistance(g, A, B, tol)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(solve_one, n_values))
    else:
        results = [solve_one(n) for n in n_values]
    for n, rep in sorted(results):
        prof.entries[n] = rep
    return prof


def max_resistance_search(p: ModelParams, n: int, mode: str = "exhaustive",
                          budget: int = 200,
                          rng: Optional[np.random.Generator] = None
                          ) -> dict:
    """Search for the resistance-maximizing vertex pair.

    Exhaustive mode scans all pairs through the grounded inverse and is
    limited to m^n <= 1024; sampled mode tries the root/antiroot pair,
    far-apart BFS pairs, and random pairs up to the budget.
    """
    g = build_graph(p, n)
    N = g.num_vertices
    o, ob = root(n), antiroot(n, p.m)
    if mode == "exhaustive":
        if N > 1024:
            raise ValueError("exhaustive search limited to 1024 vertices")
        G = grounded_inverse(g)
        diag = np.diag(G)
        R = diag[:, None] + diag[None, :] - 2 * G
        best = np.unravel_index(np.argmax(R), R.shape)
        best_pair = (int(min(best)), int(max(best)))
        best_val = float(R[best])
        root_val = float(R[o, ob])
        return {
            "pair": best_pair,
            "value": best_val,
            "root_antiroot_value": root_val,
            "root_antiroot_attains_max": bool(abs(root_val - best_val) <= 1e-9 * max(1.0, best_val)),
            "mode": mode,
        }
    if mode != "sampled":
        raise ValueError("mode must be 'exhaustive' or 'sampled'")
    if rng is None:
        rng = np.random.default_rng(0)
    from .schreier import _bfs_distances
    adj = g.adjacency()
    far = int(np.argmax(_bfs_distances(adj, o)))
    candidates = {(min(o, ob), max(o, ob)), (min(o, far), max(o, far))}
    while len(candidates) < budget:
        u, v = int(rng.integers(N)), int(rng.integers(N))
        if u != v:
            candidates.add((min(u, v), max(u, v)))
    best_pair, best_val = None, -1.0
    root_val = None
    for (u, v) in sorted(candidates):
        val = effective_resistance(g, [u], [v]).value
        if (u, v) == (min(o, ob), max(o, ob)):
            root_val = val
        if val > best_val:
            best_pair, best_val = (u, v), val
    return {
        "pair": best_pair,
        "value": best_val,
        "root_antiroot_value": root_val,
        "root_antiroot_attains_max": bool(abs(root_val - best_val) <= 1e-9 * max(1.0, best_val)),
        "mode": mode,
    }
