"""Exact Word Mover's Distance via the transportation simplex.

The solver works on the bipartite transportation graph (rows = source
words, columns = sink words). A basis is a spanning tree of m + n - 1 arcs;
each pivot prices all arcs against the tree's node potentials, brings in the
most negative reduced cost (Dantzig), and pivots around the unique tree cycle.
After a run of degenerate pivots the solver switches to Bland's rule
(lowest-index entering and leaving arcs) until the objective moves again,
which rules out cycling.
"""
from __future__ import annotations

import itertools
from math import gcd
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .embedding import cosine_distance_matrix
from .errors import DimensionMismatch, TooLarge
from .signature import Signature

OPTIMALITY_TOL = 1e-11
_FLOW_EPS = 1e-15
ORACLE_MAX_SIDE = 4


@dataclass(frozen=True)
class TransportPlan:
    flow: np.ndarray
    cost: float


class _Tree:
    """Spanning-tree basis over m row nodes and n column nodes (ids m..m+n-1)."""

    def __init__(self, m: int, n: int, cost: list[list[float]]):
        self.m, self.n = m, n
        self.cost = cost
        self.adj: list[set[int]] = [set() for _ in range(m + n)]
        self.flow: dict[tuple[int, int], float] = {}

    def add(self, i: int, j: int, x: float) -> None:
        self.adj[i].add(self.m + j)
        self.adj[self.m + j].add(i)
        self.flow[(i, j)] = x

    def remove(self, i: int, j: int) -> None:
        self.adj[i].discard(self.m + j)
        self.adj[self.m + j].discard(i)
        del self.flow[(i, j)]

    def arc(self, p: int, q: int) -> tuple[int, int]:
        return (p, q - self.m) if p < self.m else (q, p - self.m)

    def potentials(self):
        """Node potentials with u[0] = 0, plus parent/depth for path queries."""
        m, cost = self.m, self.cost
        size = m + self.n
        pot = [0.0] * size
        parent = [-1] * size
        depth = [0] * size
        stack = [0]
        seen = [False] * size
        seen[0] = True
        while stack:
            x = stack.pop()
            px = pot[x]
            for y in self.adj[x]:
                if seen[y]:
                    continue
                seen[y] = True
                parent[y] = x
                depth[y] = depth[x] + 1
                pot[y] = (cost[x][y - m] if x < m else cost[y][x - m]) - px
                stack.append(y)
        if not all(seen):
            raise RuntimeError("basis is not a spanning tree")
        return pot, parent, depth

    def reroot(self, leaving, entering, pot, parent, depth) -> None:
        """Refresh potentials/parents/depths after a pivot, in place.

        Dropping the leaving arc cuts off the subtree below it; only that
        subtree changes, and it now hangs from the entering arc.
        """
        m = self.m
        li, lj = leaving
        child = m + lj if parent[m + lj] == li else li
        below = {child}
        stack = [child]
        while stack:
            x = stack.pop()
            for y in self.adj[x]:
                if y not in below and parent[y] == x:
                    below.add(y)
                    stack.append(y)
        ei, ej = entering
        inner, outer = (ei, m + ej) if ei in below else (m + ej, ei)
        cost = self.cost
        parent[inner] = outer
        depth[inner] = depth[outer] + 1
        pot[inner] = cost[ei][ej] - pot[outer]
        stack = [inner]
        while stack:
            x = stack.pop()
            px, dx = pot[x], depth[x] + 1
            for y in self.adj[x]:
                if y == parent[x]:
                    continue
                parent[y] = x
                depth[y] = dx
                pot[y] = (cost[x][y - m] if x < m else cost[y][x - m]) - px
                stack.append(y)

    @staticmethod
    def path(a: int, b: int, parent: list[int], depth: list[int]) -> list[int]:
        up_a, up_b = [a], [b]
        while depth[a] > depth[b]:
            a = parent[a]
            up_a.append(a)
        while depth[b] > depth[a]:
            b = parent[b]
            up_b.append(b)
        while a != b:
            a, b = parent[a], parent[b]
            up_a.append(a)
            up_b.append(b)
        return up_a + up_b[-2::-1]


def _initial_basis(a: np.ndarray, b: np.ndarray, cost: np.ndarray, tree: _Tree) -> None:
    # Greedy least-cost start: every allocation closes exactly one row or
    # column, which yields m + n - 1 arcs forming a spanning tree.
    m, n = cost.shape
    supply, demand = a.tolist(), b.tolist()
    row_closed, col_closed = [False] * m, [False] * n
    rows_open, cols_open = m, n
    for flat in np.argsort(cost, axis=None, kind="stable").tolist():
        i, j = divmod(flat, n)
        if row_closed[i] or col_closed[j]:
            continue
        x = max(min(supply[i], demand[j]), 0.0)
        tree.add(i, j, x)
        supply[i] -= x
        demand[j] -= x
        if (supply[i] <= demand[j] and rows_open > 1) or cols_open == 1:
            row_closed[i] = True
            rows_open -= 1
        else:
            col_closed[j] = True
            cols_open -= 1
        if len(tree.flow) == m + n - 1:
            return


def solve_transport(
    a, b, cost, max_degenerate: int | None = None
) -> TransportPlan:
    """Minimum-cost flow from supplies *a* to demands *b* over *cost*.

    *a* and *b* must be positive with equal totals (checked to 1e-9).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cost = np.asarray(cost, dtype=np.float64)
    m, n = cost.shape
    if a.shape != (m,) or b.shape != (n,):
        raise DimensionMismatch(f"marginals {a.shape}, {b.shape} vs cost {cost.shape}")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("marginals must be strictly positive")
    if abs(a.sum() - b.sum()) > 1e-9 * max(1.0, a.sum()):
        raise ValueError(f"unbalanced marginals: {a.sum()} vs {b.sum()}")
    b = b * (a.sum() / b.sum())

    tree = _Tree(m, n, cost.tolist())
    _initial_basis(a, b, cost, tree)
    if max_degenerate is None:
        max_degenerate = m + n
    degenerate_run = 0
    bland = False
    max_pivots = 50 * m * n + 1000

    pot, parent, depth = tree.potentials()
    for _ in range(max_pivots):
        u = np.array(pot[:m])
        v = np.array(pot[m:])
        reduced = cost - u[:, None] - v[None, :]
        if bland:
            candidates = np.flatnonzero(reduced < -OPTIMALITY_TOL)
            if candidates.size == 0:
                break
            flat = int(candidates[0])
        else:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -OPTIMALITY_TOL:
                break
        ei, ej = divmod(flat, n)

        # tree path from the entering column back to the entering row;
        # its arcs alternate -, +, -, ... starting at the column
        nodes = tree.path(m + ej, ei, parent, depth)
        arcs = [tree.arc(p, q) for p, q in zip(nodes, nodes[1:])]
        minus, plus = arcs[0::2], arcs[1::2]
        theta = min(tree.flow[arc] for arc in minus)
        leaving = min(
            (arc for arc in minus if tree.flow[arc] <= theta),
            key=lambda arc: arc[0] * n + arc[1],
        )
        for arc in plus:
            tree.flow[arc] += theta
        for arc in minus:
            x = tree.flow[arc] - theta
            tree.flow[arc] = x if x > _FLOW_EPS else 0.0
        tree.remove(*leaving)
        tree.add(ei, ej, theta)
        tree.reroot(leaving, (ei, ej), pot, parent, depth)

        if theta > 0.0:
            degenerate_run = 0
            bland = False
        else:
            degenerate_run += 1
            if degenerate_run > max_degenerate:
                bland = True
    else:
        raise RuntimeError("transportation simplex hit its pivot limit")

    flow = np.zeros((m, n))
    for (i, j), x in tree.flow.items():
        flow[i, j] = x
    return TransportPlan(flow, float(np.sum(flow * cost)))


def wmd(a: Signature, b: Signature) -> tuple[float, TransportPlan]:
    """Word Mover's Distance between two signatures under cosine ground distance."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"signature dims {a.dim} vs {b.dim}")
    cost = cosine_distance_matrix(a.vectors, b.vectors)
    plan = solve_transport(a.weights, b.weights, cost)
    return float(np.clip(plan.cost, 0.0, 2.0)), plan


def similarity(a: Signature, b: Signature) -> float:
    """1 - wmd/2: 1 for identical signatures, 0 for antipodal ones."""
    distance, _ = wmd(a, b)
    return float(np.clip(1.0 - distance / 2.0, 0.0, 1.0))


def _spanning_tree(cells, m: int, n: int) -> bool:
    parent = list(range(m + n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in cells:
        ri, rj = find(i), find(m + j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True


def _tree_flows(cells, supply: list[int], demand: list[int], m: int):
    """Flows on a spanning-tree basis by repeatedly peeling leaf nodes."""
    residual = supply + demand
    incident: dict[int, set] = {}
    for cell in cells:
        incident.setdefault(cell[0], set()).add(cell)
        incident.setdefault(m + cell[1], set()).add(cell)
    flows = {}
    leaves = [v for v, arcs in incident.items() if len(arcs) == 1]
    while leaves:
        node = leaves.pop()
        if len(incident[node]) != 1:
            continue
        cell = incident[node].pop()
        x = residual[node]
        flows[cell] = x
        other = m + cell[1] if node == cell[0] else cell[0]
        residual[other] -= x
        incident[other].discard(cell)
        if len(incident[other]) == 1:
            leaves.append(other)
    return flows


def _common_scale(values: list[Fraction]) -> tuple[list[int], int]:
    den = 1
    for v in values:
        den = den * v.denominator // gcd(den, v.denominator)
    return [v.numerator * (den // v.denominator) for v in values], den


def oracle_emd(weights_a, weights_b, cost_matrix) -> float:
    """Transport optimum by enumerating every basic feasible solution.

    Inputs are taken as exact rationals and each side is renormalized to
    total 1. Scaling supplies by the other side's total keeps every basic
    solution integral, so all arithmetic is exact integer arithmetic.
    Only for tiny instances.
    """
    m, n = len(weights_a), len(weights_b)
    if m > ORACLE_MAX_SIDE or n > ORACLE_MAX_SIDE:
        raise TooLarge(f"oracle limited to {ORACLE_MAX_SIDE}x{ORACLE_MAX_SIDE}, got {m}x{n}")
    if m == 0 or n == 0:
        raise ValueError("empty marginal")
    if len(cost_matrix) != m or any(len(row) != n for row in cost_matrix):
        raise DimensionMismatch("cost matrix shape does not match the marginals")
    a_int, _ = _common_scale([Fraction(float(w)) for w in weights_a])
    b_int, _ = _common_scale([Fraction(float(w)) for w in weights_b])
    if min(a_int) < 0 or min(b_int) < 0:
        raise ValueError("negative weight")
    total_a, total_b = sum(a_int), sum(b_int)
    supply = [x * total_b for x in a_int]
    demand = [x * total_a for x in b_int]
    flat, cost_den = _common_scale([Fraction(float(c)) for row in cost_matrix for c in row])
    cost = [flat[i * n : (i + 1) * n] for i in range(m)]

    cells = [(i, j) for i in range(m) for j in range(n)]
    best = None
    for basis in itertools.combinations(cells, m + n - 1):
        if len({i for i, _ in basis}) != m or len({j for _, j in basis}) != n:
            continue
        if not _spanning_tree(basis, m, n):
            continue
        flows = _tree_flows(basis, supply, demand, m)
        if any(x < 0 for x in flows.values()):
            continue
        total = sum(x * cost[i][j] for (i, j), x in flows.items())
        if best is None or total < best:
            best = total
    return float(Fraction(best, cost_den * total_a * total_b))
