"""Ring membership, Kekulé assignment and aromaticity perception on plain graphs.

Graphs are given as an atom count plus a list of ``(a, b)`` edges; callers keep
their own bond payloads and use the returned edge indices.
"""

from __future__ import annotations

from collections.abc import Sequence

MAX_AROMATIC_CYCLE = 10


def adjacency(n_atoms: int, edges: Sequence[tuple[int, int]]) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n_atoms)]
    for k, (a, b) in enumerate(edges):
        adj[a].append((b, k))
        adj[b].append((a, k))
    return adj


def ring_edges(n_atoms: int, edges: Sequence[tuple[int, int]]) -> set[int]:
    """Indices of edges lying on at least one cycle (i.e. the non-bridges)."""
    adj = adjacency(n_atoms, edges)
    disc = [-1] * n_atoms
    low = [0] * n_atoms
    bridges: set[int] = set()
    t = 0
    for root in range(n_atoms):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = t
        t += 1
        # iterative Tarjan bridge search
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            u, via, it = stack[-1]
            advanced = False
            for v, k in it:
                if k == via:
                    continue
                if disc[v] == -1:
                    disc[v] = low[v] = t
                    t += 1
                    stack.append((v, k, iter(adj[v])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if advanced:
                continue
            stack.pop()
            if stack:
                p = stack[-1][0]
                low[p] = min(low[p], low[u])
                if low[u] > disc[p]:
                    bridges.add(via)
    return set(range(len(edges))) - bridges


def perfect_matching(nodes: Sequence[int], adj: dict[int, list[tuple[int, int]]],
                     budget: int = 200_000) -> dict[int, int] | None:
    """Match every node to a neighbour; returns node -> edge index or None.

    Backtracking with most-constrained-first ordering; aromatic systems are
    small and of low degree so this stays fast in practice.
    """
    matched: dict[int, int] = {}
    pending = set(nodes)
    steps = 0

    def options(u: int) -> list[tuple[int, int]]:
        return [(v, k) for v, k in adj.get(u, ()) if v in pending and v != u]

    def solve() -> bool:
        nonlocal steps
        if not pending:
            return True
        steps += 1
        if steps > budget:
            return False
        u = min(pending, key=lambda x: (len(options(x)), x))
        opts = options(u)
        if not opts:
            return False
        for v, k in opts:
            pending.discard(u)
            pending.discard(v)
            matched[u] = matched[v] = k
            if solve():
                return True
            pending.add(u)
            pending.add(v)
            del matched[u], matched[v]
        return False

    return dict(matched) if solve() else None


class CycleSearchTooLarge(RuntimeError):
    pass


def simple_cycles(nodes: set[int], adj: list[list[tuple[int, int]]], edge_ok: set[int],
                  max_len: int = MAX_AROMATIC_CYCLE,
                  limit: int = 500_000) -> list[tuple[tuple[int, ...], frozenset[int]]]:
    """All simple cycles (up to ``max_len`` atoms) within ``nodes`` using ``edge_ok`` edges."""
    found: dict[frozenset[int], tuple[int, ...]] = {}
    steps = 0
    for start in sorted(nodes):
        # only cycles whose smallest atom is ``start``
        stack = [(start, [start], [])]
        while stack:
            u, path, epath = stack.pop()
            for v, k in adj[u]:
                if k not in edge_ok or v not in nodes or v < start:
                    continue
                if v == start and len(path) >= 3:
                    key = frozenset(epath + [k])
                    if key not in found:
                        found[key] = tuple(path)
                    continue
                if v in path or len(path) >= max_len:
                    continue
                steps += 1
                if steps > limit:
                    raise CycleSearchTooLarge(steps)
                stack.append((v, path + [v], epath + [k]))
    return [(atoms, ekeys) for ekeys, atoms in found.items()]
