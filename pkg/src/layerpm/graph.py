"""Name-level dependency graph over the int-id kernels.

`DepGraph` maps package names to dense ids (in sorted name order, so the
kernels' smallest-id tie-breaking is lexicographic name order) and builds
the CSR buffers the kernels consume. Cold-path analyses that are only run
to explain errors (cycle extraction, path enumeration) live here in plain
Python.
"""

from __future__ import annotations

from array import array
from collections.abc import Iterable, Mapping

from layerpm import kernels
from layerpm.errors import CycleError


class DepGraph:
    """Immutable dependency graph: edge (u, v) reads "u depends on v"."""

    def __init__(self, names: Iterable[str], edges: Iterable[tuple[str, str]]):
        self.names: list[str] = sorted(names)
        self.index: dict[str, int] = {n: i for i, n in enumerate(self.names)}
        adj: list[list[int]] = [[] for _ in self.names]
        for frm, to in edges:
            adj[self.index[frm]].append(self.index[to])
        indptr = array("i", [0])
        indices = array("i")
        for row in adj:
            row.sort()
            indices.extend(row)
            indptr.append(len(indices))
        self._indptr = indptr
        self._indices = indices

    @classmethod
    def from_deps(cls, deps: Mapping[str, Iterable[str]]) -> "DepGraph":
        edges = [(name, d) for name, ds in deps.items() for d in ds]
        return cls(deps.keys(), edges)

    def __len__(self) -> int:
        return len(self.names)

    def _ids(self, names: Iterable[str]) -> array:
        return array("i", sorted(self.index[n] for n in set(names)))

    def closure(self, roots: Iterable[str]) -> set[str]:
        """All packages transitively required by `roots` (roots included)."""
        ids = kernels.closure(len(self.names), self._indptr, self._indices, self._ids(roots))
        return {self.names[i] for i in ids}

    def reverse_closure(self, roots: Iterable[str]) -> set[str]:
        """`roots` plus every package that transitively depends on one."""
        ids = kernels.reverse_closure(len(self.names), self._indptr, self._indices, self._ids(roots))
        return {self.names[i] for i in ids}

    def lex_topo(self, sub: Iterable[str] | None = None) -> list[str]:
        """Dependencies-first order of `sub` (default: all nodes), smallest
        name first among ready nodes. Raises CycleError on a cyclic input."""
        ids = self._ids(sub if sub is not None else self.names)
        order = kernels.lex_topo(len(self.names), self._indptr, self._indices, ids)
        if len(order) != len(ids):
            raise CycleError("dependency graph contains a cycle")
        return [self.names[i] for i in order]

    def layers(self, sub: Iterable[str] | None = None) -> list[list[str]]:
        """Kahn antichain layering of `sub`; each layer sorted by name."""
        ids = self._ids(sub if sub is not None else self.names)
        raw = kernels.kahn_layers(len(self.names), self._indptr, self._indices, ids)
        if sum(len(layer) for layer in raw) != len(ids):
            raise CycleError("dependency graph contains a cycle")
        return [[self.names[i] for i in layer] for layer in raw]


def simple_paths(
    adj: Mapping[str, Iterable[str]],
    sources: Iterable[str],
    target: str,
    limit: int = 1000,
) -> tuple[list[list[str]], bool]:
    """Every simple path from any source to `target` along `adj` edges,
    sorted lexicographically. A source equal to `target` contributes the
    single-node path. Stops after `limit` paths; second value reports
    whether truncation happened."""
    paths: list[list[str]] = []
    truncated = False

    def walk(node: str, trail: list[str]) -> bool:
        if len(paths) >= limit:
            return False
        if node == target:
            paths.append(trail.copy())
            return len(paths) < limit
        for nxt in sorted(adj.get(node, ())):
            if nxt in trail:
                continue
            trail.append(nxt)
            alive = walk(nxt, trail)
            trail.pop()
            if not alive:
                return False
        return True

    for src in sorted(set(sources)):
        if not walk(src, [src]):
            truncated = True
            break
    paths.sort()
    return paths, truncated


def shortest_path(adj: Mapping[str, Iterable[str]], sources: Iterable[str], target: str) -> list[str] | None:
    """Deterministic shortest path from any source to `target` (BFS with
    sorted expansion); None if unreachable."""
    srcs = sorted(set(sources))
    parent: dict[str, str | None] = {s: None for s in srcs}
    queue = list(srcs)
    while queue:
        node = queue.pop(0)
        if node == target:
            out = [node]
            while parent[out[-1]] is not None:
                out.append(parent[out[-1]])  # type: ignore[arg-type]
            out.reverse()
            return out
        for nxt in sorted(adj.get(node, ())):
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    return None


def canonical_cycles(deps: Mapping[str, Iterable[str]]) -> list[list[str]]:
    """One representative cycle per strongly connected component, as a
    closed path starting (and ending) at the component's lexicographically
    smallest member; the representative is the shortest such cycle, ties
    broken lexicographically. Components are returned sorted by their
    smallest member."""
    sccs = [scc for scc in _tarjan(deps) if len(scc) > 1 or _self_loop(deps, scc)]
    cycles = []
    for scc in sorted(sccs, key=min):
        start = min(scc)
        members = set(scc)
        if len(scc) == 1:
            cycles.append([start, start])
            continue
        dist = _dist_to(deps, members, start)
        path = [start]
        node = start
        remaining = min(dist[d] for d in deps.get(start, ()) if d in dist)
        while remaining >= 0:
            node = min(d for d in deps.get(node, ()) if dist.get(d) == remaining)
            path.append(node)
            remaining -= 1
        cycles.append(path)
    return cycles


def _self_loop(deps: Mapping[str, Iterable[str]], scc: list[str]) -> bool:
    return scc[0] in deps.get(scc[0], ())


def _dist_to(deps: Mapping[str, Iterable[str]], members: set[str], start: str) -> dict[str, int]:
    """Dep-edge distance from each member to `start` (BFS on reversed edges)."""
    rev: dict[str, list[str]] = {m: [] for m in members}
    for u in members:
        for v in deps.get(u, ()):
            if v in members:
                rev[v].append(u)
    dist = {start: 0}
    queue = [start]
    while queue:
        node = queue.pop(0)
        for prev in rev[node]:
            if prev not in dist:
                dist[prev] = dist[node] + 1
                queue.append(prev)
    return dist


def _tarjan(deps: Mapping[str, Iterable[str]]) -> list[list[str]]:
    """Iterative Tarjan SCC over the dep relation."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = 0

    for root in sorted(deps):
        if root in index:
            continue
        work: list[tuple[str, list[str], int]] = [(root, sorted(deps.get(root, ())), 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, succs, i = work.pop()
            advanced = False
            while i < len(succs):
                nxt = succs[i]
                i += 1
                if nxt not in deps:
                    continue
                if nxt not in index:
                    work.append((node, succs, i))
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, sorted(deps.get(nxt, ())), 0))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            if low[node] == index[node]:
                scc = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    scc.append(member)
                    if member == node:
                        break
                sccs.append(sorted(scc))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return sccs
