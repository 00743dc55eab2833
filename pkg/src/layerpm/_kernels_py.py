"""Pure-Python graph kernels.

Twin of the compiled `_kernels_c` extension: identical signatures and
results, selected by `layerpm.kernels` when the extension is unavailable
(or forced via LAYERPM_KERNELS=py).

Graphs arrive in CSR form: node ids are 0..n-1, `indices[indptr[u]:indptr[u+1]]`
are the dependencies of u (edge u -> v means "u depends on v").
"""

from __future__ import annotations

import heapq


def closure(n, indptr, indices, roots):
    """Nodes reachable from `roots` along dep edges, as a sorted id list."""
    seen = bytearray(n)
    stack = []
    for r in roots:
        if not seen[r]:
            seen[r] = 1
            stack.append(r)
    while stack:
        u = stack.pop()
        for i in range(indptr[u], indptr[u + 1]):
            v = indices[i]
            if not seen[v]:
                seen[v] = 1
                stack.append(v)
    return [u for u in range(n) if seen[u]]


def reverse_closure(n, indptr, indices, roots):
    """Nodes reaching `roots` along dep edges (i.e. roots plus all
    transitive dependents), as a sorted id list."""
    rindptr, rindices = _reverse(n, indptr, indices)
    return closure(n, rindptr, rindices, roots)


def lex_topo(n, indptr, indices, sub):
    """Lexicographically-smallest topological order of the subgraph induced
    by `sub`, dependencies first.

    Returns fewer than len(sub) ids iff the induced subgraph has a cycle.
    """
    in_sub = bytearray(n)
    for u in sub:
        in_sub[u] = 1
    pending = _dep_counts(indptr, indices, sub, in_sub)
    rev = _reverse_in_sub(indptr, indices, sub, in_sub)
    heap = [u for u in sub if pending[u] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for w in rev.get(u, ()):
            pending[w] -= 1
            if pending[w] == 0:
                heapq.heappush(heap, w)
    return order


def kahn_layers(n, indptr, indices, sub):
    """Antichain layers of the subgraph induced by `sub`: each layer is the
    sorted list of nodes whose in-`sub` dependencies all sit in earlier
    layers. Covers fewer than len(sub) ids iff there is a cycle."""
    in_sub = bytearray(n)
    for u in sub:
        in_sub[u] = 1
    pending = _dep_counts(indptr, indices, sub, in_sub)
    rev = _reverse_in_sub(indptr, indices, sub, in_sub)
    ready = sorted(u for u in sub if pending[u] == 0)
    layers = []
    while ready:
        layers.append(ready)
        nxt = []
        for u in ready:
            for w in rev.get(u, ()):
                pending[w] -= 1
                if pending[w] == 0:
                    nxt.append(w)
        ready = sorted(nxt)
    return layers


def _dep_counts(indptr, indices, sub, in_sub):
    pending = {}
    for u in sub:
        c = 0
        for i in range(indptr[u], indptr[u + 1]):
            if in_sub[indices[i]]:
                c += 1
        pending[u] = c
    return pending


def _reverse_in_sub(indptr, indices, sub, in_sub):
    rev = {}
    for u in sub:
        for i in range(indptr[u], indptr[u + 1]):
            v = indices[i]
            if in_sub[v]:
                rev.setdefault(v, []).append(u)
    return rev


def _reverse(n, indptr, indices):
    counts = [0] * (n + 1)
    for v in indices:
        counts[v + 1] += 1
    for i in range(n):
        counts[i + 1] += counts[i]
    rindptr = counts[:]
    rindices = [0] * len(indices)
    fill = rindptr[:]
    for u in range(n):
        for i in range(indptr[u], indptr[u + 1]):
            v = indices[i]
            rindices[fill[v]] = u
            fill[v] += 1
    return rindptr, rindices
