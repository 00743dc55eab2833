# cython: language_level=3
# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled graph kernels.

Twin of `_kernels_py`: identical signatures and results. Graphs arrive in
CSR form over int ids (edge u -> v means "u depends on v"); id order is
the caller's name order, so "smallest id" below realizes lexicographic
tie-breaking.
"""

from cpython.mem cimport PyMem_Free, PyMem_Malloc
from libc.string cimport memset


cdef void* _xmalloc(size_t nbytes) except NULL:
    cdef void* p = PyMem_Malloc(nbytes if nbytes > 0 else 1)
    if p == NULL:
        raise MemoryError()
    return p


# ---------------------------------------------------------------------------
# int min-heap on a preallocated array

cdef inline void _heap_push(int* heap, int* size, int val) noexcept:
    cdef int i = size[0]
    cdef int parent, tmp
    heap[i] = val
    size[0] = i + 1
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= heap[i]:
            break
        tmp = heap[parent]
        heap[parent] = heap[i]
        heap[i] = tmp
        i = parent


cdef inline int _heap_pop(int* heap, int* size) noexcept:
    cdef int top = heap[0]
    cdef int i = 0
    cdef int child, tmp
    size[0] -= 1
    heap[0] = heap[size[0]]
    while True:
        child = 2 * i + 1
        if child >= size[0]:
            break
        if child + 1 < size[0] and heap[child + 1] < heap[child]:
            child += 1
        if heap[i] <= heap[child]:
            break
        tmp = heap[i]
        heap[i] = heap[child]
        heap[child] = tmp
        i = child
    return top


# ---------------------------------------------------------------------------
# CSR reversal into caller-provided buffers

cdef void _reverse_csr(int n, int m, int[:] indptr, int[:] indices,
                       int* rindptr, int* rindices):
    cdef int i, u, v, pos
    for i in range(n + 1):
        rindptr[i] = 0
    for i in range(m):
        rindptr[indices[i] + 1] += 1
    for i in range(n):
        rindptr[i + 1] += rindptr[i]
    cdef int* fill = <int*>PyMem_Malloc((n if n > 0 else 1) * sizeof(int))
    if fill == NULL:
        raise MemoryError()
    for i in range(n):
        fill[i] = rindptr[i]
    try:
        for u in range(n):
            for i in range(indptr[u], indptr[u + 1]):
                v = indices[i]
                pos = fill[v]
                rindices[pos] = u
                fill[v] = pos + 1
    finally:
        PyMem_Free(fill)


cdef list _dfs_collect(int n, int* iptr, int* idx, roots):
    """DFS over a raw CSR from `roots`; returns sorted list of visited ids."""
    cdef char* seen = <char*>_xmalloc(n if n > 0 else 1)
    cdef int* stack = <int*>_xmalloc((n if n > 0 else 1) * sizeof(int))
    cdef int top = 0
    cdef int r, u, i, v
    memset(seen, 0, n if n > 0 else 1)
    try:
        for r in roots:
            if not seen[r]:
                seen[r] = 1
                stack[top] = r
                top += 1
        while top > 0:
            top -= 1
            u = stack[top]
            for i in range(iptr[u], iptr[u + 1]):
                v = idx[i]
                if not seen[v]:
                    seen[v] = 1
                    stack[top] = v
                    top += 1
        return [u for u in range(n) if seen[u]]
    finally:
        PyMem_Free(stack)
        PyMem_Free(seen)


def closure(int n, int[:] indptr, int[:] indices, roots):
    """Nodes reachable from `roots` along dep edges, as a sorted id list."""
    cdef char* seen = <char*>_xmalloc(n if n > 0 else 1)
    cdef int* stack = <int*>_xmalloc((n if n > 0 else 1) * sizeof(int))
    cdef int top = 0
    cdef int r, u, i, v
    memset(seen, 0, n if n > 0 else 1)
    try:
        for r in roots:
            if not seen[r]:
                seen[r] = 1
                stack[top] = r
                top += 1
        while top > 0:
            top -= 1
            u = stack[top]
            for i in range(indptr[u], indptr[u + 1]):
                v = indices[i]
                if not seen[v]:
                    seen[v] = 1
                    stack[top] = v
                    top += 1
        return [u for u in range(n) if seen[u]]
    finally:
        PyMem_Free(stack)
        PyMem_Free(seen)


def reverse_closure(int n, int[:] indptr, int[:] indices, roots):
    """Nodes reaching `roots` along dep edges (roots plus all transitive
    dependents), as a sorted id list."""
    cdef int m = indices.shape[0]
    cdef int* rindptr = <int*>_xmalloc((n + 1) * sizeof(int))
    cdef int* rindices = <int*>_xmalloc((m if m > 0 else 1) * sizeof(int))
    try:
        _reverse_csr(n, m, indptr, indices, rindptr, rindices)
        return _dfs_collect(n, rindptr, rindices, roots)
    finally:
        PyMem_Free(rindices)
        PyMem_Free(rindptr)


def lex_topo(int n, int[:] indptr, int[:] indices, sub):
    """Lexicographically-smallest topological order of the subgraph induced
    by `sub`, dependencies first. Shorter output than `sub` means a cycle."""
    cdef int m = indices.shape[0]
    cdef char* in_sub = <char*>_xmalloc(n if n > 0 else 1)
    cdef int* pending = <int*>_xmalloc((n if n > 0 else 1) * sizeof(int))
    cdef int* rindptr = <int*>_xmalloc((n + 1) * sizeof(int))
    cdef int* rindices = <int*>_xmalloc((m if m > 0 else 1) * sizeof(int))
    cdef int* heap = <int*>_xmalloc((n if n > 0 else 1) * sizeof(int))
    cdef int heap_size = 0
    cdef int s, u, i, v, w, c
    cdef list order = []
    memset(in_sub, 0, n if n > 0 else 1)
    try:
        for s in sub:
            in_sub[s] = 1
        for u in range(n):
            if not in_sub[u]:
                continue
            c = 0
            for i in range(indptr[u], indptr[u + 1]):
                if in_sub[indices[i]]:
                    c += 1
            pending[u] = c
            if c == 0:
                _heap_push(heap, &heap_size, u)
        _reverse_csr(n, m, indptr, indices, rindptr, rindices)
        while heap_size > 0:
            u = _heap_pop(heap, &heap_size)
            order.append(u)
            for i in range(rindptr[u], rindptr[u + 1]):
                w = rindices[i]
                if in_sub[w]:
                    pending[w] -= 1
                    if pending[w] == 0:
                        _heap_push(heap, &heap_size, w)
        return order
    finally:
        PyMem_Free(heap)
        PyMem_Free(rindices)
        PyMem_Free(rindptr)
        PyMem_Free(pending)
        PyMem_Free(in_sub)


def kahn_layers(int n, int[:] indptr, int[:] indices, sub):
    """Antichain layers of the subgraph induced by `sub`: each layer is the
    sorted list of nodes whose in-`sub` dependencies all sit in earlier
    layers. Covering fewer than len(sub) ids means a cycle."""
    cdef int m = indices.shape[0]
    cdef char* in_sub = <char*>_xmalloc(n if n > 0 else 1)
    cdef int* pending = <int*>_xmalloc((n if n > 0 else 1) * sizeof(int))
    cdef int* rindptr = <int*>_xmalloc((n + 1) * sizeof(int))
    cdef int* rindices = <int*>_xmalloc((m if m > 0 else 1) * sizeof(int))
    cdef int* ready = <int*>_xmalloc((n if n > 0 else 1) * sizeof(int))
    cdef int* nxt = <int*>_xmalloc((n if n > 0 else 1) * sizeof(int))
    cdef int n_ready = 0, n_nxt = 0
    cdef int s, u, i, w, c, j
    cdef list layers = []
    cdef list layer
    memset(in_sub, 0, n if n > 0 else 1)
    try:
        for s in sub:
            in_sub[s] = 1
        # ready ids are discovered in ascending u, so each round stays sorted
        for u in range(n):
            if not in_sub[u]:
                continue
            c = 0
            for i in range(indptr[u], indptr[u + 1]):
                if in_sub[indices[i]]:
                    c += 1
            pending[u] = c
            if c == 0:
                ready[n_ready] = u
                n_ready += 1
        _reverse_csr(n, m, indptr, indices, rindptr, rindices)
        while n_ready > 0:
            layer = [0] * n_ready
            for j in range(n_ready):
                layer[j] = ready[j]
            layers.append(layer)
            n_nxt = 0
            for j in range(n_ready):
                u = ready[j]
                for i in range(rindptr[u], rindptr[u + 1]):
                    w = rindices[i]
                    if in_sub[w]:
                        pending[w] -= 1
                        if pending[w] == 0:
                            nxt[n_nxt] = w
                            n_nxt += 1
            _sort_ints(nxt, n_nxt)
            n_ready = n_nxt
            for j in range(n_nxt):
                ready[j] = nxt[j]
        return layers
    finally:
        PyMem_Free(nxt)
        PyMem_Free(ready)
        PyMem_Free(rindices)
        PyMem_Free(rindptr)
        PyMem_Free(pending)
        PyMem_Free(in_sub)


cdef void _sort_ints(int* a, int n) noexcept:
    """Insertion sort: newly-ready batches are small and nearly sorted."""
    cdef int i, j, key
    for i in range(1, n):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key
