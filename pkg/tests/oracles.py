"""Brute-force reference implementations used only by the tests.

Everything here works from a dense 0/1 adjacency matrix and shares no code
with the package's feature or layer routines.
"""

from itertools import combinations, permutations

import numpy as np


def dense(g) -> np.ndarray:
    a = np.zeros((g.num_nodes, g.num_nodes), dtype=np.int64)
    for u, v in g.edges():
        a[u, v] = a[v, u] = 1
    return a


def triangles(a):
    n = len(a)
    t = np.zeros(n, dtype=np.int64)
    for i, j, k in combinations(range(n), 3):
        if a[i, j] and a[j, k] and a[i, k]:
            t[[i, j, k]] += 1
    return t


def maximal_cliques(a):
    """All maximal cliques by checking every node subset."""
    n = len(a)
    cliques = []
    for mask in range(1, 1 << n):
        nodes = [i for i in range(n) if mask >> i & 1]
        if any(not a[i, j] for i, j in combinations(nodes, 2)):
            continue
        extendable = any(
            all(a[x, i] for i in nodes) for x in range(n) if not mask >> x & 1
        )
        if not extendable:
            cliques.append(frozenset(nodes))
    return cliques


def node_cliques(a):
    n = len(a)
    size = np.zeros(n, dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)
    for c in maximal_cliques(a):
        for v in c:
            count[v] += 1
            size[v] = max(size[v], len(c))
    return size, count


def max_clique(a):
    return max((len(c) for c in maximal_cliques(a)), default=0)


def core_numbers(a):
    """For each k, delete nodes of degree < k until none remain to delete."""
    n = len(a)
    core = np.zeros(n, dtype=np.int64)
    for k in range(1, n):
        alive = np.ones(n, dtype=bool)
        changed = True
        while changed:
            changed = False
            for v in range(n):
                if alive[v] and a[v, alive].sum() < k:
                    alive[v] = False
                    changed = True
        core[alive] = k
    return core


def triangle_clustering(a):
    t = triangles(a)
    d = a.sum(axis=1)
    return np.array([2 * t[v] / (d[v] * (d[v] - 1)) if d[v] >= 2 else 0.0 for v in range(len(a))])


def square_clustering(a):
    """Squares through v over squares-plus-open-potential, by enumeration.

    For a neighbor pair {u, w} of v, realized squares are nodes x != v adjacent
    to both; the open potential pairs are (x, y) with x a private neighbor of u
    and y a private neighbor of w (private: not v, not the partner, not shared).
    """
    n = len(a)
    out = np.zeros(n)
    for v in range(n):
        nbrs = [u for u in range(n) if a[v, u]]
        # numerator: 4-cycles v-u-x-w-v, each counted once per unordered {u, w}
        cycles = sum(
            1
            for u, x, w in permutations(range(n), 3)
            if v not in (u, x, w) and a[v, u] and a[u, x] and a[x, w] and a[w, v]
        ) // 2
        open_pairs = 0
        for u, w in combinations(nbrs, 2):
            shared = {x for x in range(n) if x != v and a[u, x] and a[w, x]}
            for x in range(n):
                for y in range(n):
                    if (
                        a[u, x] and x not in (v, w) and x not in shared
                        and a[w, y] and y not in (v, u) and y not in shared
                    ):
                        open_pairs += 1
        denom = cycles + open_pairs
        out[v] = cycles / denom if denom else 0.0
    return out


def components(a):
    n = len(a)
    seen = [False] * n
    count = 0
    for s in range(n):
        if seen[s]:
            continue
        count += 1
        stack = [s]
        seen[s] = True
        while stack:
            v = stack.pop()
            for u in range(n):
                if a[v, u] and not seen[u]:
                    seen[u] = True
                    stack.append(u)
    return count


def has_bridge(a):
    base = components(a)
    for u, v in zip(*np.nonzero(np.triu(a))):
        b = a.copy()
        b[u, v] = b[v, u] = 0
        if components(b) > base:
            return True
    return False


def distances(a):
    """Floyd-Warshall all-pairs hop distances (inf when disconnected)."""
    n = len(a)
    d = np.where(a > 0, 1.0, np.inf)
    np.fill_diagonal(d, 0.0)
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


def global_efficiency(a):
    n = len(a)
    if n < 2:
        return 0.0
    d = distances(a)
    inv = np.zeros_like(d)
    off = ~np.eye(n, dtype=bool)
    inv[off] = 1.0 / d[off]
    return float(inv.sum() / (n * (n - 1)))


def local_efficiency(a):
    n = len(a)
    if n == 0:
        return 0.0
    vals = []
    for v in range(n):
        nbrs = np.nonzero(a[v])[0]
        vals.append(global_efficiency(a[np.ix_(nbrs, nbrs)]) if len(nbrs) >= 2 else 0.0)
    return float(np.mean(vals))


def all_features(g):
    """Oracle values for all 13 features: (node matrix, graph vector)."""
    a = dense(g)
    t = triangles(a)
    size, count = node_cliques(a)
    tc = triangle_clustering(a)
    node = np.column_stack(
        [a.sum(axis=1), t, size, count, core_numbers(a), tc, square_clustering(a)]
    ).astype(float)
    graph = np.array(
        [
            t.sum() // 3,
            max_clique(a),
            float(has_bridge(a)),
            tc.mean() if len(a) else 0.0,
            global_efficiency(a),
            local_efficiency(a),
        ],
        dtype=float,
    )
    return node, graph


def numerical_grad(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f()`` w.r.t. array ``x`` (mutated in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        hi = f()
        x[idx] = orig - step
        lo = f()
        x[idx] = orig
        grad[idx] = (hi - lo) / (2 * step)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise relative error; 0 when both gradients vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)
