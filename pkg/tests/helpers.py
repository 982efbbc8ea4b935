"""Small fixtures and independent oracles shared by the test modules."""
import heapq
import math

import numpy as np

from salnav.scene import ObjectInstance, build_saliency_graph
from salnav.topomap import MapNode, NodeKind, TopoMap, parse_grid

LABELS = ("bed", "lamp", "chair", "desk", "sofa", "tv", "plant", "table")


def cube(label, centroid, side, saliency=0.0):
    return ObjectInstance(label, tuple(centroid), (side, side, side), saliency)


def graph_of(scene_id, specs):
    """Graph from (label, centroid, side, saliency) tuples; saliencies used as given."""
    return build_saliency_graph(scene_id, [cube(*s) for s in specs])


def grid_of(rows, cell_size=1.0):
    """FloorGrid from a list of row strings (row 0 first)."""
    text = f"GRID v1 {len(rows[0])} {len(rows)} {cell_size!r}\n" + "\n".join(rows) + "\n"
    return parse_grid(text)


def random_topomap(rng, n):
    """Connected map of n nodes with random positions and a random edge set.

    Edge data obeys the map invariants, but edges ignore geometry beyond
    their endpoint distance, which is all the planner uses.
    """
    pos = rng.uniform(0, 50, (n, 2))
    A = np.zeros((n, n), dtype=bool)
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = order[k], order[rng.integers(k)]
        A[a, b] = A[b, a] = True
    extra = rng.random((n, n)) < min(1.0, 3.0 / n)
    extra = np.triu(extra, 1)
    A |= extra | extra.T
    np.fill_diagonal(A, False)
    L = np.zeros((n, n))
    Z = np.zeros((n, n))
    for p, q in zip(*np.nonzero(A)):
        L[p, q] = math.dist(pos[p], pos[q])
        Z[p, q] = math.atan2(pos[q][1] - pos[p][1], pos[q][0] - pos[p][0]) % (2 * math.pi)
    nodes = [MapNode(f"n{i:03d}", NodeKind.TRANSITION, tuple(pos[i]), 1) for i in range(n)]
    return TopoMap(nodes, A, L, Z)


def dijkstra(topo, src):
    """Textbook priority-queue shortest paths from one source."""
    n = len(topo)
    dist = [math.inf] * n
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        d, p = heapq.heappop(heap)
        if d > dist[p]:
            continue
        for q in np.flatnonzero(topo.adjacency[p]):
            nd = d + topo.edge_length[p, q]
            if nd < dist[q]:
                dist[q] = nd
                heapq.heappush(heap, (nd, int(q)))
    return dist


def brute_force_alignment(psi, floor):
    """Best total similarity over all partial injections with pairs >= floor."""
    nq, nc = psi.shape
    best = 0.0

    def rec(a, used, acc):
        nonlocal best
        if a == nq:
            best = max(best, acc)
            return
        rec(a + 1, used, acc)
        for b in range(nc):
            if b not in used and psi[a, b] >= floor and psi[a, b] > 0:
                rec(a + 1, used | {b}, acc + psi[a, b])

    rec(0, frozenset(), 0.0)
    return best


def random_objects(rng, n, labels=LABELS, spread=3.0):
    out = []
    for _ in range(n):
        lab = labels[rng.integers(len(labels))]
        c = tuple(float(v) for v in rng.uniform(-spread, spread, 3))
        e = tuple(float(v) for v in rng.uniform(0.2, 2.0, 3))
        out.append(ObjectInstance(lab, c, e))
    return out
