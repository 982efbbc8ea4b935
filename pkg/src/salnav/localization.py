"""Saliency-graph matching: candidate gating, node alignment, triplet score."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NoCandidates
from .scene import SaliencyGraph360


@dataclass(frozen=True)
class MatchConfig:
    candidate_ratio: float = 0.6
    alignment_floor: float = 0.25
    saliency_weight: float = 0.5
    structure_weight: float = 0.5
    # "set" or "multiset" label collections for the Jaccard index
    jaccard_mode: str = "set"
    # improve the greedy assignment with single-pair exchanges
    alignment_repair: bool = True


DEFAULT_MATCH = MatchConfig()


# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class NodeDescriptor:
    label: str
    saliency: float
    structure: tuple[float, float, float, float]


def node_descriptors(graph: SaliencyGraph360) -> list[NodeDescriptor]:
    """Structural descriptor per node.

    Components: degree / (n-1), local clustering coefficient, mean incident
    edge weight, and the fraction of other nodes with saliency not above it.
    """
    E = graph.edges
    W = graph.edge_weights
    S = graph.saliencies
    n = len(graph)
    deg = E.sum(axis=1)
    Ei = E.astype(np.int64)
    # closed triangles through each node
    tri = np.einsum("ij,jk,ki->i", Ei, Ei, Ei) // 2
    out = []
    for a in range(n):
        d = int(deg[a])
        ndeg = d / (n - 1) if n > 1 else 0.0
        clust = tri[a] / (d * (d - 1) / 2) if d >= 2 else 0.0
        mean_w = float(W[a].sum() / d) if d > 0 else 0.0
        rank = (int((S <= S[a]).sum()) - 1) / (n - 1) if n > 1 else 1.0
        out.append(NodeDescriptor(graph.nodes[a].label, float(S[a]),
                                  (float(ndeg), float(clust), mean_w, float(rank))))
    return out


def _cosine(x, y) -> float:
    nx = math.sqrt(sum(v * v for v in x))
    ny = math.sqrt(sum(v * v for v in y))
    if nx == 0.0 and ny == 0.0:
        return 1.0
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return sum(a * b for a, b in zip(x, y)) / (nx * ny)


def node_similarity(a: NodeDescriptor, b: NodeDescriptor, cfg: MatchConfig = DEFAULT_MATCH) -> float:
    if a.label != b.label:
        return 0.0
    psi = (cfg.saliency_weight * (1.0 - abs(a.saliency - b.saliency))
           + cfg.structure_weight * _cosine(a.structure, b.structure))
    return min(1.0, max(0.0, psi))


def similarity_matrix(query: SaliencyGraph360, candidate: SaliencyGraph360,
                      cfg: MatchConfig = DEFAULT_MATCH) -> np.ndarray:
    dq = node_descriptors(query)
    dc = node_descriptors(candidate)
    return np.array([[node_similarity(a, b, cfg) for b in dc] for a in dq], dtype=float)


# ---------------------------------------------------------------------------
# gating


def jaccard(g1: SaliencyGraph360, g2: SaliencyGraph360, mode: str = "set") -> float:
    if mode == "multiset":
        c1, c2 = Counter(g1.labels), Counter(g2.labels)
        union = sum((c1 | c2).values())
        return sum((c1 & c2).values()) / union if union else 0.0
    l1, l2 = set(g1.labels), set(g2.labels)
    union = l1 | l2
    return len(l1 & l2) / len(union) if union else 0.0


def select_candidates(query: SaliencyGraph360, map_graphs: Sequence[SaliencyGraph360],
                      cfg: MatchConfig = DEFAULT_MATCH) -> list[str]:
    """Scene ids with Jaccard >= ratio * best, best first (ties by id)."""
    if not map_graphs:
        raise NoCandidates("map has no scene graphs")
    scores = [(jaccard(query, g, cfg.jaccard_mode), g.scene_id) for g in map_graphs]
    best = max(s for s, _ in scores)
    if best == 0.0:
        raise NoCandidates("no map scene shares a label with the query")
    thr = cfg.candidate_ratio * best
    keep = [(s, sid) for s, sid in scores if s >= thr]
    keep.sort(key=lambda t: (-t[0], t[1]))
    return [sid for _, sid in keep]


# ---------------------------------------------------------------------------
# alignment and scoring


@dataclass(frozen=True, eq=False)
class Alignment:
    pairs: tuple[tuple[int, int], ...]
    score_matrix: np.ndarray = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, Alignment):
            return NotImplemented
        return self.pairs == other.pairs and np.array_equal(self.score_matrix, other.score_matrix)

    __hash__ = None

    @property
    def value(self) -> float:
        """Sum of similarities over the chosen pairs."""
        return float(sum(self.score_matrix[a, b] for a, b in self.pairs))


def align_nodes(query: SaliencyGraph360, candidate: SaliencyGraph360,
                floor: float | None = None, cfg: MatchConfig = DEFAULT_MATCH) -> Alignment:
    """Greedy one-to-one assignment on node similarity.

    Repeatedly takes the unused pair with the largest similarity >= floor;
    ties go to the lowest query index, then the lowest candidate index.
    With ``cfg.alignment_repair`` the greedy result is then improved by
    local exchanges (see ``exchange_repair``).
    """
    if floor is None:
        floor = cfg.alignment_floor
    psi = similarity_matrix(query, candidate, cfg)
    nq, nc = psi.shape
    # stable sort on (-psi, a, b) gives the tie-break order directly
    a_idx, b_idx = np.meshgrid(np.arange(nq), np.arange(nc), indexing="ij")
    order = np.lexsort((b_idx.ravel(), a_idx.ravel(), -psi.ravel()))
    used_q = np.zeros(nq, dtype=bool)
    used_c = np.zeros(nc, dtype=bool)
    pairs = []
    for k in order:
        a, b = divmod(int(k), nc)
        if psi[a, b] < floor or psi[a, b] <= 0.0:
            break
        if used_q[a] or used_c[b]:
            continue
        used_q[a] = used_c[b] = True
        pairs.append((a, b))
        if len(pairs) == min(nq, nc):
            break
    if cfg.alignment_repair:
        pairs = exchange_repair(psi, pairs, floor)
    pairs.sort()
    psi.setflags(write=False)
    return Alignment(tuple(pairs), psi)


def exchange_repair(psi: np.ndarray, pairs, floor: float) -> list[tuple[int, int]]:
    """Local search over a partial injection, best improving move first.

    Moves: add a free pair; hand a matched candidate to a free query node;
    move a query node to a free candidate, optionally letting a free query
    node take the vacated candidate; swap the partners of two pairs. Every
    move keeps all pairs at or above ``floor`` and raises the total by more
    than 1e-12, so the search terminates.
    """
    ok = (psi >= floor) & (psi > 0.0)
    nq, nc = psi.shape
    match = dict(pairs)
    while True:
        owner = {b: a for a, b in match.items()}
        free_q = [a for a in range(nq) if a not in match]
        free_c = [b for b in range(nc) if b not in owner]
        best_gain, best = 1e-12, None
        for a, b in sorted(match.items()):
            for b2 in free_c:
                if not ok[a, b2]:
                    continue
                gain = psi[a, b2] - psi[a, b]
                if gain > best_gain:
                    best_gain, best = gain, ((a, b2),)
                for a2 in free_q:
                    if ok[a2, b] and gain + psi[a2, b] > best_gain:
                        best_gain, best = gain + psi[a2, b], ((a, b2), (a2, b))
            for a2 in free_q:
                if ok[a2, b] and psi[a2, b] - psi[a, b] > best_gain:
                    best_gain, best = psi[a2, b] - psi[a, b], ((a2, b), (a, None))
        items = sorted(match.items())
        for i, (a, b) in enumerate(items):
            for a2, b2 in items[i + 1:]:
                if ok[a, b2] and ok[a2, b]:
                    gain = psi[a, b2] + psi[a2, b] - psi[a, b] - psi[a2, b2]
                    if gain > best_gain:
                        best_gain, best = gain, ((a, b2), (a2, b))
        for a in free_q:
            for b in free_c:
                if ok[a, b] and psi[a, b] > best_gain:
                    best_gain, best = psi[a, b], ((a, b),)
        if best is None:
            return sorted(match.items())
        for a, b in best:
            if b is None:
                del match[a]
            else:
                match[a] = b


def match_mask(query: SaliencyGraph360, candidate: SaliencyGraph360, alignment: Alignment) -> np.ndarray:
    """M over candidate nodes: both matched, joined in both graphs."""
    nc = len(candidate)
    to_query = np.full(nc, -1)
    for a, b in alignment.pairs:
        to_query[b] = a
    M = np.zeros((nc, nc), dtype=bool)
    matched = np.flatnonzero(to_query >= 0)
    for i in matched:
        for j in matched:
            if i != j and candidate.edges[i, j] and query.edges[to_query[i], to_query[j]]:
                M[i, j] = True
    return M


def triplet_score(query: SaliencyGraph360, candidate: SaliencyGraph360, alignment: Alignment) -> float:
    """Sum of candidate edge weights over matched edges, each edge once."""
    M = match_mask(query, candidate, alignment)
    return float(np.triu(candidate.edge_weights * M, 1).sum())


# ---------------------------------------------------------------------------
# localization


@dataclass(frozen=True)
class LocalizationResult:
    matched_scene_id: str
    triplet_score: float
    alignment: Alignment
    candidates_considered: int
    candidate_scores: tuple[tuple[str, float], ...] = ()

    def correspondences(self) -> tuple[tuple[int, int], ...]:
        """(query node, matched-scene node) index pairs."""
        return self.alignment.pairs


def localize_graphs(query: SaliencyGraph360, map_graphs: Sequence[SaliencyGraph360],
                    cfg: MatchConfig = DEFAULT_MATCH) -> LocalizationResult:
    by_id = {g.scene_id: g for g in map_graphs}
    cands = select_candidates(query, map_graphs, cfg)
    scored = []
    for sid in cands:
        g = by_id[sid]
        al = align_nodes(query, g, cfg=cfg)
        scored.append((triplet_score(query, g, al), sid, al))
    best = min(scored, key=lambda t: (-t[0], t[1]))
    return LocalizationResult(
        matched_scene_id=best[1],
        triplet_score=best[0],
        alignment=best[2],
        candidates_considered=len(cands),
        candidate_scores=tuple((sid, s) for s, sid, _ in scored),
    )


def localize(query: SaliencyGraph360, topo, cfg: MatchConfig = DEFAULT_MATCH) -> LocalizationResult:
    """Best-matching scene node of a topological map for a query graph."""
    return localize_graphs(query, topo.scene_graphs(), cfg)
