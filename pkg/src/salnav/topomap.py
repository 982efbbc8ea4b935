"""Topological map: floor grid, transition nodes, visibility adjacency, persistence."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import CorruptMap, DisconnectedMap, UnsupportedVersion
from .scene import SaliencyGraph360, load_graph, save_graph, wrap_2pi

# ---------------------------------------------------------------------------
# floor grid

_REGION_ALPHABET = (
    "123456789"
    + "abcdefghijklmnopqrstuvwxyz"
    + "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    + "".join(chr(c) for c in range(0x100, 0x800) if chr(c).isalpha())
)
_REGION_OF_CHAR = {ch: i + 1 for i, ch in enumerate(_REGION_ALPHABET)}


@dataclass(frozen=True, eq=False)
class FloorGrid:
    """Occupancy grid with a region mask.

    Cell ``(row, col)`` spans ``[col, col+1] x [row, row+1]`` in cell units,
    i.e. x grows with the column and y with the row.
    """

    width: int
    height: int
    cell_size: float
    occupancy: np.ndarray
    region: np.ndarray

    def __post_init__(self):
        occ = np.array(self.occupancy, dtype=bool)
        reg = np.array(self.region, dtype=np.int64)
        if occ.shape != (self.height, self.width) or reg.shape != occ.shape:
            raise ValueError(f"grid arrays must have shape {(self.height, self.width)}")
        if (reg[~occ] <= 0).any():
            raise ValueError("every free cell needs a region id > 0")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        occ.setflags(write=False)
        reg.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "region", reg)

    def __eq__(self, other):
        if not isinstance(other, FloorGrid):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and self.cell_size == other.cell_size
                and np.array_equal(self.occupancy, other.occupancy)
                and np.array_equal(self.region, other.region))

    __hash__ = None

    @property
    def free(self) -> np.ndarray:
        return ~self.occupancy

    def cell_of(self, point) -> tuple[int, int]:
        """(row, col) of the cell containing a metric point."""
        return int(math.floor(point[1] / self.cell_size)), int(math.floor(point[0] / self.cell_size))

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return ((col + 0.5) * self.cell_size, (row + 0.5) * self.cell_size)

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def is_free(self, point) -> bool:
        r, c = self.cell_of(point)
        return self.in_bounds(r, c) and not self.occupancy[r, c]

    def region_at(self, point) -> int:
        r, c = self.cell_of(point)
        if not self.in_bounds(r, c):
            return 0
        return int(self.region[r, c])

    def refined(self, factor: int = 2) -> "FloorGrid":
        """Same floor at ``cell_size / factor``."""
        occ = np.kron(self.occupancy, np.ones((factor, factor), dtype=bool))
        reg = np.kron(self.region, np.ones((factor, factor), dtype=np.int64))
        return FloorGrid(self.width * factor, self.height * factor,
                         self.cell_size / factor, occ, reg)


def region_char(region_id: int) -> str:
    return _REGION_ALPHABET[region_id - 1]


def dump_grid(grid: FloorGrid) -> str:
    out = [f"GRID v1 {grid.width} {grid.height} {grid.cell_size!r}"]
    for r in range(grid.height):
        out.append("".join(
            "#" if grid.occupancy[r, c] else region_char(int(grid.region[r, c]))
            for c in range(grid.width)))
    return "\n".join(out) + "\n"


def parse_grid(text: str) -> FloorGrid:
    lines = text.splitlines()
    head = lines[0].split()
    if len(head) != 5 or head[0] != "GRID":
        raise ValueError("missing GRID header")
    if head[1] != "v1":
        raise UnsupportedVersion(f"grid format {head[1]}")
    w, h, cs = int(head[2]), int(head[3]), float(head[4])
    rows = lines[1:1 + h]
    if len(rows) != h or any(len(r) != w for r in rows):
        raise ValueError("grid body does not match header dimensions")
    occ = np.zeros((h, w), dtype=bool)
    reg = np.zeros((h, w), dtype=np.int64)
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch == "#":
                occ[r, c] = True
            elif ch in _REGION_OF_CHAR:
                reg[r, c] = _REGION_OF_CHAR[ch]
            else:
                raise ValueError(f"bad grid character {ch!r} at row {r}, col {c}")
    return FloorGrid(w, h, cs, occ, reg)


def save_grid(grid: FloorGrid, path) -> None:
    Path(path).write_text(dump_grid(grid), encoding="utf-8")


def load_grid(path) -> FloorGrid:
    return parse_grid(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# map nodes and map


class NodeKind(str, Enum):
    SCENE = "SCENE"
    TRANSITION = "TRANSITION"


@dataclass(frozen=True)
class MapNode:
    id: str
    kind: NodeKind
    position: tuple[float, float]
    region: int
    graph: Optional[SaliencyGraph360] = field(default=None, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "kind", NodeKind(self.kind))
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        if self.kind is NodeKind.SCENE and self.graph is None:
            raise ValueError(f"scene node {self.id!r} needs a saliency graph")


class TopoMap:
    """Queryable topological map: nodes plus visibility adjacency.

    ``edge_length`` and ``rel_azimuth`` are zero wherever ``adjacency`` is
    false. ``rel_azimuth[p, q]`` is the heading from node p to node q.
    """

    def __init__(self, nodes: Sequence[MapNode], adjacency, edge_length, rel_azimuth):
        n = len(nodes)
        A = np.array(adjacency, dtype=bool)
        L = np.array(edge_length, dtype=float)
        Z = np.array(rel_azimuth, dtype=float)
        if A.shape != (n, n) or L.shape != (n, n) or Z.shape != (n, n):
            raise CorruptMap("matrix shapes do not match the node count")
        ids = [nd.id for nd in nodes]
        if len(set(ids)) != n:
            raise CorruptMap("duplicate node ids")
        _check_map_invariants(nodes, A, L, Z)
        for arr in (A, L, Z):
            arr.setflags(write=False)
        self.nodes = tuple(nodes)
        self.adjacency = A
        self.edge_length = L
        self.rel_azimuth = Z
        self._index = {nid: i for i, nid in enumerate(ids)}

    def __len__(self):
        return len(self.nodes)

    def __repr__(self):
        return f"TopoMap(nodes={len(self)}, edges={int(self.adjacency.sum()) // 2})"

    def __eq__(self, other):
        if not isinstance(other, TopoMap):
            return NotImplemented
        return (self.nodes == other.nodes
                and np.array_equal(self.adjacency, other.adjacency)
                and np.array_equal(self.edge_length, other.edge_length)
                and np.array_equal(self.rel_azimuth, other.rel_azimuth))

    __hash__ = None

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise KeyError(f"unknown map node {node_id!r}") from None

    def node(self, node_id: str) -> MapNode:
        return self.nodes[self.index_of(node_id)]

    @property
    def ids(self) -> list[str]:
        return [nd.id for nd in self.nodes]

    def scene_nodes(self) -> list[MapNode]:
        return [nd for nd in self.nodes if nd.kind is NodeKind.SCENE]

    def scene_graphs(self) -> list[SaliencyGraph360]:
        return [nd.graph for nd in self.scene_nodes()]

    def positions(self) -> np.ndarray:
        return np.array([nd.position for nd in self.nodes], dtype=float)

    def neighbors(self, node_id: str) -> list[str]:
        i = self.index_of(node_id)
        return [self.nodes[j].id for j in np.flatnonzero(self.adjacency[i])]

    def nearest_node(self, point) -> str:
        d = np.hypot(*(self.positions() - np.asarray(point, dtype=float)).T)
        return self.nodes[int(np.argmin(d))].id


def _is_connected(A: np.ndarray) -> bool:
    n = A.shape[0]
    if n == 0:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    todo = deque([0])
    while todo:
        p = todo.popleft()
        for q in np.flatnonzero(A[p] & ~seen):
            seen[q] = True
            todo.append(q)
    return bool(seen.all())


def _check_map_invariants(nodes, A, L, Z, tol=1e-9):
    if A.diagonal().any():
        raise CorruptMap("adjacency has self loops")
    if not (A == A.T).all():
        raise CorruptMap("adjacency is not symmetric")
    if (L[~A] != 0).any() or (Z[~A] != 0).any():
        raise CorruptMap("edge data present on non-adjacent pairs")
    if not (L == L.T).all():
        raise CorruptMap("edge lengths are not symmetric")
    pos = np.array([nd.position for nd in nodes], dtype=float).reshape(-1, 2)
    for p, q in zip(*np.nonzero(np.triu(A, 1))):
        d = math.dist(pos[p], pos[q])
        if abs(L[p, q] - d) > tol:
            raise CorruptMap(f"edge {nodes[p].id}-{nodes[q].id} length {L[p, q]} != {d}")
        back = wrap_2pi(Z[p, q] + math.pi)
        diff = abs(back - Z[q, p])
        if min(diff, 2 * math.pi - diff) > tol:
            raise CorruptMap(f"azimuths of {nodes[p].id}-{nodes[q].id} are not opposite")
    if not _is_connected(A):
        raise CorruptMap("map graph is disconnected")


# ---------------------------------------------------------------------------
# transition nodes


_FOUR = ((-1, 0), (1, 0), (0, -1), (0, 1))


def boundary_cells(grid: FloorGrid) -> np.ndarray:
    """Free cells 4-adjacent to a free cell of another region."""
    free = grid.free
    reg = grid.region
    out = np.zeros_like(free)
    h, w = free.shape
    for dr, dc in _FOUR:
        a = (slice(max(0, -dr), h - max(0, dr)), slice(max(0, -dc), w - max(0, dc)))
        b = (slice(max(0, dr), h - max(0, -dr)), slice(max(0, dc), w - max(0, -dc)))
        hit = free[a] & free[b] & (reg[a] != reg[b])
        out[a] |= hit
    return out


def detect_transition_nodes(grid: FloorGrid) -> list[tuple[float, float]]:
    """One point per doorway, ordered by (row, col) of the chosen cell.

    Boundary cells are grouped by 8-connectivity; each group contributes the
    member cell nearest to the group's mean cell (ties: lowest row, then col).
    """
    bnd = boundary_cells(grid)
    labels, count = ndimage.label(bnd, structure=np.ones((3, 3), dtype=int))
    chosen = []
    for k in range(1, count + 1):
        rows, cols = np.nonzero(labels == k)
        mr, mc = rows.mean(), cols.mean()
        d2 = (rows - mr) ** 2 + (cols - mc) ** 2
        best = min(range(len(rows)), key=lambda i: (d2[i], rows[i], cols[i]))
        chosen.append((int(rows[best]), int(cols[best])))
    chosen.sort()
    return [grid.cell_center(r, c) for r, c in chosen]


# ---------------------------------------------------------------------------
# visibility


_GRAZE = 1e-9


def segment_visible(p, q, grid: FloorGrid) -> bool:
    """True if the closed segment p-q touches only free cells.

    Cells are treated as closed boxes, so passing through the corner of an
    obstructed cell blocks the segment.
    """
    occ = grid.occupancy
    x0, y0 = p[0] / grid.cell_size, p[1] / grid.cell_size
    x1, y1 = q[0] / grid.cell_size, q[1] / grid.cell_size
    if abs(x1 - x0) < abs(y1 - y0):
        # iterate along the major axis
        occ = occ.T
        x0, y0, x1, y1 = y0, x0, y1, x1
    nrow, ncol = occ.shape
    if x1 < x0:
        x0, y0, x1, y1 = x1, y1, x0, y0
    dx, dy = x1 - x0, y1 - y0
    slope = dy / dx if dx > 0 else 0.0
    c_lo = math.ceil(x0 - _GRAZE) - 1
    c_hi = math.floor(x1 + _GRAZE)
    for c in range(c_lo, c_hi + 1):
        xa = max(x0, float(c))
        xb = min(x1, float(c + 1))
        if xb < xa:
            xa = xb = min(max(x0, float(c)), x1)
        ya = y0 + (xa - x0) * slope
        yb = y0 + (xb - x0) * slope
        if ya > yb:
            ya, yb = yb, ya
        r_lo = math.ceil(ya - _GRAZE) - 1
        r_hi = math.floor(yb + _GRAZE)
        if c < 0 or c >= ncol or r_lo < 0 or r_hi >= nrow:
            return False
        if occ[r_lo:r_hi + 1, c].any():
            return False
    return True


def build_visibility_adjacency(nodes: Sequence[MapNode], grid: FloorGrid):
    """Adjacency, edge lengths and relative azimuths from line of sight.

    Raises DisconnectedMap when some node cannot be reached.
    """
    n = len(nodes)
    A = np.zeros((n, n), dtype=bool)
    L = np.zeros((n, n), dtype=float)
    Z = np.zeros((n, n), dtype=float)
    for nd in nodes:
        if not grid.is_free(nd.position):
            raise ValueError(f"node {nd.id!r} is not on a free cell")
    for p in range(n):
        pp = nodes[p].position
        for q in range(p + 1, n):
            qq = nodes[q].position
            if not segment_visible(pp, qq, grid):
                continue
            A[p, q] = A[q, p] = True
            L[p, q] = L[q, p] = math.dist(pp, qq)
            Z[p, q] = wrap_2pi(math.atan2(qq[1] - pp[1], qq[0] - pp[0]))
            Z[q, p] = wrap_2pi(math.atan2(pp[1] - qq[1], pp[0] - qq[0]))
    if not _is_connected(A):
        raise DisconnectedMap("visibility graph leaves some nodes unreachable")
    return A, L, Z


def build_topo_map(grid: FloorGrid, scene_nodes: Sequence[MapNode]) -> TopoMap:
    """Add detected transition nodes to the given scene nodes and connect them."""
    nodes = list(scene_nodes)
    for k, pt in enumerate(detect_transition_nodes(grid)):
        nodes.append(MapNode(f"t{k:03d}", NodeKind.TRANSITION, pt, grid.region_at(pt)))
    A, L, Z = build_visibility_adjacency(nodes, grid)
    return TopoMap(nodes, A, L, Z)


# ---------------------------------------------------------------------------
# persistence


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_map(topo: TopoMap, path, world_ref: str | None = None) -> None:
    """Write ``TOPOMAP v1``; scene graphs go to ``<stem>.graphs/`` beside it."""
    path = Path(path)
    gdir_name = path.stem + ".graphs"
    lines = ["TOPOMAP v1"]
    if world_ref is not None:
        lines.append(f"# world {world_ref}")
    for nd in topo.nodes:
        fields = [nd.id, nd.kind.value, _fmt(nd.position[0]), _fmt(nd.position[1]), str(nd.region)]
        if nd.graph is not None:
            (path.parent / gdir_name).mkdir(parents=True, exist_ok=True)
            ref = f"{gdir_name}/{nd.id}.salgraph"
            save_graph(nd.graph, path.parent / ref)
            fields.append(ref)
        lines.append(" ".join(fields))
    ids = topo.ids
    for p, q in zip(*np.nonzero(topo.adjacency)):
        lines.append(f"{ids[p]} {ids[q]} {_fmt(topo.edge_length[p, q])} {_fmt(topo.rel_azimuth[p, q])}")
    path.write_text("\n".join(lines) + "\n")


def map_world_ref(path) -> str | None:
    """World directory recorded in a map file's ``# world`` line, if any."""
    for line in Path(path).read_text().splitlines():
        if line.startswith("# world "):
            return line[len("# world "):].strip()
    return None


def load_map(path) -> TopoMap:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("TOPOMAP"):
        raise CorruptMap("missing TOPOMAP header")
    head = lines[0].split()
    if len(head) < 2 or head[1] != "v1":
        raise UnsupportedVersion(f"map format {head[1] if len(head) > 1 else '?'}")
    nodes, edges = [], []
    try:
        for ln in lines[1:]:
            f = ln.split()
            if len(f) >= 5 and f[1] in ("SCENE", "TRANSITION"):
                graph = load_graph(path.parent / f[5]) if len(f) > 5 else None
                nodes.append(MapNode(f[0], NodeKind(f[1]), (float(f[2]), float(f[3])), int(f[4]), graph))
            elif len(f) == 4:
                edges.append((f[0], f[1], float(f[2]), float(f[3])))
            else:
                raise CorruptMap(f"unparseable line: {ln!r}")
    except (ValueError, OSError) as exc:
        raise CorruptMap(str(exc)) from exc
    index = {nd.id: i for i, nd in enumerate(nodes)}
    n = len(nodes)
    A = np.zeros((n, n), dtype=bool)
    L = np.zeros((n, n), dtype=float)
    Z = np.zeros((n, n), dtype=float)
    for p, q, length, az in edges:
        if p not in index or q not in index:
            raise CorruptMap(f"edge {p}-{q} references an unknown node")
        i, j = index[p], index[q]
        A[i, j] = True
        L[i, j] = length
        Z[i, j] = az
    return TopoMap(nodes, A, L, Z)
