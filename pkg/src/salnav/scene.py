"""Objects, salient nodes and the 360-degree saliency graph of a scene.

A scene is summarised by its salient objects (nodes), a contextual
proximity relation between them (edges) and saliency-derived edge weights.
Every node also carries the spherical orientation of its centroid as seen
from the capture point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateCentroid,
    DegenerateScene,
    EmptyGraph,
    EmptyScene,
    UnsupportedVersion,
)

TWO_PI = 2.0 * math.pi


def wrap_2pi(angle: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    a = math.fmod(angle, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    # fmod of a tiny negative number can land exactly on 2*pi after the shift
    if a >= TWO_PI:
        a = 0.0
    return a


def wrap_pi(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = wrap_2pi(angle)
    if a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class ObjectInstance:
    label: str
    centroid: tuple[float, float, float]
    extents: tuple[float, float, float]
    saliency: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "centroid", tuple(float(c) for c in self.centroid))
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        if len(self.centroid) != 3 or len(self.extents) != 3:
            raise ValueError("centroid and extents must have 3 components")
        if any(e < 0.0 for e in self.extents):
            raise ValueError(f"negative extents for {self.label!r}: {self.extents}")
        if not 0.0 <= self.saliency <= 1.0:
            raise ValueError(f"saliency {self.saliency} outside [0, 1]")

    @property
    def volume(self) -> float:
        ex, ey, ez = self.extents
        return ex * ey * ez

    @property
    def mean_dimension(self) -> float:
        return (self.extents[0] + self.extents[1] + self.extents[2]) / 3.0

    def with_saliency(self, saliency: float) -> "ObjectInstance":
        return ObjectInstance(self.label, self.centroid, self.extents, saliency)

    def with_centroid(self, centroid) -> "ObjectInstance":
        return ObjectInstance(self.label, tuple(centroid), self.extents, self.saliency)


def spherical_of(centroid) -> tuple[float, float, float]:
    """Return ``(azimuth, polar, radial)`` of a point seen from the origin.

    Azimuth is measured from +X in [0, 2*pi), polar from +Z in [0, pi].
    On the Z axis the azimuth is defined as 0.
    """
    x, y, z = (float(c) for c in centroid)
    rho = math.hypot(x, y)
    radial = math.hypot(x, y, z)
    if radial == 0.0:
        raise DegenerateCentroid("centroid coincides with the reference point")
    azimuth = wrap_2pi(math.atan2(y, x)) if rho > 0.0 else 0.0
    polar = math.atan2(rho, z)
    return azimuth, polar, radial


def cartesian_of(azimuth: float, polar: float, radial: float) -> tuple[float, float, float]:
    s = math.sin(polar)
    return (
        radial * s * math.cos(azimuth),
        radial * s * math.sin(azimuth),
        radial * math.cos(polar),
    )


@dataclass(frozen=True)
class SalientNode:
    object: ObjectInstance
    mean_dimension: float
    azimuth: float
    polar: float
    radial_distance: float

    @classmethod
    def from_object(cls, obj: ObjectInstance) -> "SalientNode":
        az, po, r = spherical_of(obj.centroid)
        return cls(obj, obj.mean_dimension, az, po, r)

    @property
    def label(self) -> str:
        return self.object.label

    @property
    def saliency(self) -> float:
        return self.object.saliency

    @property
    def centroid(self) -> tuple[float, float, float]:
        return self.object.centroid


class SaliencyGraph360:
    """Immutable 360-degree saliency graph.

    ``edges`` is a symmetric boolean matrix with zero diagonal and
    ``edge_weights`` holds ``sqrt(S_a * S_b)`` on edges and 0 elsewhere.
    """

    __slots__ = ("scene_id", "nodes", "edges", "edge_weights")

    def __init__(self, scene_id: str, nodes: Sequence[SalientNode], edges, edge_weights):
        if len(nodes) == 0:
            raise EmptyGraph(f"graph {scene_id!r} has no nodes")
        n = len(nodes)
        E = np.array(edges, dtype=bool)
        W = np.array(edge_weights, dtype=float)
        if E.shape != (n, n) or W.shape != (n, n):
            raise ValueError("edge matrices do not match node count")
        if E.diagonal().any():
            raise ValueError("self loops are not allowed")
        if not (E == E.T).all() or not (W == W.T).all():
            raise ValueError("edge matrices must be symmetric")
        if (W[~E] != 0.0).any() or (W < 0.0).any():
            raise ValueError("weights must be nonnegative and zero off the edge set")
        E.setflags(write=False)
        W.setflags(write=False)
        object.__setattr__(self, "scene_id", str(scene_id))
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "edges", E)
        object.__setattr__(self, "edge_weights", W)

    def __setattr__(self, name, value):
        raise AttributeError("SaliencyGraph360 is immutable")

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"SaliencyGraph360({self.scene_id!r}, n={len(self)}, edges={self.n_edges})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, SaliencyGraph360):
            return NotImplemented
        return (
            self.scene_id == other.scene_id
            and self.nodes == other.nodes
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.edge_weights, other.edge_weights)
        )

    __hash__ = None

    @property
    def labels(self) -> list[str]:
        return [nd.label for nd in self.nodes]

    @property
    def saliencies(self) -> np.ndarray:
        return np.array([nd.saliency for nd in self.nodes])

    @property
    def n_edges(self) -> int:
        return int(self.edges.sum()) // 2

    def positions(self, dims: int = 3) -> np.ndarray:
        return np.array([nd.centroid[:dims] for nd in self.nodes], dtype=float)

    def total_weight(self) -> float:
        """Sum of weights over unordered node pairs."""
        return float(np.triu(self.edge_weights, 1).sum())


def normalize_saliency(objects: Sequence[ObjectInstance]) -> list[ObjectInstance]:
    """Volumetric saliency: bounding-box volume over the scene maximum."""
    if len(objects) == 0:
        raise EmptyScene("no objects in scene")
    vols = [o.volume for o in objects]
    vmax = max(vols)
    if vmax <= 0.0:
        raise DegenerateScene("all objects have zero volume")
    return [o.with_saliency(v / vmax) for o, v in zip(objects, vols)]


def edge_predicate(dim_a: float, dim_b: float, distance: float) -> bool:
    # strict inequality: ties give no edge
    return min(dim_a, dim_b) > distance


def build_saliency_graph(
    scene_id: str, objects: Sequence[ObjectInstance], saliency_floor: float = 0.0
) -> SaliencyGraph360:
    """Build the saliency graph of one scene.

    ``objects`` must already carry normalized saliencies and centroids in
    the capture frame. Objects below ``saliency_floor`` are dropped.
    """
    if len(objects) == 0:
        raise EmptyScene("no objects in scene")
    kept = [o for o in objects if o.saliency >= saliency_floor]
    if not kept:
        raise EmptyGraph(f"no object of {scene_id!r} reaches saliency {saliency_floor}")
    nodes = [SalientNode.from_object(o) for o in kept]
    n = len(nodes)
    E = np.zeros((n, n), dtype=bool)
    W = np.zeros((n, n), dtype=float)
    for a in range(n):
        for b in range(a + 1, n):
            d = math.dist(nodes[a].centroid, nodes[b].centroid)
            if edge_predicate(nodes[a].mean_dimension, nodes[b].mean_dimension, d):
                w = math.sqrt(nodes[a].saliency * nodes[b].saliency)
                E[a, b] = E[b, a] = True
                W[a, b] = W[b, a] = w
    return SaliencyGraph360(scene_id, nodes, E, W)


def graph_from_observation(scene_id: str, objects: Sequence[ObjectInstance],
                           saliency_floor: float = 0.0) -> SaliencyGraph360:
    """Normalize raw detections and build their saliency graph."""
    return build_saliency_graph(scene_id, normalize_saliency(objects), saliency_floor)


# ---------------------------------------------------------------------------
# file formats

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_observation(path, objects: Iterable[ObjectInstance], header: str | None = None) -> None:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for o in objects:
        x, y, z = o.centroid
        ex, ey, ez = o.extents
        lines.append(f"{o.label} {x:.6f} {y:.6f} {z:.6f} {ex:.6f} {ey:.6f} {ez:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_observation(text: str) -> list[ObjectInstance]:
    objects = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ValueError(f"line {lineno}: expected 7 fields, got {len(parts)}")
        vals = [float(p) for p in parts[1:]]
        objects.append(ObjectInstance(parts[0], tuple(vals[:3]), tuple(vals[3:])))
    return objects


def read_observation(path) -> list[ObjectInstance]:
    return parse_observation(Path(path).read_text())


def dump_graph(graph: SaliencyGraph360) -> str:
    """Serialize a graph as ``SALGRAPH v1`` text.

    Node lines are ``idx label saliency azimuth polar radial`` followed by
    ``x y z ex ey ez`` so that a reload is bit-exact.
    """
    out = [f"SALGRAPH v1 {graph.scene_id} {len(graph)}"]
    for i, nd in enumerate(graph.nodes):
        o = nd.object
        fields = [str(i), o.label, _fmt(o.saliency), _fmt(nd.azimuth), _fmt(nd.polar),
                  _fmt(nd.radial_distance)]
        fields += [_fmt(c) for c in o.centroid] + [_fmt(e) for e in o.extents]
        out.append(" ".join(fields))
    n = len(graph)
    for a in range(n):
        for b in range(a + 1, n):
            if graph.edges[a, b]:
                out.append(f"{a} {b} {_fmt(graph.edge_weights[a, b])}")
    return "\n".join(out) + "\n"


def parse_graph(text: str) -> SaliencyGraph360:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    head = lines[0].split()
    if len(head) != 4 or head[0] != "SALGRAPH":
        raise ValueError("missing SALGRAPH header")
    if head[1] != "v1":
        raise UnsupportedVersion(f"graph format {head[1]}")
    scene_id, n = head[2], int(head[3])
    nodes = []
    for ln in lines[1:1 + n]:
        p = ln.split()
        sal, az, po, r = (float(v) for v in p[2:6])
        if len(p) >= 12:
            centroid = tuple(float(v) for v in p[6:9])
            extents = tuple(float(v) for v in p[9:12])
        else:
            # spherical-only dump: no size information survives
            centroid = cartesian_of(az, po, r)
            extents = (0.0, 0.0, 0.0)
        obj = ObjectInstance(p[1], centroid, extents, sal)
        nodes.append(SalientNode(obj, obj.mean_dimension, az, po, r))
    E = np.zeros((n, n), dtype=bool)
    W = np.zeros((n, n), dtype=float)
    for ln in lines[1 + n:]:
        a, b, w = ln.split()
        a, b = int(a), int(b)
        E[a, b] = E[b, a] = True
        W[a, b] = W[b, a] = float(w)
    return SaliencyGraph360(scene_id, nodes, E, W)


def save_graph(graph: SaliencyGraph360, path) -> None:
    Path(path).write_text(dump_graph(graph))


def load_graph(path) -> SaliencyGraph360:
    return parse_graph(Path(path).read_text())
