"""Seeded synthetic buildings and symbolic panoramic observations.

A building is a rectangular tiling of rooms separated by one-cell walls.
Neighbouring rooms are joined by doorways centred on the middle row/column
of the shared wall, so every doorway lines up with the centres of both
rooms it joins. Each room holds furniture clusters drawn from a
room-type label profile.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyScene, InfeasibleWorld, InvalidPose, UnsupportedVersion
from .scene import ObjectInstance, graph_from_observation, read_observation, wrap_pi, write_observation
from .topomap import FloorGrid, MapNode, NodeKind, TopoMap, build_topo_map, load_grid, save_grid

TWO_PI = 2.0 * math.pi

# nominal bounding-box extents in metres (x, y, z)
LABEL_EXTENTS: dict[str, tuple[float, float, float]] = {
    "bed": (2.0, 1.6, 0.6),
    "nightstand": (0.5, 0.45, 0.6),
    "wardrobe": (1.2, 0.6, 2.0),
    "dresser": (1.0, 0.5, 0.9),
    "lamp": (0.35, 0.35, 0.6),
    "mirror": (0.6, 0.08, 1.0),
    "rug": (2.0, 1.4, 0.02),
    "sofa": (2.1, 0.9, 0.85),
    "armchair": (0.85, 0.85, 0.9),
    "coffee_table": (1.1, 0.6, 0.45),
    "tv": (1.2, 0.25, 0.75),
    "tv_stand": (1.5, 0.45, 0.5),
    "bookshelf": (1.0, 0.35, 1.9),
    "plant": (0.45, 0.45, 1.1),
    "fridge": (0.8, 0.75, 1.8),
    "stove": (0.75, 0.65, 0.9),
    "sink": (0.8, 0.55, 0.9),
    "counter": (2.0, 0.65, 0.9),
    "microwave": (0.5, 0.4, 0.3),
    "dining_table": (1.6, 0.9, 0.75),
    "chair": (0.5, 0.5, 0.9),
    "stool": (0.4, 0.4, 0.7),
    "desk": (1.4, 0.7, 0.75),
    "office_chair": (0.65, 0.65, 1.1),
    "monitor": (0.6, 0.2, 0.45),
    "computer": (0.25, 0.5, 0.45),
    "filing_cabinet": (0.5, 0.6, 1.3),
    "printer": (0.5, 0.45, 0.35),
    "whiteboard": (1.8, 0.1, 1.2),
    "conference_table": (3.0, 1.2, 0.75),
    "projector_screen": (2.2, 0.1, 1.6),
    "projector": (0.35, 0.3, 0.15),
    "podium": (0.6, 0.5, 1.1),
    "toilet": (0.4, 0.7, 0.8),
    "bathtub": (1.7, 0.75, 0.6),
    "shower": (0.9, 0.9, 2.0),
    "washing_machine": (0.6, 0.6, 0.85),
    "towel_rack": (0.6, 0.15, 1.0),
    "cabinet": (0.8, 0.45, 0.9),
    "piano": (1.5, 0.6, 1.2),
    "fireplace": (1.4, 0.5, 1.1),
    "bench": (1.2, 0.4, 0.45),
    "coat_rack": (0.5, 0.5, 1.8),
    "shoe_rack": (0.8, 0.3, 0.6),
    "vending_machine": (0.9, 0.8, 1.8),
    "water_cooler": (0.35, 0.35, 1.1),
    "treadmill": (1.8, 0.8, 1.3),
    "exercise_bike": (1.1, 0.55, 1.2),
    "weights_rack": (1.2, 0.5, 1.0),
    "crib": (1.3, 0.7, 1.0),
    "toy_chest": (0.8, 0.45, 0.5),
    "washbasin": (0.6, 0.45, 0.85),
}

# room type -> label sampling weights; office/meeting/conference overlap on purpose
ROOM_PROFILES: dict[str, dict[str, float]] = {
    "bedroom": {"bed": 3, "nightstand": 3, "wardrobe": 2, "dresser": 2, "lamp": 2, "mirror": 1,
                "rug": 1, "armchair": 1, "plant": 1, "tv": 1, "bookshelf": 1},
    "kitchen": {"fridge": 3, "stove": 3, "sink": 3, "counter": 3, "microwave": 2, "dining_table": 1,
                "chair": 2, "stool": 2, "cabinet": 2, "plant": 1, "water_cooler": 1},
    "living_room": {"sofa": 3, "armchair": 2, "coffee_table": 3, "tv": 2, "tv_stand": 2,
                    "bookshelf": 2, "plant": 2, "rug": 2, "lamp": 2, "piano": 1, "fireplace": 1},
    "office": {"desk": 3, "office_chair": 3, "monitor": 3, "computer": 2, "filing_cabinet": 2,
               "printer": 1, "bookshelf": 2, "plant": 1, "whiteboard": 1, "lamp": 1, "cabinet": 1},
    "meeting_room": {"conference_table": 2, "chair": 3, "office_chair": 2, "whiteboard": 2,
                     "monitor": 1, "plant": 1, "projector": 1, "cabinet": 1, "water_cooler": 1},
    "conference_room": {"conference_table": 3, "chair": 3, "office_chair": 2, "projector_screen": 2,
                        "projector": 2, "podium": 1, "whiteboard": 1, "plant": 1},
    "bathroom": {"toilet": 3, "bathtub": 2, "shower": 2, "washbasin": 3, "mirror": 2,
                 "towel_rack": 2, "washing_machine": 1, "cabinet": 1},
    "dining_room": {"dining_table": 3, "chair": 3, "cabinet": 2, "lamp": 1, "plant": 1,
                    "rug": 1, "bench": 1, "piano": 1},
    "lobby": {"bench": 2, "sofa": 1, "plant": 3, "coat_rack": 2, "shoe_rack": 1,
              "vending_machine": 2, "water_cooler": 2, "armchair": 1, "coffee_table": 1},
    "gym": {"treadmill": 3, "exercise_bike": 3, "weights_rack": 2, "bench": 2, "mirror": 1,
            "water_cooler": 1, "towel_rack": 1},
    "nursery": {"crib": 3, "toy_chest": 2, "armchair": 1, "dresser": 2, "lamp": 2, "rug": 2,
                "nightstand": 1, "bookshelf": 1},
    "study": {"desk": 3, "bookshelf": 3, "armchair": 2, "lamp": 2, "office_chair": 2,
              "computer": 1, "plant": 1, "rug": 1},
}


@dataclass(frozen=True)
class WorldSpec:
    seed: int = 0
    rooms: int = 12
    # total grid size in cells; None sizes the grid to fit the rooms
    width: Optional[int] = None
    height: Optional[int] = None
    cell_size: float = 0.5
    room_cells: tuple[int, int] = (8, 13)
    objects_per_room: tuple[int, int] = (6, 10)
    clusters_per_room: tuple[int, int] = (2, 4)
    cluster_spread: float = 0.3
    size_jitter: float = 0.25
    room_types: tuple[str, ...] = tuple(ROOM_PROFILES)
    label_profiles: dict = field(default_factory=lambda: {k: dict(v) for k, v in ROOM_PROFILES.items()})
    camera_height: float = 1.0
    extra_door_prob: float = 0.35
    # odd, so the doorway stays centred on the middle row/column
    door_cells: int = 3

    def __post_init__(self):
        if self.rooms < 2:
            raise ValueError("a world needs at least 2 rooms")
        if self.door_cells < 1 or self.door_cells % 2 == 0:
            raise ValueError("door_cells must be a positive odd number")
        if self.room_cells[0] < self.door_cells + 2:
            raise ValueError("rooms too small for the doorway width")
        if not self.room_types:
            raise ValueError("empty room type list")
        for rt in self.room_types:
            if not self.label_profiles.get(rt):
                raise ValueError(f"room type {rt!r} has no label profile")

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "WorldSpec":
        d = dict(d)
        for key in ("room_cells", "objects_per_room", "clusters_per_room", "room_types"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "WorldSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Room:
    id: str
    region: int
    room_type: str
    cells: tuple[int, int, int, int]  # row0, col0, row1, col1 inclusive interior
    node_position: tuple[float, float]
    objects: tuple[ObjectInstance, ...]  # world frame, z = height above floor

    def contains(self, point, cell_size: float) -> bool:
        r0, c0, r1, c1 = self.cells
        return c0 * cell_size <= point[0] < (c1 + 1) * cell_size and r0 * cell_size <= point[1] < (r1 + 1) * cell_size


@dataclass(frozen=True, eq=False)
class World:
    spec: WorldSpec
    grid: FloorGrid
    rooms: tuple[Room, ...]
    doors: tuple[tuple[str, str], ...]

    def __eq__(self, other):
        if not isinstance(other, World):
            return NotImplemented
        return (self.spec == other.spec and self.grid == other.grid
                and self.rooms == other.rooms and self.doors == other.doors)

    __hash__ = None

    def room(self, room_id: str) -> Room:
        for r in self.rooms:
            if r.id == room_id:
                return r
        raise KeyError(room_id)

    def room_at(self, point) -> Optional[Room]:
        """Room whose region contains the point (doorway cells included)."""
        if not self.grid.is_free(point):
            return None
        reg = self.grid.region_at(point)
        if 1 <= reg <= len(self.rooms):
            return self.rooms[reg - 1]
        return None

    def render(self, pose, fov: float = TWO_PI) -> "Observation":
        return render_observation(self, pose, fov)


class PerturbKind(str, Enum):
    SPATIAL = "SPATIAL"
    ORIENTATION = "ORIENTATION"
    OBJECT_DROP = "OBJECT_DROP"


@dataclass(frozen=True)
class Observation:
    pose: tuple[float, float, float]
    fov: float
    objects: tuple[ObjectInstance, ...]
    room_id: Optional[str] = None


# ---------------------------------------------------------------------------
# generation


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, *stream])


def _layout(spec: WorldSpec):
    nx = math.ceil(math.sqrt(spec.rooms))
    ny = math.ceil(spec.rooms / nx)
    rng = _rng(spec.seed, 0)
    lo, hi = spec.room_cells
    col_w = rng.integers(lo, hi + 1, size=nx)
    row_h = rng.integers(lo, hi + 1, size=ny)
    need_w = int(col_w.sum()) + nx + 1
    need_h = int(row_h.sum()) + ny + 1
    width = spec.width if spec.width is not None else need_w
    height = spec.height if spec.height is not None else need_h
    if need_w > width or need_h > height:
        raise InfeasibleWorld(
            f"{spec.rooms} rooms need a {need_w}x{need_h} grid, spec allows {width}x{height}")
    col0 = 1 + np.concatenate([[0], np.cumsum(col_w + 1)[:-1]])
    row0 = 1 + np.concatenate([[0], np.cumsum(row_h + 1)[:-1]])
    return nx, width, height, col0, col_w, row0, row_h


def _doors(spec: WorldSpec, nx: int) -> list[tuple[int, int]]:
    """Room index pairs joined by a doorway: random spanning tree plus extras."""
    n = spec.rooms
    cand = []
    for k in range(n):
        if (k % nx) + 1 < nx and k + 1 < n:
            cand.append((k, k + 1))
        if k + nx < n:
            cand.append((k, k + nx))
    rng = _rng(spec.seed, 1)
    order = rng.permutation(len(cand))
    extra = rng.random(len(cand)) < spec.extra_door_prob
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    chosen = []
    for i in order:
        a, b = cand[i]
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            chosen.append(cand[i])
        elif extra[i]:
            chosen.append(cand[i])
    return sorted(chosen)


def _place_objects(spec: WorldSpec, k: int, room_type: str, bounds) -> tuple[ObjectInstance, ...]:
    """Furniture clusters inside the metric rectangle ``bounds``."""
    rng = _rng(spec.seed, 2, k)
    profile = spec.label_profiles[room_type]
    labels = sorted(profile)
    p = np.array([profile[lb] for lb in labels], dtype=float)
    p /= p.sum()
    lo, hi = spec.objects_per_room
    n_obj = int(rng.integers(lo, hi + 1))
    n_cl = int(rng.integers(spec.clusters_per_room[0], spec.clusters_per_room[1] + 1))
    x0, y0, x1, y1 = bounds
    margin = 0.4
    centers = np.column_stack([
        rng.uniform(x0 + margin, x1 - margin, n_cl),
        rng.uniform(y0 + margin, y1 - margin, n_cl),
    ])
    objs = []
    for i in range(n_obj):
        label = labels[rng.choice(len(labels), p=p)]
        nominal = np.array(LABEL_EXTENTS[label])
        ext = nominal * rng.uniform(1 - spec.size_jitter, 1 + spec.size_jitter, 3)
        c = centers[i % n_cl] + rng.normal(0.0, spec.cluster_spread, 2)
        c[0] = min(max(c[0], x0 + 0.05), x1 - 0.05)
        c[1] = min(max(c[1], y0 + 0.05), y1 - 0.05)
        z = ext[2] / 2.0
        # 6-decimal values survive the observation file format bit-exactly
        objs.append(ObjectInstance(
            label,
            (round(float(c[0]), 6), round(float(c[1]), 6), round(float(z), 6)),
            tuple(round(float(e), 6) for e in ext),
        ))
    return tuple(objs)


def generate_world(spec: WorldSpec) -> World:
    """Build the grid, rooms, doorways and object layouts for ``spec``."""
    nx, width, height, col0, col_w, row0, row_h = _layout(spec)
    cs = spec.cell_size
    occ = np.ones((height, width), dtype=bool)
    reg = np.zeros((height, width), dtype=np.int64)
    type_rng = _rng(spec.seed, 3)
    room_types = type_rng.choice(len(spec.room_types), size=spec.rooms)
    rooms = []
    mids = []
    for k in range(spec.rooms):
        gi, gj = divmod(k, nx)
        r0, c0 = int(row0[gi]), int(col0[gj])
        r1, c1 = r0 + int(row_h[gi]) - 1, c0 + int(col_w[gj]) - 1
        occ[r0:r1 + 1, c0:c1 + 1] = False
        reg[r0:r1 + 1, c0:c1 + 1] = k + 1
        mr, mc = r0 + (r1 - r0) // 2, c0 + (c1 - c0) // 2
        mids.append((mr, mc))
        rtype = spec.room_types[int(room_types[k])]
        bounds = (c0 * cs, r0 * cs, (c1 + 1) * cs, (r1 + 1) * cs)
        rooms.append(Room(
            id=f"r{k:03d}",
            region=k + 1,
            room_type=rtype,
            cells=(r0, c0, r1, c1),
            node_position=((mc + 0.5) * cs, (mr + 0.5) * cs),
            objects=_place_objects(spec, k, rtype, bounds),
        ))
    doors = _doors(spec, nx)
    for a, b in doors:
        ra, rb = rooms[a], rooms[b]
        half = spec.door_cells // 2
        if b == a + 1:
            # vertical wall between horizontal neighbours, centred on the shared middle row
            r, c = mids[a][0], ra.cells[3] + 1
            cells = (slice(r - half, r + half + 1), c)
        else:
            r, c = ra.cells[2] + 1, mids[a][1]
            cells = (r, slice(c - half, c + half + 1))
        occ[cells] = False
        reg[cells] = ra.region
    grid = FloorGrid(width, height, cs, occ, reg)
    return World(spec, grid, tuple(rooms), tuple((rooms[a].id, rooms[b].id) for a, b in doors))


# ---------------------------------------------------------------------------
# rendering and perturbation


def to_viewer_frame(obj: ObjectInstance, pose, camera_height: float) -> ObjectInstance:
    x, y, h = pose
    dx, dy = obj.centroid[0] - x, obj.centroid[1] - y
    ch, sh = math.cos(h), math.sin(h)
    return obj.with_centroid((ch * dx + sh * dy, -sh * dx + ch * dy, obj.centroid[2] - camera_height))


def in_fov(obj: ObjectInstance, fov: float) -> bool:
    if fov >= TWO_PI:
        return True
    az = math.atan2(obj.centroid[1], obj.centroid[0])
    return abs(az) <= fov / 2.0


def render_observation(world: World, pose, fov: float = TWO_PI) -> Observation:
    """Objects of the room containing ``pose`` in the viewer frame, cut to ``fov``.

    The viewer frame has +X along the heading, +Z up and its origin at the
    camera. ``pose`` is ``(x, y, heading)`` in world metres/radians.
    """
    if not 0.0 < fov <= TWO_PI + 1e-12:
        raise ValueError(f"fov {fov} outside (0, 2*pi]")
    room = world.room_at(pose[:2])
    if room is None:
        raise InvalidPose(f"pose {tuple(pose)} is not on a free floor cell")
    objs = [to_viewer_frame(o, pose, world.spec.camera_height) for o in room.objects]
    objs = [o for o in objs if in_fov(o, fov)]
    return Observation(tuple(float(v) for v in pose), float(fov), tuple(objs), room.id)


def perturb(obs: Observation, kind, magnitude: float, seed: int) -> Observation:
    """Seeded perturbation of an observation.

    SPATIAL adds N(0, magnitude^2) offsets to every centroid coordinate,
    ORIENTATION rotates the whole view by ``magnitude`` radians with a seeded
    sign, OBJECT_DROP removes ``floor(magnitude * n)`` objects. Drops with the
    same seed are nested: a larger fraction removes a superset.
    """
    kind = PerturbKind(kind)
    if magnitude < 0:
        raise ValueError("perturbation magnitude must be nonnegative")
    objs = list(obs.objects)
    rng = np.random.default_rng([seed, 17])
    if kind is PerturbKind.SPATIAL:
        if magnitude == 0:
            return obs
        off = rng.normal(0.0, magnitude, (len(objs), 3))
        objs = [o.with_centroid(np.add(o.centroid, d)) for o, d in zip(objs, off)]
    elif kind is PerturbKind.ORIENTATION:
        if magnitude == 0:
            return obs
        ang = magnitude if rng.random() < 0.5 else -magnitude
        c, s = math.cos(ang), math.sin(ang)
        objs = [o.with_centroid((c * o.centroid[0] - s * o.centroid[1],
                                 s * o.centroid[0] + c * o.centroid[1], o.centroid[2]))
                for o in objs]
    else:
        if not 0.0 <= magnitude < 1.0:
            raise ValueError("drop fraction must lie in [0, 1)")
        k = math.floor(magnitude * len(objs))
        if k >= len(objs):
            raise EmptyScene("perturbation would drop every object")
        gone = set(rng.permutation(len(objs))[:k].tolist())
        objs = [o for i, o in enumerate(objs) if i not in gone]
    return Observation(obs.pose, obs.fov, tuple(objs), obs.room_id)


@dataclass(frozen=True)
class Perturbation:
    kind: PerturbKind
    magnitude: float

    @classmethod
    def parse(cls, text: str) -> "Perturbation":
        """Parse ``kind:magnitude`` such as ``drop:0.5``, ``spatial:0.1``, ``orientation:10deg``."""
        name, _, mag = text.partition(":")
        key = {"spatial": "SPATIAL", "orientation": "ORIENTATION", "drop": "OBJECT_DROP",
               "object_drop": "OBJECT_DROP"}.get(name.strip().lower(), name.strip().upper())
        mag = mag.strip()
        value = math.radians(float(mag[:-3])) if mag.endswith("deg") else float(mag or 0.0)
        return cls(PerturbKind(key), value)


def apply_perturbations(obs: Observation, perturbations: Sequence[Perturbation], seed: int) -> Observation:
    for i, p in enumerate(perturbations):
        obs = perturb(obs, p.kind, p.magnitude, seed * 131 + i)
    return obs


# ---------------------------------------------------------------------------
# map building and query sampling


def scene_graph_at(world: World, room: Room):
    """Stored scene graph: full panorama at the room node, heading 0."""
    x, y = room.node_position
    obs = render_observation(world, (x, y, 0.0), TWO_PI)
    return graph_from_observation(room.id, obs.objects)


def build_map(world: World) -> TopoMap:
    scene_nodes = [
        MapNode(r.id, NodeKind.SCENE, r.node_position, r.region, scene_graph_at(world, r))
        for r in world.rooms
    ]
    return build_topo_map(world.grid, scene_nodes)


@dataclass(frozen=True)
class QueryPose:
    room_id: str
    x: float
    y: float
    heading: float

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.heading)


def sample_query_poses(world: World, n: int, seed: int) -> list[QueryPose]:
    """Uniform room, uniform position in its interior, uniform heading."""
    rng = _rng(seed, 4)
    cs = world.grid.cell_size
    out = []
    for _ in range(n):
        room = world.rooms[int(rng.integers(len(world.rooms)))]
        r0, c0, r1, c1 = room.cells
        x = float(rng.uniform(c0 * cs, (c1 + 1) * cs))
        y = float(rng.uniform(r0 * cs, (r1 + 1) * cs))
        h = float(wrap_pi(rng.uniform(0.0, TWO_PI)))
        out.append(QueryPose(room.id, x, y, h))
    return out


# ---------------------------------------------------------------------------
# persistence


def save_world(world: World, out_dir, query_poses: Sequence[QueryPose] = ()) -> Path:
    """Write grid, per-room object files and a ``WORLD v1`` manifest."""
    out = Path(out_dir)
    (out / "rooms").mkdir(parents=True, exist_ok=True)
    save_grid(world.grid, out / "grid.txt")
    lines = ["WORLD v1", f"spec {world.spec.to_json()}", "grid grid.txt"]
    for r in world.rooms:
        rel = f"rooms/{r.id}.obs"
        write_observation(out / rel, r.objects, header=f"room {r.id} ({r.room_type}), world frame")
        r0, c0, r1, c1 = r.cells
        lines.append(f"room {r.id} {r.room_type} {r.region} {r0} {c0} {r1} {c1} "
                     f"{r.node_position[0]!r} {r.node_position[1]!r} {rel}")
    for a, b in world.doors:
        lines.append(f"door {a} {b}")
    for q in query_poses:
        lines.append(f"pose {q.room_id} {q.x!r} {q.y!r} {q.heading!r}")
    (out / "world.manifest").write_text("\n".join(lines) + "\n")
    return out / "world.manifest"


def load_world(path) -> tuple[World, list[QueryPose]]:
    path = Path(path)
    manifest = path / "world.manifest" if path.is_dir() else path
    base = manifest.parent
    lines = manifest.read_text().splitlines()
    if not lines or lines[0].strip() != "WORLD v1":
        raise UnsupportedVersion(f"not a WORLD v1 manifest: {manifest}")
    spec, grid, rooms, doors, poses = None, None, [], [], []
    for ln in lines[1:]:
        tag, _, rest = ln.partition(" ")
        if tag == "spec":
            spec = WorldSpec.from_dict(json.loads(rest))
        elif tag == "grid":
            grid = load_grid(base / rest.strip())
        elif tag == "room":
            f = rest.split()
            objs = tuple(read_observation(base / f[9]))
            rooms.append(Room(f[0], int(f[2]), f[1], tuple(int(v) for v in f[3:7]),
                              (float(f[7]), float(f[8])), objs))
        elif tag == "door":
            a, b = rest.split()
            doors.append((a, b))
        elif tag == "pose":
            f = rest.split()
            poses.append(QueryPose(f[0], float(f[1]), float(f[2]), float(f[3])))
    return World(spec, grid, tuple(rooms), tuple(doors)), poses
