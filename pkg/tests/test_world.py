import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from salnav.errors import InfeasibleWorld, InvalidPose
from salnav.scene import ObjectInstance, graph_from_observation, wrap_2pi
from salnav.world import (
    Observation,
    Perturbation,
    PerturbKind,
    WorldSpec,
    apply_perturbations,
    build_map,
    generate_world,
    in_fov,
    load_world,
    perturb,
    sample_query_poses,
    save_world,
    scene_graph_at,
    to_viewer_frame,
)

D = math.radians


def _tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


# ---------------------------------------------------------------------------
# generation


def test_generation_is_byte_identical(tmp_path):
    spec = WorldSpec(seed=7, rooms=9)
    save_world(generate_world(spec), tmp_path / "a")
    save_world(generate_world(spec), tmp_path / "b")
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_different_seeds_differ():
    assert generate_world(WorldSpec(seed=1)) != generate_world(WorldSpec(seed=2))


def test_two_rooms_one_door():
    world = generate_world(WorldSpec(seed=3, rooms=2))
    assert len(world.rooms) == 2 and len(world.doors) == 1
    topo = build_map(world)
    assert len(topo.scene_nodes()) == 2


@pytest.mark.parametrize("rooms", [5, 12, 20])
def test_room_structure(rooms):
    world = generate_world(WorldSpec(seed=rooms, rooms=rooms))
    assert len(world.rooms) == rooms
    ids = {r.id for r in world.rooms}
    assert all(a in ids and b in ids for a, b in world.doors)
    for r in world.rooms:
        assert world.room_at(r.node_position) is r
        lo, hi = world.spec.objects_per_room
        assert lo <= len(r.objects) <= hi
        assert all(r.contains(o.centroid[:2], world.grid.cell_size) for o in r.objects)


def test_infeasible_world():
    with pytest.raises(InfeasibleWorld):
        generate_world(WorldSpec(seed=0, rooms=12, width=10))


def test_spec_validation():
    with pytest.raises(ValueError):
        WorldSpec(rooms=1)
    with pytest.raises(ValueError):
        WorldSpec(door_cells=2)
    with pytest.raises(ValueError):
        WorldSpec(room_types=("nowhere",))


def test_spec_json_round_trip():
    spec = WorldSpec(seed=5, rooms=7, room_cells=(9, 11))
    assert WorldSpec.from_dict(json.loads(spec.to_json())) == spec


def test_world_round_trip(tmp_path, world12):
    poses = sample_query_poses(world12, 5, seed=1)
    save_world(world12, tmp_path, poses)
    world, back = load_world(tmp_path)
    assert world == world12 and back == poses


def test_query_poses_inside_their_room(world12):
    for q in sample_query_poses(world12, 50, seed=2):
        assert world12.room_at((q.x, q.y)).id == q.room_id
        assert -math.pi < q.heading <= math.pi


# ---------------------------------------------------------------------------
# rendering


def test_render_at_node_is_room_minus_origin(world12):
    h = world12.spec.camera_height
    for r in world12.rooms:
        x, y = r.node_position
        obs = world12.render((x, y, 0.0))
        assert obs.room_id == r.id
        want = [(o.centroid[0] - x, o.centroid[1] - y, o.centroid[2] - h) for o in r.objects]
        assert np.allclose([o.centroid for o in obs.objects], want, atol=1e-12)


def test_render_heading_shifts_azimuths(world12):
    r = world12.rooms[4]
    x, y = r.node_position
    delta = D(37)
    g0 = graph_from_observation("a", world12.render((x, y, 0.0)).objects)
    g1 = graph_from_observation("b", world12.render((x, y, delta)).objects)
    for n0, n1 in zip(g0.nodes, g1.nodes):
        diff = wrap_2pi(n1.azimuth - n0.azimuth + delta)
        assert min(diff, 2 * math.pi - diff) < 1e-9


def test_render_off_floor():
    world = generate_world(WorldSpec(seed=0, rooms=4))
    with pytest.raises(InvalidPose):
        world.render((0.01, 0.01, 0.0))


RING = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


@pytest.mark.parametrize("fov_deg, count", [(60, 1), (120, 3), (180, 5), (360, 8)])
def test_fov_counts(fov_deg, count):
    # objects every 45 degrees; the half-angles 30, 60, 90, 180 admit 0, +-45, +-90 and all
    objs = [ObjectInstance("box", (float(x), float(y), 0.0), (0.2, 0.2, 0.2)) for x, y in RING]
    assert sum(in_fov(o, D(fov_deg)) for o in objs) == count


@given(st.floats(-math.pi, math.pi), st.floats(0.1, 2 * math.pi))
def test_fov_subset(heading, fov):
    world = generate_world(WorldSpec(seed=0, rooms=4))
    x, y = world.rooms[0].node_position
    full = world.render((x, y, heading)).objects
    cut = world.render((x, y, heading), fov).objects
    assert set(cut) <= set(full)
    assert all(abs(math.atan2(o.centroid[1], o.centroid[0])) <= fov / 2 + 1e-12 for o in cut)


def test_viewer_frame_rotation():
    o = ObjectInstance("box", (2.0, 1.0, 1.5), (1, 1, 1))
    v = to_viewer_frame(o, (1.0, 1.0, math.pi / 2), 1.0)
    assert v.centroid == pytest.approx((0.0, -1.0, 0.5), abs=1e-12)


def test_closed_loop_graphs(world12, map12):
    for r in world12.rooms:
        assert scene_graph_at(world12, r) == map12.node(r.id).graph


# ---------------------------------------------------------------------------
# perturbation


def _obs(n=8):
    objs = tuple(ObjectInstance(f"o{i}", (float(x) + 2, float(y), 0.0), (0.5, 0.5, 0.5))
                 for i, (x, y) in enumerate(RING[:n]))
    return Observation((0.0, 0.0, 0.0), 2 * math.pi, objs, "r000")


@pytest.mark.parametrize("kind", list(PerturbKind))
def test_zero_magnitude_is_identity(kind):
    assert perturb(_obs(), kind, 0.0, seed=3) == _obs()


def test_drop_half_of_eight():
    out = perturb(_obs(), PerturbKind.OBJECT_DROP, 0.5, seed=1)
    assert len(out.objects) == 4
    assert set(out.objects) <= set(_obs().objects)


def test_drop_nested():
    small = set(perturb(_obs(), "OBJECT_DROP", 0.25, seed=9).objects)
    large = set(perturb(_obs(), "OBJECT_DROP", 0.66, seed=9).objects)
    assert large <= small


def test_drop_fraction_bounds():
    with pytest.raises(ValueError):
        perturb(_obs(), PerturbKind.OBJECT_DROP, 1.0, seed=0)
    assert len(perturb(_obs(1), PerturbKind.OBJECT_DROP, 0.99, seed=0).objects) == 1


def test_spatial_noise_scale():
    obs = _obs()
    out = perturb(obs, PerturbKind.SPATIAL, 0.1, seed=4)
    d = np.array([o.centroid for o in out.objects]) - np.array([o.centroid for o in obs.objects])
    assert 0 < np.abs(d).max() < 0.6
    assert [o.label for o in out.objects] == [o.label for o in obs.objects]


def test_orientation_is_rigid_rotation():
    obs = _obs()
    out = perturb(obs, PerturbKind.ORIENTATION, D(10), seed=2)
    turns = set()
    for a, b in zip(obs.objects, out.objects):
        turn = math.atan2(b.centroid[1], b.centroid[0]) - math.atan2(a.centroid[1], a.centroid[0])
        turns.add(round(math.degrees((turn + math.pi) % (2 * math.pi) - math.pi), 9))
        assert math.hypot(*a.centroid) == pytest.approx(math.hypot(*b.centroid), abs=1e-12)
    assert turns in ({10.0}, {-10.0})


def test_perturbation_parse():
    assert Perturbation.parse("drop:0.5") == Perturbation(PerturbKind.OBJECT_DROP, 0.5)
    assert Perturbation.parse("spatial:0.1") == Perturbation(PerturbKind.SPATIAL, 0.1)
    assert Perturbation.parse("orientation:10deg").magnitude == pytest.approx(D(10))
    with pytest.raises(ValueError):
        Perturbation.parse("melt:3")


def test_apply_perturbations_deterministic():
    perts = [Perturbation.parse("spatial:0.1"), Perturbation.parse("drop:0.5")]
    assert apply_perturbations(_obs(), perts, 11) == apply_perturbations(_obs(), perts, 11)
