import math
import random

import pytest
from hypothesis import given, strategies as st

import oracles
from g3.world import (HEADINGS, LEVEL_HEIGHT, EnvironmentModel, Grounding,
                      ManipAction, ManipState, Pose, Prism, TopoMap, TopoNode,
                      Trajectory, WorldError, apply_action, assign_visibility,
                      build_grid_map, derive_places, initial_state,
                      legal_actions, line_of_sight, object_anchor_nodes,
                      state_to_trajectory, visible_objects, wrap_angle)


# --- angles / poses / shapes ---------------------------------------------------


@given(st.floats(-1000, 1000))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi


@given(st.floats(-100, 100))
def test_wrap_angle_periodic(a):
    assert wrap_angle(a + 2 * math.pi) == pytest.approx(wrap_angle(a), abs=1e-9)


def test_pose_rejects_negative_time():
    with pytest.raises(WorldError):
        Pose(-1.0, 0.0, 0.0)


def test_pose_rejects_non_finite_angle():
    with pytest.raises(WorldError):
        Pose(0.0, 0.0, 0.0, yaw=float("nan"))


def test_prism_rejects_degenerate_footprints():
    with pytest.raises(WorldError):
        Prism([(0, 0), (1, 0)], 1.0)  # too few vertices
    with pytest.raises(WorldError):
        Prism.box(0, 0, 0.5, 0.0)  # zero height
    with pytest.raises(WorldError):
        Prism([(0, 0), (1, 1), (1, 0), (0, 1)], 1.0)  # self-intersecting


def test_trajectory_rejects_decreasing_time():
    with pytest.raises(WorldError):
        Trajectory([Pose(1.0, 0, 0), Pose(0.5, 1, 1)])


def test_trajectory_interpolates_linearly():
    tr = Trajectory([Pose(0.0, 0, 0, 0), Pose(2.0, 4, 2, 1)])
    assert tr.position_at(1.0) == pytest.approx((2.0, 1.0, 0.5))
    assert tr.position_at(-5.0) == pytest.approx((0.0, 0.0, 0.0))
    assert tr.position_at(99.0) == pytest.approx((4.0, 2.0, 1.0))


def test_grounding_rejects_bad_tags():
    with pytest.raises(WorldError):
        Grounding("x", Prism.box(0, 0, 1), {"Pallet"},
                  Trajectory.single(Pose(0.0, 0, 0)))


def test_environment_rejects_duplicate_ids():
    g = Grounding("x", Prism.box(0, 0, 1), set(),
                  Trajectory.single(Pose(0.0, 0, 0)))
    with pytest.raises(WorldError):
        EnvironmentModel([g, g], [], Pose(0.0, 0, 0), ((0, 0), (10, 10)))


# --- visibility ------------------------------------------------------------------


def _blocker_world():
    target = Grounding("target", Prism.box(0, 0, 0.3), {"target"},
                       Trajectory.single(Pose(0.0, 4.5, 2.5)))
    blocker = Grounding("blocker", Prism.box(0, 0, 0.4), {"blocker"},
                        Trajectory.single(Pose(0.0, 2.5, 2.5)))
    return EnvironmentModel([target, blocker], [], Pose(0.0, 0.5, 0.5),
                            ((0.0, 0.0), (5.0, 5.0)))


def test_line_of_sight_straight_occlusion():
    env = _blocker_world()
    target = env.grounding("target")
    blockers = list(env.objects)
    assert line_of_sight((0.5, 2.5), target, blockers) is False
    assert line_of_sight((0.5, 4.5), target, blockers) is True


def test_visibility_matches_sampling_oracle():
    env = _blocker_world()
    topo = build_grid_map(env, cell=1.0)
    blockers = list(env.objects)
    checked = 0
    for n in topo.nodes:
        for obj in env.objects:
            want = oracles.sampled_line_of_sight(n.pos, obj, blockers)
            if want is None:
                continue  # too close to the tolerance band to judge
            got = obj.tags <= n.visible_tags
            assert got == want, (n.id, obj.id)
            checked += 1
    assert checked > 10


def test_single_object_visible_everywhere():
    obj = Grounding("o", Prism.box(0, 0, 0.3), {"thing"},
                    Trajectory.single(Pose(0.0, 2.5, 2.5)))
    env = EnvironmentModel([obj], [], Pose(0.0, 0.5, 0.5),
                           ((0.0, 0.0), (5.0, 5.0)))
    topo = build_grid_map(env, cell=1.0)
    for n in topo.nodes:
        assert "thing" in n.visible_tags


def test_visible_objects_reads_precomputed_tags():
    n = TopoNode("a", (0.0, 0.0), 0, frozenset({"couch", "window"}))
    topo = TopoMap([n], [])
    assert visible_objects(topo, "a") == frozenset({"couch", "window"})


def test_assign_visibility_respects_levels():
    obj = Grounding("o", Prism.box(0, 0, 0.3), {"thing"},
                    Trajectory.single(Pose(0.0, 1.0, 1.0, LEVEL_HEIGHT)))
    env = EnvironmentModel([obj], [], Pose(0.0, 0, 0), ((0, 0), (4, 4)))
    nodes = [TopoNode("a", (0.0, 0.0), 0), TopoNode("b", (0.0, 0.0), 1)]
    topo = assign_visibility(TopoMap(nodes, [("a", "up", "b"),
                                             ("b", "down", "a")]), env)
    assert topo.node("a").visible_tags == frozenset()
    assert topo.node("b").visible_tags == frozenset({"thing"})


# --- maps -----------------------------------------------------------------------


def test_grid_map_structure():
    env = _blocker_world()
    topo = build_grid_map(env, cell=1.0)
    ids = {n.id for n in topo.nodes}
    # the two object-center cells are blocked
    assert "n2_2" not in ids and "n4_2" not in ids
    assert len(ids) == 23
    for a, d, b in topo.edges:
        assert d in HEADINGS
        na, nb = topo.node(a), topo.node(b)
        dx, dy = nb.pos[0] - na.pos[0], nb.pos[1] - na.pos[1]
        assert (round(math.atan2(dy, dx), 6) ==
                round(HEADINGS[d], 6))
    for n in topo.nodes:
        nbrs = topo.neighbors(n.id)
        assert nbrs == sorted(nbrs, key=lambda db: (db[1], db[0]))


def test_topomap_rejects_bad_edges():
    n = TopoNode("a", (0.0, 0.0))
    with pytest.raises(WorldError):
        TopoMap([n], [("a", "e", "zzz")])
    with pytest.raises(WorldError):
        TopoMap([n, TopoNode("b", (1.0, 0.0))], [("a", "up", "b")])


def test_map_round_trip(tmp_path, demo_world):
    env, topo = demo_world
    p = tmp_path / "m.json"
    topo.save(str(p))
    again = TopoMap.load(str(p))
    assert again.to_dict() == topo.to_dict()
    q = tmp_path / "e.json"
    env.save(str(q))
    assert EnvironmentModel.load(str(q)).to_dict() == env.to_dict()


# --- manipulation state space ----------------------------------------------------


def test_anchors_pick_nearest_node(demo_world):
    env, topo = demo_world
    anchors = object_anchor_nodes(env, topo)
    assert anchors["tire_pallet"] == "n0_0"
    assert anchors["truck"] == "n1_0"


def test_initial_state_places_all_objects(demo_world):
    env, topo = demo_world
    s0 = initial_state(env, topo)
    assert s0.robot_node == "n0_1"
    assert s0.carried is None
    assert dict(s0.placements) == {"tire_pallet": "n0_0", "truck": "n1_0"}


def test_legal_actions_order_and_content(demo_world):
    env, topo = demo_world
    s0 = initial_state(env, topo)
    acts = legal_actions(s0, topo, env)
    kinds = [a.kind for a in acts]
    assert kinds == sorted(kinds, key=lambda k: ("move", "pickup",
                                                 "putdown").index(k))
    # at the pallet's anchor, pickup becomes available
    s1 = apply_action(s0, ManipAction("move", "n0_0"), topo, env)
    assert ManipAction("pickup", "tire_pallet") in legal_actions(s1, topo, env)
    # carrying enables putdown at nearby places only
    s2 = apply_action(s1, ManipAction("pickup", "tire_pallet"), topo, env)
    put = [a.target for a in legal_actions(s2, topo, env) if a.kind == "putdown"]
    assert "on_tire_pallet" in put
    assert all(p.startswith(("on_", "near_")) for p in put)


def test_apply_action_rejects_illegal(demo_world):
    env, topo = demo_world
    s0 = initial_state(env, topo)
    with pytest.raises(WorldError):
        apply_action(s0, ManipAction("pickup", "truck"), topo, env)
    with pytest.raises(WorldError):
        ManipAction("teleport", "x")


def test_carried_object_cannot_have_placement():
    with pytest.raises(WorldError):
        ManipState("a", "obj", (("obj", "a"),))


def test_state_to_trajectory_tracks_carried_object(demo_world):
    env, topo = demo_world
    s0 = initial_state(env, topo)
    s1 = apply_action(s0, ManipAction("move", "n0_0"), topo, env)
    s2 = apply_action(s1, ManipAction("pickup", "tire_pallet"), topo, env)
    s3 = apply_action(s2, ManipAction("move", "n1_0"), topo, env)
    s4 = apply_action(s3, ManipAction("putdown", "on_truck"), topo, env)
    robot, objs = state_to_trajectory([s0, s1, s2, s3, s4], env, topo)
    assert len(robot) == 5
    assert [p.tau for p in robot.poses] == [0.0, 1.0, 2.0, 3.0, 4.0]
    # while carried (steps 2-3) the pallet rides with the robot
    pal = objs["tire_pallet"]
    assert pal.poses[2].xy == robot.poses[2].xy
    assert pal.poses[3].xy == robot.poses[3].xy
    # after putdown it sits at the place grounding
    place = env.grounding("on_truck")
    assert pal.poses[4].xy == (place.pose.x, place.pose.y)
    assert pal.poses[4].z == place.pose.z
    # the truck never moves
    assert len({p.xy for p in objs["truck"].poses}) == 1


def test_state_to_trajectory_validates_transitions(demo_world):
    env, topo = demo_world
    s0 = initial_state(env, topo)
    bad = ManipState("n1_0", s0.carried, s0.placements)  # diagonal: not adjacent
    with pytest.raises(WorldError):
        state_to_trajectory([s0, bad], env, topo)
    with pytest.raises(WorldError):
        state_to_trajectory([], env, topo)


def test_random_walks_always_validate(demo_world):
    env, topo = demo_world
    rng = random.Random(7)
    for _ in range(20):
        states = [initial_state(env, topo)]
        for _ in range(rng.randint(1, 5)):
            acts = legal_actions(states[-1], topo, env)
            states.append(apply_action(states[-1], rng.choice(acts), topo, env))
        robot, _ = state_to_trajectory(states, env, topo)
        assert len(robot) == len(states)


def test_derive_places_on_top_and_ring(demo_world):
    env, _ = demo_world
    on = env.grounding("on_tire_pallet")
    near = env.grounding("near_tire_pallet")
    obj = env.grounding("tire_pallet")
    assert on.pose.z == pytest.approx(obj.top_z)
    assert near.pose.z == pytest.approx(obj.base_z)
    assert near.footprint().contains(obj.footprint())
