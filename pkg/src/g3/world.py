"""Environment models, groundings, topological maps, and the discrete
manipulation state/action space.

All types here are immutable after construction and safe to share across
concurrent inference workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from shapely.geometry import LineString, Point, Polygon

CARDINALS = ("e", "n", "w", "s")
VERTICALS = ("up", "down")

# Heading (radians, CCW from +x) for each cardinal direction label.
HEADINGS = {"e": 0.0, "n": math.pi / 2, "w": math.pi, "s": -math.pi / 2}

# Vertical spacing between levels of a multi-level map, meters.
LEVEL_HEIGHT = 3.0

# Penetration depth below which a ray is not considered blocked.
LOS_EPS = 1e-9


class WorldError(ValueError):
    """Invalid world geometry, ids, or state transitions."""


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2 * math.pi)
    if a > math.pi:
        a -= 2 * math.pi
    elif a <= -math.pi:
        a += 2 * math.pi
    return a


@dataclass(frozen=True)
class Pose:
    tau: float
    x: float
    y: float
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        if self.tau < 0:
            raise WorldError(f"pose time must be >= 0, got {self.tau}")
        for name in ("roll", "pitch", "yaw"):
            if not math.isfinite(getattr(self, name)):
                raise WorldError(f"pose angle {name} is not finite")

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau, "x": self.x, "y": self.y, "z": self.z,
            "roll": self.roll, "pitch": self.pitch, "yaw": self.yaw,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(**{k: float(d.get(k, 0.0)) for k in
                      ("tau", "x", "y", "z", "roll", "pitch", "yaw")})


class Prism:
    """A vertical prism: a simple 2-D polygon footprint extruded to a height."""

    def __init__(self, polygon: list[tuple[float, float]], height: float):
        if len(polygon) < 3:
            raise WorldError("prism footprint needs at least 3 vertices")
        if height <= 0:
            raise WorldError(f"prism height must be > 0, got {height}")
        self.polygon = tuple((float(x), float(y)) for x, y in polygon)
        self.height = float(height)
        self._shape = Polygon(self.polygon)
        if not self._shape.is_valid or self._shape.area <= 0:
            raise WorldError("prism footprint must be a simple polygon")

    @property
    def shape(self) -> Polygon:
        return self._shape

    def to_dict(self) -> dict:
        return {"polygon": [list(p) for p in self.polygon], "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "Prism":
        return cls([tuple(p) for p in d["polygon"]], d["height"])

    @classmethod
    def box(cls, cx: float, cy: float, half: float, height: float = 1.0) -> "Prism":
        return cls([(cx - half, cy - half), (cx + half, cy - half),
                    (cx + half, cy + half), (cx - half, cy + half)], height)

    def __repr__(self):
        return f"Prism({len(self.polygon)} verts, h={self.height})"


class Trajectory:
    """An ordered pose sequence; position is linearly interpolated in time."""

    def __init__(self, poses: list[Pose]):
        if not poses:
            raise WorldError("trajectory must contain at least one pose")
        for a, b in zip(poses, poses[1:]):
            if b.tau < a.tau:
                raise WorldError("trajectory times must be non-decreasing")
        self.poses = tuple(poses)

    @property
    def start(self) -> Pose:
        return self.poses[0]

    @property
    def end(self) -> Pose:
        return self.poses[-1]

    @property
    def xy_points(self) -> list[tuple[float, float]]:
        return [p.xy for p in self.poses]

    def position_at(self, t: float) -> tuple[float, float, float]:
        ps = self.poses
        if t <= ps[0].tau:
            return (ps[0].x, ps[0].y, ps[0].z)
        if t >= ps[-1].tau:
            return (ps[-1].x, ps[-1].y, ps[-1].z)
        for a, b in zip(ps, ps[1:]):
            if a.tau <= t <= b.tau:
                if b.tau == a.tau:
                    return (b.x, b.y, b.z)
                f = (t - a.tau) / (b.tau - a.tau)
                return (a.x + f * (b.x - a.x), a.y + f * (b.y - a.y),
                        a.z + f * (b.z - a.z))
        raise AssertionError("unreachable")

    def __len__(self):
        return len(self.poses)

    @classmethod
    def single(cls, pose: Pose) -> "Trajectory":
        return cls([pose])


class Grounding:
    """A concrete object, place, path, or event: (shape, tags, trajectory)."""

    def __init__(self, id: str, shape: Prism, tags: set[str], path: Trajectory):
        for t in tags:
            if not t or t != t.lower():
                raise WorldError(f"tag {t!r} must be a non-empty lowercase token")
        self.id = id
        self.shape = shape
        self.tags = frozenset(tags)
        self.path = path

    @property
    def pose(self) -> Pose:
        return self.path.end

    def footprint(self) -> Polygon:
        """Footprint polygon translated to the current (last) pose."""
        p = self.pose
        if p.x == 0.0 and p.y == 0.0:
            return self.shape.shape
        return Polygon([(x + p.x, y + p.y) for x, y in self.shape.polygon])

    @property
    def base_z(self) -> float:
        return self.pose.z

    @property
    def top_z(self) -> float:
        return self.pose.z + self.shape.height

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "tags": sorted(self.tags),
            "polygon": [list(p) for p in self.shape.polygon],
            "height": self.shape.height,
            "pose": self.pose.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grounding":
        pose = Pose.from_dict(d.get("pose", {}))
        return cls(d["id"], Prism([tuple(p) for p in d["polygon"]], d["height"]),
                   set(d.get("tags", [])), Trajectory.single(pose))

    def __repr__(self):
        return f"Grounding({self.id!r}, tags={sorted(self.tags)})"


class EnvironmentModel:
    """Static world model: objects, candidate places, robot start, scene bbox."""

    def __init__(self, objects: list[Grounding], places: list[Grounding],
                 robot_start: Pose, scene_bbox: tuple[tuple[float, float], tuple[float, float]]):
        ids = [g.id for g in objects] + [g.id for g in places]
        if len(set(ids)) != len(ids):
            raise WorldError("grounding ids must be unique across objects and places")
        self.objects = tuple(objects)
        self.places = tuple(places)
        self.robot_start = robot_start
        (xmin, ymin), (xmax, ymax) = scene_bbox
        if xmax <= xmin or ymax <= ymin:
            raise WorldError("scene bbox is degenerate")
        self.scene_bbox = ((float(xmin), float(ymin)), (float(xmax), float(ymax)))
        self._by_id = {g.id: g for g in self.objects + self.places}

    def grounding(self, gid: str) -> Grounding:
        try:
            return self._by_id[gid]
        except KeyError:
            raise WorldError(f"unknown grounding id {gid!r}") from None

    def has(self, gid: str) -> bool:
        return gid in self._by_id

    @property
    def bbox_diagonal(self) -> float:
        (xmin, ymin), (xmax, ymax) = self.scene_bbox
        return math.hypot(xmax - xmin, ymax - ymin)

    def to_dict(self) -> dict:
        return {
            "objects": [g.to_dict() for g in self.objects],
            "places": [g.to_dict() for g in self.places],
            "robot_start": self.robot_start.to_dict(),
            "bbox": [list(self.scene_bbox[0]), list(self.scene_bbox[1])],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentModel":
        return cls(
            [Grounding.from_dict(o) for o in d.get("objects", [])],
            [Grounding.from_dict(o) for o in d.get("places", [])],
            Pose.from_dict(d["robot_start"]),
            (tuple(d["bbox"][0]), tuple(d["bbox"][1])),
        )

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "EnvironmentModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TopoNode:
    id: str
    pos: tuple[float, float]
    level: int = 0
    visible_tags: frozenset = frozenset()

    def __post_init__(self):
        if self.level < 0:
            raise WorldError("node level must be >= 0")

    @property
    def z(self) -> float:
        return self.level * LEVEL_HEIGHT


class TopoMap:
    """Topological nodes with directed, direction-labeled edges."""

    def __init__(self, nodes: list[TopoNode], edges: list[tuple[str, str, str]]):
        self.nodes = tuple(nodes)
        self._by_id = {n.id: n for n in self.nodes}
        if len(self._by_id) != len(self.nodes):
            raise WorldError("node ids must be unique")
        self.levels = max((n.level for n in self.nodes), default=0) + 1
        allowed = set(CARDINALS) | (set(VERTICALS) if self.levels > 1 else set())
        for a, d, b in edges:
            if a not in self._by_id or b not in self._by_id:
                raise WorldError(f"edge ({a},{d},{b}) references unknown node")
            if d not in allowed:
                raise WorldError(f"edge direction {d!r} not allowed")
        self.edges = tuple((a, d, b) for a, d, b in edges)
        self._adj: dict[str, list[tuple[str, str]]] = {n.id: [] for n in self.nodes}
        for a, d, b in self.edges:
            self._adj[a].append((d, b))
        for nid in self._adj:
            self._adj[nid].sort(key=lambda db: (db[1], db[0]))

    def node(self, nid: str) -> TopoNode:
        try:
            return self._by_id[nid]
        except KeyError:
            raise WorldError(f"unknown node id {nid!r}") from None

    def has(self, nid: str) -> bool:
        return nid in self._by_id

    def neighbors(self, nid: str) -> list[tuple[str, str]]:
        """(direction, node id) pairs, deterministically ordered."""
        self.node(nid)
        return list(self._adj[nid])

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "pos": list(n.pos), "level": n.level,
                       "visible": sorted(n.visible_tags)} for n in self.nodes],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TopoMap":
        nodes = [TopoNode(n["id"], tuple(n["pos"]), n.get("level", 0),
                          frozenset(n.get("visible", []))) for n in d["nodes"]]
        return cls(nodes, [tuple(e) for e in d["edges"]])

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "TopoMap":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def visible_objects(topo: TopoMap, node_id: str) -> frozenset:
    """Tags of objects visible from a node (precomputed at map-build time)."""
    return topo.node(node_id).visible_tags


def line_of_sight(p: tuple[float, float], target: Grounding,
                  blockers: list[Grounding]) -> bool:
    """2-D ray cast from p to the target's footprint centroid.

    Blocked when the ray penetrates another object's footprint interior by
    more than LOS_EPS.
    """
    tgt = target.footprint()
    c = tgt.centroid
    ray = LineString([p, (c.x, c.y)])
    if ray.length == 0:
        return True
    for b in blockers:
        if b.id == target.id:
            continue
        inter = ray.intersection(b.footprint())
        if not inter.is_empty and inter.length > LOS_EPS:
            return False
    return True


def assign_visibility(topo: TopoMap, env: EnvironmentModel) -> TopoMap:
    """Rebuild a map with visible_tags computed by ray casting.

    An object is visible from a node when the node is on the object's level
    band and the ray to the object centroid is unobstructed.
    """
    nodes = []
    for n in topo.nodes:
        tags: set[str] = set()
        zlo, zhi = n.level * LEVEL_HEIGHT, (n.level + 1) * LEVEL_HEIGHT
        for obj in env.objects:
            if not (zlo - 1e-9 <= obj.base_z < zhi - 1e-9):
                continue
            if line_of_sight(n.pos, obj, list(env.objects)):
                tags |= obj.tags
        nodes.append(TopoNode(n.id, n.pos, n.level, frozenset(tags)))
    return TopoMap(nodes, list(topo.edges))


def build_grid_map(env: EnvironmentModel, cell: float = 1.0, levels: int = 1) -> TopoMap:
    """Grid topological map over the scene bbox.

    Cells whose center lies inside any object footprint are blocked; free
    cell centers become nodes, 4-connected with cardinal edge labels.
    Visibility is computed by ray casting at build time.
    """
    (xmin, ymin), (xmax, ymax) = env.scene_bbox
    nx = max(1, int(round((xmax - xmin) / cell)))
    ny = max(1, int(round((ymax - ymin) / cell)))
    feet = [o.footprint() for o in env.objects]
    free: dict[tuple[int, int], tuple[float, float]] = {}
    for i in range(nx):
        for j in range(ny):
            cx, cy = xmin + (i + 0.5) * cell, ymin + (j + 0.5) * cell
            pt = Point(cx, cy)
            if any(f.contains(pt) for f in feet):
                continue
            free[(i, j)] = (cx, cy)
    nodes, edges = [], []
    for lvl in range(levels):
        for (i, j), pos in sorted(free.items()):
            nodes.append(TopoNode(f"n{i}_{j}" + (f"_l{lvl}" if levels > 1 else ""),
                                  pos, lvl))
    def nid(i, j, lvl):
        return f"n{i}_{j}" + (f"_l{lvl}" if levels > 1 else "")
    steps = {"e": (1, 0), "w": (-1, 0), "n": (0, 1), "s": (0, -1)}
    for lvl in range(levels):
        for (i, j) in sorted(free):
            for d, (di, dj) in steps.items():
                if (i + di, j + dj) in free:
                    edges.append((nid(i, j, lvl), d, nid(i + di, j + dj, lvl)))
            if lvl + 1 < levels:
                edges.append((nid(i, j, lvl), "up", nid(i, j, lvl + 1)))
            if lvl > 0:
                edges.append((nid(i, j, lvl), "down", nid(i, j, lvl - 1)))
    return assign_visibility(TopoMap(nodes, edges), env)


def derive_places(env: EnvironmentModel) -> list[Grounding]:
    """Candidate place groundings for each object: its top surface and the
    ring of ground immediately around it."""
    places = []
    for obj in env.objects:
        foot = obj.footprint()
        top_pose = Pose(0.0, foot.centroid.x, foot.centroid.y, obj.top_z)
        places.append(Grounding(
            f"on_{obj.id}",
            Prism([(x - top_pose.x, y - top_pose.y) for x, y in foot.exterior.coords[:-1]], 0.1),
            set(), Trajectory.single(top_pose)))
        ring = foot.buffer(1.0, join_style=2)
        rc = ring.centroid
        near_pose = Pose(0.0, rc.x, rc.y, obj.base_z)
        places.append(Grounding(
            f"near_{obj.id}",
            Prism([(x - rc.x, y - rc.y) for x, y in ring.exterior.coords[:-1]], 0.1),
            set(), Trajectory.single(near_pose)))
    return places


# --- Discrete manipulation state/action space -------------------------------

@dataclass(frozen=True)
class ManipAction:
    kind: str  # "move" | "pickup" | "putdown"
    target: str

    def __post_init__(self):
        if self.kind not in ("move", "pickup", "putdown"):
            raise WorldError(f"unknown action kind {self.kind!r}")

    def __repr__(self):
        return f"{self.kind}({self.target})"


@dataclass(frozen=True)
class ManipState:
    robot_node: str
    carried: str | None
    placements: tuple  # sorted tuple of (grounding id, location id)

    def __post_init__(self):
        pl = dict(self.placements)
        if self.carried is not None and self.carried in pl:
            raise WorldError("carried object cannot also have a placement")

    @property
    def placement_map(self) -> dict[str, str]:
        return dict(self.placements)

    def with_placements(self, pl: dict[str, str]) -> "ManipState":
        return ManipState(self.robot_node, self.carried, tuple(sorted(pl.items())))


def object_anchor_nodes(env: EnvironmentModel, topo: TopoMap) -> dict[str, str]:
    """Nearest map node to each object/place, by 2-D distance (id tie-break)."""
    anchors = {}
    for g in list(env.objects) + list(env.places):
        p = g.pose
        lvl = int(round(p.z / LEVEL_HEIGHT))
        cands = [n for n in topo.nodes if n.level == min(lvl, topo.levels - 1)]
        if not cands:
            cands = list(topo.nodes)
        best = min(cands, key=lambda n: (math.hypot(n.pos[0] - p.x, n.pos[1] - p.y), n.id))
        anchors[g.id] = best.id
    return anchors


def initial_state(env: EnvironmentModel, topo: TopoMap) -> ManipState:
    anchors = object_anchor_nodes(env, topo)
    start = min(topo.nodes,
                key=lambda n: (math.hypot(n.pos[0] - env.robot_start.x,
                                          n.pos[1] - env.robot_start.y), n.id))
    pl = {o.id: anchors[o.id] for o in env.objects}
    return ManipState(start.id, None, tuple(sorted(pl.items())))


def legal_actions(state: ManipState, topo: TopoMap, env: EnvironmentModel) -> list[ManipAction]:
    """All legal actions, in deterministic order: moves, pickups, putdowns."""
    topo.node(state.robot_node)
    acts = [ManipAction("move", b) for _, b in topo.neighbors(state.robot_node)]
    acts.sort(key=lambda a: a.target)
    pl = state.placement_map
    if state.carried is None:
        here = sorted(o for o, loc in pl.items() if loc == state.robot_node)
        acts += [ManipAction("pickup", o) for o in here]
    else:
        anchors = object_anchor_nodes(env, topo)
        reach = {state.robot_node} | {b for _, b in topo.neighbors(state.robot_node)}
        ok = sorted(p.id for p in env.places if anchors[p.id] in reach)
        acts += [ManipAction("putdown", p) for p in ok]
    return acts


def apply_action(state: ManipState, action: ManipAction, topo: TopoMap,
                 env: EnvironmentModel) -> ManipState:
    if action not in legal_actions(state, topo, env):
        raise WorldError(f"illegal action {action} in state {state}")
    pl = state.placement_map
    if action.kind == "move":
        return ManipState(action.target, state.carried, tuple(sorted(pl.items())))
    if action.kind == "pickup":
        del pl[action.target]
        return ManipState(state.robot_node, action.target, tuple(sorted(pl.items())))
    pl[state.carried] = action.target
    return ManipState(state.robot_node, None, tuple(sorted(pl.items())))


def _location_position(loc: str, topo: TopoMap, env: EnvironmentModel) -> tuple[float, float, float]:
    if topo.has(loc):
        n = topo.node(loc)
        return (n.pos[0], n.pos[1], n.z)
    g = env.grounding(loc)
    return (g.pose.x, g.pose.y, g.pose.z)


def state_to_trajectory(states: list[ManipState], env: EnvironmentModel,
                        topo: TopoMap, validate: bool = True
                        ) -> tuple[Trajectory, dict[str, Trajectory]]:
    """Trajectories implied by a state sequence; one unit of time per action.

    The robot visits node positions in order; a carried object tracks the
    robot; all other objects sit at their placement location.  Sequences
    produced directly by apply_action may skip validation.
    """
    if not states:
        raise WorldError("empty state sequence")
    if validate:
        for a, b in zip(states, states[1:]):
            for act in legal_actions(a, topo, env):
                if apply_action(a, act, topo, env) == b:
                    break
            else:
                raise WorldError(f"illegal transition {a} -> {b}")
    robot_poses = []
    obj_poses: dict[str, list[Pose]] = {o.id: [] for o in env.objects}
    for t, s in enumerate(states):
        n = topo.node(s.robot_node)
        robot_poses.append(Pose(float(t), n.pos[0], n.pos[1], n.z))
        pl = s.placement_map
        for o in env.objects:
            if s.carried == o.id:
                x, y, z = n.pos[0], n.pos[1], n.z
            else:
                x, y, z = _location_position(pl[o.id], topo, env)
            obj_poses[o.id].append(Pose(float(t), x, y, z))
    return (Trajectory(robot_poses),
            {oid: Trajectory(ps) for oid, ps in obj_poses.items()})
