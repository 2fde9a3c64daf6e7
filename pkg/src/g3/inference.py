"""Search for the most probable groundings.

Manipulation commands are grounded by bottom-up beam search over the factor
list; route directions are decoded globally (Viterbi over map nodes and
headings) or locally (greedy stepping, optionally with threshold-triggered
backtracking).  All searches are deterministic; models are shared read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Point

from . import factors as fmod
from . import geometry
from .factors import CooccurrenceCounts, DiscretizerConfig, FeatureWeights, \
    loglinear_prob, salient_landmark_prob, verb_prob
from .graph import ENTITY_FACTOR, EVENT, OBJECT, PATH, PLACE, GroundingGraph
from .language import FlatCommand
from .world import HEADINGS, EnvironmentModel, Grounding, ManipState, Pose, \
    Prism, TopoMap, Trajectory, apply_action, initial_state, legal_actions, \
    state_to_trajectory, visible_objects


class UngroundableError(RuntimeError):
    def __init__(self, constituent_words):
        words = " ".join(constituent_words)
        super().__init__(f"ungroundable constituent: \"{words}\"")
        self.constituent_words = tuple(constituent_words)


class EventValue:
    """A candidate event/path grounding: a manipulation state sequence with
    its implied robot and object trajectories."""

    def __init__(self, states, env: EnvironmentModel, topo: TopoMap,
                 validate: bool = True):
        self.states = tuple(states)
        self.robot_traj, self.object_trajs = state_to_trajectory(
            list(states), env, topo, validate=validate)
        # the id must distinguish any two state sequences, including ones that
        # differ only in where an object was put down
        self._key = "/".join(
            f"{s.robot_node}:{s.carried or '-'}:"
            + ",".join(f"{o}@{l}" for o, l in s.placements)
            for s in self.states)

    @property
    def key(self) -> str:
        return self._key

    def __len__(self):
        return len(self.states)

    def end_pose(self) -> Pose:
        return self.robot_traj.end

    def as_grounding(self) -> Grounding:
        p = self.end_pose()
        shape = Prism.box(0.0, 0.0, 0.25, 0.5)
        return Grounding(f"event:{self.key}", shape, set(), self.robot_traj)

    def moved_object(self, oid: str) -> Grounding | None:
        return None if oid not in self.object_trajs else Grounding(
            oid, Prism.box(0.0, 0.0, 0.25, 0.5), set(), self.object_trajs[oid])

    def __repr__(self):
        return f"EventValue({self._key})"


def value_id(v) -> str:
    return v.key if isinstance(v, EventValue) else v.id


def value_complexity(v) -> int:
    return len(v) - 1 if isinstance(v, EventValue) else 0


def enumerate_events(env: EnvironmentModel, topo: TopoMap, horizon: int,
                     limit: int = 50000) -> list[EventValue]:
    """All legal action sequences up to the horizon, as EventValues, in a
    deterministic (shortest-first) order."""
    start = initial_state(env, topo)
    out = [EventValue([start], env, topo, validate=False)]
    frontier = [[start]]
    for _ in range(horizon):
        nxt = []
        for seq in frontier:
            for act in legal_actions(seq[-1], topo, env):
                new = seq + [apply_action(seq[-1], act, topo, env)]
                nxt.append(new)
                out.append(EventValue(new, env, topo, validate=False))
                if len(out) >= limit:
                    return out
        frontier = nxt
    return out


def _as_figure(v) -> Grounding:
    return v.as_grounding() if isinstance(v, EventValue) else v


def factor_features(factor, values: dict, env: EnvironmentModel,
                    config: DiscretizerConfig) -> frozenset:
    """Cross features for a factor under an assignment of its argument
    variables.  Entity factors use the grounding's tag set; binary relations
    use figure/landmark geometry; ternary (verb) relations use the geometry
    of the manipulated object's motion against the target."""
    args = [values[a] for a in factor.args]
    if factor.kind == ENTITY_FACTOR:
        g = args[0]
        base = {f"tag_{t}": 1.0 for t in sorted(getattr(g, "tags", ()))}
        return fmod.cross_features(base, factor.words, config)
    if len(args) == 2:
        figure, landmark = args
        fig = _as_figure(figure)
        lm = _as_figure(landmark)
        base = geometry.base_feature_vector(fig, lm, env.scene_bbox)
        return fmod.cross_features(base, factor.words, config)
    event, obj, target = args
    lm = _as_figure(target)
    fig = None
    if isinstance(event, EventValue) and isinstance(obj, Grounding):
        fig = event.moved_object(obj.id)
    if fig is None:
        fig = _as_figure(event)
    base = geometry.base_feature_vector(fig, lm, env.scene_bbox)
    return fmod.cross_features(base, factor.words, config)


@dataclass
class Assignment:
    values: dict
    score: float
    factor_scores: dict

    def recomputed_score(self) -> float:
        return sum(self.factor_scores.values())


@dataclass(frozen=True)
class BeamConfig:
    beam_np: float = 10
    beam_vp: float = 5
    horizon: int = 6
    discretizer: DiscretizerConfig = DiscretizerConfig()


def _candidates_for(kind: str, env: EnvironmentModel, events) -> list:
    if kind == OBJECT:
        return sorted(env.objects, key=lambda g: g.id)
    if kind == PLACE:
        return sorted(env.places, key=lambda g: g.id)
    return list(events)


def _beam_for(graph: GroundingGraph, factor, cfg: BeamConfig) -> float:
    if factor.kind == ENTITY_FACTOR:
        return cfg.beam_np
    c = graph.tree.node(factor.constituent)
    if c.category == "VP":
        return cfg.beam_vp
    own = graph.var(factor.args[0]).domain_kind
    return cfg.beam_vp if own in (PATH, EVENT) else cfg.beam_np


def ground_command(graph: GroundingGraph, env: EnvironmentModel, topo: TopoMap,
                   weights: FeatureWeights, cfg: BeamConfig = BeamConfig()) -> Assignment:
    """Bottom-up beam search over the factor list: NP/place beams of width
    beam_np, event/path beams of width beam_vp; returns the highest-scoring
    complete assignment with all correspondence variables clamped to 1."""
    events = None
    beams: list[tuple[dict, float, dict]] = [({}, 0.0, {})]
    for factor in graph.factors:
        new_vars = [a for a in factor.args
                    if a not in beams[0][0]]
        if any(graph.var(a).domain_kind in (EVENT, PATH) for a in new_vars) and events is None:
            events = enumerate_events(env, topo, cfg.horizon)
        extended = []
        for values, score, fscores in beams:
            combos = [dict()]
            for a in new_vars:
                cands = _candidates_for(graph.var(a).domain_kind, env, events or [])
                combos = [dict(c, **{a: cand}) for c in combos for cand in cands]
            if not combos or (new_vars and not combos[0] and len(combos) == 1):
                combos = [] if new_vars else combos
            for combo in combos:
                vals = dict(values, **combo)
                feats = factor_features(factor, vals, env, cfg.discretizer)
                lp = math.log(loglinear_prob(weights, feats))
                fs = dict(fscores)
                fs[factor.id] = lp
                extended.append((vals, score + lp, fs))
        if not extended:
            raise UngroundableError(graph.tree.node(factor.constituent).words)

        def sort_key(item):
            vals, score, _ = item
            cx = sum(value_complexity(v) for v in vals.values())
            ids = tuple(value_id(vals[k]) for k in sorted(vals))
            return (-score, cx, ids)

        extended.sort(key=sort_key)
        width = _beam_for(graph, factor, cfg)
        if math.isfinite(width):
            extended = extended[:int(width)]
        beams = extended
    values, score, fscores = beams[0]
    return Assignment(values, score, fscores)


# --- route-direction decoding --------------------------------------------------


@dataclass
class DirectionHypothesis:
    stage_nodes: tuple          # endpoint node per segment
    full_path: tuple            # every node traversed, start included
    segment_scores: tuple       # log-prob per segment
    score: float
    visited: frozenset = frozenset()

    @property
    def end(self) -> str:
        return self.stage_nodes[-1] if self.stage_nodes else self.full_path[-1]


def shortest_paths_from(topo: TopoMap, src: str) -> dict[str, list[str]]:
    """BFS shortest node sequences from src (deterministic tie-breaking)."""
    paths = {src: [src]}
    queue = [src]
    while queue:
        cur = queue.pop(0)
        for _, b in topo.neighbors(cur):
            if b not in paths:
                paths[b] = paths[cur] + [b]
                queue.append(b)
    return paths


def _path_heading(topo: TopoMap, path: list[str], heading_in: float) -> float:
    h = heading_in
    for a, b in zip(path, path[1:]):
        for d, nb in topo.neighbors(a):
            if nb == b and d in HEADINGS:
                h = HEADINGS[d]
                break
    return h


def landmark_logprob(counts: CooccurrenceCounts, landmark_words, topo: TopoMap,
                     node: str) -> float:
    if landmark_words is None:
        return 0.0
    p, _ = salient_landmark_prob(counts, landmark_words, visible_objects(topo, node))
    return math.log(max(p, 1e-300))


def stage_transition(topo: TopoMap, counts: CooccurrenceCounts, segment,
                     a: str, heading_in: float, b: str,
                     paths_from_a: dict[str, list[str]]) -> tuple[float, float, list[str]] | None:
    """Score of serving one segment by moving a -> b along the (deterministic)
    shortest path.  Returns (log score, heading out, node path) or None when
    b is unreachable or equals a."""
    if b == a or b not in paths_from_a:
        return None
    verb_words, landmark_words = segment
    path = paths_from_a[b]
    h_out = _path_heading(topo, path, heading_in)
    lv_a, lv_b = topo.node(a).level, topo.node(b).level
    pv = verb_prob(verb_words, heading_in, h_out, lv_a, lv_b)
    lp = math.log(max(pv, 1e-300)) + landmark_logprob(counts, landmark_words, topo, b)
    return lp, h_out, path


_HEADING_VALUES = tuple(sorted(set(HEADINGS.values())))


def follow_global(flat: FlatCommand, topo: TopoMap, counts: CooccurrenceCounts,
                  start: str, start_heading: float = 0.0) -> DirectionHypothesis:
    """Viterbi decoding over (node, heading) states, one stage per segment."""
    topo.node(start)
    all_paths = {n.id: shortest_paths_from(topo, n.id) for n in topo.nodes}
    # state: (node, heading) -> (score, backpointer, stage path, total length)
    states = {(start, start_heading): (0.0, None, [start], 0)}
    trellis = [states]
    for segment in flat.segments:
        nxt: dict[tuple, tuple] = {}
        for (a, h), (score, _, _, length) in sorted(states.items()):
            for b in sorted(n.id for n in topo.nodes):
                tr = stage_transition(topo, counts, segment, a, h, b, all_paths[a])
                if tr is None:
                    continue
                lp, h_out, path = tr
                key = (b, h_out)
                cand = (score + lp, (a, h), path, length + len(path) - 1)
                if key not in nxt or _better(cand, nxt[key]):
                    nxt[key] = cand
        if not nxt:
            break
        states = nxt
        trellis.append(states)
    best_key = min(states, key=lambda k: (-states[k][0], states[k][3], k))
    # backtrace
    seg_scores, stage_nodes, full = [], [], []
    key = best_key
    chain = []
    for stage in range(len(trellis) - 1, 0, -1):
        score, back, path, _ = trellis[stage][key]
        prev_score = trellis[stage - 1][back][0]
        chain.append((key[0], score - prev_score, path))
        key = back
    chain.reverse()
    full = [start]
    for node, lp, path in chain:
        stage_nodes.append(node)
        seg_scores.append(lp)
        full.extend(path[1:])
    total = states[best_key][0]
    return DirectionHypothesis(tuple(stage_nodes), tuple(full), tuple(seg_scores),
                               total, frozenset(full))


def _better(cand, cur) -> bool:
    if cand[0] != cur[0]:
        return cand[0] > cur[0]
    return (cand[3], cand[2]) < (cur[3], cur[2])


def score_stage_sequence(flat: FlatCommand, topo: TopoMap,
                         counts: CooccurrenceCounts, start: str,
                         stage_nodes, start_heading: float = 0.0) -> float:
    """Log score of serving the segments at the given stage endpoints under
    the global transition model; -inf when a stage is infeasible."""
    pos, heading = start, start_heading
    total = 0.0
    for segment, b in zip(flat.segments, stage_nodes):
        tr = stage_transition(topo, counts, segment, pos, heading, b,
                              shortest_paths_from(topo, pos))
        if tr is None:
            return float("-inf")
        lp, heading, _ = tr
        pos = b
        total += lp
    return total


class MapView:
    """Incrementally revealed map: a node is known once visited or adjacent
    to a visited node."""

    def __init__(self, topo: TopoMap, start: str):
        self._topo = topo
        self.known: set[str] = set()
        self.reveal(start)

    def reveal(self, node: str):
        self.known.add(node)
        for _, b in self._topo.neighbors(node):
            self.known.add(b)

    def neighbors(self, node: str) -> list[tuple[str, str]]:
        return [(d, b) for d, b in self._topo.neighbors(node) if b in self.known]

    @property
    def topo(self) -> TopoMap:
        return self._topo


def _local_follow(flat: FlatCommand, view: MapView, counts: CooccurrenceCounts,
                  start: str, threshold: float) -> DirectionHypothesis:
    topo = view.topo
    pos, heading = start, 0.0
    visited = {start}
    travel = [start]
    stage_nodes, seg_scores = [], []

    def endpoint_prob(segment, seg_h_in, node, h_now) -> float:
        verb_words, landmark_words = segment
        pv = verb_prob(verb_words, seg_h_in, h_now,
                       topo.node(node).level, topo.node(node).level)
        pl = 1.0
        if landmark_words is not None:
            pl, _ = salient_landmark_prob(counts, landmark_words,
                                          visible_objects(topo, node))
        return pv * pl

    for segment in flat.segments:
        seg_h_in = heading
        seg_lv_in = topo.node(pos).level
        stepped = False
        trail: list[tuple[str, float]] = []  # nodes stepped through this segment

        def step_prob(d, b):
            h_out = HEADINGS.get(d, heading)
            verb_words, landmark_words = segment
            pv = verb_prob(verb_words, seg_h_in, h_out,
                           seg_lv_in, topo.node(b).level)
            pl = 1.0
            if landmark_words is not None:
                pl, _ = salient_landmark_prob(counts, landmark_words,
                                              visible_objects(topo, b))
            return pv * pl

        while True:
            cands = [(d, b) for d, b in view.neighbors(pos) if b not in visited]
            cands.sort(key=lambda db: (-step_prob(*db), db[1]))
            p_here = endpoint_prob(segment, seg_h_in, pos, heading)
            best_p = step_prob(*cands[0]) if cands else None
            move = False
            if cands:
                if not stepped:
                    move = True
                elif best_p > p_here or p_here < threshold:
                    move = True
            if move:
                d, b = cands[0]
                trail.append((pos, heading))
                pos, heading = b, HEADINGS.get(d, heading)
                visited.add(pos)
                travel.append(pos)
                view.reveal(pos)
                stepped = True
                continue
            if stepped and p_here >= threshold:
                break
            if not cands:
                # dead end (or start with no options): backtrack if allowed
                if threshold > 0.0 and trail:
                    back_pos, back_h = trail.pop()
                    pos, heading = back_pos, back_h
                    travel.append(pos)
                    continue
                break
            break
        stage_nodes.append(pos)
        seg_scores.append(math.log(max(endpoint_prob(segment, seg_h_in, pos, heading),
                                       1e-300)))
    return DirectionHypothesis(tuple(stage_nodes), tuple(travel), tuple(seg_scores),
                               sum(seg_scores), frozenset(visited | {start}))


def follow_greedy(flat: FlatCommand, view: MapView, counts: CooccurrenceCounts,
                  start: str) -> DirectionHypothesis:
    """Myopic stepwise following: best local step, no backtracking."""
    return _local_follow(flat, view, counts, start, threshold=0.0)


def follow_exploring(flat: FlatCommand, view: MapView, counts: CooccurrenceCounts,
                     start: str, threshold: float = 0.05) -> DirectionHypothesis:
    """Greedy stepping, but keep moving / backtrack while the current segment
    endpoint probability sits below the threshold."""
    return _local_follow(flat, view, counts, start, threshold=threshold)


def exploration_fraction(topo: TopoMap, start: str, end: str, visited) -> float:
    """Visited off-shortest-path nodes over all off-shortest-path nodes."""
    paths = shortest_paths_from(topo, start)
    on_path = set(paths.get(end, [start]))
    off = {n.id for n in topo.nodes} - on_path
    if not off:
        return 0.0
    return len(set(visited) - on_path) / len(off)


# --- heat maps -----------------------------------------------------------------


def heatmap(relation_words, landmark: Grounding, env: EnvironmentModel,
            weights: FeatureWeights, resolution: int = 40,
            config: DiscretizerConfig = DiscretizerConfig()):
    """Probability grid: p(phi=1) for a straight-line path from the scene's
    left edge to each cell.  Returns (grid[ny][nx], (start, best end))."""
    (xmin, ymin), (xmax, ymax) = env.scene_bbox
    c = landmark.footprint().centroid
    if not (xmin <= c.x <= xmax and ymin <= c.y <= ymax):
        raise ValueError("landmark lies outside the scene bbox")
    nx = ny = resolution
    grid = np.zeros((ny, nx))
    shape = Prism.box(0.0, 0.0, 0.25, 0.5)
    best = None
    for j in range(ny):
        cy = ymin + (j + 0.5) * (ymax - ymin) / ny
        for i in range(nx):
            cx = xmin + (i + 0.5) * (xmax - xmin) / nx
            traj = Trajectory([Pose(0.0, xmin, cy), Pose(1.0, cx, cy)])
            fig = Grounding("probe", shape, set(), traj)
            base = geometry.base_feature_vector(fig, landmark, env.scene_bbox)
            feats = fmod.cross_features(base, relation_words, config)
            p = loglinear_prob(weights, feats)
            grid[j, i] = p
            key = (-p, j, i)
            if best is None or key < best[0]:
                best = (key, ((xmin, cy), (cx, cy)))
    return grid, best[1]
