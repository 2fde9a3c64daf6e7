"""Dataset formats, synthetic world/corpus generation, negative sampling,
scenario-disjoint splitting, and the evaluation harnesses (correspondence
classification report, route-following success/exploration report).
"""

from __future__ import annotations

import json
import math
import random
import warnings
from dataclasses import dataclass

from . import inference
from .factors import (CooccurrenceCounts, DEFAULT_DISCRETIZER, STOP_WORDS,
                      FeatureWeights, loglinear_prob)
from .graph import (ENTITY_FACTOR, EVENT, OBJECT, PATH, PLACE,
                    build_grounding_graph)
from .inference import (EventValue, MapView, factor_features, follow_exploring,
                        follow_global, follow_greedy, exploration_fraction,
                        shortest_paths_from)
from .language import FlatCommand, classify_constituents, read_parse
from .world import (LEVEL_HEIGHT, EnvironmentModel, Grounding, ManipAction,
                    ManipState, Pose, Prism, TopoMap, TopoNode, Trajectory,
                    apply_action, derive_places, build_grid_map,
                    initial_state, object_anchor_nodes)

ROW_NP = "Noun Phrase"
ROW_PP_PLACE = "Prepositional Phrase (Place)"
ROW_PP_PATH = "Prepositional Phrase (Path)"
ROW_VP = "Verb Phrase"
ROW_OVERALL = "Overall"
ROW_ORDER = (ROW_NP, ROW_PP_PLACE, ROW_PP_PATH, ROW_VP)


# --- annotated examples --------------------------------------------------------


@dataclass(frozen=True)
class FactorAnnotation:
    factor_id: str
    row: str                 # constituent-type row name
    words: tuple
    groundings: tuple        # sorted (var id, serialized value) pairs
    phi: int
    features: tuple          # sorted active cross-feature ids

    def __post_init__(self):
        if self.phi not in (0, 1):
            raise ValueError("phi labels are binary")

    def grounding_map(self) -> dict:
        return dict(self.groundings)


@dataclass(frozen=True)
class AnnotatedExample:
    command: str
    parse: str
    scenario: str
    annotations: tuple

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "parse": self.parse,
            "scenario": self.scenario,
            "annotations": [
                {"factor": a.factor_id, "row": a.row, "words": list(a.words),
                 "groundings": {k: v for k, v in a.groundings},
                 "phi": a.phi, "features": list(a.features)}
                for a in self.annotations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotatedExample":
        anns = []
        for a in d["annotations"]:
            anns.append(FactorAnnotation(
                a["factor"], a["row"], tuple(a["words"]),
                tuple(sorted((k, _freeze(v)) for k, v in a["groundings"].items())),
                int(a["phi"]), tuple(a["features"])))
        return cls(d["command"], d["parse"], d["scenario"], tuple(anns))


def _freeze(v):
    """Annotation values must hash; nested json becomes canonical text."""
    return v if isinstance(v, str) else json.dumps(v, sort_keys=True,
                                                   separators=(",", ":"))


def _thaw(v: str):
    return json.loads(v) if v.startswith("{") else v


def serialize_value(value) -> str:
    """Canonical annotation encoding of a grounding or event value."""
    if isinstance(value, EventValue):
        return _freeze({"event": [
            {"robot": s.robot_node, "carried": s.carried,
             "placements": dict(s.placements)} for s in value.states]})
    return value.id


def deserialize_value(raw: str, env: EnvironmentModel, topo: TopoMap):
    doc = _thaw(raw)
    if isinstance(doc, str):
        return env.grounding(doc)
    states = [ManipState(s["robot"], s["carried"],
                         tuple(sorted(s["placements"].items())))
              for s in doc["event"]]
    return EventValue(states, env, topo)


def save_corpus(path: str, examples: list[AnnotatedExample]):
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_dict(), sort_keys=True,
                                separators=(",", ":")) + "\n")


def load_corpus(path: str) -> list[AnnotatedExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(AnnotatedExample.from_dict(json.loads(line)))
    return out


def training_rows(examples: list[AnnotatedExample]) -> list[tuple]:
    """(feature set, phi label) rows for the trainer."""
    return [(frozenset(a.features), a.phi)
            for ex in examples for a in ex.annotations]


def split(examples: list[AnnotatedExample], ratio: float, seed: int):
    """Scenario-disjoint train/test split: whole scenarios land on one side."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0,1)")
    scenarios = sorted({ex.scenario for ex in examples})
    if len(scenarios) < 2:
        raise ValueError("need at least 2 scenarios for a disjoint split")
    rng = random.Random(seed)
    rng.shuffle(scenarios)
    n_train = max(1, min(len(scenarios) - 1, int(round(ratio * len(scenarios)))))
    train_set = set(scenarios[:n_train])
    train = [ex for ex in examples if ex.scenario in train_set]
    test = [ex for ex in examples if ex.scenario not in train_set]
    return train, test


# --- correspondence evaluation -------------------------------------------------


@dataclass
class PhiReport:
    counts: dict  # row -> {"tp","fp","fn","tn"}

    def metrics(self, row: str) -> dict:
        c = self.counts.get(row, {"tp": 0, "fp": 0, "fn": 0, "tn": 0})
        tp, fp, fn, tn = c["tp"], c["fp"], c["fn"], c["tn"]
        n = tp + fp + fn + tn
        prec = tp / (tp + fp) if tp + fp else 1.0
        rec = tp / (tp + fn) if tp + fn else 1.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        acc = (tp + tn) / n if n else 1.0
        return {"precision": prec, "recall": rec, "f1": f1,
                "accuracy": acc, "count": n}

    def format_table(self) -> str:
        header = f"{'Constituent type':34s} {'Prec':>6s} {'Rec':>6s} {'F1':>6s} {'Acc':>6s} {'N':>6s}"
        lines = [header, "-" * len(header)]
        for row in ROW_ORDER + (ROW_OVERALL,):
            m = self.metrics(row)
            lines.append(f"{row:34s} {m['precision']:6.3f} {m['recall']:6.3f} "
                         f"{m['f1']:6.3f} {m['accuracy']:6.3f} {m['count']:6d}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["row,precision,recall,f1,accuracy,count"]
        for row in ROW_ORDER + (ROW_OVERALL,):
            m = self.metrics(row)
            lines.append(f"{row},{m['precision']:.6f},{m['recall']:.6f},"
                         f"{m['f1']:.6f},{m['accuracy']:.6f},{m['count']}")
        return "\n".join(lines)


def eval_phi(weights: FeatureWeights, examples: list[AnnotatedExample]) -> PhiReport:
    """Classify phi = [p >= 0.5] per annotation; tally per constituent type."""
    rows = [a for ex in examples for a in ex.annotations]
    if not rows:
        raise ValueError("empty evaluation set")
    counts = {row: {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
              for row in ROW_ORDER + (ROW_OVERALL,)}
    for a in rows:
        p = loglinear_prob(weights, a.features)
        pred = 1 if p >= 0.5 else 0
        cell = ("tp" if a.phi else "fp") if pred else ("fn" if a.phi else "tn")
        counts.setdefault(a.row, {"tp": 0, "fp": 0, "fn": 0, "tn": 0})[cell] += 1
        counts[ROW_OVERALL][cell] += 1
    return PhiReport(counts)


# --- route-direction evaluation ------------------------------------------------


@dataclass(frozen=True)
class RouteInstance:
    scenario: str
    text: str
    segments: tuple         # (verb words, landmark words or None) pairs
    topo: TopoMap
    start: str
    destination: str

    def flat(self) -> FlatCommand:
        return FlatCommand(self.segments)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario, "text": self.text,
            "segments": [[list(v), list(l) if l else None]
                         for v, l in self.segments],
            "map": self.topo.to_dict(),
            "start": self.start, "destination": self.destination,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RouteInstance":
        segs = tuple((tuple(v), tuple(l) if l else None) for v, l in d["segments"])
        return cls(d["scenario"], d["text"], segs, TopoMap.from_dict(d["map"]),
                   d["start"], d["destination"])


def save_routes(path: str, instances: list[RouteInstance]):
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict(), sort_keys=True,
                                separators=(",", ":")) + "\n")


def load_routes(path: str) -> list[RouteInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(RouteInstance.from_dict(json.loads(line)))
    return out


def _node_xyz(topo: TopoMap, nid: str) -> tuple[float, float, float]:
    n = topo.node(nid)
    return (n.pos[0], n.pos[1], n.level * LEVEL_HEIGHT)


def route_success(topo: TopoMap, end: str, destination: str,
                  radius: float = 10.0) -> bool:
    ex, ey, ez = _node_xyz(topo, end)
    dx, dy, dz = _node_xyz(topo, destination)
    return math.sqrt((ex - dx) ** 2 + (ey - dy) ** 2 + (ez - dz) ** 2) <= radius


DIRECTION_METHODS = ("global", "exploring", "greedy", "last", "random")


def run_direction_method(method: str, inst: RouteInstance,
                         counts: CooccurrenceCounts, threshold: float = 0.05,
                         rng: random.Random | None = None):
    """Decode one instance; returns (end node, visited node set or None)."""
    if method == "global":
        hyp = follow_global(inst.flat(), inst.topo, counts, inst.start)
        return hyp.end, None
    if method == "last":
        flat = FlatCommand(inst.segments[-1:])
        hyp = follow_global(flat, inst.topo, counts, inst.start)
        return hyp.end, None
    if method == "greedy":
        hyp = follow_greedy(inst.flat(), MapView(inst.topo, inst.start),
                            counts, inst.start)
        return hyp.end, hyp.visited
    if method == "exploring":
        hyp = follow_exploring(inst.flat(), MapView(inst.topo, inst.start),
                               counts, inst.start, threshold)
        return hyp.end, hyp.visited
    if method == "random":
        nodes = sorted(n.id for n in inst.topo.nodes)
        return (rng or random.Random(0)).choice(nodes), None
    raise ValueError(f"unknown method {method!r}")


@dataclass
class DirectionsReport:
    rows: list  # (method, success rate, mean exploration fraction or None, n)

    def rate(self, method: str) -> float:
        for m, s, _, _ in self.rows:
            if m == method:
                return s
        raise KeyError(method)

    def explored(self, method: str):
        for m, _, e, _ in self.rows:
            if m == method:
                return e
        raise KeyError(method)

    def format_table(self) -> str:
        header = f"{'Method':12s} {'Success@10m':>12s} {'Explored':>10s} {'N':>6s}"
        lines = [header, "-" * len(header)]
        for m, s, e, n in self.rows:
            ex = f"{e:10.3f}" if e is not None else f"{'-':>10s}"
            lines.append(f"{m:12s} {100 * s:11.1f}% {ex} {n:6d}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["method,success,explored,count"]
        for m, s, e, n in self.rows:
            lines.append(f"{m},{s:.6f},{'' if e is None else f'{e:.6f}'},{n}")
        return "\n".join(lines)


def eval_directions(instances: list[RouteInstance], counts: CooccurrenceCounts,
                    methods=DIRECTION_METHODS, threshold: float = 0.05,
                    seed: int = 0) -> DirectionsReport:
    if not instances:
        raise ValueError("empty route suite")
    for inst in instances:
        inst.topo.node(inst.destination)
    rows = []
    for method in methods:
        rng = random.Random(seed)
        wins, fracs = 0, []
        for inst in instances:
            end, visited = run_direction_method(method, inst, counts,
                                                threshold, rng)
            if route_success(inst.topo, end, inst.destination):
                wins += 1
            if visited is not None:
                fracs.append(exploration_fraction(inst.topo, inst.start,
                                                  inst.destination, visited))
        mean_frac = sum(fracs) / len(fracs) if fracs else None
        rows.append((method, wins / len(instances), mean_frac, len(instances)))
    return DirectionsReport(rows)


# --- negative-example generation -----------------------------------------------


def _random_event(env: EnvironmentModel, topo: TopoMap,
                  rng: random.Random, max_len: int = 4) -> EventValue:
    states = [initial_state(env, topo)]
    for _ in range(rng.randint(0, max_len)):
        from .world import legal_actions
        acts = legal_actions(states[-1], topo, env)
        if not acts:
            break
        states.append(apply_action(states[-1], rng.choice(acts), topo, env))
    return EventValue(states, env, topo)


def generate_negatives(examples: list[AnnotatedExample], scenarios: dict,
                       seed: int = 0, k: int = 3) -> list[AnnotatedExample]:
    """Augment positives with k corrupted-grounding negatives each.

    The factor's own grounding variable is re-sampled among same-kind
    alternatives; a noun-phrase negative whose replacement already satisfies
    the phrase by tag match is relabeled positive.
    """
    rng = random.Random(seed)
    out = []
    for ex in examples:
        env, topo = scenarios[ex.scenario]
        tree = classify_constituents(read_parse(ex.parse))
        graph = build_grounding_graph(tree)
        by_id = {f.id: f for f in graph.factors}
        new_anns = list(ex.annotations)
        for a in ex.annotations:
            if a.phi != 1 or a.factor_id not in by_id:
                continue
            factor = by_id[a.factor_id]
            values = {vid: deserialize_value(raw, env, topo)
                      for vid, raw in a.groundings}
            own = factor.args[0]
            kind = graph.var(own).domain_kind
            current = serialize_value(values[own])
            if kind == OBJECT:
                alts = [o for o in env.objects if o.id != current]
                picks = rng.sample(alts, min(k, len(alts)))
            elif kind == PLACE:
                alts = [p for p in env.places if p.id != current]
                picks = rng.sample(alts, min(k, len(alts)))
            else:
                picks = []
                for _ in range(k):
                    ev = _random_event(env, topo, rng)
                    if serialize_value(ev) != current:
                        picks.append(ev)
            if len(picks) < k:
                warnings.warn(f"only {len(picks)} negative alternatives for "
                              f"factor {a.factor_id} in {ex.scenario!r}")
            for alt in picks:
                vals = dict(values, **{own: alt})
                feats = factor_features(factor, vals, env, DEFAULT_DISCRETIZER)
                phi = 0
                if factor.kind == ENTITY_FACTOR:
                    content = {w.lower() for w in factor.words} - STOP_WORDS
                    if getattr(alt, "tags", frozenset()) & content:
                        phi = 1
                new_anns.append(FactorAnnotation(
                    a.factor_id, a.row, a.words,
                    tuple(sorted((vid, serialize_value(v))
                                 for vid, v in vals.items())),
                    phi, tuple(sorted(feats))))
        out.append(AnnotatedExample(ex.command, ex.parse, ex.scenario,
                                    tuple(new_anns)))
    return out


# --- synthetic manipulation corpus ---------------------------------------------

_NOUNS = ("pallet", "truck", "box", "crate", "drum")
_SLOTS = ((3.0, 3.0), (17.0, 3.0), (3.0, 17.0), (17.0, 17.0), (10.0, 10.0))

_PUT_PARSE = ("(ROOT (S (VP (VB Put) (NP (DT the) (NN {a})) "
              "(PP (IN on) (NP (DT the) (NN {b}))))))")
_GO_PARSE = "(ROOT (S (VP (VB Go) (PP (TO to) (NP (DT the) (NN {a}))))))"


def _make_yard(nouns, slots) -> tuple[EnvironmentModel, TopoMap]:
    objects = []
    for noun, (x, y) in zip(nouns, slots):
        objects.append(Grounding(f"obj_{noun}", Prism.box(0, 0, 1.0, 1.0),
                                 {noun}, Trajectory.single(Pose(0.0, x, y))))
    base = EnvironmentModel(objects, [], Pose(0.0, 12.5, 7.5),
                            ((0.0, 0.0), (20.0, 20.0)))
    env = EnvironmentModel(objects, derive_places(base), base.robot_start,
                           base.scene_bbox)
    return env, build_grid_map(env, cell=5.0)


def _goto(states: list, target: str, env, topo):
    paths = shortest_paths_from(topo, states[-1].robot_node)
    for node in paths[target][1:]:
        states.append(apply_action(states[-1], ManipAction("move", node),
                                   topo, env))


def plan_put(env: EnvironmentModel, topo: TopoMap, obj_id: str,
             place_id: str) -> list[ManipState]:
    """Deterministic pick-carry-place plan: shortest walks plus pickup/putdown."""
    states = [initial_state(env, topo)]
    _goto(states, states[-1].placement_map[obj_id], env, topo)
    states.append(apply_action(states[-1], ManipAction("pickup", obj_id),
                               topo, env))
    anchors = object_anchor_nodes(env, topo)
    _goto(states, anchors[place_id], env, topo)
    states.append(apply_action(states[-1], ManipAction("putdown", place_id),
                               topo, env))
    return states


def plan_goto(env: EnvironmentModel, topo: TopoMap, obj_id: str) -> list[ManipState]:
    states = [initial_state(env, topo)]
    _goto(states, states[-1].placement_map[obj_id], env, topo)
    return states


def annotation_row(graph, factor) -> str:
    if factor.kind == ENTITY_FACTOR:
        return ROW_NP
    if graph.tree.node(factor.constituent).category == "VP":
        return ROW_VP
    kind = graph.var(factor.args[0]).domain_kind
    return ROW_PP_PATH if kind == PATH else ROW_PP_PLACE


def _annotate(command: str, parse: str, scenario: str, values: dict,
              env: EnvironmentModel) -> AnnotatedExample:
    tree = classify_constituents(read_parse(parse))
    graph = build_grounding_graph(tree)
    anns = []
    for f in graph.factors:
        vals = {a: values[a] for a in f.args}
        feats = factor_features(f, vals, env, DEFAULT_DISCRETIZER)
        anns.append(FactorAnnotation(
            f.id, annotation_row(graph, f), f.words,
            tuple(sorted((vid, serialize_value(v)) for vid, v in vals.items())),
            1, tuple(sorted(feats))))
    return AnnotatedExample(command, parse, scenario, tuple(anns))


def gen_manipulation_corpus(n_scenarios: int = 10, seed: int = 0):
    """Synthetic forklift-yard corpus: placement and approach commands with
    exact grounding annotations.  Returns (examples, {scenario: (env, topo)})."""
    rng = random.Random(seed)
    examples, scenarios = [], {}
    for s in range(n_scenarios):
        nouns = rng.sample(_NOUNS, 3)
        slots = rng.sample(_SLOTS, 3)
        env, topo = _make_yard(nouns, slots)
        sid = f"yard{s:02d}"
        scenarios[sid] = (env, topo)
        obj = {n: env.grounding(f"obj_{n}") for n in nouns}
        for a in nouns:
            for b in nouns:
                if a == b:
                    continue
                place = env.grounding(f"on_obj_{b}")
                ev = EventValue(plan_put(env, topo, obj[a].id, place.id),
                                env, topo)
                parse = _PUT_PARSE.format(a=a, b=b)
                values = {"g1": ev, "g2": obj[a], "g3": place, "g4": obj[b]}
                examples.append(_annotate(f"Put the {a} on the {b}.", parse,
                                          sid, values, env))
        for a in nouns:
            ev = EventValue(plan_goto(env, topo, obj[a].id), env, topo)
            parse = _GO_PARSE.format(a=a)
            values = {"g1": ev, "g2": ev, "g3": obj[a]}
            examples.append(_annotate(f"Go to the {a}.", parse, sid,
                                      values, env))
    return examples, scenarios


def gen_path_relation_corpus(landmark: Grounding, env: EnvironmentModel,
                             word: str = "to", n: int = 200, seed: int = 0):
    """Straight-line probe trajectories labeled by whether they end within
    half a landmark diameter; used to fit a single path relation."""
    from . import geometry
    from .factors import cross_features

    rng = random.Random(seed)
    (xmin, ymin), (xmax, ymax) = env.scene_bbox
    foot = landmark.footprint()
    bx0, by0, bx1, by1 = foot.bounds
    diam = max(bx1 - bx0, by1 - by0)
    c = foot.centroid
    shape = Prism.box(0.0, 0.0, 0.25, 0.5)
    rows = []
    for i in range(n):
        if i % 2 == 0:
            ex = min(max(c.x + rng.uniform(-diam / 2, diam / 2), xmin), xmax)
            cy = min(max(c.y + rng.uniform(-diam / 2, diam / 2), ymin), ymax)
        else:
            ex = rng.uniform(xmin, xmax)
            cy = rng.uniform(ymin, ymax)
        traj = Trajectory([Pose(0.0, xmin, cy), Pose(1.0, ex, cy)])
        fig = Grounding("probe", shape, set(), traj)
        from shapely.geometry import Point
        d = foot.exterior.distance(Point(ex, cy))
        if foot.contains(Point(ex, cy)):
            d = 0.0
        label = 1 if d <= diam / 2 else 0
        base = geometry.base_feature_vector(fig, landmark, env.scene_bbox)
        rows.append((cross_features(base, [word]), label))
    return rows


# --- synthetic route-direction suite -------------------------------------------

_LANDMARKS = ("kitchen", "lobby", "office", "lab", "elevator",
              "atrium", "gym", "library")


def build_route_counts(labels=_LANDMARKS) -> CooccurrenceCounts:
    """Deterministic caption statistics: each label word strongly predicts
    its own label, with enough filler captions to keep word priors low."""
    labels = tuple(labels)
    total = 40 * len(labels)
    word_counts = {w: 10 for w in labels}
    pairs = {}
    for w in labels:
        pairs[(w, w)] = 9
    return CooccurrenceCounts(total, word_counts, pairs)


def _corridor_map(sid: str, landmarks: tuple) -> TopoMap:
    """Straight east-west corridor, 15 m node spacing; landmarks[i] (None for
    an unlabeled node) is visible at node c{3+i}."""
    length = 3 + len(landmarks)
    nodes = []
    for i in range(length + 1):
        tags = frozenset()
        if i >= 3 and (i - 3) < len(landmarks) and landmarks[i - 3]:
            tags = frozenset({landmarks[i - 3]})
        nodes.append(TopoNode(f"c{i}", (15.0 * i, 0.0), 0, tags))
    edges = []
    for i in range(length):
        edges.append((f"c{i}", "e", f"c{i + 1}"))
        edges.append((f"c{i + 1}", "w", f"c{i}"))
    return TopoMap(nodes, edges)


def _y_map(lm: str) -> TopoMap:
    """Junction with a dead-end straight branch (explored first by the
    deterministic tie-break) and a turning branch leading to the landmark."""
    nodes = [
        TopoNode("s", (0.0, 0.0)),
        TopoNode("j", (15.0, 0.0)),
        TopoNode("a1", (30.0, 0.0)),
        TopoNode("b1", (15.0, 15.0)),
        TopoNode("b2", (15.0, 30.0), 0, frozenset({lm})),
    ]
    edges = [("s", "e", "j"), ("j", "w", "s"),
             ("j", "e", "a1"), ("a1", "w", "j"),
             ("j", "n", "b1"), ("b1", "s", "j"),
             ("b1", "n", "b2"), ("b2", "s", "b1")]
    return TopoMap(nodes, edges)


def _turn_map(lm: str) -> TopoMap:
    """L-shaped hall with a decoy north stub at the start; the goal is the
    north turn after the landmark."""
    nodes = [
        TopoNode("s", (0.0, 0.0)),
        TopoNode("u1", (0.0, 15.0)),
        TopoNode("m1", (15.0, 0.0)),
        TopoNode("m2", (30.0, 0.0), 0, frozenset({lm})),
        TopoNode("t1", (30.0, 15.0)),
    ]
    edges = [("s", "e", "m1"), ("m1", "w", "s"),
             ("s", "n", "u1"), ("u1", "s", "s"),
             ("m1", "e", "m2"), ("m2", "w", "m1"),
             ("m2", "n", "t1"), ("t1", "s", "m2")]
    return TopoMap(nodes, edges)


def gen_route_suite(n: int = 60, seed: int = 0):
    """Synthetic corridor/junction route-direction suite.

    Returns (instances, counts).  Mixes plain corridors (local methods must
    keep walking), adversarial junctions (greedy commits to a dead end), and
    final-turn instances (last-segment-only decoding picks the wrong turn).
    """
    rng = random.Random(seed)
    counts = build_route_counts()
    instances = []
    for i in range(n):
        kind = i % 3
        if kind == 0:
            lm = rng.choice(_LANDMARKS)
            topo = _corridor_map(f"route{i:03d}", (None, lm))
            text = f"Go to the {lm}."
            segments = ((("go", "to"), ("the", lm)),)
            dest = "c4"
        elif kind == 1:
            lm = rng.choice(_LANDMARKS)
            topo = _y_map(lm)
            text = f"Go to the {lm}."
            segments = ((("go", "to"), ("the", lm)),)
            dest = "b2"
        else:
            lm = rng.choice(_LANDMARKS)
            topo = _turn_map(lm)
            text = f"Go to the {lm} then turn left."
            segments = ((("go", "to"), ("the", lm)), (("turn", "left"), None))
            dest = "t1"
        instances.append(RouteInstance(f"route{i:03d}", text, segments,
                                       topo, "s" if kind else "c0", dest))
    return instances, counts
