"""Command-line entry point: train, ground, follow, heatmap, eval, gen.

Every subcommand is deterministic under a fixed seed; exit codes are
0 = success, 1 = inference/convergence failure, 2 = usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from . import corpus as cmod
from . import geometry
from .factors import (CooccurrenceCounts, DiscretizerConfig, FeatureWeights,
                      TrainingError, train)
from .graph import build_grounding_graph
from .inference import (BeamConfig, EventValue, MapView, UngroundableError,
                        follow_exploring, follow_global, follow_greedy,
                        exploration_fraction, ground_command, heatmap)
from .language import (ParseFormatError, chunk_directions,
                       classify_constituents, parse_command, read_parse,
                       split_clauses)
from .world import EnvironmentModel, TopoMap, WorldError


@dataclass
class RunConfig:
    seed: int = 0
    beam_np: float = 10
    beam_vp: float = 5
    horizon: int = 6
    bins: int = 6
    l2: float = 0.01
    threshold: float = 0.05
    env: str | None = None
    map: str | None = None
    corpus: str | None = None
    weights: str | None = None
    counts: str | None = None
    out: str | None = None

    def __post_init__(self):
        for name in ("beam_np", "beam_vp", "horizon", "bins", "l2", "threshold"):
            if getattr(self, name) is not None and getattr(self, name) < 0:
                raise ValueError(f"{name} must be positive")

    def discretizer(self) -> DiscretizerConfig:
        return DiscretizerConfig(distance_bins=self.bins, ratio_bins=self.bins)

    def beams(self) -> BeamConfig:
        return BeamConfig(self.beam_np, self.beam_vp, self.horizon,
                          self.discretizer())


_DEFAULTS = RunConfig()


def _build_config(args) -> RunConfig:
    """Flags override the optional config file, which overrides defaults."""
    file_vals = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_vals = json.load(fh)
    vals = {}
    for name in RunConfig.__dataclass_fields__:
        flag = getattr(args, name, None)
        if flag is not None:
            vals[name] = flag
        elif name in file_vals:
            vals[name] = file_vals[name]
        else:
            vals[name] = getattr(_DEFAULTS, name)
    if getattr(args, "seed", None) is None and "seed" not in file_vals:
        vals["seed"] = int(os.environ.get("G3_SEED", "0"))
    return RunConfig(**vals)


def _positive_float(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--env")
    p.add_argument("--map")
    p.add_argument("--corpus")
    p.add_argument("--weights")
    p.add_argument("--counts")
    p.add_argument("--out")
    p.add_argument("--beam-np", dest="beam_np", type=_positive_float)
    p.add_argument("--beam-vp", dest="beam_vp", type=_positive_float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--threshold", type=float)


def _require(cfg: RunConfig, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise SystemExit2(f"missing required --{name}")


class SystemExit2(Exception):
    pass


def cmd_train(cfg: RunConfig, args) -> int:
    _require(cfg, "corpus", "out")
    rows = cmod.training_rows(cmod.load_corpus(cfg.corpus))
    try:
        weights = train(rows, cfg.discretizer(), l2_lambda=cfg.l2)
    except TrainingError as e:
        print(f"training failed: {e}", file=sys.stderr)
        return 1
    ginf = weights.config.get("grad_inf_norm", 0.0)
    iters = weights.config.get("iterations", 0)
    weights.config["bins"] = cfg.bins
    weights.config["seed"] = cfg.seed
    weights.save(cfg.out)
    print(f"trained {len(weights.weights)} features on {len(rows)} rows")
    print(f"objective {weights.config['objective']:.6f}  "
          f"grad_inf_norm {ginf:.3e}  iterations {iters}")
    if ginf >= 1e-5 and iters >= 500:
        print("did not converge within the iteration budget", file=sys.stderr)
        return 1
    return 0


def _event_actions(ev: EventValue) -> list[str]:
    acts = []
    for a, b in zip(ev.states, ev.states[1:]):
        if a.robot_node != b.robot_node:
            acts.append(f"move({b.robot_node})")
        elif b.carried is not None and a.carried is None:
            acts.append(f"pickup({b.carried})")
        else:
            pl_a, pl_b = a.placement_map, b.placement_map
            placed = [o for o in pl_b if pl_b[o] != pl_a.get(o)]
            acts.append(f"putdown({pl_b[placed[0]]})" if placed else "noop")
    return acts


def cmd_ground(cfg: RunConfig, args) -> int:
    _require(cfg, "env", "map", "weights")
    env = EnvironmentModel.load(cfg.env)
    topo = TopoMap.load(cfg.map)
    weights = FeatureWeights.load(cfg.weights)
    text = args.command
    if text.lstrip().startswith("("):
        tree = read_parse(text)
    else:
        tree = parse_command(text)
    tree = classify_constituents(tree)
    clauses = split_clauses(tree)
    rc = 0
    for clause in clauses:
        graph = build_grounding_graph(classify_constituents(clause))
        try:
            assignment = ground_command(graph, env, topo, weights, cfg.beams())
        except UngroundableError as e:
            print(str(e), file=sys.stderr)
            return 1
        for f in graph.factors:
            chosen = []
            for a in f.args:
                v = assignment.values[a]
                if isinstance(v, EventValue):
                    chosen.append(f"{a}=<event:{len(v) - 1} actions>")
                else:
                    chosen.append(f"{a}={v.id}")
            words = " ".join(f.words)
            print(f"{f.id} \"{words}\" -> {', '.join(chosen)}  "
                  f"logp {assignment.factor_scores[f.id]:.4f}")
        events = [v for v in assignment.values.values()
                  if isinstance(v, EventValue)]
        if events:
            longest = max(events, key=len)
            print("actions: " + (" ".join(_event_actions(longest)) or "(stay)"))
        print(f"score {assignment.score:.4f}")
    return rc


def cmd_follow(cfg: RunConfig, args) -> int:
    _require(cfg, "map", "counts")
    topo = TopoMap.load(cfg.map)
    counts = CooccurrenceCounts.load(cfg.counts)
    flat = chunk_directions(args.directions)
    if args.method == "global":
        hyp = follow_global(flat, topo, counts, args.start)
    elif args.method == "greedy":
        hyp = follow_greedy(flat, MapView(topo, args.start), counts, args.start)
    else:
        hyp = follow_exploring(flat, MapView(topo, args.start), counts,
                               args.start, cfg.threshold)
    print("path: " + " ".join(hyp.full_path))
    print("stage endpoints: " + " ".join(hyp.stage_nodes))
    for i, s in enumerate(hyp.segment_scores):
        print(f"segment {i}: logp {s:.4f}")
    print(f"score {hyp.score:.4f}")
    if args.dest:
        ok = cmod.route_success(topo, hyp.end, args.dest)
        print(f"success@10m: {'yes' if ok else 'no'}")
        if args.method in ("greedy", "exploring"):
            frac = exploration_fraction(topo, args.start, args.dest, hyp.visited)
            print(f"exploration fraction: {frac:.3f}")
    return 0


def cmd_heatmap(cfg: RunConfig, args) -> int:
    _require(cfg, "env", "weights", "out")
    env = EnvironmentModel.load(cfg.env)
    weights = FeatureWeights.load(cfg.weights)
    landmark = env.grounding(args.landmark)
    grid, best = heatmap(args.words, landmark, env, weights,
                         resolution=args.resolution, config=cfg.discretizer())
    with open(cfg.out + ".csv", "w", encoding="utf-8") as fh:
        for row in grid:
            fh.write(",".join(f"{p:.6f}" for p in row) + "\n")
    with open(cfg.out + ".pgm", "w", encoding="utf-8") as fh:
        ny, nx = grid.shape
        fh.write(f"P2\n{nx} {ny}\n255\n")
        for row in grid[::-1]:
            fh.write(" ".join(str(int(round(255 * p))) for p in row) + "\n")
    (sx, sy), (ex, ey) = best
    print(f"argmax path: ({sx:.3f},{sy:.3f}) -> ({ex:.3f},{ey:.3f})")
    print(f"wrote {cfg.out}.csv and {cfg.out}.pgm")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    if args.mode == "phi":
        _require(cfg, "corpus", "weights")
        weights = FeatureWeights.load(cfg.weights)
        report = cmod.eval_phi(weights, cmod.load_corpus(cfg.corpus))
    else:
        _require(cfg, "counts")
        if not args.routes:
            raise SystemExit2("missing required --routes")
        counts = CooccurrenceCounts.load(cfg.counts)
        instances = cmod.load_routes(args.routes)
        report = cmod.eval_directions(instances, counts,
                                      threshold=cfg.threshold, seed=cfg.seed)
    print(report.format_table())
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_csv() + "\n")
        print(f"wrote {cfg.out}")
    return 0


def cmd_gen(cfg: RunConfig, args) -> int:
    _require(cfg, "out")
    os.makedirs(cfg.out, exist_ok=True)
    examples, scenarios = cmod.gen_manipulation_corpus(args.scenarios, cfg.seed)
    examples = cmod.generate_negatives(examples, scenarios, cfg.seed, k=3)
    for sid, (env, topo) in sorted(scenarios.items()):
        env.save(os.path.join(cfg.out, f"{sid}.env.json"))
        topo.save(os.path.join(cfg.out, f"{sid}.map.json"))
    cmod.save_corpus(os.path.join(cfg.out, "corpus.jsonl"), examples)
    instances, counts = cmod.gen_route_suite(args.routes, cfg.seed)
    cmod.save_routes(os.path.join(cfg.out, "routes.jsonl"), instances)
    counts.save(os.path.join(cfg.out, "counts.json"))
    print(f"wrote {len(examples)} corpus records, {len(scenarios)} scenarios, "
          f"{len(instances)} route instances to {cfg.out}")
    return 0


def cmd_features(cfg: RunConfig, args) -> int:
    for fd in geometry.catalog():
        print(f"{fd.name:40s} {fd.kind:16s} {fd.description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="g3",
                                description="grounded-language inference")
    sub = p.add_subparsers(dest="cmd", required=True)

    t = sub.add_parser("train", help="fit correspondence-factor weights")
    _add_common(t)
    t.set_defaults(run=cmd_train)

    g = sub.add_parser("ground", help="ground a manipulation command")
    _add_common(g)
    g.add_argument("command", help="command text or bracketed parse")
    g.set_defaults(run=cmd_ground)

    f = sub.add_parser("follow", help="follow route directions on a map")
    _add_common(f)
    f.add_argument("directions")
    f.add_argument("--start", required=True)
    f.add_argument("--dest")
    f.add_argument("--method", choices=("global", "greedy", "exploring"),
                   default="global")
    f.set_defaults(run=cmd_follow)

    h = sub.add_parser("heatmap", help="relation probability grid")
    _add_common(h)
    h.add_argument("--landmark", required=True)
    h.add_argument("--resolution", type=int, default=40)
    h.add_argument("words", nargs="+")
    h.set_defaults(run=cmd_heatmap)

    e = sub.add_parser("eval", help="evaluation reports")
    _add_common(e)
    e.add_argument("--mode", choices=("phi", "directions"), default="phi")
    e.add_argument("--routes")
    e.set_defaults(run=cmd_eval)

    n = sub.add_parser("gen", help="generate synthetic worlds and corpora")
    _add_common(n)
    n.add_argument("--scenarios", type=int, default=10)
    n.add_argument("--routes", type=int, default=60)
    n.set_defaults(run=cmd_gen)

    ls = sub.add_parser("list-features", help="geometric feature catalog")
    _add_common(ls)
    ls.set_defaults(run=cmd_features)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args)
        return args.run(cfg, args)
    except SystemExit2 as e:
        print(str(e), file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 2
    except (ParseFormatError, WorldError, ValueError) as e:
        print(str(e), file=sys.stderr)
        return 2
    except TrainingError as e:
        print(str(e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
