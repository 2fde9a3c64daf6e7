#!/usr/bin/env python3
"""Write a small fixed demo world (a pallet and a truck on a 10x10 yard with
a 2x2 topological map) as env.json / map.json for the CLI examples."""

import argparse
import os

from g3.world import (EnvironmentModel, Grounding, Pose, Prism, TopoMap,
                      TopoNode, Trajectory, build_grid_map, derive_places)


def build():
    objects = [
        Grounding("tire_pallet", Prism.box(0, 0, 0.6, 0.8), {"pallet", "tire"},
                  Trajectory.single(Pose(0.0, 1.2, 1.2))),
        Grounding("truck", Prism.box(0, 0, 0.9, 1.2), {"truck"},
                  Trajectory.single(Pose(0.0, 8.8, 1.2))),
    ]
    base = EnvironmentModel(objects, [], Pose(0.0, 2.5, 7.5),
                            ((0.0, 0.0), (10.0, 10.0)))
    env = EnvironmentModel(objects, derive_places(base), base.robot_start,
                           base.scene_bbox)
    return env, build_grid_map(env, cell=5.0)


def build_corridor():
    """Three-node corridor with a kitchen at the far end, for `g3 follow`."""
    nodes = [TopoNode(f"c{i}", (15.0 * i, 0.0), 0,
                      frozenset({"kitchen"}) if i == 2 else frozenset())
             for i in range(3)]
    edges = [("c0", "e", "c1"), ("c1", "w", "c0"),
             ("c1", "e", "c2"), ("c2", "w", "c1")]
    return TopoMap(nodes, edges)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=".", help="output directory")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    env, topo = build()
    env.save(os.path.join(args.out, "env.json"))
    topo.save(os.path.join(args.out, "map.json"))
    build_corridor().save(os.path.join(args.out, "line.json"))
    print(f"wrote env.json, map.json, line.json under {args.out}")


if __name__ == "__main__":
    main()
