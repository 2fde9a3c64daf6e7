"""Grounded-language inference: factor graphs over parsed commands, learned
spatial-relation predicates, and route-direction decoding on topological maps.
"""

__version__ = "0.1.0"

from .factors import (CooccurrenceCounts, DiscretizerConfig, FeatureWeights,
                      loglinear_prob, nb_landmark_prob, salient_landmark_prob,
                      train, verb_prob)
from .graph import GroundingGraph, build_grounding_graph, shared_variable_map
from .inference import (Assignment, BeamConfig, DirectionHypothesis, MapView,
                        follow_exploring, follow_global, follow_greedy,
                        ground_command, heatmap)
from .language import (FlatCommand, ParseTree, chunk_directions,
                       classify_constituents, parse_command, read_parse)
from .world import (EnvironmentModel, Grounding, Pose, Prism, TopoMap,
                    TopoNode, Trajectory)

__all__ = [
    "Assignment", "BeamConfig", "CooccurrenceCounts", "DirectionHypothesis",
    "DiscretizerConfig", "EnvironmentModel", "FeatureWeights", "FlatCommand",
    "Grounding", "GroundingGraph", "MapView", "ParseTree", "Pose", "Prism",
    "TopoMap", "TopoNode", "Trajectory", "build_grounding_graph",
    "chunk_directions", "classify_constituents", "follow_exploring",
    "follow_global", "follow_greedy", "ground_command", "heatmap",
    "loglinear_prob", "nb_landmark_prob", "parse_command", "read_parse",
    "salient_landmark_prob", "shared_variable_map", "train", "verb_prob",
]
