import warnings

import pytest

from g3 import corpus as cmod
from g3.factors import train
from g3.world import (EnvironmentModel, Grounding, Pose, Prism, Trajectory,
                      build_grid_map, derive_places)


@pytest.fixture(scope="session")
def manipulation_data():
    """Synthetic manipulation corpus with negatives, plus its scenarios."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        examples, scenarios = cmod.gen_manipulation_corpus(10, seed=0)
        examples = cmod.generate_negatives(examples, scenarios, seed=0, k=3)
    return examples, scenarios


@pytest.fixture(scope="session")
def trained_weights(manipulation_data):
    examples, _ = manipulation_data
    return train(cmod.training_rows(examples))


@pytest.fixture(scope="session")
def route_suite():
    return cmod.gen_route_suite(60, seed=0)


def make_demo_world():
    """Tiny fixed yard: a pallet and a truck on a 10x10 scene, 4-node map."""
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


@pytest.fixture(scope="session")
def demo_world():
    return make_demo_world()
