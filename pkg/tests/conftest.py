import pytest

from cobuild.config import FloorPlan, MissionConfig, PlanLayer, Tower


def make_tiny_config(**overrides) -> MissionConfig:
    """8x8 fixture world with short mining times; collaboration check disabled."""
    params = dict(
        plan=FloorPlan(
            layers=(
                PlanLayer("wood", ((5, 5), (6, 5))),
                PlanLayer("stone", ((5, 6),)),
            )
        ),
        towers=(
            Tower("wood", ((1, 5),), 10),
            Tower("stone", ((1, 6),), 10),
        ),
        crafting_table=(3, 1),
        chest=(5, 1),
        spawn_human=(3, 3),
        spawn_ai=(5, 3),
        width=8,
        height=8,
        seed=0,
        tick_rate_hz=20,
        time_limit_s=30.0,
        mine_durations_s={"wood": 0.2, "stone": 0.3},
        pickaxe_speedup=2.0,
        pickaxe_wood_cost=3,
    )
    params.update(overrides)
    config = MissionConfig(**params)
    config.validate()
    return config


@pytest.fixture
def tiny_config() -> MissionConfig:
    return make_tiny_config()
