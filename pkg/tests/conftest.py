import numpy as np
import pytest

from aeromec.config import NetworkConfig
from aeromec.mission import plan_mission


def tiny_config(**overrides) -> NetworkConfig:
    """Two users, one eavesdropper, four slots: fast unit-test scenario."""
    base = dict(
        gu_xy_m=np.array([(0, 20), (10, 10)], dtype=float),
        eve_xy_m=np.array([(10, 0)], dtype=float),
        n_slots=4,
        period_s=3.0,
        task_bits=2e6,
        q_final_m=np.array([0.0, 40.0]),
    )
    base.update(overrides)
    return NetworkConfig(**base)


@pytest.fixture(scope="session")
def tiny_cfg():
    return tiny_config()


@pytest.fixture(scope="session")
def tiny_mission(tiny_cfg):
    mission = plan_mission(tiny_cfg, audit=True)
    assert mission.complete, [s.status for s in mission.slots]
    return mission
