import numpy as np
import pytest
from hypothesis import settings

from dgplace.network import Branch, Bus, Network

settings.register_profile("fast", max_examples=20)
settings.register_profile("ci", max_examples=100, deadline=None)
settings.load_profile("ci")


def two_bus(p=0.5, q=0.3, r=0.02, x=0.04) -> Network:
    """Slack plus one load bus on s_base = 1 MVA, so MW equal pu."""
    return Network(1.0, 1.0, (Bus(1, "slack"), Bus(2, "load", p, q)), (Branch(1, 1, 2, r, x),))


def random_radial(rng: np.random.Generator, n_bus: int, load_scale: float = 1.0,
                  flip: bool = True) -> Network:
    """Random tree feeder on 6.5 kV / 10 MVA bases; each bus hangs off an earlier one."""
    buses = [Bus(1, "slack")]
    branches = []
    for k in range(2, n_bus + 1):
        p = float(rng.uniform(0.0, 0.4)) * load_scale
        q = float(rng.uniform(-0.05, 0.25)) * load_scale
        buses.append(Bus(k, "load", p, q))
        parent = int(rng.integers(1, k))
        a, b = (k, parent) if flip and rng.random() < 0.3 else (parent, k)
        branches.append(Branch(k - 1, a, b, float(rng.uniform(0.005, 0.05)),
                               float(rng.uniform(0.005, 0.05)), float(rng.uniform(0.2, 1.5))))
    if all(not bb.has_load for bb in buses):
        buses[1] = Bus(2, "load", 0.1, 0.05)
    return Network(6.5, 10.0, tuple(buses), tuple(branches))


@pytest.fixture
def net2():
    return two_bus()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
