import numpy as np
import pytest
from hypothesis import settings

from varint_dyn.model import Body, Joint, KinematicTree, SpatialInertia, serial_chain
from varint_dyn.liegroup import Transform, rot_x

# the first call of a compiled kernel includes its compile time
settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_inertia(rng, mass=None, com=True):
    A = rng.normal(size=(3, 3)) * 0.05
    I = A @ A.T + 0.01 * np.eye(3)
    m = rng.uniform(0.5, 2.0) if mass is None else mass
    c = rng.uniform(-0.05, 0.05, 3) if com else np.zeros(3)
    return SpatialInertia(m, I, c)


def random_tree(rng, n, branched=False, prismatic=True):
    """Tree with random inertias, axes and offsets; optionally branched."""
    bodies = []
    for i in range(n):
        parent = i if not branched or i == 0 else int(rng.integers(0, i + 1))
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        off = rot_x(rng.uniform(-1, 1)) @ Transform.from_translation(rng.uniform(-0.2, 0.2, 3))
        if prismatic and rng.uniform() < 0.3:
            joint = Joint.prismatic(axis, off)
        else:
            joint = Joint.revolute(axis, off)
        bodies.append(Body(random_inertia(rng), joint, parent))
    return KinematicTree(tuple(bodies), (0.0, -9.81, 0.0))


def branched_seven():
    # 1 -> {2, 5}, 2 -> {3, 4}, 5 -> {6, 7}
    parents = [0, 1, 2, 2, 1, 5, 5]
    chain = serial_chain(1)
    link = chain.bodies[0]
    return KinematicTree(tuple(Body(link.inertia, link.joint, p) for p in parents),
                         chain.gravity)


def pytest_terminal_summary(terminalreporter):
    # the acceptance gate records one line per criterion; show them together
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
