"""Seeded random step instances shared by the oracle tests and the acceptance gate."""

from dataclasses import dataclass

import numpy as np

from varint_dyn.liegroup import RetractionKind
from varint_dyn.dynamics import DiscreteStepContext

from conftest import random_tree

SIZES = (2, 5, 9)


@dataclass
class Instance:
    ctx: DiscreteStepContext
    q_next: np.ndarray
    label: str

    @property
    def oracle_retraction(self):
        return "exp" if self.ctx.retraction is RetractionKind.EXPONENTIAL else "cay"


def make_instance(seed, n, branched, forces=True):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, n, branched=branched)
    dt = rng.choice([1e-3, 1e-2, 3e-2])
    q_prev = rng.uniform(-1.5, 1.5, n)
    q_curr = q_prev + dt * rng.normal(scale=2.0, size=n)
    q_next = q_curr + dt * rng.normal(scale=2.0, size=n)
    kind = RetractionKind.CAYLEY if rng.uniform() < 0.4 else RetractionKind.EXPONENTIAL
    joint = dt * rng.normal(size=n) if forces else None
    ext = None
    if forces:
        ext = np.zeros((n, 6))
        hit = rng.integers(0, n)
        ext[hit] = dt * rng.normal(size=6)
    ctx = DiscreteStepContext(tree, dt, q_prev, q_curr, external_impulses=ext,
                              joint_impulses=joint, retraction=kind)
    shape = "branched" if branched else "serial"
    return Instance(ctx, q_next, f"{shape}-n{n}-{kind.name.lower()}-seed{seed}")


def instance_set(count=50, forces=True):
    out = []
    for k in range(count):
        n = SIZES[k % len(SIZES)]
        out.append(make_instance(1000 + k, n, branched=(k // len(SIZES)) % 2 == 1,
                                 forces=forces))
    return out
