"""
Load the branched scene next to this script, run it for a second and print
where each body ended up.
"""

from pathlib import Path

import numpy as np

from varint_dyn import forward_kinematics, load_scene, simulate

tree = load_scene((Path(__file__).parent / "branched_arm.yaml").read_text())
print(f"{len(tree.bodies)} bodies, {tree.dof} coordinates")

q0 = np.full(tree.dof, 0.3)
traj = simulate(tree, q0, np.zeros(tree.dof), 1e-3, 1000)

E = traj.energy_array()[:, 2]
print(f"energy {E[0]:.4f} -> {E[-1]:.4f} J, worst deviation {np.abs(E - E[0]).max():.2e} J")
iters = [t.iterations for t in traj.solve_traces]
print(f"solver iterations per step: mean {np.mean(iters):.2f}, max {max(iters)}")

for body, pose in zip(tree.bodies, forward_kinematics(tree, traj.configurations[-1])):
    print(f"  {body.name:10s} at {np.round(pose.translation, 4)}")
