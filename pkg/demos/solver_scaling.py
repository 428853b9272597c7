"""
Time one variational step against chain length for the three root finders.
The recursive quasi-Newton solver stays linear in the number of joints,
full Newton pays for the dense Jacobian.
"""

import time

import numpy as np

from varint_dyn import SimState, SolverConfig, serial_chain, step_variational

dt = 1e-3
sizes = [5, 10, 20, 40, 80]
methods = ["riqn", "newton", "broyden"]


def mean_step_time(n, method, steps=50):
    tree = serial_chain(n)
    rng = np.random.default_rng(0)
    q = np.cumsum(rng.uniform(-0.2, 0.2, n))
    state = SimState(q, q + dt * rng.normal(scale=0.5, size=n), dt)
    cfg = SolverConfig(method=method, tolerance=1e-9)
    state = step_variational(state, tree, dt, cfg)    # compile and warm up
    t0 = time.perf_counter()
    for _ in range(steps):
        state = step_variational(state, tree, dt, cfg)
    return (time.perf_counter() - t0) / steps


times = {m: [mean_step_time(n, m) for n in sizes] for m in methods}
print("n     " + "".join(f"{m:>12s}" for m in methods))
for i, n in enumerate(sizes):
    print(f"{n:<6d}" + "".join(f"{times[m][i] * 1e6:10.1f}us" for m in methods))

    # log-log slope over the larger half of the sizes
for m in methods:
    k = np.polyfit(np.log(sizes[2:]), np.log(times[m][2:]), 1)[0]
    print(f"slope {m}: {k:.2f}")
