"""
Residual history of a single step from the zero initial guess.
Newton contracts quadratically near the root, the recursive quasi-Newton
solver contracts by a roughly constant factor per iteration.
"""

import numpy as np

from varint_dyn import DiscreteStepContext, SolverConfig, serial_chain, solve_step

n, dt = 10, 1e-3
rng = np.random.default_rng(1)
q = rng.uniform(-0.1, 0.1, n)
ctx = DiscreteStepContext(serial_chain(n), dt, q, q + 1e-4 * rng.normal(size=n))

for method in ("newton", "riqn", "broyden"):
    cfg = SolverConfig(method=method, tolerance=1e-11, initial_guess="zero",
                       max_iterations=200)
    _, trace = solve_step(ctx, cfg)
    r = np.array(trace.residual_norms)
    print(f"{method}: {trace.iterations} iterations")
    print("   " + " ".join(f"{v:.1e}" for v in r[:12]))
