"""Benchmark experiments: energy behaviour, scaling and solver convergence.

Each ``run_*`` function returns a :class:`BenchResult` holding a header,
rows and trailing comment lines; :func:`write_csv` persists it. The first
line of every file is a ``#`` comment with the run metadata (git revision,
time step, tolerance, seed) so a CSV can be traced back to its settings.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import statistics
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import DiscreteStepContext
from .errors import NonConvergence
from .integrators import bootstrap, simulate, step_variational
from .liegroup import RetractionKind
from .model import KinematicTree, serial_chain
from .solvers import InitialGuess, SolverConfig, SolverMethod, _solve

__all__ = [
    "Experiment", "BenchSpec", "BenchResult", "run_energy", "run_scaling",
    "run_convergence", "write_csv", "gnuplot_script", "loglog_slope",
    "initial_state", "git_revision", "DEFAULT_DOFS",
]

DEFAULT_DOFS = (5, 10, 20, 40, 80, 160)
# amplitude of the seeded random joint angles of the convergence experiment
SMALL_ANGLE = 0.1
# range of the seeded root tilt of the scaling experiment
TILT_RANGE = (0.2, 0.4)


class Experiment(str, enum.Enum):
    ENERGY = "energy"
    SCALING = "scaling"
    CONVERGENCE = "convergence"


@dataclass
class BenchSpec:
    """Settings for one experiment.

    ``tree`` replaces the generated serial chain when given (scaling always
    uses chains of ``dof_list`` sizes). ``solvers`` lists the configurations
    under test; an empty list means the experiment's defaults.
    """

    experiment: Experiment
    dof_list: tuple = (10,)
    dt: float = 1e-3
    frames: int = 10_000
    solvers: list = field(default_factory=list)
    rng_seed: int = 0
    output_path: Path | None = None
    retraction: RetractionKind = RetractionKind.EXPONENTIAL
    tree: KinematicTree | None = None
    repetitions: int = 3
    warmup: int = 100

    def __post_init__(self):
        self.experiment = Experiment(self.experiment)
        self.dof_list = tuple(int(n) for n in self.dof_list)
        self.retraction = RetractionKind.parse(self.retraction)
        if self.frames < 1:
            raise ValueError(f"frames must be at least 1, got {self.frames}")
        if not self.dof_list:
            raise ValueError("dof_list must not be empty")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.repetitions < 1 or self.warmup < 0:
            raise ValueError("repetitions must be >= 1 and warmup >= 0")
        self.solvers = [s if isinstance(s, SolverConfig) else SolverConfig(method=s)
                        for s in self.solvers]


@dataclass
class BenchResult:
    header: list
    rows: list
    metadata: dict
    comments: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def git_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def _metadata(spec: BenchSpec, tolerance) -> dict:
    return {"experiment": spec.experiment.value, "git": git_revision(), "dt": spec.dt,
            "tolerance": tolerance, "seed": spec.rng_seed,
            "retraction": spec.retraction.name.lower()}


def initial_state(tree: KinematicTree, seed: int, amplitude: float = SMALL_ANGLE):
    """Seeded joint angles in ``[-amplitude, amplitude]`` with zero velocity."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-amplitude, amplitude, tree.dof), np.zeros(tree.dof)


def tilted_chain(n: int, seed: int) -> np.ndarray:
    """Straight chain rotated about the root joint by a seeded angle.

    Only the root angle is nonzero, so the chain starts as one rigid
    pendulum instead of kinking every joint.
    """
    q = np.zeros(n)
    q[0] = np.random.default_rng(seed).uniform(*TILT_RANGE)
    return q


def horizontal_chain(n: int) -> np.ndarray:
    """Configuration of :func:`serial_chain` lying straight along +x."""
    q = np.zeros(n)
    q[0] = math.pi / 2
    return q


def _tree_for(spec: BenchSpec, n: int) -> KinematicTree:
    return spec.tree if spec.tree is not None else serial_chain(n)


def loglog_slope(sizes, times) -> float:
    """Least-squares slope of ``log(time)`` against ``log(size)``."""
    if len(sizes) < 2:
        return float("nan")
    return float(np.polyfit(np.log(sizes), np.log(times), 1)[0])


def run_energy(spec: BenchSpec) -> BenchResult:
    """Variational and semi-implicit Euler runs from the same initial state.

    With the generated chain the initial state is the chain held horizontal
    at rest; with a scene tree it is a seeded small-angle configuration.
    """
    cfg = spec.solvers[0] if spec.solvers else SolverConfig()
    n = spec.dof_list[0]
    tree = _tree_for(spec, n)
    if spec.tree is None:
        q0, qd0 = horizontal_chain(tree.dof), np.zeros(tree.dof)
    else:
        q0, qd0 = initial_state(tree, spec.rng_seed)
    rows = []
    summary = {}
    for name in ("variational", "euler"):
        traj = simulate(tree, q0, qd0, spec.dt, spec.frames, integrator=name, cfg=cfg,
                        retraction=spec.retraction)
        E = traj.energy_array()
        for k, (t, e) in enumerate(zip(traj.times, E)):
            rows.append([name, k, t, e[0], e[1], e[2]])
        summary[name] = energy_drift(E[:, 2])
    comments = [f"drift {name} slope_per_frame={d['slope']:.6e} max_rel_error={d['max_rel']:.6e}"
                for name, d in summary.items()]
    return BenchResult(["integrator", "frame", "t", "E_kin", "E_pot", "E_total"], rows,
                       _metadata(spec, cfg.tolerance), comments, summary)


def energy_drift(E_total) -> dict:
    """Normalised least-squares drift slope per frame and maximum relative error."""
    E = np.asarray(E_total, dtype=float)
    scale = abs(E[0]) if E[0] != 0 else 1.0
    rel = (E - E[0]) / scale
    frames = np.arange(len(E))
    slope = float(np.polyfit(frames, rel, 1)[0]) if len(E) > 1 else 0.0
    return {"slope": slope, "max_rel": float(np.abs(rel).max())}


def _time_steps(tree, state, dt, cfg, retraction, count):
    times = np.empty(count)
    for k in range(count):
        start = time.perf_counter()
        state = step_variational(state, tree, dt, cfg, retraction=retraction)
        times[k] = time.perf_counter() - start
    return state, times


def run_scaling(spec: BenchSpec) -> BenchResult:
    """Mean wall time per frame against chain length for each solver.

    Chains start straight, tilted at the root (:func:`tilted_chain`), at rest.
    Every cell runs ``warmup`` untimed frames, then ``repetitions`` timed
    segments of ``frames`` frames, each restarted from the post-warmup state.
    Reported statistics are over the per-segment means.
    """
    configs = spec.solvers or [SolverConfig(method=m) for m in SolverMethod]
    rows = []
    means = {c.method.value: [] for c in configs}
    for n in spec.dof_list:
        tree = serial_chain(n)
        q0, qd0 = tilted_chain(n, spec.rng_seed), np.zeros(n)
        for cfg in configs:
            state = bootstrap(tree, q0, qd0, spec.dt)
            state, _ = _time_steps(tree, state, spec.dt, cfg, spec.retraction, spec.warmup)
            seg = []
            for _ in range(spec.repetitions):
                _, t = _time_steps(tree, state, spec.dt, cfg, spec.retraction, spec.frames)
                seg.append(float(t.mean()))
            mean = statistics.fmean(seg)
            std = statistics.stdev(seg) if len(seg) > 1 else 0.0
            rows.append([n, cfg.method.value, mean, std, statistics.median(seg)])
            means[cfg.method.value].append(mean)
    slopes = {m: loglog_slope(spec.dof_list, v) for m, v in means.items()}
    comments = [f"slope {m} {s:.4f}" for m, s in slopes.items()]
    tol = configs[0].tolerance
    return BenchResult(["n", "method", "mean_step_time", "stddev", "median_step_time"], rows,
                       _metadata(spec, tol), comments, {"slopes": slopes, "means": means})


def run_convergence(spec: BenchSpec) -> BenchResult:
    """Iteration counts and residual decay from the zero initial guess.

    A reference trajectory is produced with the exact-Newton solver at a
    tight tolerance; at every frame each method under test then re-solves
    the same step starting from ``q = 0``. Failures are recorded as rows.
    """
    configs = spec.solvers or [SolverConfig(method=SolverMethod.NEWTON),
                               SolverConfig(method=SolverMethod.RIQN)]
    configs = [SolverConfig(method=c.method, tolerance=c.tolerance,
                            max_iterations=c.max_iterations, initial_guess=InitialGuess.ZERO,
                            line_search=c.line_search, refresh_mass=c.refresh_mass)
               for c in configs]
    reference = SolverConfig(method=SolverMethod.NEWTON, tolerance=1e-11)
    n = spec.dof_list[0]
    tree = _tree_for(spec, n)
    q0, qd0 = initial_state(tree, spec.rng_seed)
    state = bootstrap(tree, q0, qd0, spec.dt)
    rows = []
    iterations = {c.method.value: [] for c in configs}
    series = {c.method.value: [] for c in configs}
    for frame in range(1, spec.frames + 1):
        ctx = DiscreteStepContext(tree, spec.dt, state.q_prev, state.q_curr,
                                  retraction=spec.retraction, velocity_prev=state.velocity,
                                  momentum_prev=state.momentum)
        for cfg in configs:
            try:
                res = _solve(ctx, cfg)
                trace = res.trace
            except NonConvergence as err:
                trace = err.trace
            norms = ";".join(f"{r:.6e}" for r in trace.residual_norms)
            rows.append([frame, cfg.method.value, trace.iterations, int(trace.converged), norms])
            iterations[cfg.method.value].append(trace.iterations)
            series[cfg.method.value].append((trace.converged, trace.residual_norms))
        state = step_variational(state, tree, spec.dt, reference, retraction=spec.retraction,
                                 frame=frame)
    stats = {m: (float(np.mean(v)), float(np.std(v))) for m, v in iterations.items()}
    comments = [f"iterations {m} mean={mu:.4f} std={sd:.4f}" for m, (mu, sd) in stats.items()]
    return BenchResult(["frame", "method", "iterations", "converged", "residual_norms"], rows,
                       _metadata(spec, configs[0].tolerance), comments,
                       {"iterations": stats, "series": series})


def _format(v):
    # repr round-trips exactly; numpy scalars go through float first
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(result: BenchResult, path=None) -> str:
    """Serialise ``result``; writes to ``path`` when given and returns the text."""
    buf = io.StringIO()
    meta = " ".join(f"{k}={v}" for k, v in result.metadata.items())
    buf.write(f"# {meta}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.header)
    for row in result.rows:
        writer.writerow([_format(v) for v in row])
    for line in result.comments:
        buf.write(f"# {line}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def gnuplot_script(experiment, csv_path) -> str:
    """Gnuplot commands that plot a CSV written by :func:`write_csv`."""
    experiment = Experiment(experiment)
    src = str(csv_path)
    head = ["set datafile separator ','", "set datafile commentschars '#'", "set key autotitle columnhead", "set grid"]
    if experiment is Experiment.ENERGY:
        body = ["set xlabel 'frame'", "set ylabel 'total energy (J)'",
                "plot for [m in 'variational euler'] '" + src
                + "' using 2:(strcol(1) eq m ? $6 : 1/0) with lines title m"]
    elif experiment is Experiment.SCALING:
        body = ["set logscale xy", "set xlabel 'degrees of freedom'",
                "set ylabel 'mean step time (s)'",
                "plot for [m in 'riqn newton broyden'] '" + src
                + "' using 1:(strcol(2) eq m ? $3 : 1/0) with linespoints title m"]
    else:
        body = ["set xlabel 'frame'", "set ylabel 'iterations'",
                "plot for [m in 'newton riqn'] '" + src
                + "' using 1:(strcol(2) eq m ? $3 : 1/0) with points title m"]
    return "\n".join(head + body) + "\n"
