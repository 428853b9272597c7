"""Command-line entry point ``varint-dyn``.

Exit status: 0 on success, 2 when a root solve fails to converge, 3 when the
command line or a scene document is invalid, 1 for any other failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench
from .errors import DomainError, NonConvergence, ParseError, ValidationError
from .integrators import simulate
from .liegroup import RetractionKind
from .model import load_scene_file, serial_chain
from .solvers import SolverConfig

EXIT_NONCONVERGENCE = 2
EXIT_INVALID = 3


class _Parser(argparse.ArgumentParser):
    # usage errors share the exit code of invalid input; 2 means non-convergence here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _dof_list(text):
    try:
        out = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("degrees of freedom must be positive")
    return out


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    model = common.add_mutually_exclusive_group()
    model.add_argument("--scene", type=Path, help="scene document (YAML)")
    model.add_argument("--chain", type=_positive_int, help="serial chain with N bodies")
    common.add_argument("--dt", type=float, default=1e-3, help="time step in seconds")
    common.add_argument("--frames", type=_positive_int, help="number of frames")
    common.add_argument("--solver", choices=["riqn", "newton", "broyden"],
                        help="root finder (default riqn; all methods for scaling)")
    common.add_argument("--integrator", choices=["variational", "euler"], default="variational")
    common.add_argument("--guess", choices=["hold", "euler", "fd"], default="fd",
                        help="initial guess for each root solve")
    common.add_argument("--tol", type=float, default=1e-9,
                        help="tolerance on the residual max-norm (N m s)")
    common.add_argument("--max-iter", type=_positive_int, default=30)
    common.add_argument("--retraction", choices=["exp", "cayley"], default="exp")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, help="CSV output path (default stdout)")
    common.add_argument("--emit-gnuplot", action="store_true",
                        help="also write a gnuplot script next to the CSV")

    parser = _Parser(prog="varint-dyn",
                     description="Variational multibody integrator experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("energy", parents=[common],
                   help="energy of variational and Euler runs of a passive chain")
    sc = sub.add_parser("scaling", parents=[common],
                        help="mean step time against degrees of freedom")
    sc.add_argument("--dofs", type=_dof_list, default=bench.DEFAULT_DOFS,
                    help="comma-separated chain sizes (default 5,10,20,40,80,160)")
    sc.add_argument("--repetitions", type=_positive_int, default=3)
    sc.add_argument("--warmup", type=int, default=100)
    sub.add_parser("convergence", parents=[common],
                   help="iterations from the zero initial guess, Newton vs RIQN")
    sub.add_parser("simulate", parents=[common], help="run one simulation and write q(t)")
    return parser


def _config(args, method=None) -> SolverConfig:
    return SolverConfig(method=method or args.solver or "riqn", tolerance=args.tol,
                        max_iterations=args.max_iter, initial_guess=args.guess)


def _tree(args):
    if args.scene is not None:
        return load_scene_file(args.scene)
    return None


def _emit(args, experiment, text):
    if args.out is None:
        sys.stdout.write(text)
        if args.emit_gnuplot:
            sys.stdout.write(bench.gnuplot_script(experiment, "data.csv"))
        return
    args.out.write_text(text)
    if args.emit_gnuplot:
        gp = args.out.with_suffix(".gp")
        gp.write_text(bench.gnuplot_script(experiment, args.out.name))


def _simulate(args) -> str:
    tree = _tree(args) or serial_chain(args.chain or 10)
    if args.scene is None:
        q0, qd0 = bench.horizontal_chain(tree.dof), np.zeros(tree.dof)
    else:
        q0, qd0 = bench.initial_state(tree, args.seed)
    frames = args.frames or 1000
    cfg = _config(args)
    traj = simulate(tree, q0, qd0, args.dt, frames, integrator=args.integrator, cfg=cfg,
                    retraction=RetractionKind.parse(args.retraction))
    E = traj.energy_array()
    iters = [""] * 2 + [t.iterations for t in traj.solve_traces]
    header = ["frame", "t"] + [f"q{i + 1}" for i in range(tree.dof)] + [
        "E_kin", "E_pot", "E_total", "iterations"]
    rows = []
    for k, (t, q, e) in enumerate(zip(traj.times, traj.configurations, E)):
        it = iters[k] if args.integrator == "variational" else ""
        rows.append([k, t, *q.tolist(), *e.tolist(), it])
    meta = {"experiment": "simulate", "git": bench.git_revision(), "dt": args.dt,
            "tolerance": cfg.tolerance, "seed": args.seed, "retraction": args.retraction,
            "integrator": args.integrator}
    return bench.write_csv(bench.BenchResult(header, rows, meta))


def run(args) -> str:
    if args.command == "simulate":
        return _simulate(args)
    tree = _tree(args)
    dofs = (args.chain,) if args.chain else (10,)
    retraction = RetractionKind.parse(args.retraction)
    if args.command == "energy":
        spec = bench.BenchSpec("energy", dofs, args.dt, args.frames or 10_000,
                               [_config(args)], args.seed, args.out, retraction, tree)
        return bench.write_csv(bench.run_energy(spec))
    if args.command == "scaling":
        if args.scene is not None:
            raise ValidationError("the scaling experiment uses generated chains; drop --scene")
        dofs = (args.chain,) if args.chain else args.dofs
        solvers = [_config(args)] if args.solver else [
            _config(args, m) for m in ("riqn", "newton", "broyden")]
        spec = bench.BenchSpec("scaling", dofs, args.dt, args.frames or 1000, solvers,
                               args.seed, args.out, retraction, None,
                               args.repetitions, args.warmup)
        return bench.write_csv(bench.run_scaling(spec))
    solvers = [_config(args)] if args.solver else [
        _config(args, m) for m in ("newton", "riqn")]
    spec = bench.BenchSpec("convergence", dofs, args.dt, args.frames or 200, solvers,
                           args.seed, args.out, retraction, tree)
    return bench.write_csv(bench.run_convergence(spec))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if not args.dt > 0:
            raise ValidationError(f"--dt must be positive, got {args.dt}")
        text = run(args)
    except NonConvergence as err:
        print(f"varint-dyn: {err}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ParseError, ValidationError, FileNotFoundError, IsADirectoryError) as err:
        print(f"varint-dyn: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (DomainError, ValueError, ArithmeticError) as err:
        print(f"varint-dyn: {err}", file=sys.stderr)
        return 1
    _emit(args, "energy" if args.command == "simulate" else args.command, text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
