import csv
import io
import math

import numpy as np
import pytest

from varint_dyn import bench
from varint_dyn.cli import main
from varint_dyn.liegroup import RetractionKind
from varint_dyn.model import save_scene, serial_chain
from varint_dyn.solvers import SolverConfig


def parse(text):
    lines = text.splitlines()
    meta = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    return meta, rows[0], rows[1:]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def spec(experiment, **kw):
    args = dict(dof_list=(4,), dt=1e-3, frames=3, solvers=[], rng_seed=0,
                output_path=None, retraction=RetractionKind.EXPONENTIAL, tree=None)
    args.update(kw)
    return bench.BenchSpec(experiment, **args)


# ---------------------------------------------------------------------------
# experiments

@pytest.mark.parametrize("frames", [1, 20])
def test_energy_rows(frames):
    result = bench.run_energy(spec("energy", frames=frames, dof_list=(10,)))
    meta, header, rows = parse(bench.write_csv(result))
    assert header == ["integrator", "frame", "t", "E_kin", "E_pot", "E_total"]
    assert len(rows) == 2 * (frames + 1)
    assert {r[0] for r in rows} == {"variational", "euler"}
    for r in rows:
        assert float(r[5]) == float(r[3]) + float(r[4])
    assert "git=" in meta[0] and "dt=0.001" in meta[0] and "seed=0" in meta[0]
    assert "tolerance=" in meta[0]


def test_energy_initial_value_is_analytic():
    result = bench.run_energy(spec("energy", frames=2, dof_list=(10,)))
    first = result.rows[0]
    # horizontal chain at rest: ten unit masses 0.1 m below the origin
    assert first[3] == 0.0
    assert first[5] == pytest.approx(-10 * 9.81 * 0.1, rel=1e-14)


def test_energy_with_scene_tree():
    tree = serial_chain(3)
    result = bench.run_energy(spec("energy", tree=tree, frames=4))
    assert len(result.rows) == 10


def test_scaling_single_size():
    result = bench.run_scaling(spec("scaling", dof_list=(3,), frames=2, repetitions=2,
                                    warmup=1))
    assert [r[1] for r in result.rows] == ["riqn", "newton", "broyden"]
    assert all(r[2] > 0 for r in result.rows)
    assert math.isnan(result.summary["slopes"]["riqn"])


def test_scaling_slope_lines():
    result = bench.run_scaling(spec("scaling", dof_list=(3, 6), frames=2, repetitions=2,
                                    warmup=1, solvers=[SolverConfig()]))
    assert len(result.rows) == 2
    text = bench.write_csv(result)
    assert "# slope riqn " in text


def test_convergence_rows_and_monotone_stopping():
    loose = bench.run_convergence(spec("convergence", dof_list=(10,), frames=10,
                                       solvers=[SolverConfig(tolerance=1e-3)]))
    tight = bench.run_convergence(spec("convergence", dof_list=(10,), frames=10,
                                       solvers=[SolverConfig(tolerance=1e-9)]))
    assert len(tight.rows) == 10
    for a, b in zip(loose.rows, tight.rows):
        assert a[2] <= b[2]
    # residual series starts at the zero guess
    norms = [float(v) for v in tight.rows[0][4].split(";")]
    assert len(norms) == tight.rows[0][2] + 1


def test_convergence_records_failures_as_rows():
    cfg = SolverConfig(method="riqn", tolerance=1e-9, max_iterations=2)
    result = bench.run_convergence(spec("convergence", dof_list=(10,), frames=3,
                                        solvers=[cfg]))
    assert len(result.rows) == 3
    assert all(r[3] == 0 for r in result.rows)


def test_csv_is_deterministic_without_timing():
    a = bench.write_csv(bench.run_convergence(spec("convergence", frames=5)))
    b = bench.write_csv(bench.run_convergence(spec("convergence", frames=5)))
    assert a == b


def test_bench_spec_validation():
    with pytest.raises(ValueError):
        spec("energy", frames=0)
    with pytest.raises(ValueError):
        spec("energy", dof_list=())
    with pytest.raises(ValueError):
        spec("lyapunov")


def test_loglog_slope_of_power_law():
    n = np.array([5, 10, 20, 40])
    assert bench.loglog_slope(n, 3e-6 * n ** 2) == pytest.approx(2.0)


def test_energy_drift_summary():
    E = np.array([-2.0, -2.0, -1.9, -2.1])
    d = bench.energy_drift(E)
    assert d["max_rel"] == pytest.approx(0.05)


@pytest.mark.parametrize("experiment", list(bench.Experiment))
def test_gnuplot_script_mentions_csv(experiment):
    script = bench.gnuplot_script(experiment, "out.csv")
    assert "out.csv" in script
    assert "set datafile separator ','" in script


# ---------------------------------------------------------------------------
# command line

def test_cli_energy(capsys, tmp_path):
    out = tmp_path / "energy.csv"
    code, _, _ = run_cli(capsys, "energy", "--chain", "3", "--frames", "4", "--out", str(out),
                         "--emit-gnuplot")
    assert code == 0
    _, header, rows = parse(out.read_text())
    assert len(rows) == 10
    assert (tmp_path / "energy.gp").exists()


def test_cli_simulate_to_stdout(capsys):
    code, text, _ = run_cli(capsys, "simulate", "--chain", "2", "--frames", "3",
                            "--solver", "newton", "--retraction", "cayley")
    assert code == 0
    meta, header, rows = parse(text)
    assert header[:4] == ["frame", "t", "q1", "q2"]
    assert len(rows) == 4
    assert "retraction=cayley" in meta[0]


def test_cli_simulate_scene(capsys, tmp_path):
    scene = tmp_path / "chain.yaml"
    scene.write_text(save_scene(serial_chain(3)))
    code, text, _ = run_cli(capsys, "simulate", "--scene", str(scene), "--frames", "2",
                            "--integrator", "euler")
    assert code == 0
    assert len(parse(text)[2]) == 3


def test_cli_convergence_and_scaling(capsys):
    code, text, _ = run_cli(capsys, "convergence", "--chain", "4", "--frames", "2")
    assert code == 0
    assert len(parse(text)[2]) == 4
    code, text, _ = run_cli(capsys, "scaling", "--dofs", "2,3", "--frames", "2",
                            "--repetitions", "2", "--warmup", "1", "--solver", "riqn")
    assert code == 0
    assert len(parse(text)[2]) == 2


def test_cli_non_convergence_exit_code(capsys):
    code, _, err = run_cli(capsys, "simulate", "--chain", "3", "--frames", "3",
                           "--tol", "1e-30", "--max-iter", "1")
    assert code == 2
    assert "did not converge" in err


@pytest.mark.parametrize("argv", [
    ["explode"],
    ["simulate", "--chain", "0"],
    ["simulate", "--dt", "-1"],
    ["simulate", "--solver", "gauss"],
    ["scaling", "--dofs", "a,b"],
    ["simulate", "--chain", "2", "--scene", "x.yaml"],
])
def test_cli_usage_errors(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 3


def test_cli_bad_dt_exit_code(capsys):
    code, _, _ = run_cli(capsys, "simulate", "--dt", "0")
    assert code == 3


def test_cli_scene_errors(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("bodies: [{parent: 0}]\n")
    code, _, err = run_cli(capsys, "simulate", "--scene", str(bad))
    assert code == 3
    assert "missing key" in err
    code, _, _ = run_cli(capsys, "simulate", "--scene", str(tmp_path / "absent.yaml"))
    assert code == 3
