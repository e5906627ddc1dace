import json

import numpy as np
import pytest

from sysid_rls import IOModel, InputSpec, generate_input, lift_once, simulate
from sysid_rls.cli import main
from sysid_rls.fileio import load_model, save_model, save_trajectory


SCALAR = IOModel.scalar([0.5], [0.0, 1.0])


@pytest.fixture
def workdir(tmp_path):
    save_model(SCALAR, tmp_path / "model.json")
    save_model(lift_once(SCALAR, 0.3), tmp_path / "high.json")
    u = generate_input(InputSpec(kind="white", seed=2), 400, 1)
    save_trajectory(simulate(SCALAR, [0.7], u), tmp_path / "traj.csv")
    return tmp_path


class TestEquivCommand:
    def test_equivalent_pair(self, workdir, capsys):
        rc = main(["equiv", str(workdir / "model.json"), str(workdir / "high.json")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "EQUIVALENT" in out and "residual" in out

    def test_inequivalent_pair(self, workdir, capsys):
        bad = IOModel.scalar([0.8, 0.15], [0.0, 1.0, 0.0])
        save_model(bad, workdir / "bad.json")
        rc = main(["equiv", str(workdir / "model.json"), str(workdir / "bad.json")])
        assert rc == 0
        assert "NOT EQUIVALENT" in capsys.readouterr().out

    def test_missing_file_is_validation_error(self, workdir, capsys):
        rc = main(["equiv", str(workdir / "model.json"), str(workdir / "nope.json")])
        assert rc == 2


class TestReduceCommand:
    def test_full_chain(self, workdir, capsys):
        rc = main(["reduce", str(workdir / "high.json"),
                   "--strategy", "scalar-root-search",
                   "--out", str(workdir / "red.json")])
        assert rc == 0
        reduced = load_model(workdir / "red.json")
        assert reduced.n == 1
        np.testing.assert_allclose(reduced.theta, SCALAR.theta, atol=1e-10)
        witness = json.loads((workdir / "red_witness.json").read_text())
        np.testing.assert_allclose(witness["witnesses_F1"], [[[0.5]]], atol=1e-10)

    def test_irreducible_input(self, workdir, capsys):
        rc = main(["reduce", str(workdir / "model.json")])
        assert rc == 0
        assert "irreducible" in capsys.readouterr().out


class TestFitCommand:
    def test_trace_columns_and_recovery(self, workdir, capsys):
        trace = workdir / "trace.csv"
        rc = main(["fit", "--data", str(workdir / "traj.csv"), "--order", "1",
                   "--ref-model", str(workdir / "model.json"),
                   "--emit-trace", str(trace)])
        assert rc == 0
        lines = trace.read_text().strip().splitlines()
        assert lines[0] == "k,theta_0,theta_1,theta_2,frob_err_to_ref,residual_norm,pmin_eig"
        last = lines[-1].split(",")
        assert float(last[4]) < 1e-3  # converged to the reference
        thetas = [float(x) for x in last[1:4]]
        np.testing.assert_allclose(thetas, [0.5, 0.0, 1.0], atol=1e-3)

    def test_missing_data_file(self, workdir):
        assert main(["fit", "--data", str(workdir / "nope.csv"), "--order", "1"]) == 2


class TestExciteCommand:
    def test_reduced_curve(self, workdir):
        out = workdir / "exc.csv"
        rc = main(["excite", "--data", str(workdir / "traj.csv"), "--order", "3",
                   "--true-order", "1", "--emit", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "k,lambda_min_partial,lambda_min_avg"
        final = lines[-1].split(",")
        assert float(final[1]) > 1.0  # reduced regressor is exciting

    def test_true_order_validation(self, workdir):
        rc = main(["excite", "--data", str(workdir / "traj.csv"), "--order", "2",
                   "--true-order", "2"])
        assert rc == 2


class TestConvergeCommand:
    def test_emits_summary(self, workdir):
        summary = workdir / "s.json"
        rc = main(["converge", "--model", str(workdir / "model.json"),
                   "--fit-order", "2", "--input", "white:seed=7:scale=1.0",
                   "--horizon", "1500", "--emit-summary", str(summary)])
        assert rc == 0
        data = json.loads(summary.read_text())
        assert data["ref_kind"] == "projected"
        assert data["final_dist_to_ref"] < 1e-3
        assert data["asymptote_rel_error"] < 0.2
        assert data["seed"] == 7

    def test_bad_input_spec(self, workdir):
        rc = main(["converge", "--model", str(workdir / "model.json"),
                   "--fit-order", "1", "--input", "noise:seed=1",
                   "--horizon", "100"])
        assert rc == 2


class TestExperimentCommand:
    def test_runs_and_reports(self, workdir, capsys):
        cfg = {
            "true_model": "model.json",
            "fit_orders": [1, 2],
            "horizon": 400,
            "input": {"kind": "white", "seed": 3},
        }
        (workdir / "cfg.json").write_text(json.dumps(cfg))
        rc = main(["experiment", str(workdir / "cfg.json"),
                   "--out-dir", str(workdir / "out")])
        assert rc == 0
        assert (workdir / "out" / "manifest.json").exists()
        assert "2/2 orders succeeded" in capsys.readouterr().out

    def test_no_out_dir(self, workdir):
        cfg = {"true_model": "model.json", "fit_orders": [1], "horizon": 100,
               "input": {"kind": "white", "seed": 3}}
        (workdir / "cfg.json").write_text(json.dumps(cfg))
        assert main(["experiment", str(workdir / "cfg.json")]) == 2

    def test_invalid_config(self, workdir):
        (workdir / "cfg.json").write_text(json.dumps({"fit_orders": [1]}))
        assert main(["experiment", str(workdir / "cfg.json"),
                     "--out-dir", str(workdir / "out")]) == 2


class TestMissingInputCells:
    def test_fit_skips_incomplete_windows(self, tmp_path, capsys):
        # two leading rows without inputs: windows touching them are dropped
        m = IOModel.scalar([0.5], [0.0, 1.0])
        u = generate_input(InputSpec(kind="white", seed=4), 200, 1)
        traj = simulate(m, [0.2], u)
        path = tmp_path / "gap.csv"
        save_trajectory(traj, path)
        text = path.read_text().splitlines()
        text[1] = text[1].replace(text[1].split(",")[1], "", 1)
        text[2] = text[2].replace(text[2].split(",")[1], "", 1)
        path.write_text("\n".join(text) + "\n")
        rc = main(["fit", "--data", str(path), "--order", "1"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "3 samples lack a complete window" in out

    def test_fit_all_windows_missing(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("k,u_1,y_1\n0,,1.0\n1,,2.0\n2,,3.0\n")
        assert main(["fit", "--data", str(path), "--order", "1"]) == 2
