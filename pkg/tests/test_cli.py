import json
import math
import subprocess
import sys
import time

import pytest

from agplz.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def exit_code(*argv):
    with pytest.raises(SystemExit) as exc:
        main(list(argv))
    return exc.value.code


class TestSimulatePredict:
    def test_simulate_lz(self, capsys):
        code, out, _ = run(capsys, "simulate", "--delta", "0.5", "--eta", "0", "--tau-max", "200", "--tol", "1e-10")
        d = json.loads(out)
        assert code == 0
        assert d["P"] == pytest.approx(1.8674e-3, rel=0.02)
        assert {"norm_drift", "n_steps", "resolution_limited", "frame"} <= set(d)

    def test_simulate_counterdiabatic(self, capsys):
        _, out, _ = run(capsys, "simulate", "--delta", "0.5", "--eta", "1")
        assert json.loads(out)["P"] <= 1e-8

    def test_simulate_adiabatic_frame(self, capsys, tmp_path):
        path = tmp_path / "r.json"
        _, out, _ = run(capsys, "simulate", "--delta", "0.5", "--eta", "0.25", "--frame", "adiabatic",
                        "--out", str(path))
        assert json.loads(path.read_text()) == json.loads(out)

    def test_predict_lz(self, capsys):
        _, out, _ = run(capsys, "predict", "--delta", "0.5", "--eta", "0", "--method", "closed-form")
        d = json.loads(out)
        assert d["P"] == pytest.approx(1.8674e-3, rel=1e-4)
        assert d["dyn_im"] == pytest.approx(math.pi / 2)

    def test_predict_counterdiabatic(self, capsys):
        _, out, _ = run(capsys, "predict", "--delta", "0.5", "--eta", "1", "--method", "closed-form")
        assert json.loads(out)["P"] == 0.0

    @pytest.mark.xfail(strict=True, reason="quadrature P is 24% below the closed form at eta=0.5; see decisions ledger")
    def test_predict_quadrature_vs_closed(self, capsys):
        _, q, _ = run(capsys, "predict", "--delta", "0.5", "--eta", "0.5", "--method", "quadrature")
        _, c, _ = run(capsys, "predict", "--delta", "0.5", "--eta", "0.5", "--method", "closed-form")
        assert json.loads(q)["P"] == pytest.approx(json.loads(c)["P"], rel=0.05)


class TestOtherCommands:
    def test_branch_points(self, capsys):
        _, out, _ = run(capsys, "branch-points", "--delta", "0.5", "--eta", "1")
        d = json.loads(out)
        assert d["upper"][0] == pytest.approx([0.0, 1.181884], abs=1e-6)
        assert max(d["residuals"]) <= 1e-12

    def test_holonomy(self, capsys):
        _, out, _ = run(capsys, "holonomy", "--eta", "1", "--radius", "0.3")
        d = json.loads(out)
        assert max(abs(x - y) for r, e in zip(d["matrix_re"], [[0, 1], [-1, 0]]) for x, y in zip(r, e)) <= 1e-12
        assert d["max_error_vs_closed_form"] <= 1e-12

    def test_flatness_n2(self, capsys):
        _, out, _ = run(capsys, "flatness", "--model", "gaudin", "--spins", "2", "--B", "1", "--eps", "0,1")
        assert json.loads(out)["corrected_residual"] <= 1e-6

    def test_flatness_perturbed(self, capsys):
        _, out, _ = run(capsys, "flatness", "--perturb", "1e-3")
        assert 1e-4 <= json.loads(out)["comm_residual"] <= 1e-2

    def test_flatness_n3(self, capsys):
        _, out, _ = run(capsys, "flatness", "--spins", "3", "--eps", "0,1,2.5")
        d = json.loads(out)
        for k in ("sym_residual", "comm_residual", "corrected_residual", "agp_flatness",
                  "cross_commutator", "eigenvalue_curl"):
            assert d[k] <= d["tol_fd"]

    def test_delta_field_refine(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        grid = ["--eta", "1", "--n-re", "21", "--n-im", "12"]
        assert main(["delta-field", *grid, "--out", str(a)]) == 0
        assert main(["delta-field", *grid, "--refine", "--out", str(b)]) == 0
        coarse = {tuple(r.split(",")[:2]): r.split(",")[2:] for r in a.read_text().splitlines()[1:]}
        fine = {tuple(r.split(",")[:2]): r.split(",")[2:] for r in b.read_text().splitlines()[1:]}
        assert len(coarse) == 21 * 12 and len(fine) == 41 * 23
        shared = 0
        for key, (d, m) in coarse.items():
            fd, fm = fine[key]
            if m == "0" and fm == "0":
                assert abs(float(d) - float(fd)) <= 1e-8
                shared += 1
        assert shared > 150

    def test_delta_field_real_row(self, capsys):
        code, out, _ = run(capsys, "delta-field", "--n-re", "30", "--n-im", "10")
        rows = [r.split(",") for r in out.splitlines()[1:]]
        assert code == 0
        assert all(float(r[2]) == 0.0 for r in rows if float(r[1]) == 0.0)

    def test_level_lines(self, capsys, tmp_path):
        svg = tmp_path / "l.svg"
        assert main(["level-lines", "--eta", "1", "--n-re", "60", "--n-im", "50", "--levels=-1,-0.5",
                     "--out", str(svg)]) == 0
        text = svg.read_text()
        assert text.count("<g ") == 2 and "<path" in text


class TestExitCodes:
    def test_bad_flag(self):
        assert exit_code("simulate", "--delta", "abc") == 2

    def test_unknown_subcommand(self):
        assert exit_code("frobnicate") == 2

    def test_tol_out_of_range(self):
        assert exit_code("simulate", "--tol", "1") == 2

    def test_negative_delta(self):
        assert exit_code("predict", "--delta", "-1") == 2

    def test_numerical_failure(self, capsys):
        code, _, err = run(capsys, "holonomy", "--radius", "5")
        assert code == 1
        assert err.startswith("RadiusError")

    def test_console_script(self):
        proc = subprocess.run([sys.executable, "-m", "agplz.cli", "holonomy", "--radius", "9"],
                              capture_output=True, text=True)
        assert proc.returncode == 1 and "RadiusError" in proc.stderr


SWEEP = ["sweep", "--deltas", "0.4,0.5", "--etas", "0,1", "--tol", "1e-8"]


class TestSweep:
    def test_shape_and_header(self, tmp_path):
        out = tmp_path / "s.csv"
        code = main(["sweep", "--deltas", "0.35,0.4,0.45,0.5,0.6", "--etas", "0,0.25,0.5,1",
                     "--methods", "ddp_closed,ddp_quadrature", "--out", str(out)])
        lines = out.read_text().splitlines()
        assert code == 0
        assert lines[0] == "delta,eta,P_ddp_closed,P_ddp_quadrature,norm_drift,n_steps"
        assert len(lines) == 21
        keys = [tuple(map(float, l.split(",")[:2])) for l in lines[1:]]
        assert keys == sorted(keys)

    def test_all_methods(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main([*SWEEP, "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "delta,eta,P_ode_diabatic,P_ode_adiabatic,P_ddp_closed,P_ddp_quadrature,norm_drift,n_steps"
        for row in lines[1:]:
            cells = row.split(",")
            if float(cells[1]) == 1.0:
                assert all(float(c) <= 1e-8 for c in cells[2:6])
            else:
                assert float(cells[2]) == pytest.approx(float(cells[4]), rel=0.2)

    def test_deterministic_and_worker_independent(self, tmp_path):
        paths = [tmp_path / f"{k}.csv" for k in range(3)]
        main([*SWEEP, "--workers", "1", "--out", str(paths[0])])
        main([*SWEEP, "--workers", "1", "--out", str(paths[1])])
        main([*SWEEP, "--workers", "3", "--out", str(paths[2])])
        texts = [p.read_bytes() for p in paths]
        assert texts[0] == texts[1] == texts[2]
        meta = json.loads((tmp_path / "0.csv.meta.json").read_text())
        assert meta["settings"]["tol"] == 1e-8 and "started_unix" in meta

    def test_round_trip_formatting(self, tmp_path, capsys):
        main(["sweep", "--deltas", "0.3", "--etas", "0.1", "--methods", "ddp_closed"])
        row = capsys.readouterr().out.splitlines()[1].split(",")
        assert repr(float(row[2])) == row[2]

    def test_partial_failure(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        code = main(["sweep", "--deltas", "0.5,2.0", "--etas", "0.75", "--methods", "ddp_closed,ddp_quadrature",
                     "--out", str(out)])
        err = capsys.readouterr().err
        lines = out.read_text().splitlines()
        assert code == 3
        assert lines[2].split(",")[3] == "NaN" and lines[2].split(",")[2] != "NaN"
        assert "ValueError" in err

    def test_config_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "c.txt"
        cfg.write_text("# sweep settings\ndeltas = 0.3\netas=0.5\nmethods=ddp_closed\ntol=1e-9\n")
        main(["sweep", "--config", str(cfg), "--etas", "0.25"])
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "delta,eta,P_ddp_closed,norm_drift,n_steps"
        assert lines[1].startswith("0.3,0.25,")

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("colour=blue\n")
        assert exit_code("sweep", "--config", str(cfg)) == 2

    def test_bad_method(self):
        assert exit_code("sweep", "--methods", "magic") == 2


def test_verify_quick(capsys):
    t0 = time.perf_counter()
    code, out, _ = run(capsys, "verify", "--quick")
    assert time.perf_counter() - t0 < 30
    assert "criteria passed" in out
    assert code == (0 if "FAIL" not in out else 1)
