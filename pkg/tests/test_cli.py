import json

import pytest

from hkforge.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExitCodes:
    def test_wcf_check_passes(self, capsys):
        code, out, _ = run(capsys, "wcf-check", "--model", "pentagon",
                           "--order", "6")
        assert code == 0
        assert "pentagon identity: PASS order 6" in out

    def test_ov_solve_single_iteration(self, capsys):
        code, out, _ = run(capsys, "solve", "--model", "ov", "--u", "0.5,0",
                           "--R", "1", "--theta", "0.3,1.1")
        assert code == 0
        assert "converged in 1 iteration(s)" in out

    def test_r_too_small_is_check_failure(self, capsys):
        code, _, err = run(capsys, "solve", "--model", "pentagon",
                           "--u", "0,0", "--R", "0.01", "--theta", "0.3,1.1")
        assert code == 1
        assert "R too small" in err

    def test_unknown_model_is_error(self, capsys):
        code, _, err = run(capsys, "model-info", "nosuchmodel")
        assert code == 1

    def test_negative_r_is_usage_error(self, capsys):
        code, _, err = run(capsys, "solve", "--model", "ov", "--u", "0.5,0",
                           "--R", "-1", "--theta", "0.3,1.1")
        assert code == 2
        assert "usage error" in err

    def test_bad_complex_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--model", "ov", "--u", "half", "--R", "1",
                  "--theta", "0,0"])
        assert exc.value.code == 2


class TestDeterminism:
    def test_solve_output_identical(self, capsys):
        argv = ("solve", "--model", "ov", "--u", "0.4,0.1", "--R", "1.5",
                "--theta", "0.2,0.9")
        _, out1, _ = run(capsys, *argv)
        _, out2, _ = run(capsys, *argv)
        assert out1 == out2

    def test_ov_compare_seeded(self, capsys):
        argv = ("ov-compare", "--count", "3", "--seed", "5")
        _, out1, _ = run(capsys, *argv)
        _, out2, _ = run(capsys, *argv)
        assert out1 == out2


class TestSolutionFiles:
    def test_roundtrip_and_jump_check(self, capsys, tmp_path):
        path = tmp_path / "sol.json"
        code, out, _ = run(capsys, "solve", "--model", "ov", "--u", "0.5,0",
                           "--R", "1", "--theta", "0.3,1.1",
                           "--out", str(path))
        assert code == 0 and path.exists()
        code, out, _ = run(capsys, "jump-check", "--solution", str(path))
        assert code == 0
        assert "worst jump defect" in out

    def test_tampered_hash_refused(self, capsys, tmp_path):
        path = tmp_path / "sol.json"
        run(capsys, "solve", "--model", "ov", "--u", "0.5,0", "--R", "1",
            "--theta", "0.3,1.1", "--out", str(path))
        payload = json.loads(path.read_text())
        payload["config"]["point"]["R"] = 2.0
        path.write_text(json.dumps(payload))
        code, _, err = run(capsys, "jump-check", "--solution", str(path))
        assert code == 1
        assert "hash mismatch" in err


class TestReports:
    def test_model_info(self, capsys):
        code, out, _ = run(capsys, "model-info", "pentagon")
        assert code == 0
        assert "vanishing cycles" in out

    def test_validate_ov(self, capsys):
        code, out, _ = run(capsys, "validate", "--model", "ov",
                           "--grid", "8")
        assert code == 0
        assert "pass" in out

    def test_semiflat_sample_table(self, capsys):
        code, out, _ = run(capsys, "semiflat-sample", "--model", "ov",
                           "--u", "0.5,0", "--R", "1", "--theta", "0.3,1.1",
                           "--zeta-grid", "3")
        assert code == 0
        rows = [l for l in out.splitlines() if l and not l.startswith("zeta")]
        assert len(rows) == 6  # 3 zetas x 2 basis charges

    def test_tree_compare(self, capsys):
        code, out, _ = run(capsys, "tree-compare", "--model", "ov",
                           "--u", "0.5,0", "--R", "1", "--theta", "0.3,1.1",
                           "--cutoff", "2", "--zeta", "0.6,0.5")
        assert code == 0
        assert "agreement bound" in out

    def test_wcf_dump_series(self, capsys):
        code, out, _ = run(capsys, "wcf-check", "--model", "pentagon",
                           "--order", "3", "--dump-series")
        assert code == 0
        assert "(0, 1) : 1/1" in out

    def test_metric_semiflat_only(self, capsys):
        code, out, _ = run(capsys, "metric", "--model", "pentagon",
                           "--u", "0.45,0.25", "--R", "3",
                           "--theta", "0.37,1.29", "--semiflat-only")
        assert code == 0
        assert "eigenvalues" in out

    def test_decay_scan(self, capsys):
        code, out, _ = run(capsys, "decay-scan", "--model", "pentagon",
                           "--u", "1.2,0", "--theta", "0.37,1.29",
                           "--R-list", "1.5,2.5,3.5", "--tol-rel", "0.05")
        assert code == 0
        assert "fitted slope" in out

    def test_wall_check_short(self, capsys):
        code, out, _ = run(capsys, "wall-check", "--model", "pentagon",
                           "--phi", "0.9", "--sep", "0.02", "--R", "0.35",
                           "--halvings", "1")
        assert code == 0
        assert "wall continuity: PASS" in out

    def test_metric_grid_respects_thread_cap(self, capsys, tmp_path,
                                             monkeypatch):
        monkeypatch.setenv("HKFORGE_THREADS", "2")
        out_path = tmp_path / "grid.txt"
        code, out, _ = run(capsys, "metric", "--model", "pentagon",
                           "--u", "0.45,0.25", "--R", "3",
                           "--theta", "0.37,1.29", "--semiflat-only",
                           "--emit-grid", "2", "--grid-out", str(out_path))
        assert code == 0
        rows = [l for l in out_path.read_text().splitlines()
                if not l.startswith("#")]
        assert len(rows) == 2
