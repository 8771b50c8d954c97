"""End-to-end CLI tests, run in-process through main()."""

import json

import pytest

from lamlab.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip().startswith("{") else out


# ---------------------------------------------------------------------------
# lamination commands
# ---------------------------------------------------------------------------


def test_lam_close_merges_chained_pairs(capsys):
    code, data = run(["lam-close", "--pairs", "1/9:4/9,4/9:7/9"], capsys)
    assert code == 0
    classes = data["lamination"]["classes"]
    assert ["1/9", "4/9", "7/9"] in classes


def test_lam_check_passes_on_single_pair(capsys):
    code, data = run(["lam-check", "--pairs", "1/9:4/9"], capsys)
    assert code == 0
    assert data["passes"] is True
    assert data["witnesses"] == {}


def test_lam_check_flags_linked_chords(capsys):
    code, data = run(["lam-check", "--pairs", "1/9:4/9,2/9:5/9"], capsys)
    assert code == 3
    assert data["passes"] is False
    assert data["r5"] is False
    assert data["witnesses"]["r5"] == "({1/9, 4/9}, {2/9, 5/9})"


def test_lam_check_reads_serialized_file(tmp_path, capsys):
    path = tmp_path / "lam.json"
    code, _ = run(["lam-close", "--pairs", "1/9:4/9", "--out", str(path)],
                  capsys)
    assert code == 0
    code, data = run(["lam-check", "--input", str(path)], capsys)
    assert code == 0 and data["passes"] is True


def test_lam_visual_over_trivial_base_matches_minimal(capsys):
    code, minimal = run(
        ["lam-minimal", "--angles", "1/9,4/9", "--depth", "3"], capsys)
    assert code == 0
    code, visual = run(
        ["lam-visual", "--angles", "1/9,4/9", "--depth", "3"], capsys)
    assert code == 0
    assert visual["lamination"] == minimal["lamination"]


# ---------------------------------------------------------------------------
# exit-code discipline
# ---------------------------------------------------------------------------


def test_unknown_command_exits_one():
    with pytest.raises(SystemExit) as err:
        main(["no-such-command"])
    assert err.value.code == 1


def test_missing_required_flag_exits_one():
    with pytest.raises(SystemExit) as err:
        main(["lam-minimal"])
    assert err.value.code == 1


def test_no_command_prints_usage(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_numerical_failure_exits_two(capsys):
    # seeded next to the slice's period-collapse root, the solver falls in
    code = main(["slice-solve", "--p", "2", "--c", "0.1",
                 "--v-seed", "0.1+0.001j"])
    assert code == 2
    assert "period collapse" in capsys.readouterr().err


def test_validation_failure_exits_three(capsys):
    code = main(["slice-solve", "--p", "0", "--c", "0.3"])
    assert code == 3


# ---------------------------------------------------------------------------
# dynamics commands
# ---------------------------------------------------------------------------


def test_ray_ext_lands_on_unit_circle(capsys):
    code, data = run(["ray-ext", "--c", "0", "--v", "0", "--theta", "1/4"],
                     capsys)
    assert code == 0
    x, y = data["landing"]
    assert abs(complex(x, y) - 1j) < 1e-9


def test_ray_int_without_turns_obstructs(capsys):
    code, data = run(["ray-int", "--c", "0.3", "--v", "0.3", "--t", "1/4"],
                     capsys)
    assert code == 0
    assert data["status"] == "obstructed"
    assert data["landing"] is None


def test_ray_int_smooth_ray_lands(capsys):
    code, data = run(["ray-int", "--c", "0.3", "--v", "0.3", "--t", "0"],
                     capsys)
    assert code == 0
    # the trace itself ends by exhausting its depth budget (the normal way);
    # the landing is the extrapolated limit attached on top
    assert data["status"] == "escaped-budget"
    assert abs(data["landing"][0] - 0.946585609973216) < 1e-9
    assert abs(data["landing"][1]) < 1e-9


def test_rat_lam_trivial_for_pure_cube(capsys):
    code, data = run(["rat-lam", "--c", "0", "--v", "0", "--max-den", "8"],
                     capsys)
    assert code == 0
    assert all(len(cl) == 1 for cl in data["lamination"]["classes"])


def test_slice_solve_period_two(capsys):
    code, data = run(["slice-solve", "--p", "2", "--c", "0.1",
                      "--v-seed", "1j"], capsys)
    assert code == 0
    assert data["c"] == [0.1, 0.0]
    assert abs(data["v"][0] - -0.05) < 1e-12
    assert abs(data["v"][1] - 0.9886859966642594) < 1e-12
    assert data["residual"] < 1e-12


# ---------------------------------------------------------------------------
# parameter pipeline
# ---------------------------------------------------------------------------


def test_param_ray_artifact_shape(tmp_path, capsys):
    path = tmp_path / "est.json"
    code = main(["param-ray", "--t0", "1/2", "--r-min", "0.3",
                 "--steps", "60", "--out", str(path)])
    assert code == 0
    data = json.loads(path.read_text())
    assert set(data) >= {"p", "t0", "path", "status", "a0",
                         "combinatorics", "config"}
    assert data["t0"] == "1/2"
    assert data["status"] == "traced"
    assert data["combinatorics"] == "non-periodic"
    assert data["a0"] is None  # tail too shallow for an extrapolated landing
    assert abs(data["path"][-1][0] - 0.3) < 1e-12


def test_param_ray_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["param-ray", "--t0", "1/2", "--r-min", "0.4",
                     "--steps", "60", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_predict_compare_round_trip(tmp_path, capsys):
    pred = tmp_path / "pred.json"
    est = tmp_path / "est.json"
    assert main(["boundary-predict", "--t0", "1/2", "--depth", "5",
                 "--max-den", "27", "--out", str(pred)]) == 0
    assert main(["param-ray", "--t0", "1/2", "--r-min", "0.05",
                 "--out", str(est)]) == 0

    # a prediction always agrees with itself
    code, data = run(["compare", "--predicted", str(pred),
                      "--observed", str(pred), "--max-den", "27"], capsys)
    assert code == 0
    assert data["agreement"] == 1.0
    assert data["q_indistinguishable"] is True

    # and with what the traced ray actually does
    code, data = run(["compare", "--predicted", str(pred),
                      "--estimate", str(est), "--max-den", "27"], capsys)
    assert code == 0
    assert data["agreement"] == 1.0
    assert data["predicted_only"] == [] and data["observed_only"] == []


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------


def test_config_file_applies_and_flag_wins(tmp_path, capsys):
    cfgfile = tmp_path / "lamlab.toml"
    cfgfile.write_text('cluster_tol = 5e-7\n')
    code, data = run(["lam-close", "--pairs", "1/9:4/9",
                      "--config", str(cfgfile)], capsys)
    assert code == 0
    assert data["config"]["cluster_tol"] == 5e-7

    code, data = run(["lam-close", "--pairs", "1/9:4/9",
                      "--config", str(cfgfile),
                      "--cluster-tol", "2e-7"], capsys)
    assert code == 0
    assert data["config"]["cluster_tol"] == 2e-7


def test_bad_config_value_exits_one(tmp_path, capsys):
    cfgfile = tmp_path / "bad.toml"
    cfgfile.write_text('cluster_tol = -1.0\n')
    code = main(["lam-close", "--pairs", "1/9:4/9", "--config", str(cfgfile)])
    assert code == 1
    assert "config error" in capsys.readouterr().err


def test_out_flag_writes_file_and_silences_stdout(tmp_path, capsys):
    path = tmp_path / "out.json"
    code = main(["lam-close", "--pairs", "1/9:4/9", "--out", str(path)])
    assert code == 0
    assert capsys.readouterr().out == ""
    data = json.loads(path.read_text())
    assert "lamination" in data and "config" in data


# ---------------------------------------------------------------------------
# drawing commands
# ---------------------------------------------------------------------------


def test_draw_chords_requires_out(tmp_path, capsys):
    lam = tmp_path / "lam.json"
    assert main(["lam-close", "--pairs", "1/9:4/9", "--out", str(lam)]) == 0
    assert main(["draw-chords", "--input", str(lam)]) == 1
    svg = tmp_path / "lam.svg"
    assert main(["draw-chords", "--input", str(lam), "--out", str(svg)]) == 0
    assert svg.read_text().startswith("<svg ")


def test_draw_julia_writes_png(tmp_path):
    out = tmp_path / "julia.png"
    code = main(["draw-julia", "--c", "0.3", "--v", "0.3",
                 "--resolution", "64", "--budget", "60", "--out", str(out)])
    assert code == 0
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
