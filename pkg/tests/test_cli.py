import json

import numpy as np
import pytest

from pathparam import scenes
from pathparam.cli import main
from pathparam.curve import named_curve


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main([*argv, "--out-dir", str(out)])
    return code, out


def read_json(path):
    return json.loads(path.read_text())


def test_frames_coil3d(tmp_path, capsys):
    code, out = run(tmp_path, "frames", "--curve", "coil3d")
    assert code == 0
    s = read_json(out / "frames_summary.json")
    assert not s["ptf"]["singular"] and s["ptf"]["max_omega"] > 0
    assert (out / "frames_fsf.csv").exists() and (out / "frames_ptf.csv").exists()
    assert "PTF" in capsys.readouterr().out


def test_frames_sinusoid_flags_inflections(tmp_path):
    code, out = run(tmp_path, "frames", "--curve", "sin2d")
    s = read_json(out / "frames_summary.json")
    assert code == 0 and s["fsf"]["singular"] and not s["ptf"]["singular"]
    assert s["fsf"]["normal_flips"] > 0


def test_frames_line(tmp_path, capsys):
    code, out = run(tmp_path, "frames", "--curve", "line")
    s = read_json(out / "frames_summary.json")
    assert code == 0 and s["fsf"]["max_omega"] is None and s["ptf"]["max_omega"] == 0.0
    assert "undefined" in capsys.readouterr().out


@pytest.mark.parametrize("c", range(5))
def test_continuity_ladder(tmp_path, c):
    code, out = run(tmp_path, "continuity", "-c", str(c))
    assert code == 0
    verdict = read_json(out / f"continuity_c{c}.json")["verdict"]
    expected = {"omega": c >= 2, "alpha": c >= 3, "jerk": c >= 4}
    assert {k: v == "continuous" for k, v in verdict.items()} == expected


def test_project_circle(tmp_path):
    theta = np.linspace(0.1, 6.1, 25)
    traj = tmp_path / "circle.csv"
    np.savetxt(traj, np.column_stack([np.cos(theta), np.sin(theta)]), delimiter=",", header="x,y", comments="")
    code, out = run(tmp_path, "project", "--curve", "circle", "--traj", str(traj))
    s = read_json(out / "projection_summary.json")
    assert code == 0 and s["points"] == 25 and s["max_abs_eta"] < 1e-8
    rows = np.loadtxt(out / "projection.csv", delimiter=",", skiprows=1)
    assert np.allclose(rows[:, 1], theta, atol=1e-8)


def test_corridor_between_planar_walls(tmp_path):
    w = 0.3
    curve = tmp_path / "line2d.json"
    curve.write_text(json.dumps({"kind": "expression", "components": ["t", "0"], "domain": [0, 1]}))
    cloud = tmp_path / "walls.csv"
    pts = [(x, s * w) for x in np.linspace(0, 1, 21) for s in (1, -1)]
    np.savetxt(cloud, pts, delimiter=",", header="x,y", comments="")
    code, out = run(tmp_path, "corridor", "--curve", str(curve), "--cloud", str(cloud), "--degree", "0")
    assert code == 0
    rows = np.loadtxt(out / "corridor_sections.csv", delimiter=",", skiprows=1)
    assert np.allclose(rows[:, 1], -w, atol=1e-6) and np.allclose(rows[:, 2], w, atol=1e-6)


def test_corridor_3d_walls(tmp_path):
    _, pts, _ = scenes.walls()
    cloud = tmp_path / "walls.csv"
    np.savetxt(cloud, pts, delimiter=",", header="x,y,z", comments="")
    code, out = run(tmp_path, "corridor", "--cloud", str(cloud), "--degree", "3")
    s = read_json(out / "corridor_summary.json")
    assert code == 0 and s["kind"] == "ellipse" and s["min_obstacle_residual"] >= -1e-8
    assert read_json(out / "corridor.json")["degree"] == 3


def test_outputs_are_byte_identical(tmp_path):
    a = main(["frames", "--curve", "helix", "--out-dir", str(tmp_path / "a")])
    b = main(["frames", "--curve", "helix", "--out-dir", str(tmp_path / "b")])
    assert a == b == 0
    for name in ("frames_fsf.csv", "frames_ptf.csv", "frames_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_json_format(tmp_path):
    code, out = run(tmp_path, "frames", "--curve", "helix", "--format", "json", "--grid", "11")
    assert code == 0
    doc = read_json(out / "frames_ptf.json")
    assert len(doc["rows"] if isinstance(doc, dict) else doc) == 11


def test_usage_errors(tmp_path, capsys):
    assert run(tmp_path, "plan", "-N", "5")[0] == 1
    assert run(tmp_path, "corridor", "--cloud", "x.csv", "--degree", "-1")[0] == 1
    with pytest.raises(SystemExit) as exc:
        main(["project", "--curve", "circle"])
    assert exc.value.code == 1
    assert not (tmp_path / "out").exists()


def test_data_errors_write_nothing(tmp_path):
    code, out = run(tmp_path, "frames", "--curve", "no-such-curve")
    assert code == 2 and not out.exists()
    code, out = run(tmp_path, "corridor", "--cloud", str(tmp_path / "missing.csv"))
    assert code == 2 and not out.exists()
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n3\n")
    code, out = run(tmp_path, "project", "--curve", "circle", "--traj", str(bad))
    assert code == 2 and not out.exists()


def test_numerical_error_writes_nothing(tmp_path):
    # the centre of the circle is equidistant from every curve point
    traj = tmp_path / "centre.csv"
    traj.write_text("x,y\n0,0\n")
    code, out = run(tmp_path, "project", "--curve", "circle", "--traj", str(traj))
    assert code == 3 and not out.exists()


def test_named_curves_are_available():
    assert named_curve("coil3d").dimension == 3
