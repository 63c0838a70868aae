import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from rotcool import __version__
from rotcool.cli import fmt, main
from rotcool.config import load_config

QUICK_COOL = ["--set", "numerics.secular=true", "--set", "cooling.duration=0.5",
              "--set", "cooling.record_every=0.25", "--set", "cooling.M_values=[0, 2, 3]"]


def read_csv(path):
    meta, body = {}, []
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        else:
            body.append(line)
    return meta, list(csv.reader(body))


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_fmt_twelve_digits():
    assert fmt(np.pi) == "3.14159265359"
    assert fmt(1 / 3e9) == "3.33333333333e-10"
    assert fmt(np.True_) == "1" and fmt(False) == "0"
    assert fmt(7) == "7" and fmt("3_31") == "3_31"


def test_levels_golden_header(tmp_path, capsys):
    assert run(tmp_path, "levels", "--preset", "propanediol-depletion") == 0
    meta, rows = read_csv(tmp_path / "levels.csv")
    assert list(meta)[:3] == ["rotcool_version", "schema", "command"]
    assert meta["rotcool_version"] == __version__ and meta["schema"] == "1" and meta["command"] == "levels"
    conv = json.loads(meta["conventions"])
    assert conv["mass_scaling"] == "pseudopotential" and conv["jump"] == "independent"
    assert rows[0] == ["J", "Ka", "Kc", "label", "energy_MHz"]
    assert rows[1][:4] == ["0", "0", "0", "0_00"]
    assert len(rows) - 1 == sum((2 * J + 1) for J in range(4))
    by_label = {r[3]: float(r[4]) for r in rows[1:]}
    assert by_label["3_30"] - by_label["3_31"] == pytest.approx(8.817471643080353, abs=1e-7)  # 12 digits of ~1e4 MHz
    assert json.loads(capsys.readouterr().out) == {"levels": 16, "transitions": len(
        read_csv(tmp_path / "transitions.csv")[1]) - 1}
    # echo reloads to the same configuration
    assert load_config(tmp_path / "resolved_config.yaml") == load_config(preset="propanediol-depletion")


def test_modes_and_overrides(tmp_path):
    assert run(tmp_path, "modes", "--preset", "propanediol-depletion", "--set", "chain.radial_freq=9.5") == 0
    _, rows = read_csv(tmp_path / "modes.csv")
    assert rows[0][:3] == ["label", "axis", "frequency_MHz"] and len(rows) == 1 + 6
    _, eq = read_csv(tmp_path / "equilibria.csv")
    assert [r[1] for r in eq[1:]] == ["atom", "molecule", "atom"]
    assert float(eq[2][3]) == pytest.approx(0.0, abs=1e-9)
    assert "radial_freq: 9.5" in (tmp_path / "resolved_config.yaml").read_text()


def test_drive_pi_pulse(tmp_path):
    cfg = tmp_path / "drive.yaml"
    cfg.write_text(
        "preset: propanediol-depletion\n"
        "drive:\n"
        "  initial: {'3_31,0': 1.0}\n"
        "  pulses:\n"
        "    - {lower: [3_31, 0], upper: [3_30, 1], polarization: sigma+}\n")
    assert main(["drive", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "populations.csv")
    after = {r[0]: float(r[2]) for r in rows[1:]}
    assert after["3_30:1"] > 1 - 1e-9
    assert sum(after.values()) == pytest.approx(1.0, abs=1e-12)


def test_cool_jobs_match_serial(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "cool", "--preset", "propanediol-depletion", *QUICK_COOL) == 0
    assert run(b, "cool", "--preset", "propanediol-depletion", *QUICK_COOL, "--jobs", "3") == 0
    sa = json.loads((a / "cool_summary.json").read_text())
    sb = json.loads((b / "cool_summary.json").read_text())
    assert sa == sb and set(sa) == {"0", "2", "3"}
    assert sa["0"]["j2_remaining_fraction"] == pytest.approx(1.0, abs=1e-9)
    assert max(sa["2"]["j2_final"], sa["3"]["j2_final"]) < 0.5
    meta, rows = read_csv(a / "trajectory_M3.csv")
    assert meta["M"] == "3" and rows[0][0] == "t_ms" and rows[0][-2:] == ["trace", "purity"]
    assert len(rows) == 1 + 3 and len(rows[0]) == 1 + 24 + 2


def test_protocol_summary(tmp_path):
    assert run(tmp_path, "protocol", "--preset", "propanediol-depletion",
               "--set", "numerics.secular=true", "--set", "protocol.iterations=4") == 0
    s = json.loads((tmp_path / "protocol_summary.json").read_text())
    assert s["kind"] == "depletion" and s["stranded"] == []
    assert s["final_error"] == pytest.approx(0.049889700868, rel=1e-8)
    assert s["converged"] is False and s["iterations_to_threshold"] is None
    _, rows = read_csv(tmp_path / "protocol.csv")
    assert rows[0][:2] == ["iteration", "error"] and "3_31:-3" in rows[0]
    assert len(rows) == 1 + 5


def test_scan_small_grid(tmp_path):
    assert run(tmp_path, "scan", "--preset", "mass-scan", "--set", "scan.n_mass=4",
               "--set", "scan.n_wz=40", "--set", "scan.Jmax=3", "--jobs", "2") == 0
    s = json.loads((tmp_path / "scan_summary.json").read_text())
    assert s["grid_points"] == 160 and 0 < s["stable_points"] <= 160
    _, grid = read_csv(tmp_path / "scan_grid.csv")
    assert len(grid) == 161 and grid[0][-1] == "stable"


@pytest.mark.parametrize("args", [
    ["levels"],
    ["levels", "--preset", "no-such-preset"],
    ["levels", "--preset", "glutamine-2_21", "--set", "molecule=unobtainium"],
    ["cool", "--preset", "glutamine-2_21", "--set", "cooling.gamma=-1"],
    ["levels", "--preset", "glutamine-2_21", "--set", "broken"],
])
def test_config_errors_exit_2(tmp_path, args, capsys):
    assert run(tmp_path, *args) == 2
    assert capsys.readouterr().err.startswith("config error:")


def test_unstable_zigzag_exits_3(tmp_path, capsys):
    assert run(tmp_path, "modes", "--preset", "propanediol-depletion", "--set", "chain.radial_freq=0.5") == 3
    assert "numerical failure" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "rotcool", "levels", "--preset", "glutamine-2_21",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert p.returncode == 0
    assert json.loads(p.stdout)["levels"] == 16
    v = subprocess.run([sys.executable, "-m", "rotcool", "--version"], capture_output=True, text=True)
    assert v.stdout.strip() == __version__
