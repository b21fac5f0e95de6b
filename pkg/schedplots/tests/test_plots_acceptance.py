"""End-to-end check: render real harness output, deterministically.

The CSVs are produced by invoking the simulator package strictly through its
command line, the same way an external user would chain the two tools.
"""

import subprocess
import sys

import pytest

from schedplots.cli import main

# preset name -> figure kind it belongs to
PRESET_KINDS = [
    ("smoothness_rho", "noise"),
    ("robustification", "robustness"),
    ("stochastic", "granularity"),
]


@pytest.fixture(scope="module")
def preset_csvs(tmp_path_factory):
    paths = {}
    for name, _ in PRESET_KINDS:
        out_dir = tmp_path_factory.mktemp(f"csv_{name}")
        proc = subprocess.run(
            [sys.executable, "-m", "barsched.cli", "figure", "--preset", name,
             "--out", str(out_dir)],
            capture_output=True,
            text=True,
            timeout=600,
        )
        assert proc.returncode == 0, proc.stderr
        paths[name] = proc.stdout.strip().splitlines()[-1]
    return paths


@pytest.mark.parametrize("name,kind", PRESET_KINDS)
def test_criterion_12_presets_render_with_identical_sidecars(
    name, kind, preset_csvs, tmp_path
):
    first = tmp_path / "first.png"
    second = tmp_path / "second.png"
    assert main(["render", preset_csvs[name], kind, str(first)]) == 0
    assert main(["render", preset_csvs[name], kind, str(second)]) == 0

    first_coords = tmp_path / "first.coords.txt"
    second_coords = tmp_path / "second.coords.txt"
    assert first_coords.read_bytes() == second_coords.read_bytes()
    assert first.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    # every curve must actually be a curve: one row per sweep point
    lines = first_coords.read_text().splitlines()[1:]
    algorithms = {line.split("\t")[0] for line in lines}
    xs = {line.split("\t")[1] for line in lines}
    assert len(lines) == len(algorithms) * len(xs)
    assert len(algorithms) >= 3


def test_criterion_12_log_scale_variant(preset_csvs, tmp_path):
    out = tmp_path / "log.png"
    assert main(["render", preset_csvs["smoothness_rho"], "noise", str(out), "--logx"]) == 0
    assert out.exists()
