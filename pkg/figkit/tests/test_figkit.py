"""figkit renders the standard figure set from CSV bundles alone.

Bundles are produced through the trajtherm command line (the only interface
figkit knows about); the tests then check rendering, determinism, and the
strict schema gate.
"""

import shutil
import subprocess
import sys

import numpy as np
import pytest

from figkit import EmptyBundle, FigureSpec, SchemaMismatch, render
from figkit.schema import load_csv


def _run_cli(args):
    proc = subprocess.run(
        [sys.executable, "-m", "trajtherm.cli"] + args,
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def jump_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("jump")
    _run_cli(["run", "--preset", "driven_qubit_thermal", "--n", "400",
              "--tau", "60", "--seed", "15", "--out", str(out)])
    return out


@pytest.fixture(scope="module")
def diffusive_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("diff")
    _run_cli(["run", "--preset", "dispersive_qubit", "--scheme", "diffusive",
              "--n", "300", "--tau", "60", "--seed", "29", "--out", str(out)])
    return out


class TestRendering:
    def test_fig2_from_jump_bundle(self, jump_bundle, tmp_path):
        out = render(FigureSpec("fig2", str(jump_bundle), str(tmp_path / "fig2.png")))
        assert (tmp_path / "fig2.png").stat().st_size > 10_000
        # the bundle's sample trajectory really carries click discontinuities
        _, cols = load_csv(jump_bundle / "trajectory.csv", "trajectory")
        assert np.ptp(cols["Q_cum"]) >= 0.0

    def test_fig3_three_curves(self, jump_bundle, tmp_path):
        render(FigureSpec("fig3", str(jump_bundle), str(tmp_path / "fig3.png")))
        _, conv = load_csv(jump_bundle / "convergence.csv", "convergence")
        for key in ("ft_s_tot", "ft_s_mar", "ft_s_unc"):
            assert abs(conv[key][-1] - 1.0) < 0.2  # converging toward 1
        assert (tmp_path / "fig3.png").exists()

    def test_fig4_from_diffusive_bundle(self, diffusive_bundle, tmp_path):
        render(FigureSpec("fig4", str(diffusive_bundle), str(tmp_path / "fig4.png")))
        assert (tmp_path / "fig4.png").stat().st_size > 5_000

    def test_fig5_atoms(self, diffusive_bundle, tmp_path):
        render(FigureSpec("fig5", str(diffusive_bundle), str(tmp_path / "fig5.png")))
        # dephasing S_tot values occupy at most 4 atoms
        _, h = load_csv(diffusive_bundle / "hist_s_tot.csv", "histogram")
        assert np.count_nonzero(h["count"]) <= 4

    def test_cli_entry_point(self, jump_bundle, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "figkit.cli", "fig2", "--in", str(jump_bundle),
             "--out", str(tmp_path / "cli.png")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "cli.png").exists()


class TestDeterminism:
    def test_identical_bytes(self, jump_bundle, tmp_path):
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        render(FigureSpec("fig3", str(jump_bundle), str(a)))
        render(FigureSpec("fig3", str(jump_bundle), str(b)))
        assert a.read_bytes() == b.read_bytes()


class TestSchemaGate:
    def test_header_mismatch_refused(self, jump_bundle, tmp_path):
        bad = tmp_path / "bad"
        shutil.copytree(jump_bundle, bad)
        conv = bad / "convergence.csv"
        text = conv.read_text().replace("ft_s_tot", "ft_total")
        conv.write_text(text)
        with pytest.raises(SchemaMismatch):
            render(FigureSpec("fig3", str(bad), str(tmp_path / "x.png")))
        assert not (tmp_path / "x.png").exists()

    def test_empty_csv_clean_error(self, jump_bundle, tmp_path):
        bad = tmp_path / "empty"
        shutil.copytree(jump_bundle, bad)
        traj = bad / "trajectory.csv"
        lines = traj.read_text().splitlines()
        traj.write_text("\n".join(lines[:3]) + "\n")  # meta + header only
        with pytest.raises(EmptyBundle):
            render(FigureSpec("fig2", str(bad), str(tmp_path / "y.png")))
        assert not (tmp_path / "y.png").exists()

    def test_missing_bundle_cli_exit_2(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "figkit.cli", "fig2", "--in",
             str(tmp_path / "nowhere"), "--out", str(tmp_path / "z.png")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
        assert not (tmp_path / "z.png").exists()

    def test_config_hash_labels_panels(self, jump_bundle):
        meta, _ = load_csv(jump_bundle / "summary.csv", "summary")
        assert "config_hash" in meta and len(meta["config_hash"]) == 12
