"""Figure renderers for the monitored-qubit thermodynamics bundles.

Each renderer is a pure function of the CSV contents: fixed style, no clock
and no randomness, so identical inputs give identical image bytes.  Panels
are labelled with the configuration hash recorded in the bundle headers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schema import EmptyBundle, column, load_csv

FIGURE_IDS = ("fig2", "fig3", "fig4", "fig5")

_STYLE = {
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "font.size": 8.5,
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.1,
    "legend.frameon": False,
    "svg.hashsalt": "figkit",
}


@dataclass
class FigureSpec:
    figure_id: str
    indir: str
    outfile: str
    style: dict = field(default_factory=dict)


def _bloch_xyz(cols):
    c0 = column(cols, "psi_re_0") + 1j * column(cols, "psi_im_0")
    c1 = column(cols, "psi_re_1") + 1j * column(cols, "psi_im_1")
    x = 2.0 * (np.conj(c0) * c1).real
    y = 2.0 * (np.conj(c0) * c1).imag
    z = np.abs(c0) ** 2 - np.abs(c1) ** 2
    return x, y, z


def _bloch_panel(ax, cols, start_label):
    x, y, z = _bloch_xyz(cols)
    circle = np.linspace(0, 2 * np.pi, 200)
    ax.plot(np.cos(circle), np.sin(circle), color="0.8", lw=0.8)
    ax.plot(x, z, color="tab:blue", lw=0.9)
    ax.plot(x[0], z[0], "o", color="tab:blue", ms=5, label=start_label)
    ax.plot(x[-1], z[-1], "D", color="tab:blue", ms=5, label="final")
    ax.set_xlim(-1.15, 1.15)
    ax.set_ylim(-1.15, 1.15)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.legend(loc="upper right", fontsize=7)


def _hist_inset(ax, indir, name, color, label):
    _, h = load_csv(os.path.join(indir, name), "histogram")
    left = column(h, "bin_left")
    right = column(h, "bin_right")
    ax.bar(0.5 * (left + right), column(h, "density"), width=(right - left),
           color=color, alpha=0.75)
    ax.set_xlabel(label, fontsize=7)
    ax.set_ylabel("density", fontsize=7)
    ax.tick_params(labelsize=6)


def render_fig2(indir: str, outfile: str) -> None:
    """Jump-preset sample trajectory: Bloch trace and energetics series."""
    meta, cols = load_csv(os.path.join(indir, "trajectory.csv"), "trajectory")
    t = column(cols, "t")
    e = column(cols, "E_gamma")
    q = column(cols, "Q_cum")
    de = e - e[0]
    w_total = de - q
    fig, axes = plt.subplots(1, 3, figsize=(9.6, 3.1))
    _bloch_panel(axes[0], cols, "initial")
    axes[0].set_title("(a) conditional state")
    axes[1].plot(t, de, "--", color="tab:blue", label=r"$\Delta E$")
    axes[1].plot(t, w_total, color="black", label=r"$W$")
    axes[1].plot(t, q, color="tab:red", label=r"$Q$")
    axes[1].set_xlabel(r"$\omega\tau$")
    axes[1].set_ylabel(r"energy  [$\hbar\omega$]")
    axes[1].legend()
    axes[1].set_title("(b) first law")
    axes[2].plot(t, w_total, color="black", label=r"$W$")
    axes[2].plot(t, column(cols, "W_drive_cum"), color="tab:orange",
                 label=r"$W_{\mathrm{drive}}$")
    axes[2].plot(t, column(cols, "W_meas_cum"), "--", color="tab:green",
                 label=r"$W_{\mathrm{meas}}$")
    axes[2].set_xlabel(r"$\omega\tau$")
    axes[2].set_ylabel(r"work  [$\hbar\omega$]")
    axes[2].legend()
    axes[2].set_title("(c) work split")
    _finish(fig, meta, outfile)


def render_fig3(indir: str, outfile: str) -> None:
    """FT convergence (three running means) with EP histogram insets."""
    meta, conv = load_csv(os.path.join(indir, "convergence.csv"), "convergence")
    n = column(conv, "n")
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for key, color, label in (
        ("ft_s_tot", "tab:blue", r"$\langle e^{-S_{\mathrm{tot}}}\rangle$"),
        ("ft_s_mar", "tab:orange", r"$\langle e^{-S_{\mathrm{mar}}}\rangle$"),
        ("ft_s_unc", "tab:green", r"$\langle e^{-S_{\mathrm{unc}}}\rangle$"),
    ):
        ax.plot(n, column(conv, key), color=color, label=label)
    ax.axhline(1.0, color="0.4", lw=0.7, ls=":")
    ax.set_xscale("log")
    ax.set_xlabel("number of trajectories")
    ax.set_ylabel("running mean")
    ax.legend(loc="upper right")
    inset1 = ax.inset_axes([0.12, 0.62, 0.3, 0.3])
    _hist_inset(inset1, indir, "hist_s_tot.csv", "tab:blue", r"$S_{\mathrm{tot}}$")
    inset2 = ax.inset_axes([0.12, 0.14, 0.3, 0.3])
    _hist_inset(inset2, indir, "hist_s_unc.csv", "tab:green", r"$S_{\mathrm{unc}}$")
    _finish(fig, meta, outfile)


def render_fig4(indir: str, outfile: str) -> None:
    """Diffusive-preset sample trajectory on the Bloch sphere."""
    meta, cols = load_csv(os.path.join(indir, "trajectory.csv"), "trajectory")
    fig, ax = plt.subplots(figsize=(3.6, 3.6))
    _bloch_panel(ax, cols, "initial")
    ax.set_title("diffusive monitoring")
    _finish(fig, meta, outfile)


def render_fig5(indir: str, outfile: str) -> None:
    """Diffusive work decomposition and EP traces with histogram insets."""
    meta, cols = load_csv(os.path.join(indir, "trajectory.csv"), "trajectory")
    t = column(cols, "t")
    e = column(cols, "E_gamma")
    w_total = (e - e[0]) - column(cols, "Q_cum")
    fig, axes = plt.subplots(1, 2, figsize=(8.2, 3.4))
    axes[0].plot(t, w_total, color="black", label=r"$W$")
    axes[0].plot(t, column(cols, "W_drive_cum"), color="tab:orange",
                 label=r"$W_{\mathrm{drive}}$")
    axes[0].plot(t, column(cols, "W_meas_cum"), "--", color="tab:green",
                 label=r"$W_{\mathrm{meas}}$")
    axes[0].set_xlabel(r"$\omega_q\tau$")
    axes[0].set_ylabel(r"work  [$\hbar\omega_q$]")
    axes[0].legend()
    axes[0].set_title("(a) work decomposition")
    axes[1].plot(t, column(cols, "S_tot_partial"), color="tab:blue",
                 label=r"$S_{\mathrm{tot}}$")
    axes[1].plot(t, column(cols, "S_mar_partial"), color="tab:orange",
                 label=r"$S_{\mathrm{mar}}$")
    axes[1].set_xlabel(r"$\omega_q\tau$")
    axes[1].set_ylabel("entropy production")
    axes[1].legend(loc="upper left")
    axes[1].set_title("(b) EP traces")
    inset1 = axes[1].inset_axes([0.58, 0.08, 0.38, 0.34])
    _hist_inset(inset1, indir, "hist_s_tot.csv", "tab:blue", r"$S_{\mathrm{tot}}$")
    inset2 = axes[0].inset_axes([0.1, 0.62, 0.38, 0.34])
    _hist_inset(inset2, indir, "hist_s_mar.csv", "tab:orange", r"$S_{\mathrm{mar}}$")
    _finish(fig, meta, outfile)


def _finish(fig, meta, outfile) -> None:
    chash = meta.get("config_hash", "unknown")
    fig.suptitle(f"config {chash}", fontsize=7, x=0.99, ha="right", color="0.4")
    fig.tight_layout(rect=(0, 0, 1, 0.97))
    fig.savefig(outfile, metadata=_blank_metadata(outfile))
    plt.close(fig)


def _blank_metadata(outfile):
    # strip writer/time stamps so identical inputs give identical bytes
    if outfile.endswith(".png"):
        return {"Software": None}
    if outfile.endswith(".svg"):
        return {"Date": None, "Creator": None}
    return None


_RENDERERS = {
    "fig2": render_fig2,
    "fig3": render_fig3,
    "fig4": render_fig4,
    "fig5": render_fig5,
}


def render(spec: FigureSpec) -> str:
    """Render one figure from its bundle directory; returns the output path.

    Inputs are validated (and loaded) before the output file is touched, so
    failures never leave a partial image behind.
    """
    if spec.figure_id not in _RENDERERS:
        raise ValueError(f"unknown figure id {spec.figure_id!r}; use one of {FIGURE_IDS}")
    with plt.rc_context({**_STYLE, **spec.style}):
        _RENDERERS[spec.figure_id](spec.indir, spec.outfile)
    return spec.outfile
