"""Figure layouts over the scenario CSV schemas.

Every layout is a pure function of its input files: fixed style, no
timestamps, no computation beyond unit scaling, so identical inputs produce
identical image bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import FigureDataError, find_many, find_one, load_csv  # noqa: E402

STYLE = {
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.25,
    "lines.linewidth": 1.4,
    "legend.fontsize": 8,
    "svg.hashsalt": "plme-figures",
}

COLORS = {"plus": "#1f77b4", "minus": "#ff7f0e", "x": "#2ca02c",
          "exact": "#000000", "phi": "#d62728", "zeroth": "#ff7f0e",
          "plme2": "#1f77b4", "plme4": "#2ca02c"}


@dataclass
class FigureSpec:
    """One figure request: named inputs, output path, and the layout name."""

    name: str
    data_dir: Path
    out_path: Path
    options: dict = field(default_factory=dict)


def render(spec: FigureSpec) -> Path:
    """Render a figure layout; raises FigureDataError before writing anything
    if the inputs are missing, ambiguous, or schema-invalid."""
    if spec.name not in LAYOUTS:
        raise FigureDataError(f"unknown figure {spec.name!r}; known: {sorted(LAYOUTS)}")
    with plt.rc_context(STYLE):
        fig = LAYOUTS[spec.name](Path(spec.data_dir), spec.options)
        try:
            out = Path(spec.out_path)
            out.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(out, metadata=_clean_metadata(out))
        finally:
            plt.close(fig)
    return Path(spec.out_path)


def _clean_metadata(out: Path) -> dict:
    suffix = out.suffix.lower()
    if suffix == ".svg":
        return {"Date": None, "Creator": "plme-figures"}
    if suffix == ".png":
        return {"Software": "plme-figures"}
    return {}


def list_figures() -> list[str]:
    return sorted(LAYOUTS)


# ---------------------------------------------------------------------------
# layouts
# ---------------------------------------------------------------------------

RATE_COLS = ("omega_t", "gamma_plus_plme", "gamma_minus_plme", "gamma_x_plme4",
             "gamma_1_exact", "gamma_2_exact", "gamma_3_exact")


def _rates_quasistatic(data_dir: Path, options: dict):
    d = load_csv(find_one(data_dir, "rates_quasistatic_*.csv"), RATE_COLS)
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    t = d["omega_t"]
    ax.plot(t, d["gamma_1_exact"], color=COLORS["exact"], ls="--", label="exact")
    ax.plot(t, d["gamma_2_exact"], color=COLORS["exact"], ls="--")
    ax.plot(t, d["gamma_3_exact"], color=COLORS["exact"], ls=":")
    ax.plot(t, d["gamma_plus_plme"], color=COLORS["plus"], label=r"$\Gamma_+$")
    ax.plot(t, d["gamma_minus_plme"], color=COLORS["minus"], label=r"$\Gamma_-$")
    ax.plot(t, d["gamma_x_plme4"], color=COLORS["x"], label=r"$\Gamma_x$")
    ax.set_xlabel(r"$\Omega t$")
    ax.set_ylabel(r"rate / $\Omega$")
    ax.legend(loc="lower left", ncol=2)
    fig.tight_layout()
    return fig


ERROR_COLS = ("omega_t", "eps_plme2", "eps_plme4", "eps_zeroth")


def _error_quasistatic(data_dir: Path, options: dict):
    d = load_csv(find_one(data_dir, "error_quasistatic_*.csv"), ERROR_COLS)
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.semilogy(d["omega_t"], d["eps_zeroth"], color=COLORS["zeroth"], label="drive-blind")
    ax.semilogy(d["omega_t"], d["eps_plme2"], color=COLORS["plme2"], label="2nd order")
    ax.semilogy(d["omega_t"], d["eps_plme4"], color=COLORS["plme4"], label="4th order")
    ax.axhline(1e-3, color="gray", lw=0.8, ls=":")
    ax.set_xlabel(r"$\Omega t$")
    ax.set_ylabel(r"$\epsilon(t)$")
    ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


SHORT_COLS = ("omega_t", "one_norm_plme2", "one_norm_zeroth", "ref_plme2", "ref_zeroth")


def _shorttime_scaling(data_dir: Path, options: dict):
    d = load_csv(find_one(data_dir, "shorttime_scaling_*.csv"), SHORT_COLS)
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.loglog(d["omega_t"], d["one_norm_zeroth"], "o", ms=3.5, color=COLORS["zeroth"],
              label="drive-blind")
    ax.loglog(d["omega_t"], d["one_norm_plme2"], "s", ms=3.5, color=COLORS["plme2"],
              label="2nd order")
    ax.loglog(d["omega_t"], d["ref_zeroth"], color=COLORS["exact"], ls="--", lw=0.9,
              label=r"$\propto t^3$")
    ax.loglog(d["omega_t"], d["ref_plme2"], color=COLORS["exact"], ls=":", lw=0.9,
              label=r"$\propto t^5$")
    ax.set_xlabel(r"$\Omega t$")
    ax.set_ylabel("1-norm error")
    ax.legend(loc="upper left")
    fig.tight_layout()
    return fig


MC_RATE_COLS = ("omega_t", "gamma_plus_plme", "gamma_minus_plme", "gamma_x_plme4",
                "phi", "rate_u_mc", "rate_v_mc", "rate_x_mc",
                "se_rate_u", "se_rate_v", "se_rate_x")
MC_ERR_COLS = ("omega_t", "eps_plme2", "eps_zeroth")


def _mc_rate_axis(ax, d, inset=True):
    t = d["omega_t"]
    stride = max(1, len(t) // 60)
    ax.plot(t[::stride], d["rate_u_mc"][::stride], color=COLORS["exact"], lw=0.9)
    ax.plot(t[::stride], d["rate_v_mc"][::stride], color=COLORS["exact"], lw=0.9)
    ax.plot(t, d["gamma_plus_plme"], color=COLORS["plus"], label=r"$\Gamma_+$")
    ax.plot(t, d["gamma_minus_plme"], color=COLORS["minus"], label=r"$\Gamma_-$")
    if not np.isnan(d["gamma_x_plme4"]).all():
        ax.plot(t, d["gamma_x_plme4"], color=COLORS["x"], label=r"$\Gamma_x$")
    ax.set_xlabel(r"$\Omega t$")
    if inset:
        sub = ax.inset_axes([0.62, 0.62, 0.35, 0.33])
        sub.plot(t, d["phi"], color=COLORS["phi"], lw=0.9)
        sub.set_title(r"$\phi(t)$", fontsize=7, pad=2)
        sub.tick_params(labelsize=6)


def _lorentzian_panels(data_dir: Path, options: dict):
    rate_files = find_many(data_dir, "lorentzian_panels_tc*_rates_*.csv")
    err_files = find_many(data_dir, "lorentzian_panels_tc*_error_*.csv")
    if len(rate_files) != len(err_files):
        raise FigureDataError("mismatched lorentzian rate/error file sets")
    n = len(rate_files)
    fig, axes = plt.subplots(2, n, figsize=(3.4 * n, 5.6), squeeze=False)
    for j, (rf, ef) in enumerate(zip(rate_files, err_files)):
        d = load_csv(rf, MC_RATE_COLS)
        _mc_rate_axis(axes[0][j], d)
        e = load_csv(ef, MC_ERR_COLS)
        axes[1][j].semilogy(e["omega_t"], e["eps_zeroth"], color=COLORS["zeroth"],
                            label="drive-blind")
        axes[1][j].semilogy(e["omega_t"], e["eps_plme2"], color=COLORS["plme2"],
                            label="2nd order")
        axes[1][j].set_xlabel(r"$\Omega t$")
    axes[0][0].set_ylabel(r"rate / $\Omega$")
    axes[1][0].set_ylabel(r"$\epsilon(t)$")
    axes[1][0].legend(loc="lower right")
    fig.tight_layout()
    return fig


def _oneoverf_panels(data_dir: Path, options: dict):
    d = load_csv(find_one(data_dir, "oneoverf_panels_rates_*.csv"), MC_RATE_COLS)
    e = load_csv(find_one(data_dir, "oneoverf_panels_error_*.csv"), MC_ERR_COLS)
    fig, axes = plt.subplots(2, 1, figsize=(5.0, 5.8))
    _mc_rate_axis(axes[0], d)
    axes[0].set_ylabel(r"rate / $\Omega$")
    axes[1].semilogy(e["omega_t"], e["eps_zeroth"], color=COLORS["zeroth"], label="drive-blind")
    axes[1].semilogy(e["omega_t"], e["eps_plme2"], color=COLORS["plme2"], label="2nd order")
    axes[1].set_xlabel(r"$\Omega t$")
    axes[1].set_ylabel(r"$\epsilon(t)$")
    axes[1].legend(loc="lower right")
    fig.tight_layout()
    return fig


EXPVAL_Q_COLS = ("omega_t", "sy_plme2", "sz_plme2", "sy_plme4", "sz_plme4",
                 "sy_zeroth", "sz_zeroth", "sy_exact", "sz_exact")
EXPVAL_MC_COLS = ("omega_t", "sy_plme2", "sz_plme2", "sy_zeroth", "sz_zeroth",
                  "sy_exact", "sz_exact", "se_sy_exact", "se_sz_exact")


def _expvals_quasistatic(data_dir: Path, options: dict):
    d = load_csv(find_one(data_dir, "expvals_quasistatic_*.csv"), EXPVAL_Q_COLS)
    fig, axes = plt.subplots(2, 1, figsize=(5.0, 5.6), sharex=True)
    for ax, comp in zip(axes, ("sy", "sz")):
        ax.plot(d["omega_t"], d[f"{comp}_exact"], color=COLORS["exact"], ls=":", label="exact")
        ax.plot(d["omega_t"], d[f"{comp}_zeroth"], color=COLORS["zeroth"], ls="--",
                label="drive-blind")
        ax.plot(d["omega_t"], d[f"{comp}_plme2"], color=COLORS["plme2"], label="2nd order")
        ax.plot(d["omega_t"], d[f"{comp}_plme4"], color=COLORS["plme4"], ls="-.",
                label="4th order")
        ax.set_ylabel(rf"$\langle \sigma_{comp[-1]} \rangle$")
    axes[1].set_xlabel(r"$\Omega t$")
    axes[0].legend(loc="lower left", ncol=2)
    fig.tight_layout()
    return fig


def _expvals_mc_axis(ax, d, comp):
    ax.plot(d["omega_t"], d[f"{comp}_exact"], color=COLORS["exact"], ls=":", label="exact")
    ax.plot(d["omega_t"], d[f"{comp}_zeroth"], color=COLORS["zeroth"], ls="--",
            label="drive-blind")
    ax.plot(d["omega_t"], d[f"{comp}_plme2"], color=COLORS["plme2"], label="2nd order")
    ax.set_ylabel(rf"$\langle \sigma_{comp[-1]} \rangle$")


def _expvals_lorentzian(data_dir: Path, options: dict):
    files = find_many(data_dir, "expvals_lorentzian_tc*_*.csv")
    fig, axes = plt.subplots(2, len(files), figsize=(3.2 * len(files), 5.4),
                             squeeze=False, sharex=True)
    for j, f in enumerate(files):
        d = load_csv(f, EXPVAL_MC_COLS)
        _expvals_mc_axis(axes[0][j], d, "sy")
        _expvals_mc_axis(axes[1][j], d, "sz")
        axes[1][j].set_xlabel(r"$\Omega t$")
    axes[0][0].legend(loc="lower left")
    fig.tight_layout()
    return fig


def _expvals_oneoverf(data_dir: Path, options: dict):
    d = load_csv(find_one(data_dir, "expvals_oneoverf_*.csv"), EXPVAL_MC_COLS)
    fig, axes = plt.subplots(2, 1, figsize=(5.0, 5.6), sharex=True)
    _expvals_mc_axis(axes[0], d, "sy")
    _expvals_mc_axis(axes[1], d, "sz")
    axes[1].set_xlabel(r"$\Omega t$")
    axes[0].legend(loc="lower left")
    fig.tight_layout()
    return fig


POSITIVITY_COLS = ("sigma_over_omega", "omega_t", "chi_min_eig")


def _positivity_map(data_dir: Path, options: dict):
    d = load_csv(find_one(data_dir, "positivity_map_*.csv"), POSITIVITY_COLS)
    sigmas = np.unique(d["sigma_over_omega"])
    times = np.unique(d["omega_t"])
    grid = np.full((len(sigmas), len(times)), np.nan)
    si = {s: i for i, s in enumerate(sigmas)}
    ti = {t: i for i, t in enumerate(times)}
    for row in d:
        grid[si[row["sigma_over_omega"]], ti[row["omega_t"]]] = row["chi_min_eig"]
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    vmax = np.nanmax(np.abs(grid))
    mesh = ax.pcolormesh(times, sigmas, grid, cmap="RdBu", vmin=-vmax, vmax=vmax,
                         shading="nearest")
    fig.colorbar(mesh, ax=ax, label=r"min eig $\chi(t)$")
    ax.set_xlabel(r"$\Omega t$")
    ax.set_ylabel(r"$\sigma / \Omega$")
    patches = sorted(Path(data_dir).glob("positivity_patch_sigma*.json"))
    for k, pfile in enumerate(patches[:2]):
        info = json.loads(pfile.read_text())
        sub = ax.inset_axes([0.06 + 0.5 * k, 0.58, 0.3, 0.36])
        pts = info.get("patch", [])
        if pts:
            sub.scatter([p["phi"] for p in pts], [math.cos(p["theta"]) for p in pts],
                        s=2, c="#b2182b")
        sub.set_xlim(0, 2 * math.pi)
        sub.set_ylim(-1, 1)
        sub.set_xticks([])
        sub.set_yticks([])
        sub.set_title(f"patch {info.get('fraction', 0):.1%}", fontsize=6, pad=2)
    fig.tight_layout()
    return fig


LAYOUTS = {
    "rates-quasistatic": _rates_quasistatic,
    "error-quasistatic": _error_quasistatic,
    "shorttime-scaling": _shorttime_scaling,
    "lorentzian-panels": _lorentzian_panels,
    "oneoverf-panels": _oneoverf_panels,
    "expvals-quasistatic": _expvals_quasistatic,
    "expvals-lorentzian": _expvals_lorentzian,
    "expvals-oneoverf": _expvals_oneoverf,
    "positivity-map": _positivity_map,
}
