"""Figures for sweep reports (rendered off-screen to files)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "improved": dict(color="tab:blue", ls="-", label="improved (decoy modes 1 + 2)"),
    "original": dict(color="tab:red", ls="-.", label="original (phase-randomized decoys)"),
    "infinite_improved": dict(color="tab:green", ls="--", label="improved, infinite decoys"),
    "infinite_original": dict(color="tab:orange", ls=":", label="original, infinite decoys"),
}


def _positive(xs, ys):
    keep = [(x, y) for x, y in zip(xs, ys) if y > 0 and math.isfinite(y)]
    return [x for x, _ in keep], [y for _, y in keep]


def plot_rate_vs_distance(rows, path, title=None):
    """Key rate per pulse (log scale) against distance, one curve per mode, plus the PLOB line."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    modes = list(dict.fromkeys(r.mode for r in rows))
    for mode in modes:
        pts = sorted((r.distance_km, r.skr) for r in rows if r.mode == mode)
        xs, ys = _positive([p[0] for p in pts], [p[1] for p in pts])
        if xs:
            ax.semilogy(xs, ys, lw=1.6, **_STYLE.get(mode, {"label": mode}))
    plob = sorted({(r.distance_km, r.plob_bound) for r in rows})
    xs, ys = _positive([p[0] for p in plob], [p[1] for p in plob])
    if xs:
        ax.semilogy(xs, ys, color="0.4", lw=1.0, ls=(0, (1, 2)), label="PLOB bound")
    ax.set_xlabel("Alice-Bob distance (km)")
    ax.set_ylabel("secret key rate (bits/pulse)")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, which="major", alpha=0.3)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_mu_vs_distance(rows, path):
    """Chosen code intensity per mode."""
    fig, ax = plt.subplots(figsize=(6.4, 3.2))
    for mode in dict.fromkeys(r.mode for r in rows):
        pts = sorted((r.distance_km, r.mu) for r in rows if r.mode == mode and r.skr > 0)
        if pts:
            style = dict(_STYLE.get(mode, {"label": mode}))
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", lw=1.0, **style)
    ax.set_xlabel("Alice-Bob distance (km)")
    ax.set_ylabel(r"code intensity $\mu$")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
