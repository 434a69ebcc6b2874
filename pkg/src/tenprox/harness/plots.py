"""Convergence figures for completion runs."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "TISTA": ("tab:blue", "-"), "TISTA-TET": ("tab:blue", "--"), "TISTA-HM": ("tab:blue", ":"),
    "TDPG": ("tab:red", "-"), "TDPG-TET": ("tab:red", "--"), "TDPG-HM": ("tab:red", ":"),
}


def _curve_axes(records, column, ylabel, path, logy=False):
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for r in records:
        if not r.curve:
            continue
        xs = [c[0] for c in r.curve]
        ys = [c[column] for c in r.curve]
        color, ls = STYLE.get(r.algorithm, (None, "-"))
        ax.plot(xs, ys, color=color, linestyle=ls, marker="." if r.cycles else None,
                label=r.algorithm)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("base iterations")
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _speedup(records, path):
    plain = {r.algorithm: r.outer_iters for r in records if "-" not in r.algorithm}
    names, ratios = [], []
    for r in records:
        fam = r.algorithm.split("-")[0]
        if "-" in r.algorithm and plain.get(fam):
            names.append(r.algorithm)
            ratios.append(r.outer_iters / plain[fam])
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if names:
        ax.bar(names, ratios, color=[STYLE.get(n, ("gray",))[0] for n in names])
    ax.axhline(1.0, color="k", lw=0.8)
    ax.axhline(0.75, color="k", lw=0.8, ls="--")
    ax.set_ylabel("base iterations / plain")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_records(records, out_dir, stem="completion"):
    """Write relative-error, PSNR and speedup figures; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ok = [r for r in records if r.status != "diverged"]
    return [
        _curve_axes(ok, 1, "relative error", out_dir / f"{stem}_relerr.png", logy=True),
        _curve_axes(ok, 2, "PSNR (dB)", out_dir / f"{stem}_psnr.png"),
        _speedup(ok, out_dir / f"{stem}_speedup.png"),
    ]
