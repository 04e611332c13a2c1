"""Figures of the energy ledger.  Files are rendered off-screen."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}


def plot_energy(ledger, path, title: str = "") -> Path:
    """``E(t)`` with its components against the Groenwall envelope."""
    t = ledger.column("t")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        ax.plot(t, ledger.column("groenwall_envelope"), "k--", label="Groenwall envelope")
        ax.plot(t, ledger.column("E_total"), color="C0", label="E total")
        ax.plot(t, ledger.column("E_kin_fluid"), color="C1", lw=0.8, label="fluid kinetic")
        ax.plot(t, ledger.column("Dissipation_cum"), color="C2", lw=0.8, label="dissipation")
        ax.plot(t, ledger.column("E_kin_shell") + ledger.column("E_koiter"), color="C3", lw=0.8,
                label="shell kinetic + Koiter")
        ax.set_xlabel("t")
        ax.set_ylabel("energy")
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        ax.grid(alpha=0.3)
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_continuation(levels, path) -> Path:
    """Energy of every regularization level against its envelope."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for i, lv in enumerate(levels):
            if lv.picard is None:
                continue
            led = lv.picard.solution.ledger
            c = f"C{i % 10}"
            ax.plot(led.column("t"), led.column("E_total"), color=c, label=f"eps = {lv.eps:.3g}")
            ax.plot(led.column("t"), led.column("groenwall_envelope"), color=c, ls="--", lw=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel("E (solid) and envelope (dashed)")
        ax.legend(loc="best", frameon=False)
        ax.grid(alpha=0.3)
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_picard(history, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        h = np.asarray(history, dtype=float)
        ax.semilogy(np.arange(1, h.size + 1), np.maximum(h, 1e-300), "o-")
        ax.set_xlabel("fixed-point iteration")
        ax.set_ylabel("iterate difference")
        ax.grid(alpha=0.3, which="both")
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path
