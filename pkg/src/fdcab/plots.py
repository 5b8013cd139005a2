"""Static figures for sweep results, written next to the CSV output."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import SweepResult  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}


def _ok(rows: Sequence[SweepResult]) -> list[SweepResult]:
    return [r for r in rows if not r.error]


def plot_block_length(rows: Sequence[SweepResult], path: str | Path) -> Path:
    """Training fraction vs block length, exact and closed form, CAB and HD."""
    rows = _ok(rows)
    T = [r.T for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        ax.semilogx(T, [r.frac_cab_exact for r in rows], "o-", label="CAB, brute force")
        ax.semilogx(T, [r.frac_cab_approx for r in rows], "--", label="CAB, closed form")
        ax.semilogx(T, [r.frac_hd_exact for r in rows], "s-", label="HD, brute force")
        ax.semilogx(T, [r.frac_hd_approx for r in rows], ":", label="HD, closed form")
        ax.set_xlabel("block length T (symbols)")
        ax.set_ylabel("training fraction t*/T")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_snr(rows: Sequence[SweepResult], path: str | Path) -> Path:
    """Three panels: training fraction, spectral efficiency and CAB gain vs SNR."""
    rows = _ok(rows)
    snr = [r.snr_db for r in rows]
    with plt.rc_context(STYLE):
        fig, (a0, a1, a2) = plt.subplots(1, 3, figsize=(10.0, 3.0))
        a0.plot(snr, [r.frac_cab_exact for r in rows], "o-", label="CAB")
        a0.plot(snr, [r.frac_hd_exact for r in rows], "s-", label="HD")
        a0.set_ylabel("training fraction t*/T")

        a1.plot(snr, [r.ar_genie for r in rows], "k-", label="genie")
        a1.plot(snr, [r.ar_cab_opt for r in rows], "o-", label="optimal CAB")
        a1.plot(snr, [r.ar_cab_at_t_hd for r in rows], "^--", label="CAB, T = T*_HD")
        a1.plot(snr, [r.ar_hd_opt for r in rows], "s-", label="HD")
        a1.set_ylabel("bits/s/Hz per user")

        a2.plot(snr, [r.gain_pct for r in rows], "o-", label="optimal CAB")
        a2.plot(snr, [r.gain_pct_at_t_hd for r in rows], "^--", label="CAB, T = T*_HD")
        a2.set_ylabel("gain over HD (%)")
        for ax in (a0, a1, a2):
            ax.set_xlabel("SNR (dB)")
            ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)
