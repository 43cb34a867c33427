"""Figure rendering for the report path.

Every curve-producing command writes its delimited data first and then an
accompanying PNG next to it; these helpers hold the small amount of
matplotlib plumbing needed for that.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _new_axes(xlabel: str, ylabel: str, title: str):
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.35)
    return fig, ax


def save_ber_figure(points, path, x_axis: str = "snr_d_db"):
    """Semilog BER curves grouped by scheme; ``x_axis`` picks the swept
    SNR field of the points."""
    fig, ax = _new_axes(f"{x_axis.replace('_db', '').replace('_', ' ').upper()} (dB)", "BER", "BER vs SNR")
    schemes = sorted({p.scheme for p in points})
    for scheme in schemes:
        pts = sorted((p for p in points if p.scheme == scheme), key=lambda p: getattr(p, x_axis))
        xs = [getattr(p, x_axis) for p in pts]
        ys = [max(p.ber, 1e-12) for p in pts]
        ax.semilogy(xs, ys, marker="o", label=scheme)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_fig2_figure(traces: dict, path):
    """Per-index transmit SNR traces of the naive-cancellation demo."""
    fig, ax = _new_axes("time index", "average transmit SNR (dB)", "Naive cancellation noise build-up")
    for label, trace in traces.items():
        trace = np.asarray(trace, dtype=float)
        idx = np.arange(trace.size)
        ok = np.isfinite(trace)
        ax.plot(idx[ok], trace[ok], marker="o", label=label)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_diversity_figure(points, slopes: dict, path):
    """Diagonal-sweep BER curves with fitted slopes in the legend."""
    fig, ax = _new_axes("gamma (dB)", "BER", "Diversity comparison")
    schemes = sorted({p.scheme for p in points})
    for scheme in schemes:
        pts = sorted((p for p in points if p.scheme == scheme), key=lambda p: p.snr_d_db)
        xs = [p.snr_d_db for p in pts]
        ys = [max(p.ber, 1e-12) for p in pts]
        label = scheme if scheme not in slopes else f"{scheme} (slope {slopes[scheme]:.2f})"
        ax.semilogy(xs, ys, marker="o", label=label)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
