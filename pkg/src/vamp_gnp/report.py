"""Figure rendering for sweep results."""

from __future__ import annotations

from pathlib import Path

from matplotlib.figure import Figure

_LABELS = {
    "gnp": "noise-prior VAMP",
    "standard": "standard VAMP",
}
_MARKERS = {"gnp": "o", "standard": "s"}


def render_nrmse_figure(aggregates, path, noise_model: str = "") -> Path:
    """Plot mean NRMSE against SNR, one line per algorithm, and save it.

    Uses an explicit Figure object (no pyplot state), so it is safe to call
    from library code and threads.
    """
    path = Path(path)
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.subplots()
    algorithms = sorted({a.algorithm for a in aggregates})
    for algorithm in algorithms:
        rows = sorted(
            (a for a in aggregates if a.algorithm == algorithm),
            key=lambda a: a.snr_db,
        )
        ax.errorbar(
            [a.snr_db for a in rows],
            [a.mean_nrmse for a in rows],
            yerr=[a.stderr_nrmse for a in rows],
            marker=_MARKERS.get(algorithm, "d"),
            capsize=3,
            label=_LABELS.get(algorithm, algorithm),
        )
    ax.set_yscale("log")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("mean NRMSE")
    if noise_model:
        ax.set_title(f"{noise_model} measurement noise")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    return path
