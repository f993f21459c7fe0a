"""Deterministic matplotlib rendering of the six experiment figures."""

from __future__ import annotations

import argparse
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .data import SPECS, extract_figure_data

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.35,
    "font.size": 9,
    "lines.linewidth": 1.4,
}

MARKERS = ("o", "s", "^", "d", "v")


def render(figure: str, in_dir: str, out_path: str) -> dict:
    """Draw one figure from harness CSV outputs; returns the plotted data."""
    data = extract_figure_data(figure, in_dir)  # raises before any file is written
    with plt.rc_context(STYLE):
        fig = _draw(figure, data)
        os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
        fig.savefig(out_path)
        plt.close(fig)
    return data


def _draw(figure: str, data: dict):
    if figure == "fig3":
        fig, ax = plt.subplots()
        for i, s in enumerate(data["selected_slots"]):
            ax.plot(data[f"slot{s}_iteration"], data[f"slot{s}_tau3_j"],
                    marker=MARKERS[i % len(MARKERS)], label=f"slot {s}")
        ax.set_xlabel("iteration")
        ax.set_ylabel("per-slot energy [J]")
        ax.legend()
        return fig

    if figure == "fig4":
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10.5, 4.2))
        for task, style in (("task1", "-o"), ("task2", "--s")):
            ax1.plot(data[f"{task}_x_m"], data[f"{task}_y_m"], style,
                     markersize=3, label=task)
        gu = np.asarray(data["gu_xy_m"])
        eve = np.asarray(data["eve_xy_m"])
        mec = np.asarray(data["mec_xy_m"])
        ax1.scatter(gu[:, 0], gu[:, 1], marker="^", s=60, label="users")
        ax1.scatter(eve[:, 0], eve[:, 1], marker="x", s=60, label="eavesdroppers")
        ax1.scatter([mec[0]], [mec[1]], marker="*", s=90, label="ground MEC")
        ax1.annotate("start", data["start_xy_m"])
        ax1.annotate("final", data["final_xy_m"])
        ax1.set_xlabel("x [m]")
        ax1.set_ylabel("y [m]")
        ax1.legend(fontsize=7)
        for task, style in (("task1", "-o"), ("task2", "--s")):
            ax2.plot(data[f"{task}_slot"][1:], data[f"{task}_speed_mps"][1:], style,
                     markersize=3, label=task)
        ax2.set_xlabel("slot")
        ax2.set_ylabel("speed [m/s]")
        ax2.legend()
        return fig

    if figure == "fig5":
        fig, ax = plt.subplots()
        for i, nt in enumerate(data["antenna_counts"]):
            ax.plot(data[f"nt{nt}_task_bits"], data[f"nt{nt}_total_j"],
                    marker=MARKERS[i % len(MARKERS)], label=f"{nt} antennas")
        ax.set_xlabel("task bits per user")
        ax.set_ylabel("total energy [J]")
        ax.legend()
        return fig

    if figure == "fig6":
        fig, ax = plt.subplots()
        ax.plot(data["task_bits"], data["proposed_j"], "-o", label="proposed")
        ax.plot(data["task_bits"], data["fixed_schedule_j"], "--s", label="fixed schedule")
        ax.set_xlabel("task bits per user")
        ax.set_ylabel("total energy [J]")
        ax.legend()
        return fig

    if figure == "fig7":
        fig, ax = plt.subplots()
        scales = data["err_scales"]
        x = np.arange(len(scales))
        width = 0.38
        ax.bar(x - width / 2, data["robust_ratio"], width, label="robust")
        ax.bar(x + width / 2, data["non-robust_ratio"], width, label="non-robust")
        ax.set_xticks(x, [f"{s:.0e}" for s in scales])
        ax.set_xlabel("error-ellipsoid scale")
        ax.set_ylabel("task finished ratio")
        ax.set_ylim(0, 1.05)
        ax.legend()
        return fig

    if figure == "fig8":
        fig, ax = plt.subplots()
        ax.plot(data["task_bits"], data["proposed_j"], "-o", label="proposed")
        ax.plot(data["task_bits"], data["ao_j"], "--s", label="alternating")
        ax.set_xlabel("task bits per user")
        ax.set_ylabel("total energy [J]")
        ax2 = ax.twinx()
        ax2.plot(data["task_bits"], data["energy_gain"], ":d", color="tab:green",
                 label="energy gain")
        ax2.set_ylabel("energy consumption gain")
        ax.legend(loc="upper left")
        ax2.legend(loc="lower right")
        return fig

    raise ValueError(f"unknown figure {figure!r}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="aeromec-render",
                                 description="regenerate experiment figures from CSV outputs")
    ap.add_argument("--figure", required=True, choices=sorted(SPECS))
    ap.add_argument("--in", dest="in_dir", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        render(args.figure, args.in_dir, args.out)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
