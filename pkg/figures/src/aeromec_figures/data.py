"""CSV readers turning planner/harness outputs into plottable arrays.

Every series a figure draws is listed here by the CSV column it comes
from; rendering consumes only these dictionaries, which is also what the
golden tests pin.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field


class MissingColumnError(KeyError):
    """A required CSV column is absent from an input file."""


@dataclass(frozen=True)
class FigureSpec:
    figure: str
    inputs: tuple[str, ...]  # file names expected under the input directory
    xlabel: str
    ylabel: str
    series_from: dict = field(default_factory=dict)  # series name -> column

    def missing_inputs(self, in_dir: str) -> list[str]:
        return [f for f in self.inputs if not os.path.exists(os.path.join(in_dir, f))]


SPECS = {
    "fig3": FigureSpec("fig3", ("trace.csv",), "iteration", "per-slot energy [J]",
                       {"trace": "tau3_j"}),
    "fig4": FigureSpec("fig4", ("task1/trajectory.csv", "task2/trajectory.csv",
                                "task1/manifest.json"),
                       "x [m]", "y [m]", {"path": "x_m,y_m", "speed": "speed_mps"}),
    "fig5": FigureSpec("fig5", ("report.csv",), "task bits per user",
                       "total energy [J]", {"energy": "total_weighted_j"}),
    "fig6": FigureSpec("fig6", ("report.csv",), "task bits per user",
                       "total energy [J]",
                       {"proposed": "proposed_j", "fixed": "fixed_schedule_j"}),
    "fig7": FigureSpec("fig7", ("report.csv",), "error-ellipsoid scale",
                       "task finished ratio", {"ratio": "min_ratio"}),
    "fig8": FigureSpec("fig8", ("report.csv",), "task bits per user",
                       "total energy [J]",
                       {"proposed": "proposed_j", "ao": "ao_j", "gain": "energy_gain"}),
}

FIG3_SLOTS = (1, 5, 10, 15, 20)


def read_csv(path: str) -> dict[str, list]:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"empty CSV: {path}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"CSV has no data rows: {path}")
    out: dict[str, list] = {name: [] for name in reader.fieldnames}
    for row in rows:
        for name in reader.fieldnames:
            val = row[name]
            try:
                out[name].append(float(val))
            except (TypeError, ValueError):
                out[name].append(val)
    return out


def column(table: dict[str, list], name: str, path: str = "") -> list:
    if name not in table:
        raise MissingColumnError(f"column {name!r} missing from {path or 'input'}")
    return table[name]


def extract_figure_data(figure: str, in_dir: str) -> dict:
    """Arrays for one figure, keyed by series label."""
    if figure not in SPECS:
        raise ValueError(f"unknown figure {figure!r}; known: {sorted(SPECS)}")
    spec = SPECS[figure]
    missing = spec.missing_inputs(in_dir)
    if missing:
        raise FileNotFoundError(f"{figure}: missing inputs {missing} under {in_dir}")
    fn = {
        "fig3": _fig3, "fig4": _fig4, "fig5": _fig5,
        "fig6": _fig6, "fig7": _fig7, "fig8": _fig8,
    }[figure]
    return fn(in_dir)


def _fig3(in_dir: str) -> dict:
    path = os.path.join(in_dir, "trace.csv")
    t = read_csv(path)
    slots = column(t, "slot", path)
    iters = column(t, "iteration", path)
    tau = column(t, "tau3_j", path)
    available = sorted({int(s) for s in slots})
    selected = [s for s in FIG3_SLOTS if s in available] or available[:5]
    out: dict = {"selected_slots": selected}
    for s in selected:
        idx = [i for i, v in enumerate(slots) if int(v) == s]
        out[f"slot{s}_iteration"] = [iters[i] for i in idx]
        out[f"slot{s}_tau3_j"] = [tau[i] for i in idx]
    return out


def _fig4(in_dir: str) -> dict:
    out: dict = {}
    for task in ("task1", "task2"):
        path = os.path.join(in_dir, task, "trajectory.csv")
        t = read_csv(path)
        out[f"{task}_x_m"] = column(t, "x_m", path)
        out[f"{task}_y_m"] = column(t, "y_m", path)
        out[f"{task}_slot"] = column(t, "slot", path)
        out[f"{task}_speed_mps"] = column(t, "speed_mps", path)
    with open(os.path.join(in_dir, "task1", "manifest.json")) as fh:
        cfg = json.load(fh)["config"]
    out["gu_xy_m"] = cfg["gu_xy_m"]
    out["eve_xy_m"] = cfg["eve_xy_m"]
    out["mec_xy_m"] = cfg["mec_xy_m"]
    out["start_xy_m"] = cfg["q_start_m"]
    out["final_xy_m"] = cfg["q_final_m"]
    return out


def _fig5(in_dir: str) -> dict:
    path = os.path.join(in_dir, "report.csv")
    t = read_csv(path)
    bits = column(t, "value", path)
    total = column(t, "total_weighted_j", path)
    nts = column(t, "n_t", path)
    out: dict = {"antenna_counts": sorted({int(v) for v in nts})}
    for nt in out["antenna_counts"]:
        idx = [i for i, v in enumerate(nts) if int(v) == nt]
        out[f"nt{nt}_task_bits"] = [bits[i] for i in idx]
        out[f"nt{nt}_total_j"] = [total[i] for i in idx]
    return out


def _fig6(in_dir: str) -> dict:
    path = os.path.join(in_dir, "report.csv")
    t = read_csv(path)
    return {
        "task_bits": column(t, "task_bits", path),
        "proposed_j": column(t, "proposed_j", path),
        "fixed_schedule_j": column(t, "fixed_schedule_j", path),
    }


def _fig7(in_dir: str) -> dict:
    path = os.path.join(in_dir, "report.csv")
    t = read_csv(path)
    scales = column(t, "err_scale", path)
    designs = column(t, "design", path)
    ratios = column(t, "min_ratio", path)
    out: dict = {"err_scales": sorted({float(s) for s in scales})}
    for d in ("robust", "non-robust"):
        idx = [i for i, v in enumerate(designs) if v == d]
        idx.sort(key=lambda i: float(scales[i]))
        out[f"{d}_ratio"] = [ratios[i] for i in idx]
    return out


def _fig8(in_dir: str) -> dict:
    path = os.path.join(in_dir, "report.csv")
    t = read_csv(path)
    return {
        "task_bits": column(t, "task_bits", path),
        "proposed_j": column(t, "proposed_j", path),
        "ao_j": column(t, "ao_j", path),
        "energy_gain": column(t, "energy_gain", path),
    }
