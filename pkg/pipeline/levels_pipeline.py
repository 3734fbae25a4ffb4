import numpy as np
import pandas as pd

from config.log_config import app_logger
from spinTransitions.tracking import track_levels

LEVEL_COLUMNS = ["B_T", "branch", "energy_GHz", "F", "mF", "purity", "branch_mS"]


def level_fields(field_range, grid):
    lo, hi = field_range
    if lo == hi:
        return np.array([float(lo)])
    return np.linspace(lo, hi, grid)


def build_levels_table(system, ops, field_range, grid, progress_callback=None) -> pd.DataFrame:
    """Adiabatically tracked energies and labels, one row per (field, branch)."""
    fields = level_fields(field_range, grid)
    sweep = track_levels(system, ops, fields, progress_callback=progress_callback, keep_labels=True)

    rows = []
    for index, B0 in enumerate(sweep.fields):
        for branch in range(sweep.n_branches):
            label = sweep.point_labels[index][branch]
            rows.append({
                "B_T": float(B0),
                "branch": branch,
                "energy_GHz": float(sweep.energies[index, branch]),
                "F": label.F,
                "mF": label.mF,
                "purity": label.purity,
                "branch_mS": label.branch_mS,
            })
    app_logger.info(f"Tracked {sweep.n_branches} branches over {len(fields)} field point(s)")
    return pd.DataFrame(rows, columns=LEVEL_COLUMNS)
