import logging
from functools import lru_cache

import numpy as np
import pandas as pd

from .diagnostics_io import INVARIANT_COLUMNS

logger = logging.getLogger(__name__)

CONSERVED = ["total_mass", "total_entropy", "total_energy"]


# Cache the last few runs; report generation reads the same CSV several times
@lru_cache(maxsize=4)
def load_invariants(filepath="runs/latest/invariants.csv"):
    """
    Loads an invariants CSV written by a run.
    Columns are reordered to the canonical order; unknown columns are dropped.
    """
    df = pd.read_csv(filepath)
    missing = [c for c in INVARIANT_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{filepath}: missing columns {missing}")
    return df[INVARIANT_COLUMNS]


def compute_drift(df):
    """
    Drift of every conserved quantity relative to its initial value.
    Absolute drift is used where the initial value is zero (entropy of barotropic runs).
    """
    out = pd.DataFrame({"time": df["time"]})
    for col in CONSERVED:
        start = df[col].iloc[0]
        delta = df[col] - start
        out[col] = delta / abs(start) if start != 0 else delta
    out["div_B_l2"] = df["div_B_l2"]
    return out


def summarize_run(df):
    """Largest drifts and solver effort over a run, as a flat dict."""
    drift = compute_drift(df)
    summary = {f"max_{col}_drift": float(np.max(np.abs(drift[col]))) for col in CONSERVED}
    summary["max_div_B_l2"] = float(df["div_B_l2"].max())
    summary["n_steps"] = int(len(df) - 1)
    summary["t_final"] = float(df["time"].iloc[-1])
    steps = df["picard_iterations"].iloc[1:]
    summary["mean_picard_iterations"] = float(steps.mean()) if len(steps) else 0.0
    return summary


def convergence_table(reports):
    """
    One row per (degree, grid) with per-field errors and observed orders.
    Missing orders (first grid, vanishing errors) are left as NaN.
    """
    rows = []
    for report in reports:
        for i, h in enumerate(report.h):
            row = {"degree": report.degree, "h": h}
            for name, errors in report.errors.items():
                row[f"error_{name}"] = errors[i]
                order = report.orders[name][i]
                row[f"order_{name}"] = np.nan if order is None else order
            rows.append(row)
    return pd.DataFrame(rows)
