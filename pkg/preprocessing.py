"""
Batch post-processing of finished runs.

Scans a directory of run folders (each holding an invariants.csv) and
collects one summary row per run into a single CSV, the input of the
comparison tables.
"""

import glob
import logging
import os

import pandas as pd

from src.data_processing import load_invariants, summarize_run

# --- CONFIGURATION ---
RUNS_PATH = "runs"
OUTPUT_FILE = os.path.join(RUNS_PATH, "summary.csv")

logger = logging.getLogger(__name__)


def summarize_runs(runs_path=RUNS_PATH, output_file=OUTPUT_FILE):
    csv_files = sorted(glob.glob(os.path.join(runs_path, "*", "invariants.csv")))
    logger.info("Found %d run(s) under %s", len(csv_files), runs_path)

    rows = []
    for file in csv_files:
        run_name = os.path.basename(os.path.dirname(file))
        try:
            summary = summarize_run(load_invariants(file))
        except (OSError, ValueError, pd.errors.ParserError) as e:
            # a half-written run should not stop the batch
            logger.warning("Skipping %s: %s", run_name, e)
            continue
        rows.append({"run": run_name, **summary})
        logger.info("%s: %d steps, energy drift %.3e", run_name, summary["n_steps"], summary["max_total_energy_drift"])

    if not rows:
        logger.error("No readable run found under %s", runs_path)
        return None

    df = pd.DataFrame(rows)
    df.to_csv(output_file, index=False)
    logger.info("Summary written to %s", output_file)
    return df


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    summarize_runs()
