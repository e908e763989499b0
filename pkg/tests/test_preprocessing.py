import pandas as pd

from preprocessing import summarize_runs
from src.diagnostics_io import INVARIANT_COLUMNS


def _write_run(root, name, energies):
    run_dir = root / name
    run_dir.mkdir()
    n = len(energies)
    df = pd.DataFrame({col: [0.0] * n for col in INVARIANT_COLUMNS})
    df["time"] = [0.01 * k for k in range(n)]
    df["total_mass"] = 1.0
    df["total_energy"] = energies
    df["picard_iterations"] = [0] + [4] * (n - 1)
    df.to_csv(run_dir / "invariants.csv", index=False)


def test_summarize_runs(tmp_path):
    _write_run(tmp_path, "a", [2.0, 2.0, 2.0 + 2e-10])
    _write_run(tmp_path, "b", [1.0, 1.0])
    broken = tmp_path / "c"
    broken.mkdir()
    (broken / "invariants.csv").write_text("time,total_mass\n0.0,1.0\n")

    out = tmp_path / "summary.csv"
    df = summarize_runs(str(tmp_path), str(out))
    assert list(df["run"]) == ["a", "b"]
    assert list(df["n_steps"]) == [2, 1]
    assert df["max_total_energy_drift"].iloc[0] > 0
    assert out.is_file()


def test_no_runs(tmp_path):
    assert summarize_runs(str(tmp_path), str(tmp_path / "summary.csv")) is None
