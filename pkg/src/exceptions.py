"""
Error hierarchy shared by every module of the solver.
"""


class FeecMhdError(Exception):
    """Base class for all solver errors."""


class SpaceError(FeecMhdError, ValueError):
    """Invalid space construction or a field tagged with the wrong space."""


class PositivityError(FeecMhdError, ArithmeticError):
    """Positivity loss: a density (or EOS argument) became non-positive."""

    def __init__(self, where: str, minimum: float):
        self.where = where
        self.minimum = float(minimum)
        super().__init__(f"positivity loss in {where}: min value {self.minimum:.6e}")


class ConvergenceError(FeecMhdError, RuntimeError):
    """The nonlinear (Picard) iteration did not reach its tolerance."""

    def __init__(self, message: str, residual_history=None, step_index: int | None = None):
        self.residual_history = list(residual_history or [])
        self.step_index = step_index
        super().__init__(message)


class LinearSolveError(FeecMhdError, RuntimeError):
    """A Krylov solve stopped before reaching its tolerance."""

    def __init__(self, message: str, info: int = 0):
        self.info = info
        super().__init__(message)


class AssemblyBudgetExceeded(FeecMhdError, MemoryError):
    """Assembled operator would not fit in the memory budget; use matrix-free."""

    def __init__(self, n_dofs: int, budget_bytes: int):
        self.n_dofs = n_dofs
        self.budget_bytes = budget_bytes
        super().__init__(
            f"assembling a {n_dofs}x{n_dofs} operator needs "
            f"{8 * n_dofs * n_dofs / 2**20:.1f} MiB, budget is {budget_bytes / 2**20:.1f} MiB"
        )


class ScenarioError(FeecMhdError, KeyError):
    """Unknown scenario identifier."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown scenario"


class OutputError(FeecMhdError, OSError):
    """Writing or reading an output file failed."""

    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")
