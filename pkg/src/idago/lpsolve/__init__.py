"""LP/MILP solving: native bounded simplex and branch-and-bound, HiGHS for large models."""

from .core import LpSolution, SolveBudget, SolveStats, Status, solve_lp, solve_milp
from .lpfile import PartialAssignment, export_lp_file, export_solution, import_solution, read_lp_file

__all__ = [
    "LpSolution", "SolveBudget", "SolveStats", "Status", "solve_lp", "solve_milp",
    "PartialAssignment", "export_lp_file", "export_solution", "import_solution", "read_lp_file",
]
