"""Semidefinite programs: containers, the reference solver and SDPA I/O."""

from __future__ import annotations

from typing import Callable

from .ipm import reference_ipm
from .problem import SdpProblem, SdpSolution, SolverSettings, Status
from .sdpa import export_sdpa, import_sdpa, parse_sdpa

SolverFn = Callable[[SdpProblem, SolverSettings], SdpSolution]

UNBOUNDED_DIAGNOSTIC = (
    "relaxation admits every Gamma: critical variety may be empty "
    "or I_d contains 1 at this degree"
)


def solve(sdp: SdpProblem, settings: SolverSettings | None = None,
          solver: SolverFn | None = None) -> SdpSolution:
    """Solve ``sdp`` with ``solver`` (the reference interior-point method by default)."""
    settings = settings or SolverSettings()
    sol = (solver or reference_ipm)(sdp, settings)
    if sol.status is Status.UNBOUNDED and UNBOUNDED_DIAGNOSTIC not in sol.message:
        sol.message = f"{sol.message}; {UNBOUNDED_DIAGNOSTIC}" if sol.message else UNBOUNDED_DIAGNOSTIC
    return sol


__all__ = [
    "SdpProblem", "SdpSolution", "SolverSettings", "Status", "solve",
    "reference_ipm", "export_sdpa", "import_sdpa", "parse_sdpa", "UNBOUNDED_DIAGNOSTIC",
]
