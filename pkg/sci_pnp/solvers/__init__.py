"""GAP baseline and two-stage PnP-ADMM solvers."""

from .admm import (
    TwoStageADMM,
    denoiser_input,
    measurement_residual,
    q_update,
    two_stage_admm,
    u_update,
    v_update,
    w_update,
    x_update_closed,
    x_update_demosaic,
)
from .gap import gap_iterations, gap_project, gap_solve, naive_color_pipeline, resolve_cfa
from .schedules import BUILTIN_SCHEDULES, DEFAULT_SCHEDULE, get_schedule, load_schedules
from .state import (
    IterationRecord,
    ProgressUpdate,
    Schedule,
    SchedulePhase,
    SolveResult,
    SolverConfig,
    SolverState,
)

__all__ = [
    "SolverState",
    "SolverConfig",
    "Schedule",
    "SchedulePhase",
    "IterationRecord",
    "ProgressUpdate",
    "SolveResult",
    "q_update",
    "u_update",
    "x_update_closed",
    "x_update_demosaic",
    "v_update",
    "w_update",
    "denoiser_input",
    "measurement_residual",
    "TwoStageADMM",
    "two_stage_admm",
    "gap_solve",
    "gap_project",
    "gap_iterations",
    "naive_color_pipeline",
    "resolve_cfa",
    "BUILTIN_SCHEDULES",
    "DEFAULT_SCHEDULE",
    "load_schedules",
    "get_schedule",
]
