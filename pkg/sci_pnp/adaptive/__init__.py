"""Online-adaptive PnP and sequential warm reuse."""

from .online import (
    AdaptivePnP,
    AdaptiveSolveResult,
    OnlineConfig,
    OnlineStepResult,
    UpdateEvent,
    adaptive_solve,
    loss_gradient,
    online_loss,
    online_step,
)
from .sequential import next_interval, sequential_solve

__all__ = [
    "OnlineConfig",
    "OnlineStepResult",
    "UpdateEvent",
    "AdaptivePnP",
    "AdaptiveSolveResult",
    "online_loss",
    "loss_gradient",
    "online_step",
    "adaptive_solve",
    "sequential_solve",
    "next_interval",
]
