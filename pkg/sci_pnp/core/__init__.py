"""Core SCI forward model: data types and linear operators."""

from .operators import (
    INIT_EPS,
    adjoint_h,
    adjoint_tm,
    apply_h,
    apply_tm,
    cfa_sampling_mask,
    deinterleave,
    encode,
    gram_diag,
    init_estimate,
    interleave,
    mosaic,
    mosaic_adjoint,
    sampling_indicator,
)
from .types import CfaOperator, MaskStack, Measurement, NoiseRecord, VideoCube

__all__ = [
    "VideoCube",
    "MaskStack",
    "Measurement",
    "NoiseRecord",
    "CfaOperator",
    "INIT_EPS",
    "encode",
    "apply_h",
    "adjoint_h",
    "gram_diag",
    "mosaic",
    "mosaic_adjoint",
    "interleave",
    "deinterleave",
    "init_estimate",
    "apply_tm",
    "adjoint_tm",
    "sampling_indicator",
    "cfa_sampling_mask",
]
