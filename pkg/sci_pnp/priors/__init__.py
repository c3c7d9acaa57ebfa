"""Pluggable denoising and demosaicing priors."""

from .base import DdnetSpec, Demosaicer, Denoiser, DenoiserSpec, TrainablePrior
from .cnn_denoiser import CnnDenoiser, cnn_backward, cnn_forward
from .convnet import ConvLayer, PriorParams, init_params
from .ddnet import DdnetDemosaicer, ddnet_forward
from .demosaic import (
    BilinearDemosaicer,
    IdentityDemosaicer,
    MalvarDemosaicer,
    demosaic_bilinear,
    demosaic_malvar,
)
from .factory import create_demosaicer, create_denoiser, create_priors_from_config
from .training import TrainingLog, train_demosaic, train_denoiser
from .tv import IdentityDenoiser, TvDenoiser, total_variation, tv_denoise, tv_energy

__all__ = [
    "Denoiser",
    "Demosaicer",
    "TrainablePrior",
    "DenoiserSpec",
    "DdnetSpec",
    "PriorParams",
    "ConvLayer",
    "init_params",
    "tv_denoise",
    "tv_energy",
    "total_variation",
    "TvDenoiser",
    "IdentityDenoiser",
    "cnn_forward",
    "cnn_backward",
    "CnnDenoiser",
    "demosaic_bilinear",
    "demosaic_malvar",
    "IdentityDemosaicer",
    "BilinearDemosaicer",
    "MalvarDemosaicer",
    "DdnetDemosaicer",
    "ddnet_forward",
    "train_demosaic",
    "train_denoiser",
    "TrainingLog",
    "create_denoiser",
    "create_demosaicer",
    "create_priors_from_config",
]
