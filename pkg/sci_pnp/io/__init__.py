"""Tensor files, frame export and synthetic scenes."""

from .frames import export_frames, load_frames, to_uint8
from .synthetic import SCENE_KINDS, SQUARE_VELOCITY, gen_synthetic, make_masks
from .tensors import (
    load_checkpoint,
    load_cube,
    load_masks,
    load_measurement,
    load_measurements,
    masks_official,
    read_sidecar,
    read_tensor,
    save_checkpoint,
    save_cube,
    save_masks,
    save_measurements,
    tensor_paths,
    write_tensor,
)

__all__ = [
    "export_frames",
    "load_frames",
    "to_uint8",
    "SCENE_KINDS",
    "SQUARE_VELOCITY",
    "gen_synthetic",
    "make_masks",
    "load_checkpoint",
    "load_cube",
    "load_masks",
    "load_measurement",
    "load_measurements",
    "masks_official",
    "read_sidecar",
    "read_tensor",
    "save_checkpoint",
    "save_cube",
    "save_masks",
    "save_measurements",
    "tensor_paths",
    "write_tensor",
]
