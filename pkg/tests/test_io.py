"""Tensor files, frame export and synthetic scenes."""

from __future__ import annotations

import json

import numpy as np
import pytest

from sci_pnp.core import MaskStack, VideoCube, encode
from sci_pnp.errors import CfaError, CorruptFileError, MissingFileError, MissingMasksError
from sci_pnp.io import (
    SQUARE_VELOCITY,
    export_frames,
    gen_synthetic,
    load_checkpoint,
    load_cube,
    load_frames,
    load_masks,
    load_measurements,
    masks_official,
    read_tensor,
    save_checkpoint,
    save_cube,
    save_masks,
    save_measurements,
    tensor_paths,
    write_tensor,
)
from sci_pnp.priors import init_params


def as_f32(a: np.ndarray) -> np.ndarray:
    return a.astype(np.float32).astype(np.float64)


# ==================== 张量文件 ====================


def test_cube_round_trip_is_bit_exact(tmp_path, rng):
    cube = VideoCube(as_f32(rng.random((3, 3, 4, 6))), {"kind": "test"})
    payload = save_cube(tmp_path / "cube", cube)
    assert payload.name == "cube.bin"
    loaded = load_cube(tmp_path / "cube.json")
    np.testing.assert_array_equal(loaded.data, cube.data)
    assert loaded.meta == {"kind": "test"}

    header = json.loads((tmp_path / "cube.json").read_text(encoding="utf-8"))
    assert header["shape"] == [3, 3, 4, 6]
    assert header["cfa"] == "rggb"
    assert header["B"] == 3


def test_payload_is_little_endian_float32(tmp_path):
    write_tensor(tmp_path / "t", np.array([1.0, -2.5]), "cube")
    assert (tmp_path / "t.bin").read_bytes() == np.array([1.0, -2.5], dtype="<f4").tobytes()


def test_truncated_payload_is_corrupt(tmp_path, rng):
    save_cube(tmp_path / "cube", VideoCube(rng.random((2, 1, 4, 4))))
    payload, _ = tensor_paths(tmp_path / "cube")
    payload.write_bytes(payload.read_bytes()[:-4])
    with pytest.raises(CorruptFileError):
        load_cube(tmp_path / "cube")


def test_sidecar_errors(tmp_path, rng):
    save_cube(tmp_path / "cube", VideoCube(rng.random((2, 1, 4, 4))))
    _, sidecar = tensor_paths(tmp_path / "cube")

    with pytest.raises(CorruptFileError):
        read_tensor(tmp_path / "cube", expected_kind="mask")

    header = json.loads(sidecar.read_text(encoding="utf-8"))
    header["kind"] = "volume"
    sidecar.write_text(json.dumps(header), encoding="utf-8")
    with pytest.raises(CorruptFileError):
        load_cube(tmp_path / "cube")

    sidecar.write_text("{not json", encoding="utf-8")
    with pytest.raises(CorruptFileError):
        load_cube(tmp_path / "cube")

    with pytest.raises(MissingFileError):
        load_cube(tmp_path / "absent")


def test_masks_round_trip_and_official_flag(tmp_path, rng):
    masks = MaskStack(as_f32(rng.random((4, 8, 8))))
    save_masks(tmp_path / "masks", masks, official=True)
    loaded = load_masks(tmp_path / "masks")
    np.testing.assert_array_equal(loaded.data, masks.data)
    assert loaded.digest() == masks.digest()
    assert masks_official(tmp_path / "masks")


def test_missing_masks_error(tmp_path):
    with pytest.raises(MissingMasksError) as excinfo:
        load_masks(tmp_path / "masks")
    assert excinfo.value.code == "E_MISSING_MASKS"


def test_measurement_stack(tmp_path, gray_instance, color_instance):
    truth, masks, y = gray_instance
    second = encode(truth, masks, noise_std=0.01, seed=1)
    save_measurements(tmp_path / "meas", [y, y], extra={"scene": "s"})
    loaded = load_measurements(tmp_path / "meas")
    assert len(loaded) == 2
    np.testing.assert_array_equal(loaded[0].data, as_f32(y.data))
    assert loaded[0].mask_digest == masks.digest()
    assert not loaded[0].bayer

    save_measurements(tmp_path / "noisy", second)
    (one,) = load_measurements(tmp_path / "noisy")
    assert one.noise.std == 0.01

    _, _, cy, _ = color_instance
    save_measurements(tmp_path / "color", cy)
    assert load_measurements(tmp_path / "color")[0].bayer


def test_checkpoint_round_trip(tmp_path):
    fusion = init_params(12, 3, width=4, depth=2, seed=1, zero_last=False, name="fusion")
    refine = init_params(6, 3, width=4, depth=2, seed=2, zero_last=False, name="refine")
    refine.step = 7
    save_checkpoint(tmp_path / "ddnet", [fusion, refine], extras={"steps": 7})
    networks, extras = load_checkpoint(tmp_path / "ddnet")
    assert set(networks) == {"fusion", "refine"}
    assert extras == {"steps": 7}
    assert networks["refine"].step == 7
    for a, b in zip(refine.arrays(), networks["refine"].arrays()):
        np.testing.assert_array_equal(b, as_f32(a))
    assert [layer.activation for layer in networks["fusion"].layers] == [
        layer.activation for layer in fusion.layers
    ]


# ==================== 帧导出 ====================


@pytest.mark.parametrize(("channels", "fmt", "suffix"), [(1, "png", ".png"), (3, "png", ".png"), (1, "pgm", ".pgm"), (3, "pgm", ".ppm")])
def test_frame_export_within_one_level(tmp_path, rng, channels, fmt, suffix):
    cube = VideoCube(rng.random((2, channels, 6, 8)))
    paths = export_frames(cube, tmp_path, prefix="recon", fmt=fmt)
    assert [p.name for p in paths] == [f"recon_000{suffix}", f"recon_001{suffix}"]
    loaded = load_frames(paths)
    assert loaded.data.shape == cube.data.shape
    assert np.max(np.abs(loaded.data - cube.data)) <= 1.0 / 255.0


def test_load_frames_missing(tmp_path):
    with pytest.raises(MissingFileError):
        load_frames([tmp_path / "nope.png"])


# ==================== 合成场景 ====================


@pytest.mark.parametrize("kind", ["moving_square", "texture_pan", "color_orbits"])
def test_synthetic_is_deterministic(kind):
    a = gen_synthetic(kind, 32, 32, 4, seed=11)
    b = gen_synthetic(kind, 32, 32, 4, seed=11)
    np.testing.assert_array_equal(a.data, b.data)
    assert a.data.min() >= 0.0 and a.data.max() <= 1.0


def test_moving_square_moves_at_fixed_velocity():
    cube = gen_synthetic("moving_square", 64, 64, 8, seed=5)
    y0, x0 = cube.meta["start"]
    size = cube.meta["size"]
    for b in range(8):
        top, left = y0 + b * SQUARE_VELOCITY[0], x0 + b * SQUARE_VELOCITY[1]
        rows, cols = np.nonzero(cube.data[b, 0] > 0.5)
        assert (rows.min(), cols.min()) == (top, left)
        assert (rows.max() - rows.min() + 1, cols.max() - cols.min() + 1) == (size, size)


def test_color_orbits_disc_energy():
    cube = gen_synthetic("color_orbits", 64, 64, 4, seed=0)
    radius = cube.meta["radius"]
    assert cube.channels == 3
    for b in range(4):
        for c in range(3):
            assert np.sum(cube.data[b, c]) == pytest.approx(np.pi * radius**2, rel=0.1)


def test_color_scene_needs_even_dims():
    with pytest.raises(CfaError):
        gen_synthetic("texture_pan", 33, 32, 4, channels=3)
    with pytest.raises(ValueError):
        gen_synthetic("spiral", 32, 32, 4)
