"""Binary tensor files: little-endian float32 payload + JSON sidecar.

sidecar 至少包含 {"shape", "kind", "cfa", "B"}；payload 为 C 顺序。
文件名约定：<stem>.bin 与 <stem>.json。
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from sci_pnp.core.types import MaskStack, Measurement, NoiseRecord, VideoCube
from sci_pnp.errors import (
    CorruptFileError,
    MissingFileError,
    MissingMasksError,
    ShapeMismatchError,
)
from sci_pnp.priors.convnet import ConvLayer, PriorParams

logger = logging.getLogger(__name__)

PAYLOAD_DTYPE = np.dtype("<f4")
PAYLOAD_SUFFIX = ".bin"
SIDECAR_SUFFIX = ".json"
KINDS = ("cube", "mask", "measurement", "checkpoint")


def tensor_paths(path: str | Path) -> tuple[Path, Path]:
    """(payload, sidecar)；接受 stem、.bin 或 .json 路径"""
    path = Path(path)
    if path.suffix in (PAYLOAD_SUFFIX, SIDECAR_SUFFIX):
        path = path.with_suffix("")
    return path.with_name(path.name + PAYLOAD_SUFFIX), path.with_name(path.name + SIDECAR_SUFFIX)


def write_tensor(path: str | Path, array: np.ndarray, kind: str, meta: dict[str, Any] | None = None) -> Path:
    """写入 payload 与 sidecar，返回 payload 路径"""
    if kind not in KINDS:
        raise ValueError(f"未知张量类型: {kind}")
    payload, sidecar = tensor_paths(path)
    payload.parent.mkdir(parents=True, exist_ok=True)

    data = np.ascontiguousarray(array, dtype=PAYLOAD_DTYPE)
    header: dict[str, Any] = {"shape": list(data.shape), "kind": kind, "cfa": "none", "B": 1}
    header.update(meta or {})

    payload.write_bytes(data.tobytes(order="C"))
    sidecar.write_text(json.dumps(header, indent=2, ensure_ascii=False), encoding="utf-8")
    logger.debug("写入 %s %s -> %s", kind, data.shape, payload)
    return payload


def read_sidecar(path: str | Path) -> dict[str, Any]:
    _, sidecar = tensor_paths(path)
    if not sidecar.exists():
        raise MissingFileError(f"sidecar 不存在: {sidecar}")
    try:
        header = json.loads(sidecar.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CorruptFileError(f"sidecar 不是合法 JSON: {sidecar} ({e})") from e
    if not isinstance(header, dict) or "shape" not in header or "kind" not in header:
        raise CorruptFileError(f"sidecar 缺少 shape/kind: {sidecar}")
    if header["kind"] not in KINDS:
        raise CorruptFileError(f"未知张量类型 {header['kind']!r}: {sidecar}")
    return header


def read_tensor(path: str | Path, expected_kind: str | None = None) -> tuple[np.ndarray, dict[str, Any]]:
    """读取张量（float64），校验 shape 与字节数"""
    payload, _ = tensor_paths(path)
    header = read_sidecar(path)
    if expected_kind is not None and header["kind"] != expected_kind:
        raise CorruptFileError(f"期望 {expected_kind}，实际 {header['kind']}: {payload}")
    if not payload.exists():
        raise MissingFileError(f"payload 不存在: {payload}")

    try:
        shape = tuple(int(n) for n in header["shape"])
    except (TypeError, ValueError) as e:
        raise CorruptFileError(f"sidecar shape 非法: {header['shape']!r}") from e
    raw = payload.read_bytes()
    expected = int(np.prod(shape, dtype=np.int64)) * PAYLOAD_DTYPE.itemsize
    if len(raw) != expected:
        raise CorruptFileError(f"payload 字节数 {len(raw)} 与 shape {shape} 需要的 {expected} 不一致")
    data = np.frombuffer(raw, dtype=PAYLOAD_DTYPE).reshape(shape).astype(np.float64)
    return data, header


def _json_safe(meta: dict[str, Any]) -> dict[str, Any]:
    return json.loads(json.dumps(meta, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))


# ==================== Cube ====================


def save_cube(path: str | Path, cube: VideoCube) -> Path:
    return write_tensor(
        path,
        cube.data,
        "cube",
        {"cfa": "rggb" if cube.is_color else "none", "B": cube.frames, "meta": _json_safe(cube.meta)},
    )


def load_cube(path: str | Path) -> VideoCube:
    data, header = read_tensor(path, "cube")
    if data.ndim != 4:
        raise CorruptFileError(f"立方体需要 4 维，实际 {data.shape}")
    return VideoCube(data, dict(header.get("meta") or {}))


# ==================== Masks ====================


def save_masks(path: str | Path, masks: MaskStack, official: bool = False) -> Path:
    return write_tensor(
        path,
        masks.data,
        "mask",
        {"B": masks.frames, "official": official, "digest": masks.digest()},
    )


def load_masks(path: str | Path) -> MaskStack:
    payload, sidecar = tensor_paths(path)
    if not sidecar.exists() or not payload.exists():
        raise MissingMasksError(f"掩模文件不存在: {payload}")
    data, _ = read_tensor(path, "mask")
    if data.ndim != 3:
        raise CorruptFileError(f"掩模需要 (B, H, W)，实际 {data.shape}")
    return MaskStack(data)


def masks_official(path: str | Path) -> bool:
    return bool(read_sidecar(path).get("official", False))


# ==================== Measurement ====================


def save_measurements(
    path: str | Path,
    measurements: Measurement | list[Measurement],
    extra: dict[str, Any] | None = None,
) -> Path:
    """单个测量存为 (H, W)，多个存为 (M, H, W)"""
    items = measurements if isinstance(measurements, list) else [measurements]
    if not items:
        raise ValueError("没有可保存的测量")
    first = items[0]
    for m in items:
        if m.frame_shape != first.frame_shape or m.mask_digest != first.mask_digest:
            raise ShapeMismatchError("同一文件中的测量必须共享尺寸与掩模")
    data = first.data if len(items) == 1 else np.stack([m.data for m in items])
    meta: dict[str, Any] = {
        "cfa": "rggb" if first.bayer else "none",
        "bayer": first.bayer,
        "noise": first.noise.model_dump(),
        "mask_digest": first.mask_digest,
        "count": len(items),
    }
    meta.update(extra or {})
    return write_tensor(path, data, "measurement", meta)


def load_measurements(path: str | Path) -> list[Measurement]:
    data, header = read_tensor(path, "measurement")
    if data.ndim == 2:
        data = data[None]
    if data.ndim != 3:
        raise CorruptFileError(f"测量需要 (H, W) 或 (M, H, W)，实际 {data.shape}")
    noise = NoiseRecord(**(header.get("noise") or {}))
    bayer = bool(header.get("bayer", header.get("cfa") == "rggb"))
    return [
        Measurement(data=plane, noise=noise, bayer=bayer, mask_digest=header.get("mask_digest"))
        for plane in data
    ]


def load_measurement(path: str | Path) -> Measurement:
    return load_measurements(path)[0]


# ==================== Checkpoint ====================


def save_checkpoint(
    path: str | Path,
    networks: list[PriorParams],
    extras: dict[str, Any] | None = None,
) -> Path:
    """多个命名网络写入同一文件；sidecar 记录层形状、激活、种子与步数"""
    arrays: list[np.ndarray] = []
    described: list[dict[str, Any]] = []
    for net in networks:
        arrays.extend(a.ravel() for a in net.arrays())
        described.append(
            {
                "name": net.name,
                "seed": net.seed,
                "step": net.step,
                "layers": [
                    {
                        "weight": list(layer.weight.shape),
                        "bias": list(layer.bias.shape),
                        "activation": layer.activation,
                    }
                    for layer in net.layers
                ],
            }
        )
    flat = np.concatenate(arrays) if arrays else np.zeros(0)
    return write_tensor(
        path,
        flat,
        "checkpoint",
        {"networks": described, "extras": _json_safe(extras or {})},
    )


def load_checkpoint(path: str | Path) -> tuple[dict[str, PriorParams], dict[str, Any]]:
    """返回 ({name: PriorParams}, extras)"""
    flat, header = read_tensor(path, "checkpoint")
    networks: dict[str, PriorParams] = {}
    offset = 0
    try:
        for desc in header["networks"]:
            layers: list[ConvLayer] = []
            for spec in desc["layers"]:
                w_shape = tuple(spec["weight"])
                b_shape = tuple(spec["bias"])
                w_size = int(np.prod(w_shape))
                b_size = int(np.prod(b_shape))
                weight = flat[offset : offset + w_size].reshape(w_shape)
                offset += w_size
                bias = flat[offset : offset + b_size].reshape(b_shape)
                offset += b_size
                layers.append(ConvLayer(weight=weight, bias=bias, activation=spec["activation"]))
            networks[desc["name"]] = PriorParams(
                layers=layers,
                name=desc["name"],
                seed=desc.get("seed"),
                step=int(desc.get("step", 0)),
            )
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptFileError(f"检查点 sidecar 非法: {e}") from e
    if offset != flat.size:
        raise CorruptFileError(f"检查点参数数 {flat.size} 与描述 {offset} 不一致")
    return networks, dict(header.get("extras") or {})
