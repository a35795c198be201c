"""Binary cloud files.

Layout: 8-byte magic ``GSLIFT01``, little-endian u32 primitive count, then per
primitive 14 little-endian f32 (center×3, log_scale×3, quaternion×4,
opacity_logit, color×3).
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from core.errors import HeaderError, TruncatedPayloadError, VersionMismatchError
from core.gaussians import GaussianCloud

MAGIC = b"GSLIFT01"
FAMILY = b"GSLIFT"
FLOATS_PER_PRIMITIVE = 14
_RECORD = np.dtype("<f4")


def cloud_to_bytes(cloud: GaussianCloud) -> bytes:
    table = np.concatenate([
        cloud.centers,
        cloud.log_scales,
        cloud.rotations,
        cloud.opacity_logits[:, None],
        cloud.colors,
    ], axis=1).astype(_RECORD)
    return MAGIC + struct.pack("<I", len(cloud)) + table.tobytes()


def cloud_from_bytes(blob: bytes) -> GaussianCloud:
    if len(blob) < len(MAGIC) + 4:
        raise HeaderError("file shorter than the cloud header")
    magic = blob[:len(MAGIC)]
    if magic != MAGIC:
        if magic.startswith(FAMILY):
            raise VersionMismatchError(f"unsupported cloud version {magic[len(FAMILY):]!r}")
        raise HeaderError(f"bad magic bytes {magic!r}")
    (count,) = struct.unpack("<I", blob[len(MAGIC):len(MAGIC) + 4])
    payload = blob[len(MAGIC) + 4:]
    expected = count * FLOATS_PER_PRIMITIVE * _RECORD.itemsize
    if len(payload) < expected:
        raise TruncatedPayloadError(f"expected {expected} payload bytes for {count} primitives, got {len(payload)}")
    table = np.frombuffer(payload[:expected], dtype=_RECORD).astype(np.float64)
    table = table.reshape(count, FLOATS_PER_PRIMITIVE)
    return GaussianCloud(
        centers=table[:, 0:3],
        log_scales=table[:, 3:6],
        rotations=table[:, 6:10],
        opacity_logits=table[:, 10],
        colors=table[:, 11:14],
    )


def save_cloud(cloud: GaussianCloud, path: Union[str, Path]) -> None:
    Path(path).write_bytes(cloud_to_bytes(cloud))


def load_cloud(path: Union[str, Path]) -> GaussianCloud:
    return cloud_from_bytes(Path(path).read_bytes())


def quantize(cloud: GaussianCloud) -> GaussianCloud:
    """The cloud as it reads back from disk (parameters rounded to f32)."""
    return cloud_from_bytes(cloud_to_bytes(cloud))
