"""Binary map container.

Layout: magic ``SMAP``, ``u32`` version, ``u32`` header length, a JSON header
``{n_side, ordering, n_channels, n_maps, dtype}``, then the little-endian
float64 payload in map, channel, pixel order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .sampling import Ordering, nside2npix

__all__ = ["MapFile", "write_maps", "read_maps"]

MAGIC = b"SMAP"
VERSION = 1


@dataclass(frozen=True, eq=False)
class MapFile:
    n_side: int
    ordering: Ordering
    data: np.ndarray  # (n_maps, n_channels, n_pix)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, None, :]
        if data.ndim != 3 or data.shape[2] != nside2npix(self.n_side):
            raise ValueError(f"maps of shape {data.shape} do not match n_side={self.n_side}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "ordering", Ordering(self.ordering))

    @property
    def n_maps(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]

    def header(self):
        return {"n_side": int(self.n_side), "ordering": self.ordering.value,
                "n_channels": self.n_channels, "n_maps": self.n_maps, "dtype": "f64"}


def write_maps(path, mf):
    hdr = json.dumps(mf.header(), sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(hdr)))
        fh.write(hdr)
        fh.write(np.ascontiguousarray(mf.data, dtype="<f8").tobytes())


def read_maps(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a map file")
    version, n = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported map file version {version}")
    hdr = json.loads(raw[12:12 + n])
    if hdr.get("dtype") != "f64":
        raise ValueError(f"{path}: unsupported dtype {hdr.get('dtype')!r}")
    shape = (hdr["n_maps"], hdr["n_channels"], nside2npix(hdr["n_side"]))
    payload = raw[12 + n:]
    if len(payload) != 8 * int(np.prod(shape)):
        raise ValueError(f"{path}: payload has {len(payload)} bytes, header implies "
                         f"{8 * int(np.prod(shape))}")
    data = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    return MapFile(hdr["n_side"], hdr["ordering"], data)
