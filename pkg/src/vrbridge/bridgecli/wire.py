"""Binary wire format for streamed frames.

Every binary frame is self-describing through a fixed 16-byte header:

====== ====== ===========================================
offset size   field
====== ====== ===========================================
0      4      magic ``VRBF``
4      4      sequence number, u32 little-endian
8      1      eye: 0 left, 1 right, 2 side-by-side, 3 companion
9      1      pixel format: 0 = RGBA8
10     2      width, u16 little-endian
12     2      height, u16 little-endian
14     2      reserved (zero)
====== ====== ===========================================

The payload is exactly ``width * height * 4`` bytes of row-major RGBA.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

MAGIC = b"VRBF"
HEADER = struct.Struct("<4sIBBHHH")
assert HEADER.size == 16

EYE_LEFT = 0
EYE_RIGHT = 1
EYE_SIDE_BY_SIDE = 2
EYE_COMPANION = 3
EYE_CODES = (EYE_LEFT, EYE_RIGHT, EYE_SIDE_BY_SIDE, EYE_COMPANION)

FORMAT_RGBA8 = 0


class WireFormatError(ValueError):
    pass


@dataclass(frozen=True)
class FrameMessage:
    seq: int
    eye: int
    width: int
    height: int
    payload: bytes

    def __post_init__(self):
        if self.eye not in EYE_CODES:
            raise WireFormatError(f"invalid eye code {self.eye}")
        if not (0 < self.width <= 0xFFFF and 0 < self.height <= 0xFFFF):
            raise WireFormatError(f"frame dimensions out of range: {self.width}x{self.height}")
        if len(self.payload) != self.width * self.height * 4:
            raise WireFormatError(
                f"payload is {len(self.payload)} bytes, "
                f"{self.width}x{self.height} RGBA needs {self.width * self.height * 4}"
            )


def encode_frame(msg: FrameMessage) -> bytes:
    header = HEADER.pack(MAGIC, msg.seq & 0xFFFFFFFF, msg.eye, FORMAT_RGBA8, msg.width, msg.height, 0)
    return header + msg.payload


def decode_frame(data: bytes) -> FrameMessage:
    """Parse a binary frame by its header alone; malformed input raises
    WireFormatError and never anything else."""
    if len(data) < HEADER.size:
        raise WireFormatError(f"frame shorter than the {HEADER.size}-byte header")
    magic, seq, eye, fmt, width, height, _reserved = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise WireFormatError(f"bad magic {magic!r}")
    if fmt != FORMAT_RGBA8:
        raise WireFormatError(f"unsupported pixel format {fmt}")
    if eye not in EYE_CODES:
        raise WireFormatError(f"invalid eye code {eye}")
    expected = width * height * 4
    payload = data[HEADER.size :]
    if width == 0 or height == 0 or len(payload) != expected:
        raise WireFormatError(
            f"payload is {len(payload)} bytes, header says {width}x{height} ({expected} bytes)"
        )
    return FrameMessage(seq, eye, width, height, payload)
