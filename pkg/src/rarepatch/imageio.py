"""
Grayscale image input/output.

Reads binary PGM (P5, 8 or 16 bit) and grayscale PNG, normalised to [0, 1].
Writes 8-bit PGM/PNG heatmaps and a raw little-endian float64 map format::

    bytes 0..7    magic b"RPMAP64\\0"
    bytes 8..11   width  (uint32 LE)
    bytes 12..15  height (uint32 LE)
    bytes 16..    width * height float64 LE values, row-major
"""

from importlib import resources
import struct

import numpy as np

RAW_MAGIC = b"RPMAP64\0"


class ImageFormatError(ValueError):
    pass


def _pgm_tokens(data, count):
    """Split the first ``count`` header tokens off a PNM byte string."""
    tokens = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ImageFormatError("truncated PGM header")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def decode_pgm(data):
    """Decode P5 bytes to ``(codes, maxval)``."""
    if data[:2] != b"P5":
        raise ImageFormatError("not a binary PGM (P5) file")
    tokens, offset = _pgm_tokens(data, 4)
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError("malformed PGM header") from None
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise ImageFormatError(f"invalid PGM geometry {w}x{h} maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = w * h * dtype.itemsize
    raster = data[offset:offset + n]
    if len(raster) < n:
        raise ImageFormatError(f"PGM raster truncated: {len(raster)} of {n} bytes")
    return np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(np.int64), maxval


def encode_pgm(codes, maxval=255):
    codes = np.asarray(codes)
    h, w = codes.shape
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    return header + codes.astype(dtype).tobytes()


def read_image(path):
    """Load a grayscale image as float64 in [0, 1].

    Colour PNGs are rejected rather than converted.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from None
    if data[:2] == b"P5":
        codes, maxval = decode_pgm(data)
        return codes / maxval
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    raise ImageFormatError(f"{path}: unsupported format (expected P5 PGM or PNG)")


def _read_png(path):
    from PIL import Image
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.asarray(im)
    except Exception as exc:  # Pillow raises a variety of types on corrupt data
        raise ImageFormatError(f"cannot decode PNG {path}: {exc}") from None
    if mode == "1":
        return arr.astype(np.float64)
    if mode == "L":
        return arr.astype(np.float64) / 255.0
    if mode.startswith("I;16") or mode == "I":
        return arr.astype(np.float64) / 65535.0
    raise ImageFormatError(f"{path}: PNG mode {mode!r} is not single-channel grayscale")


def write_pgm(path, codes, maxval=255):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(codes, maxval))


def heatmap_codes(values):
    """Map values monotonically onto 0..255, min to 0 and max to 255.

    A constant map renders all zero; NaN renders as 0.
    """
    v = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(v)
    if not finite.any():
        return np.zeros(v.shape, dtype=np.uint8)
    lo = v[finite].min()
    hi = v[finite].max()
    if hi == lo:
        return np.zeros(v.shape, dtype=np.uint8)
    out = np.zeros(v.shape)
    out[finite] = np.round((v[finite] - lo) / (hi - lo) * 255.0)
    return out.astype(np.uint8)


def write_heatmap(path, values, fmt="pgm"):
    codes = heatmap_codes(values)
    if fmt == "pgm":
        write_pgm(path, codes)
    elif fmt == "png":
        from PIL import Image
        Image.fromarray(codes, mode="L").save(path)
    else:
        raise ValueError(f"unknown heatmap format {fmt!r}")


def write_raw(path, values):
    v = np.asarray(values, dtype="<f8")
    h, w = v.shape
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC + struct.pack("<II", w, h))
        fh.write(v.tobytes())


def read_raw(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != RAW_MAGIC:
        raise ImageFormatError(f"{path}: bad raw map magic")
    w, h = struct.unpack("<II", data[8:16])
    return np.frombuffer(data[16:], dtype="<f8", count=w * h).reshape(h, w).copy()


def sample_image():
    """The bundled 256x256 natural grayscale photograph (CC0), in [0, 1]."""
    data = resources.files("rarepatch").joinpath("data/camera.pgm").read_bytes()
    codes, maxval = decode_pgm(data)
    return codes / maxval
