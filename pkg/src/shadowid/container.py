"""Binary tensor container and portable image formats.

A container file stores a batch of equally shaped float32 records, each
carrying an integer label and four metadata floats.  Layout (little-endian):

    magic    5 bytes   b"SHDW1"
    u32      version   (currently 1)
    u32      count
    u32      height
    u32      width
    u32      channels
    record (repeated ``count`` times):
        u32      label
        f32      pixels, height * width * channels, row-major
        f32[4]   metadata

The same format is reused for plain matrices (one record, one channel).
Grayscale images are additionally exportable as 8-bit binary PGM
(max-normalized), and occluder masks are importable from PGM/PBM bitmaps
where any nonzero (PGM) or set (PBM) pixel counts as opaque.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"SHDW1"
VERSION = 1

_HEADER = struct.Struct("<IIIII")  # version, count, height, width, channels


def write_records(path, pixels, labels=None, metadata=None):
    """Write a batch of records to a container file.

    Parameters
    ----------
    pixels : ndarray, shape (count, height, width) or (count, height, width, channels)
    labels : ndarray of int, shape (count,), optional (default all zero)
    metadata : ndarray, shape (count, 4), optional (default all zero)
    """
    pixels = np.asarray(pixels)
    if pixels.ndim == 3:
        pixels = pixels[..., None]
    if pixels.ndim != 4:
        raise ValueError(f"pixels must be 3- or 4-dimensional, got shape {pixels.shape}")
    count, height, width, channels = pixels.shape
    if labels is None:
        labels = np.zeros(count, dtype=np.uint32)
    labels = np.asarray(labels)
    if labels.shape != (count,):
        raise ValueError(f"labels shape {labels.shape} does not match count {count}")
    if np.any(labels < 0):
        raise ValueError("labels must be nonnegative")
    if metadata is None:
        metadata = np.zeros((count, 4), dtype=np.float32)
    metadata = np.asarray(metadata, dtype=np.float32)
    if metadata.shape != (count, 4):
        raise ValueError(f"metadata shape {metadata.shape} must be ({count}, 4)")

    flat = np.ascontiguousarray(pixels, dtype=np.float32).reshape(count, -1)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(VERSION, count, height, width, channels))
        for i in range(count):
            fh.write(struct.pack("<I", int(labels[i])))
            fh.write(flat[i].tobytes())
            fh.write(metadata[i].tobytes())


def read_records(path):
    """Read a container file.

    Returns
    -------
    pixels : float32 ndarray, shape (count, height, width, channels)
    labels : uint32 ndarray, shape (count,)
    metadata : float32 ndarray, shape (count, 4)
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        version, count, height, width, channels = _HEADER.unpack(header)
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        record_px = height * width * channels
        record_bytes = 4 + 4 * record_px + 16
        payload = fh.read()
    if len(payload) != count * record_bytes:
        raise ValueError(f"{path}: expected {count * record_bytes} record bytes, got {len(payload)}")
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(count, record_bytes)
    labels = raw[:, :4].copy().view(np.uint32).reshape(count)
    pixels = raw[:, 4:4 + 4 * record_px].copy().view(np.float32)
    pixels = pixels.reshape(count, height, width, channels)
    metadata = raw[:, 4 + 4 * record_px:].copy().view(np.float32).reshape(count, 4)
    return pixels, labels, metadata


def write_matrix(path, matrix, label=0, metadata=None):
    """Write a single 2-D float array as a one-record container file."""
    matrix = np.asarray(matrix)
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    if matrix.ndim != 2:
        raise ValueError(f"expected a 1- or 2-D array, got shape {matrix.shape}")
    meta = None if metadata is None else np.asarray(metadata, dtype=np.float32)[None, :]
    write_records(path, matrix[None, :, :], labels=np.array([label], dtype=np.uint32),
                  metadata=meta)


def read_matrix(path):
    """Read a one-record container file back as a 2-D float32 array."""
    pixels, _, _ = read_records(path)
    if pixels.shape[0] != 1 or pixels.shape[3] != 1:
        raise ValueError(f"{path}: not a single-matrix container (shape {pixels.shape})")
    return pixels[0, :, :, 0]


def write_pgm(path, image):
    """Export a grayscale image as binary 8-bit PGM, max-normalized.

    All-zero images map to all-zero output.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    peak = image.max()
    scaled = image / peak if peak > 0 else image
    data = np.clip(np.rint(scaled * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (image.shape[1], image.shape[0]))
        fh.write(data.tobytes())


def _read_netpbm_tokens(data, n_tokens):
    """Pull whitespace/comment-delimited ASCII tokens off a netpbm header."""
    tokens = []
    pos = 0
    while len(tokens) < n_tokens:
        if pos >= len(data):
            raise ValueError("truncated netpbm header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
    return tokens, pos + 1  # netpbm: exactly one whitespace after the header


def read_bitmap_mask(path):
    """Read a PGM (P2/P5) or PBM (P1/P4) file as a binary occluder mask.

    Nonzero gray values and set PBM bits are opaque (1).
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 2:
        raise ValueError(f"{path}: not a netpbm file")
    kind = data[:2]
    if kind in (b"P2", b"P5"):
        tokens, offset = _read_netpbm_tokens(data[2:], 3)
        width, height, maxval = (int(t) for t in tokens)
        if maxval <= 0 or maxval > 255:
            raise ValueError(f"{path}: unsupported maxval {maxval}")
        if kind == b"P5":
            body = data[2 + offset:2 + offset + width * height]
            if len(body) != width * height:
                raise ValueError(f"{path}: truncated pixel data")
            values = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
        else:
            values = np.array(data[2 + offset:].split()[: width * height], dtype=np.int64)
            if values.size != width * height:
                raise ValueError(f"{path}: truncated pixel data")
            values = values.reshape(height, width)
        return (values != 0).astype(np.uint8)
    if kind in (b"P1", b"P4"):
        tokens, offset = _read_netpbm_tokens(data[2:], 2)
        width, height = (int(t) for t in tokens)
        if kind == b"P4":
            row_bytes = (width + 7) // 8
            body = data[2 + offset:2 + offset + row_bytes * height]
            if len(body) != row_bytes * height:
                raise ValueError(f"{path}: truncated pixel data")
            rows = np.frombuffer(body, dtype=np.uint8).reshape(height, row_bytes)
            bits = np.unpackbits(rows, axis=1)[:, :width]
        else:
            digits = b"".join(data[2 + offset:].split())
            if len(digits) < width * height:
                raise ValueError(f"{path}: truncated pixel data")
            bits = np.frombuffer(digits[: width * height], dtype=np.uint8) - ord("0")
            bits = bits.reshape(height, width)
        return (bits != 0).astype(np.uint8)
    raise ValueError(f"{path}: unsupported netpbm kind {kind!r}")
