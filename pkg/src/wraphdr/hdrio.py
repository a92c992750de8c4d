"""HDR and sensor file I/O.

* Portable Float Map (``PF`` colour / ``Pf`` grey) read and write.  The sign
  of the scale field selects the byte order (negative = little-endian);
  rows are stored bottom-to-top.
* Radiance RGBE (``.hdr``) read-only, flat and run-length encoded scanlines.
* 16-bit PNG for wrapped sensor images and winding maps.
"""

import logging
import os
import re

import cv2
import numpy as np

from ._validation import check_irradiance

__all__ = [
    "HdrFormatError",
    "MalformedHeaderError",
    "TruncatedPayloadError",
    "UnsupportedFormatError",
    "read_hdr",
    "read_pfm",
    "read_rgbe",
    "write_hdr",
    "write_pfm",
    "write_sensor_png",
    "read_sensor_png",
    "write_winding_png",
    "read_winding_png",
]

log = logging.getLogger(__name__)


class HdrFormatError(ValueError):
    """Base class for HDR decoding failures."""


class MalformedHeaderError(HdrFormatError):
    pass


class TruncatedPayloadError(HdrFormatError):
    pass


class UnsupportedFormatError(HdrFormatError):
    pass


def _clamp_negative(img, path):
    neg = img < 0
    n = int(neg.sum())
    if n:
        log.warning("%s: clamped %d negative samples to 0", path, n)
        img = np.where(neg, 0.0, img)
    return img, n


def read_pfm(path, return_clamped=False):
    with open(path, "rb") as f:
        raw = f.read()
    # header: three whitespace-separated tokens, then a single whitespace byte
    m = re.match(rb"(P[Ff])\s+(\S+)\s+(\S+)\s+(\S+)\s", raw)
    if m is None:
        if raw[:2] not in (b"PF", b"Pf"):
            raise MalformedHeaderError(f"{path}: not a PFM file (magic {raw[:2]!r})")
        raise MalformedHeaderError(f"{path}: incomplete PFM header")
    magic, ws, hs, ss = m.groups()
    try:
        width, height, scale = int(ws), int(hs), float(ss)
    except ValueError:
        raise MalformedHeaderError(f"{path}: bad PFM header fields {ws!r} {hs!r} {ss!r}") from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"{path}: bad PFM dimensions {width}x{height}")
    if scale == 0 or not np.isfinite(scale):
        raise MalformedHeaderError(f"{path}: bad PFM scale {ss!r}")
    channels = 3 if magic == b"PF" else 1
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    count = width * height * channels
    payload = raw[m.end():]
    if len(payload) < 4 * count:
        raise TruncatedPayloadError(
            f"{path}: PFM payload has {len(payload)} bytes, expected {4 * count}")
    data = np.frombuffer(payload, dtype=dtype, count=count).astype(np.float32)
    data = data.reshape(height, width, channels)[::-1]
    if channels == 1:
        data = data[:, :, 0]
    if not np.all(np.isfinite(data)):
        raise HdrFormatError(f"{path}: PFM contains non-finite samples")
    data, n = _clamp_negative(data.astype(np.float64), path)
    data = np.ascontiguousarray(data)
    return (data, n) if return_clamped else data


def _rgbe_to_float(rgbe):
    rgbe = rgbe.astype(np.int64)
    e = rgbe[..., 3]
    out = np.ldexp(rgbe[..., :3].astype(np.float64), (e - 136)[..., None])
    out[e == 0] = 0.0
    return out


def _read_rle_scanline(buf, pos, width, path):
    line = np.empty((4, width), dtype=np.uint8)
    for ch in range(4):
        x = 0
        while x < width:
            if pos >= len(buf):
                raise TruncatedPayloadError(f"{path}: RGBE scanline ends early")
            count = buf[pos]
            pos += 1
            if count > 128:
                count -= 128
                if pos >= len(buf):
                    raise TruncatedPayloadError(f"{path}: RGBE run ends early")
                if x + count > width:
                    raise HdrFormatError(f"{path}: RGBE run overflows scanline")
                line[ch, x:x + count] = buf[pos]
                pos += 1
            else:
                if count == 0 or x + count > width:
                    raise HdrFormatError(f"{path}: bad RGBE literal count {count}")
                if pos + count > len(buf):
                    raise TruncatedPayloadError(f"{path}: RGBE literal run ends early")
                line[ch, x:x + count] = np.frombuffer(buf, np.uint8, count, pos)
                pos += count
            x += count
    return line.T, pos


def _read_flat_scanline(buf, pos, width, prev, path):
    # uncompressed pixels, with old-style (1, 1, 1, n) repeat codes
    line = np.empty((width, 4), dtype=np.uint8)
    x = 0
    shift = 0
    while x < width:
        if pos + 4 > len(buf):
            raise TruncatedPayloadError(f"{path}: RGBE payload ends early")
        px = buf[pos:pos + 4]
        pos += 4
        if px[0] == 1 and px[1] == 1 and px[2] == 1:
            last = line[x - 1] if x > 0 else prev
            if last is None:
                raise HdrFormatError(f"{path}: RGBE repeat code without a previous pixel")
            n = px[3] << shift
            if x + n > width:
                raise HdrFormatError(f"{path}: RGBE repeat overflows scanline")
            line[x:x + n] = last
            x += n
            shift += 8
        else:
            line[x] = np.frombuffer(px, np.uint8)
            x += 1
            shift = 0
    return line, pos


def read_rgbe(path):
    with open(path, "rb") as f:
        raw = f.read()
    if not (raw.startswith(b"#?RADIANCE") or raw.startswith(b"#?RGBE")):
        raise MalformedHeaderError(f"{path}: missing #?RADIANCE signature")
    end = raw.find(b"\n\n")
    if end < 0:
        raise MalformedHeaderError(f"{path}: RGBE header not terminated by a blank line")
    for line in raw[:end].split(b"\n")[1:]:
        if line.startswith(b"FORMAT="):
            fmt = line[7:].strip()
            if fmt != b"32-bit_rle_rgbe":
                raise UnsupportedFormatError(f"{path}: unsupported RGBE format {fmt.decode(errors='replace')}")
    nl = raw.find(b"\n", end + 2)
    if nl < 0:
        raise MalformedHeaderError(f"{path}: missing RGBE resolution line")
    res = raw[end + 2:nl].decode("ascii", errors="replace").split()
    if len(res) != 4:
        raise MalformedHeaderError(f"{path}: bad RGBE resolution line {' '.join(res)!r}")
    if res[0] != "-Y" or res[2] != "+X":
        raise UnsupportedFormatError(f"{path}: unsupported RGBE orientation {' '.join(res)!r}")
    try:
        height, width = int(res[1]), int(res[3])
    except ValueError:
        raise MalformedHeaderError(f"{path}: bad RGBE dimensions {' '.join(res)!r}") from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"{path}: bad RGBE dimensions {width}x{height}")

    buf = raw[nl + 1:]
    pos = 0
    pixels = np.empty((height, width, 4), dtype=np.uint8)
    prev = None
    for y in range(height):
        new_rle = (8 <= width < 32768 and pos + 4 <= len(buf) and buf[pos] == 2 and buf[pos + 1] == 2
                   and not buf[pos + 2] & 0x80)
        if new_rle:
            if (buf[pos + 2] << 8 | buf[pos + 3]) != width:
                raise HdrFormatError(f"{path}: RGBE scanline {y} width mismatch")
            line, pos = _read_rle_scanline(buf, pos + 4, width, path)
        else:
            line, pos = _read_flat_scanline(buf, pos, width, prev, path)
        pixels[y] = line
        prev = line[-1]
    return _rgbe_to_float(pixels)


def read_hdr(path):
    """Read a PFM or Radiance RGBE file as a float64 irradiance array.

    Greyscale PFM gives an (H, W) array, colour files (H, W, 3).  The format
    is chosen from the file signature, not the extension.
    """
    path = os.fspath(path)
    with open(path, "rb") as f:
        head = f.read(10)
    if head[:2] in (b"PF", b"Pf"):
        return read_pfm(path)
    if head.startswith(b"#?"):
        return read_rgbe(path)
    raise UnsupportedFormatError(f"{path}: unrecognised HDR signature {head[:4]!r}")


def write_pfm(img, path):
    """Write ``img`` as a little-endian PFM (float32, rows bottom-to-top)."""
    img = check_irradiance(img)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        magic = b"Pf"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"PFM needs an (H, W) or (H, W, 3) image, got shape {img.shape}")
    h, w = img.shape[:2]
    data = np.ascontiguousarray(img[::-1].astype("<f4"))
    with open(path, "wb") as f:
        f.write(magic + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n")
        f.write(data.tobytes())


write_hdr = write_pfm


def _to_png_layout(arr):
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr[:, :, ::-1]  # OpenCV stores BGR
    if arr.ndim == 3 and arr.shape[2] == 1:
        return arr[:, :, 0]
    if arr.ndim == 1:
        return arr[None, :]
    return arr


def _write_png16(arr, path):
    if not cv2.imwrite(os.fspath(path), np.ascontiguousarray(_to_png_layout(arr).astype(np.uint16))):
        raise OSError(f"could not write PNG to {path}")


def _read_png16(path):
    arr = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise OSError(f"could not read PNG {path}")
    if arr.dtype != np.uint16:
        raise UnsupportedFormatError(f"{path}: expected a 16-bit PNG, got {arr.dtype}")
    if arr.ndim == 3:
        arr = arr[:, :, ::-1]
    return arr


def write_sensor_png(sensor, path):
    """Store wrapped values as 16-bit codes ``round(m * 65535 / i_max)``."""
    m = np.asarray(sensor.data)
    codes = np.rint(m * 65535.0 / sensor.params.i_max)
    _write_png16(np.clip(codes, 0, 65535), path)


def read_sensor_png(path, params):
    """Inverse of :func:`write_sensor_png`, clamped below ``i_max``."""
    from .codec import SensorImage

    codes = _read_png16(path).astype(np.float64)
    return SensorImage(np.minimum(codes * params.i_max / 65535.0, params.top), params)


def write_winding_png(winding, path):
    """Store raw winding numbers as 16-bit grey levels."""
    w = np.asarray(winding)
    if np.any(w < 0) or np.any(w > 65535):
        raise ValueError(f"winding values must lie in 0..65535 for PNG, got range "
                         f"[{w.min()}, {w.max()}]")
    _write_png16(w, path)


def read_winding_png(path):
    return _read_png16(path).astype(np.int64)
