"""Image container, file formats and the CT preprocessing pipeline.

Supported on-disk formats:

* ``pgm8`` / ``pgm16``: binary P5 PGM with maxval 255 or 65535 (16-bit
  samples are big-endian).
* ``raw_f32``: little-endian row-major float32 ``<name>.f32`` next to a JSON
  sidecar ``<name>.json`` holding ``{"width", "height", "lo", "hi"}``.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMATS = ("pgm8", "pgm16", "raw_f32")


class ImageError(ValueError):
    """Invalid image contents (shape, range, finiteness)."""


class ParseError(ImageError):
    """Base class for file decoding failures."""


class MalformedHeaderError(ParseError):
    pass


class TruncatedDataError(ParseError):
    pass


class MissingSidecarError(ParseError):
    pass


class RangeOverflowError(ImageError):
    """Image values do not fit the bit depth of an integer format."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class HuWindow:
    """Radiological display window, in Hounsfield units."""

    center: float = -500.0
    width: float = 1400.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"window width must be positive, got {self.width}")

    @property
    def floor(self) -> float:
        return self.center - self.width / 2

    @property
    def ceiling(self) -> float:
        return self.center + self.width / 2


class Image:
    """Immutable 2-D grayscale image with an asserted value range.

    ``data`` is a read-only float64 array of shape ``(height, width)``; row
    ``v`` and column ``u`` address pixel ``data[v, u]``.
    """

    __slots__ = ("_data", "_range")

    def __init__(self, data, value_range):
        arr = np.array(data, dtype=np.float64)  # always a private copy
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ImageError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        if not isinstance(value_range, Interval):
            value_range = Interval(*value_range)
        if not np.all(np.isfinite(arr)):
            raise ImageError("image contains NaN or Inf")
        lo, hi = arr.min(), arr.max()
        if lo < value_range.lo or hi > value_range.hi:
            raise ImageError(
                f"data spans [{lo}, {hi}], outside value range "
                f"[{value_range.lo}, {value_range.hi}]"
            )
        arr.setflags(write=False)
        self._data = arr
        self._range = value_range

    @classmethod
    def from_flat(cls, width: int, height: int, data, value_range) -> Image:
        flat = np.asarray(data, dtype=np.float64).ravel()
        if width < 1 or height < 1:
            raise ImageError("width and height must be positive")
        if flat.size != width * height:
            raise ImageError(f"expected {width * height} values, got {flat.size}")
        return cls(flat.reshape(height, width), value_range)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def value_range(self) -> Interval:
        return self._range

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    def with_data(self, data) -> Image:
        """New image over the same value range."""
        return Image(data, self._range)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self._range == other._range and np.array_equal(self._data, other._data)

    def __repr__(self):
        return (f"Image({self.width}x{self.height}, "
                f"range=[{self._range.lo}, {self._range.hi}])")


def as_array(img) -> np.ndarray:
    """Pixel array of an ``Image`` or anything array-like."""
    if isinstance(img, Image):
        return img.data
    return np.asarray(img, dtype=np.float64)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def _read_pgm_header(raw: bytes):
    """Parse a P5 header; returns (width, height, maxval, payload offset)."""
    if raw[:2] != b"P5":
        raise MalformedHeaderError("not a binary PGM (missing P5 magic)")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and raw[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise MalformedHeaderError("PGM header ended before width/height/maxval")
        fields.append(int(raw[start:pos]))
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise MalformedHeaderError("missing whitespace after PGM maxval")
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"invalid PGM dimensions {width}x{height}")
    if maxval not in (255, 65535):
        raise MalformedHeaderError(f"unsupported PGM maxval {maxval}")
    return width, height, maxval, pos + 1


def load_image(path, format: str | None = None) -> Image:
    """Decode an image file.

    ``format`` is one of ``FORMATS``; ``None`` infers it from the extension
    (``.f32`` means raw_f32) or, for PGM, from the header maxval.
    """
    path = Path(path)
    if format is None:
        format = "raw_f32" if path.suffix == ".f32" else "pgm"
    if format == "raw_f32":
        return _load_raw_f32(path)
    if format not in ("pgm", "pgm8", "pgm16"):
        raise ValueError(f"unknown format {format!r}")

    raw = path.read_bytes()
    width, height, maxval, offset = _read_pgm_header(raw)
    expected = {"pgm8": 255, "pgm16": 65535}.get(format, maxval)
    if maxval != expected:
        raise MalformedHeaderError(f"{format} expects maxval {expected}, header says {maxval}")
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    nbytes = width * height * dtype.itemsize
    payload = raw[offset:offset + nbytes]
    if len(payload) < nbytes:
        raise TruncatedDataError(f"expected {nbytes} payload bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return Image(data, Interval(0.0, float(maxval)))


def _load_raw_f32(path: Path) -> Image:
    side = _sidecar(path)
    if not side.exists():
        raise MissingSidecarError(f"raw_f32 image {path} has no sidecar {side}")
    try:
        meta = json.loads(side.read_text())
        width, height = int(meta["width"]), int(meta["height"])
        lo, hi = float(meta["lo"]), float(meta["hi"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedHeaderError(f"bad sidecar {side}: {exc}") from exc
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"invalid dimensions {width}x{height} in {side}")
    raw = path.read_bytes()
    nbytes = 4 * width * height
    if len(raw) < nbytes:
        raise TruncatedDataError(f"expected {nbytes} bytes in {path}, found {len(raw)}")
    data = np.frombuffer(raw[:nbytes], dtype="<f4").reshape(height, width)
    return Image(data, Interval(lo, hi))


def atomic_write(path, payload: bytes | str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    if isinstance(payload, str):
        payload = payload.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_image(img: Image, path, format: str) -> None:
    """Encode ``img``; integer formats refuse values outside ``[0, maxval]``, then round."""
    path = Path(path)
    if format == "raw_f32":
        data = img.data.astype("<f4")
        if not np.array_equal(data.astype(np.float64), img.data):
            raise ImageError("raw_f32 cannot represent the image exactly in float32")
        meta = {"width": img.width, "height": img.height,
                "lo": float(img.value_range.lo), "hi": float(img.value_range.hi)}
        atomic_write(path, data.tobytes())
        atomic_write(_sidecar(path), json.dumps(meta))
        return
    if format not in ("pgm8", "pgm16"):
        raise ValueError(f"unknown format {format!r}")
    maxval = 255 if format == "pgm8" else 65535
    # strict: values past the bit depth are refused rather than rounded into it
    if img.data.min() < 0 or img.data.max() > maxval:
        raise RangeOverflowError(
            f"values [{img.data.min()}, {img.data.max()}] do not fit {format}")
    rounded = np.rint(img.data)
    dtype = "u1" if maxval == 255 else ">u2"
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    atomic_write(path, header + rounded.astype(dtype).tobytes())


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def hu_window_normalize(img: Image, win: HuWindow = HuWindow(),
                        target: Interval = Interval(-1.0, 1.0)) -> Image:
    """Clamp to the display window, then map it affinely onto ``target``."""
    clipped = np.clip(img.data, win.floor, win.ceiling)
    out = (clipped - win.floor) / win.width * target.width + target.lo
    # pin the endpoints so rounding cannot escape the target interval
    out = np.clip(out, target.lo, target.hi)
    return Image(out, target)


def resize_bilinear(img: Image, out_w: int, out_h: int) -> Image:
    """Corner-aligned bilinear resampling.

    Output pixel ``k`` samples source coordinate ``k * (n_in - 1) / (n_out - 1)``
    along each axis, so the four corner pixels are preserved exactly.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be positive")
    src = img.data
    if (out_h, out_w) == src.shape:
        return img

    def axis(n_in, n_out):
        if n_out == 1 or n_in == 1:
            pos = np.full(n_out, (n_in - 1) / 2.0)
        else:
            pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
        i0 = np.clip(np.floor(pos).astype(int), 0, n_in - 1)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, pos - i0

    r0, r1, fr = axis(src.shape[0], out_h)
    c0, c1, fc = axis(src.shape[1], out_w)
    top = src[r0][:, c0] * (1 - fc) + src[r0][:, c1] * fc
    bottom = src[r1][:, c0] * (1 - fc) + src[r1][:, c1] * fc
    out = top * (1 - fr)[:, None] + bottom * fr[:, None]
    # convex combinations; clip guards the last ulp
    out = np.clip(out, src.min(), src.max())
    return Image(out, img.value_range)


def preprocess_ct(hu: Image, size: int = 256, win: HuWindow = HuWindow(),
                  target: Interval = Interval(-1.0, 1.0)) -> Image:
    """Window, normalize, then resize to ``size`` x ``size``."""
    return resize_bilinear(hu_window_normalize(hu, win, target), size, size)
