"""Image and disparity-map file formats.

Gray images are read from PGM (P2 ASCII or P5 binary, maxval up to 65535,
'#' comments allowed in the header) and from grayscale PFM ("Pf" magic,
32-bit floats, scale sign gives endianness, rows stored bottom to top).
Sample values are kept as-is; 16-bit and float data are not re-quantized.

Disparity maps are written as text (one line per pixel row, tab-separated,
rejected cells as the token "NaN") and optionally as a visualization PGM
where accepted disparities map affinely onto [0, 254] and rejected pixels
are the sentinel 255.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import (CorruptHeader, TruncatedData, UnreadableFile,
                     UnsupportedFormat, WriteFailure)

_WHITESPACE = frozenset(b" \t\r\n\x0b\x0c")


@dataclass(eq=False)
class GrayImage:
    """Single-channel image, float64 samples in row-major (row, column) order."""

    pixels: np.ndarray
    maxval: float = 255.0

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError("pixels must be a non-empty 2-D array")
        if not np.isfinite(self.pixels).all():
            raise ValueError("image samples must be finite")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


class CellState(IntEnum):
    """Per-pixel outcome of the matcher."""

    ACCEPTED = 0
    NOT_MEANINGFUL = 1   # no candidate reached the NFA threshold
    SELF_SIMILAR = 2     # meaningful candidate vetoed by the self-similarity test
    BORDER = 3           # block window does not fit inside the reference image


@dataclass(eq=False)
class DisparityMap:
    """Dense per-pixel match outcome for a reference image.

    disparity and nfa are only meaningful where state == ACCEPTED; elsewhere
    they hold 0 and NaN.  Maps reloaded from the text format carry NaN nfa
    for accepted cells too (the format does not store it) and mark every
    rejected cell NOT_MEANINGFUL (the reason is not stored either).
    """

    state: np.ndarray      # uint8 of CellState
    disparity: np.ndarray  # int32
    nfa: np.ndarray        # float64

    def __post_init__(self):
        self.state = np.ascontiguousarray(self.state, dtype=np.uint8)
        self.disparity = np.ascontiguousarray(self.disparity, dtype=np.int32)
        self.nfa = np.ascontiguousarray(self.nfa, dtype=np.float64)
        if not (self.state.shape == self.disparity.shape == self.nfa.shape):
            raise ValueError("state, disparity and nfa must share one shape")
        if self.state.ndim != 2:
            raise ValueError("disparity map must be 2-D")
        if self.state.max(initial=0) > CellState.BORDER:
            raise ValueError("unknown cell state")

    @property
    def height(self) -> int:
        return self.state.shape[0]

    @property
    def width(self) -> int:
        return self.state.shape[1]

    @property
    def accepted(self) -> np.ndarray:
        return self.state == CellState.ACCEPTED


def _next_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos]
        if c in _WHITESPACE:
            pos += 1
        elif c == 0x23:  # '#' comment runs to end of line
            while pos < n and buf[pos] not in (0x0A, 0x0D):
                pos += 1
        else:
            break
    if pos >= n:
        raise CorruptHeader("unexpected end of header")
    start = pos
    while pos < n and buf[pos] not in _WHITESPACE and buf[pos] != 0x23:
        pos += 1
    return buf[start:pos], pos


def _int_token(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    tok, pos = _next_token(buf, pos)
    try:
        return int(tok), pos
    except ValueError:
        raise CorruptHeader(f"bad {what}: {tok!r}") from None


def load_gray(path) -> GrayImage:
    """Load a PGM (P2/P5) or grayscale PFM file."""
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from None
    try:
        magic, pos = _next_token(buf, 0)
    except CorruptHeader:
        raise UnsupportedFormat(f"{path}: empty file") from None
    if magic in (b"P2", b"P5"):
        return _load_pgm(buf, pos, magic, path)
    if magic == b"Pf":
        return _load_pfm(buf, pos, path)
    if magic == b"PF":
        raise UnsupportedFormat(f"{path}: color PFM not supported")
    raise UnsupportedFormat(f"{path}: unknown magic {magic!r}")


def _load_pgm(buf: bytes, pos: int, magic: bytes, path) -> GrayImage:
    width, pos = _int_token(buf, pos, "width")
    height, pos = _int_token(buf, pos, "height")
    maxval, pos = _int_token(buf, pos, "maxval")
    if width < 1 or height < 1:
        raise CorruptHeader(f"{path}: bad dimensions {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise CorruptHeader(f"{path}: maxval {maxval} out of range")
    count = width * height
    if magic == b"P5":
        if pos >= len(buf) or buf[pos] not in _WHITESPACE:
            raise CorruptHeader(f"{path}: missing raster separator")
        raster = buf[pos + 1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(raster) < count * dtype.itemsize:
            raise TruncatedData(f"{path}: raster shorter than {width}x{height}")
        data = np.frombuffer(raster, dtype=dtype, count=count).astype(np.float64)
    else:
        values = []
        while len(values) < count:
            try:
                v, pos = _int_token(buf, pos, "sample")
            except CorruptHeader as exc:
                if "end of header" in str(exc):
                    raise TruncatedData(
                        f"{path}: {len(values)} samples, expected {count}") from None
                raise
            values.append(v)
        data = np.array(values, dtype=np.float64)
    if data.min() < 0 or data.max() > maxval:
        raise CorruptHeader(f"{path}: sample outside [0, {maxval}]")
    return GrayImage(data.reshape(height, width), maxval=float(maxval))


def _load_pfm(buf: bytes, pos: int, path) -> GrayImage:
    width, pos = _int_token(buf, pos, "width")
    height, pos = _int_token(buf, pos, "height")
    tok, pos = _next_token(buf, pos)
    try:
        scale = float(tok)
    except ValueError:
        raise CorruptHeader(f"{path}: bad scale {tok!r}") from None
    if width < 1 or height < 1 or scale == 0.0:
        raise CorruptHeader(f"{path}: bad PFM header")
    if pos >= len(buf) or buf[pos] not in _WHITESPACE:
        raise CorruptHeader(f"{path}: missing raster separator")
    raster = buf[pos + 1:]
    count = width * height
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    if len(raster) < count * dtype.itemsize:
        raise TruncatedData(f"{path}: raster shorter than {width}x{height}")
    data = np.frombuffer(raster, dtype=dtype, count=count).astype(np.float64)
    if not np.isfinite(data).all():
        raise UnsupportedFormat(f"{path}: non-finite samples")
    pixels = np.flipud(data.reshape(height, width))  # PFM rows run bottom-up
    return GrayImage(pixels, maxval=max(1.0, float(pixels.max())))


def save_pgm(image: GrayImage, path, maxval: int | None = None) -> None:
    """Write a binary (P5) PGM; samples rounded to the nearest integer."""
    if maxval is None:
        maxval = int(round(image.maxval))
    if not 1 <= maxval <= 65535:
        raise ValueError(f"maxval {maxval} out of range")
    data = np.clip(np.rint(image.pixels), 0, maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = f"P5\n{image.width} {image.height}\n{maxval}\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(data.astype(dtype).tobytes())
    except OSError as exc:
        raise WriteFailure(f"{path}: {exc}") from None


def save_pfm(image: GrayImage, path) -> None:
    """Write a little-endian grayscale PFM (scale -1)."""
    header = f"Pf\n{image.width} {image.height}\n-1.0\n".encode("ascii")
    data = np.flipud(image.pixels).astype("<f4")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(data.tobytes())
    except OSError as exc:
        raise WriteFailure(f"{path}: {exc}") from None


def save_disparity(dmap: DisparityMap, data_path) -> None:
    """Write the tab-separated text form; rejected cells become "NaN"."""
    acc = dmap.accepted
    lines = []
    for y in range(dmap.height):
        row = [str(int(d)) if a else "NaN"
               for a, d in zip(acc[y], dmap.disparity[y])]
        lines.append("\t".join(row))
    try:
        with open(data_path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise WriteFailure(f"{data_path}: {exc}") from None


def load_disparity(path) -> DisparityMap:
    """Read the text form back; rejection reasons and nfa are not recoverable."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln for ln in fh.read().split("\n") if ln != ""]
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from None
    if not lines:
        raise CorruptHeader(f"{path}: empty disparity file")
    rows = [ln.split("\t") for ln in lines]
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise CorruptHeader(f"{path}: ragged rows")
    height = len(rows)
    state = np.full((height, width), CellState.NOT_MEANINGFUL, dtype=np.uint8)
    disp = np.zeros((height, width), dtype=np.int32)
    for y, row in enumerate(rows):
        for x, tok in enumerate(row):
            if tok == "NaN":
                continue
            try:
                disp[y, x] = int(tok)
            except ValueError:
                raise CorruptHeader(f"{path}: bad token {tok!r}") from None
            state[y, x] = CellState.ACCEPTED
    nfa = np.full((height, width), np.nan)
    return DisparityMap(state=state, disparity=disp, nfa=nfa)


def save_disparity_viz(dmap: DisparityMap, path) -> None:
    """Write the visualization PGM (accepted -> [0, 254], rejected -> 255)."""
    acc = dmap.accepted
    viz = np.full(dmap.state.shape, 255, dtype=np.float64)
    if acc.any():
        d = dmap.disparity[acc].astype(np.float64)
        lo, hi = d.min(), d.max()
        if hi > lo:
            viz[acc] = np.rint((d - lo) * (254.0 / (hi - lo)))
        else:
            viz[acc] = 127.0
    save_pgm(GrayImage(viz, maxval=255.0), path, maxval=255)
