"""
Image containers, binary PGM/PPM I/O, color-space conversions and resizing.

All pixel data is held in numpy arrays. Grayscale and RGB images are 8-bit
(uint8); LAB images keep real-valued planes rescaled to [0, 255] so the
conversion is invertible without quantization loss. Images are immutable
after construction (the backing arrays are marked read-only), which makes
them safe to share across worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ImageFormatError(ValueError):
    """Raised for unreadable or unsupported PGM/PPM files."""


def _round_half_up(x):
    # np.round does banker's rounding; image quantization here is half-up
    return np.floor(x + 0.5)


def _as_readonly(arr):
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GrayImage:
    """8-bit single-channel image; ``pixels`` is a read-only (h, w) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if not isinstance(p, np.ndarray) or p.ndim != 2 or p.dtype != np.uint8:
            raise ValueError("GrayImage needs a 2-D uint8 array")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("degenerate image dimensions")
        object.__setattr__(self, "pixels", _as_readonly(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class RgbImage:
    """8-bit three-channel image; ``pixels`` is a read-only (h, w, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if (
            not isinstance(p, np.ndarray)
            or p.ndim != 3
            or p.shape[2] != 3
            or p.dtype != np.uint8
        ):
            raise ValueError("RgbImage needs a (h, w, 3) uint8 array")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("degenerate image dimensions")
        object.__setattr__(self, "pixels", _as_readonly(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class LabImage:
    """CIE L*a*b* image with all three planes affinely rescaled to [0, 255].

    L maps [0, 100] -> [0, 255]; a and b map [-128, 127] -> [0, 255]
    (offset +128). Planes are float64 so a round trip through RGB loses
    nothing beyond the final 8-bit quantization.
    """

    l: np.ndarray
    a_chan: np.ndarray
    b_chan: np.ndarray

    def __post_init__(self):
        planes = (self.l, self.a_chan, self.b_chan)
        shape = planes[0].shape if isinstance(planes[0], np.ndarray) else None
        for p in planes:
            if not isinstance(p, np.ndarray) or p.ndim != 2 or p.shape != shape:
                raise ValueError("LabImage needs three equal-shaped 2-D planes")
            if p.shape[0] < 1 or p.shape[1] < 1:
                raise ValueError("degenerate image dimensions")
            if p.min() < 0.0 or p.max() > 255.0:
                raise ValueError("LAB planes must be rescaled to [0, 255]")
        object.__setattr__(self, "l", _as_readonly(self.l.astype(np.float64)))
        object.__setattr__(self, "a_chan", _as_readonly(self.a_chan.astype(np.float64)))
        object.__setattr__(self, "b_chan", _as_readonly(self.b_chan.astype(np.float64)))

    @property
    def width(self) -> int:
        return self.l.shape[1]

    @property
    def height(self) -> int:
        return self.l.shape[0]


# ---------------------------------------------------------------------------
# Netpbm binary I/O (P5 grayscale / P6 color, maxval 255)
# ---------------------------------------------------------------------------

_WHITESPACE = b" \t\n\r\x0b\x0c"


def _read_header(data: bytes, magic: bytes, path):
    """Parse 'P5'/'P6' + width + height + maxval; return (w, h, payload offset)."""
    pos = 0

    def skip_space_and_comments(pos):
        while pos < len(data):
            c = data[pos : pos + 1]
            if c in (b"#",):
                nl = data.find(b"\n", pos)
                if nl < 0:
                    raise ImageFormatError(f"{path}: unterminated header comment")
                pos = nl + 1
            elif c in _WHITESPACE:
                pos += 1
            else:
                break
        return pos

    def read_token(pos):
        pos = skip_space_and_comments(pos)
        start = pos
        while pos < len(data) and data[pos : pos + 1] not in _WHITESPACE:
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated header")
        return data[start:pos], pos

    tok, pos = read_token(pos)
    if tok != magic:
        raise ImageFormatError(
            f"{path}: expected binary {magic.decode()} file, found {tok[:16]!r}"
        )
    fields = []
    for _ in range(3):
        tok, pos = read_token(pos)
        if not tok.isdigit():
            raise ImageFormatError(f"{path}: malformed header field {tok[:16]!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: degenerate dimensions {width}x{height}")
    # exactly one whitespace byte separates the maxval from the raster
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise ImageFormatError(f"{path}: missing whitespace before raster")
    return width, height, pos + 1


def load_pgm(path) -> GrayImage:
    """Load a binary PGM (P5, maxval 255) file pixel-exactly."""
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, offset = _read_header(data, b"P5", path)
    need = width * height
    raster = data[offset : offset + need]
    if len(raster) < need:
        raise ImageFormatError(f"{path}: truncated raster ({len(raster)}/{need} bytes)")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels)


def save_pgm(img: GrayImage, path) -> None:
    """Write a binary PGM (P5, maxval 255); ``load_pgm`` inverts it bit-exactly."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())


def load_ppm(path) -> RgbImage:
    """Load a binary PPM (P6, maxval 255) file pixel-exactly."""
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, offset = _read_header(data, b"P6", path)
    need = 3 * width * height
    raster = data[offset : offset + need]
    if len(raster) < need:
        raise ImageFormatError(f"{path}: truncated raster ({len(raster)}/{need} bytes)")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return RgbImage(pixels)


def save_ppm(img: RgbImage, path) -> None:
    """Write a binary PPM (P6, maxval 255); ``load_ppm`` inverts it bit-exactly."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())


# ---------------------------------------------------------------------------
# Color conversions
# ---------------------------------------------------------------------------

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])

# sRGB <-> XYZ (D65, 2 degree observer)
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])

_LAB_DELTA = 6.0 / 29.0


def rgb_to_gray(img: RgbImage) -> GrayImage:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B), clamped to [0, 255]."""
    luma = img.pixels.astype(np.float64) @ _LUMA
    out = np.clip(_round_half_up(luma), 0, 255).astype(np.uint8)
    return GrayImage(out)


def _srgb_decompand(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _srgb_compand(c):
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _lab_f(t):
    return np.where(t > _LAB_DELTA**3, np.cbrt(t), t / (3 * _LAB_DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(t):
    return np.where(t > _LAB_DELTA, t**3, 3 * _LAB_DELTA**2 * (t - 4.0 / 29.0))


def rgb_to_lab(img: RgbImage) -> LabImage:
    """CIE 1976 L*a*b* under D65, planes rescaled per-channel to [0, 255]."""
    rgb = _srgb_decompand(img.pixels.astype(np.float64) / 255.0)
    xyz = rgb @ _RGB_TO_XYZ.T / _WHITE_D65
    fx, fy, fz = _lab_f(xyz[..., 0]), _lab_f(xyz[..., 1]), _lab_f(xyz[..., 2])
    l_star = 116.0 * fy - 16.0
    a_star = 500.0 * (fx - fy)
    b_star = 200.0 * (fy - fz)
    return LabImage(
        l=np.clip(l_star * 255.0 / 100.0, 0.0, 255.0),
        a_chan=np.clip(a_star + 128.0, 0.0, 255.0),
        b_chan=np.clip(b_star + 128.0, 0.0, 255.0),
    )


def lab_to_rgb(img: LabImage) -> RgbImage:
    """Invert the [0, 255] rescale, convert back to sRGB, clamp to [0, 255]."""
    l_star = img.l * 100.0 / 255.0
    a_star = img.a_chan - 128.0
    b_star = img.b_chan - 128.0
    fy = (l_star + 16.0) / 116.0
    fx = fy + a_star / 500.0
    fz = fy - b_star / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1)
    rgb_lin = np.clip(xyz * _WHITE_D65 @ _XYZ_TO_RGB.T, 0.0, 1.0)
    rgb = np.clip(_round_half_up(_srgb_compand(rgb_lin) * 255.0), 0, 255)
    return RgbImage(rgb.astype(np.uint8))


# ---------------------------------------------------------------------------
# Resizing
# ---------------------------------------------------------------------------


def _resize_plane(arr, new_w, new_h):
    """Bilinear resample with corner-aligned sample mapping (float64 output)."""
    h, w = arr.shape[:2]
    src_r = np.arange(new_h) * ((h - 1) / (new_h - 1)) if new_h > 1 else np.zeros(1)
    src_c = np.arange(new_w) * ((w - 1) / (new_w - 1)) if new_w > 1 else np.zeros(1)
    r0 = np.floor(src_r).astype(np.intp)
    c0 = np.floor(src_c).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    wr = (src_r - r0)[:, None]
    wc = (src_c - c0)[None, :]
    if arr.ndim == 3:
        wr = wr[..., None]
        wc = wc[..., None]
    a = arr.astype(np.float64)
    top = a[r0][:, c0] * (1.0 - wc) + a[r0][:, c1] * wc
    bot = a[r1][:, c0] * (1.0 - wc) + a[r1][:, c1] * wc
    return top * (1.0 - wr) + bot * wr


def resize_bilinear(img, new_width: int, new_height: int):
    """Resize a GrayImage or RgbImage; returns the same kind of image."""
    if new_width < 1 or new_height < 1:
        raise ValueError(f"target dimensions must be >= 1, got {new_width}x{new_height}")
    if new_width == img.width and new_height == img.height:
        return img
    out = _resize_plane(img.pixels, new_width, new_height)
    out = np.clip(_round_half_up(out), 0, 255).astype(np.uint8)
    if isinstance(img, GrayImage):
        return GrayImage(out)
    if isinstance(img, RgbImage):
        return RgbImage(out)
    raise TypeError(f"cannot resize {type(img).__name__}")
