"""Image container, file I/O and pixel-domain metrics (PSNR, SSIM).

Images are planar float64 rasters with values nominally in [0, 1].
Supported file formats are binary PGM (P5), binary PPM (P6) with
maxval 255, and 8-bit PNG. PGM/PPM are parsed directly so fixtures
round-trip bit-exactly; PNG goes through Pillow.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

# Rec.601 luma weights
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# PSNR is capped here: 10*log10(1/1e-10) = 100 dB exactly
PSNR_CAP_DB = 100.0
_MSE_FLOOR = 1e-10


class ImageError(Exception):
    """Raised for malformed image files or incompatible image operands."""


@dataclass(frozen=True)
class ImageBuffer:
    """Planar raster: ``data`` has shape (channels, height, width), float64.

    Samples are nominally in [0, 1] but are only required to be finite;
    intermediate results of linear operations may leave the range.
    """

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[0] not in (1, 3):
            raise ImageError(f"expected (channels, h, w) with 1 or 3 channels, got {d.shape}")
        if d.shape[1] < 1 or d.shape[2] < 1:
            raise ImageError(f"empty image: shape {d.shape}")
        if not np.isfinite(d).all():
            raise ImageError("image contains non-finite samples")
        if d.dtype != np.float64:
            object.__setattr__(self, "data", d.astype(np.float64))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def plane(self, c: int = 0) -> np.ndarray:
        """2-D view of one channel."""
        return self.data[c]

    def clamp(self) -> "ImageBuffer":
        """Copy with all samples clipped to [0, 1]."""
        return ImageBuffer(np.clip(self.data, 0.0, 1.0))

    @staticmethod
    def from_plane(plane: np.ndarray) -> "ImageBuffer":
        """Wrap a 2-D array as a single-channel image."""
        if plane.ndim != 2:
            raise ImageError(f"expected 2-D plane, got shape {plane.shape}")
        return ImageBuffer(np.asarray(plane, dtype=np.float64)[None, :, :])


def to_luma(img: ImageBuffer) -> ImageBuffer:
    """Rec.601 luma; single-channel input is returned unchanged."""
    if img.channels == 1:
        return img
    r, g, b = img.data
    y = _LUMA_WEIGHTS[0] * r + _LUMA_WEIGHTS[1] * g + _LUMA_WEIGHTS[2] * b
    return ImageBuffer.from_plane(y)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def _read_pnm_token(buf: bytes, pos: int, field: str) -> tuple[bytes, int]:
    # skip whitespace and '#' comments
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise ImageError(f"unexpected end of header while reading {field}")
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace():
        pos += 1
    return buf[start:pos], pos


def _parse_pnm(buf: bytes, path: str) -> ImageBuffer:
    magic = buf[:2]
    channels = {b"P5": 1, b"P6": 3}.get(magic)
    if channels is None:
        raise ImageError(f"unsupported magic {magic!r} in {path} (want P5 or P6)")
    pos = 2
    dims = []
    for field in ("width", "height", "maxval"):
        tok, pos = _read_pnm_token(buf, pos, field)
        try:
            dims.append(int(tok))
        except ValueError:
            raise ImageError(f"bad {field} {tok!r} in {path}") from None
    width, height, maxval = dims
    if width <= 0 or height <= 0:
        raise ImageError(f"bad dimensions {width}x{height} in {path}")
    if maxval != 255:
        raise ImageError(f"unsupported maxval {maxval} in {path} (only 255)")
    pos += 1  # single whitespace byte after maxval
    need = width * height * channels
    pixels = buf[pos:pos + need]
    if len(pixels) < need:
        raise ImageError(f"unexpected end of pixel data in {path} "
                         f"(got {len(pixels)} of {need} bytes)")
    arr = np.frombuffer(pixels, dtype=np.uint8).astype(np.float64) / 255.0
    arr = arr.reshape(height, width, channels)
    return ImageBuffer(np.ascontiguousarray(arr.transpose(2, 0, 1)))


def load_image(path: str | os.PathLike) -> ImageBuffer:
    """Load PGM (P5), PPM (P6) or 8-bit PNG; samples are mapped to [0,1] by /255."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
        rest = fh.read()
    buf = head + rest
    if head in (b"P5", b"P6"):
        return _parse_pnm(buf, path)
    if head == b"\x89P":
        from PIL import Image as PILImage

        with PILImage.open(path) as im:
            if im.mode not in ("L", "RGB"):
                if im.mode in ("I;16", "I", "F"):
                    raise ImageError(f"unsupported bit depth (mode {im.mode}) in {path}")
                im = im.convert("RGB" if ("A" in im.mode or im.mode == "P") else "L")
            arr = np.asarray(im, dtype=np.uint8).astype(np.float64) / 255.0
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return ImageBuffer(np.ascontiguousarray(arr.transpose(2, 0, 1)))
    raise ImageError(f"unsupported format magic {head!r} in {path}")


def save_image(img: ImageBuffer, path: str | os.PathLike) -> None:
    """Write as PGM/PPM (by channel count) or PNG if path ends in .png.

    Samples are clipped to [0, 1] and quantized with round(v * 255).
    """
    path = os.fspath(path)
    q = np.clip(np.rint(np.clip(img.data, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    interleaved = np.ascontiguousarray(q.transpose(1, 2, 0))
    if path.lower().endswith(".png"):
        from PIL import Image as PILImage

        mode = "L" if img.channels == 1 else "RGB"
        PILImage.fromarray(interleaved.squeeze(-1) if img.channels == 1 else interleaved,
                           mode=mode).save(path)
        return
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + f"\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(interleaved.tobytes())


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _check_same_shape(a: ImageBuffer, b: ImageBuffer) -> None:
    if a.shape != b.shape:
        raise ImageError(f"image shape mismatch: {a.shape} vs {b.shape}")


def mse(a: ImageBuffer, b: ImageBuffer) -> float:
    _check_same_shape(a, b)
    diff = a.data - b.data
    return float(np.mean(diff * diff))


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """10*log10(1/MSE) with peak 1.0, capped at 100 dB for MSE < 1e-10."""
    m = mse(a, b)
    if m < _MSE_FLOOR:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(1.0 / m))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-0.5 * (coords / sigma) ** 2)
    g /= g.sum()
    return np.outer(g, g)


def ssim(a: ImageBuffer, b: ImageBuffer, *, window_size: int = 11,
         window_sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean local SSIM over an 11x11 Gaussian window, data range 1.0.

    Inputs must be single-channel (callers pass luma) and at least as
    large as the window.
    """
    _check_same_shape(a, b)
    if a.channels != 1:
        raise ImageError(f"ssim expects 1-channel images, got {a.channels}")
    if a.height < window_size or a.width < window_size:
        raise ImageError(f"image {a.width}x{a.height} smaller than "
                         f"{window_size}x{window_size} SSIM window")
    from scipy.signal import fftconvolve

    x = a.plane()
    y = b.plane()
    win = _gaussian_window(window_size, window_sigma)
    c1 = k1 * k1
    c2 = k2 * k2

    mu_x = fftconvolve(x, win, mode="valid")
    mu_y = fftconvolve(y, win, mode="valid")
    xx = fftconvolve(x * x, win, mode="valid") - mu_x * mu_x
    yy = fftconvolve(y * y, win, mode="valid") - mu_y * mu_y
    xy = fftconvolve(x * y, win, mode="valid") - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))
