"""Seedable degradation operators behind a small parsed DSL.

A degradation spec is a pipe-separated chain of stages, e.g.::

    blur(sigma=5,size=9)|down(factor=4)|noise(sigma=50,seed=7)|jpeg(qf=10)

Stages:

* ``blur(sigma=S[,size=K])`` -- normalized Gaussian kernel, reflect-padded
  convolution. Default size is ``2*ceil(3*sigma)+1``.
* ``down(factor=F[,method=bicubic])`` -- Catmull-Rom (a=-0.5) downsampling
  by an integer factor; output dimensions floor.
* ``noise(sigma=S[,seed=N])`` -- additive Gaussian noise with standard
  deviation S/255 (S is on the 8-bit scale). The generator is counter
  based and fully deterministic: each sample is produced by Box-Muller
  from two SplitMix64 hashes of (diffused seed XOR sample counter), so
  the output is reproducible byte-for-byte for a given (seed, shape).
* ``jpeg(qf=Q)`` -- per-8x8-block DCT-II, quantization by the standard
  luminance table scaled with the conventional quality mapping
  (5000/QF below 50, else 200-2*QF), dequantization, inverse DCT.

The whole chain is pure: identical (image, spec) inputs give bit-identical
outputs. The final result is clamped to [0, 1]; intermediate stages run
on unclamped floats.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.fft import dctn, idctn

from .image import ImageBuffer, psnr


class DegradationError(Exception):
    """Base class for degradation DSL and operator errors."""


class DegradationSyntaxError(DegradationError):
    """Malformed spec text; carries the byte offset and the expected token."""

    def __init__(self, offset: int, expected: str):
        self.offset = offset
        self.expected = expected
        super().__init__(f"parse error at offset {offset}: expected {expected}")


class DegradationValueError(DegradationError):
    """Well-formed spec text with out-of-range or unknown values."""


# ---------------------------------------------------------------------------
# Stage types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Blur:
    sigma: float
    size: int

    def __post_init__(self):
        if not (self.sigma > 0):
            raise DegradationValueError(f"blur sigma must be > 0, got {self.sigma}")
        if self.size < 3 or self.size % 2 == 0:
            raise DegradationValueError(f"blur size must be odd and >= 3, got {self.size}")

    def to_text(self) -> str:
        return f"blur(sigma={_fmt(self.sigma)},size={self.size})"


@dataclass(frozen=True)
class Down:
    factor: int

    def __post_init__(self):
        if self.factor < 2:
            raise DegradationValueError(f"down factor must be >= 2, got {self.factor}")

    def to_text(self) -> str:
        return f"down(factor={self.factor})"


@dataclass(frozen=True)
class Noise:
    sigma255: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma255 < 0:
            raise DegradationValueError(f"noise sigma must be >= 0, got {self.sigma255}")
        if self.seed < 0:
            raise DegradationValueError(f"noise seed must be unsigned, got {self.seed}")

    def to_text(self) -> str:
        return f"noise(sigma={_fmt(self.sigma255)},seed={self.seed})"


@dataclass(frozen=True)
class Jpeg:
    qf: int

    def __post_init__(self):
        if not (1 <= self.qf <= 100):
            raise DegradationValueError(f"jpeg qf must be in 1..100, got {self.qf}")

    def to_text(self) -> str:
        return f"jpeg(qf={self.qf})"


Stage = Blur | Down | Noise | Jpeg


@dataclass(frozen=True)
class DegradationSpec:
    stages: tuple[Stage, ...]

    def __post_init__(self):
        if not self.stages:
            raise DegradationValueError("degradation spec needs at least one stage")

    def to_text(self) -> str:
        return "|".join(s.to_text() for s in self.stages)


def default_blur_size(sigma: float) -> int:
    size = 2 * math.ceil(3.0 * sigma) + 1
    return size if size % 2 == 1 else size + 1


def _fmt(v: float) -> str:
    return format(v, "g")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, expected: str):
        raise DegradationSyntaxError(self.pos, expected)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch: str):
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            self.fail(f"'{ch}'")
        self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def ident(self, what: str) -> tuple[str, int]:
        self.skip_ws()
        m = _IDENT_RE.match(self.text, self.pos)
        if m is None:
            self.fail(what)
        self.pos = m.end()
        return m.group(0), m.start()

    def number(self) -> float:
        self.skip_ws()
        m = _NUMBER_RE.match(self.text, self.pos)
        if m is None:
            self.fail("number")
        self.pos = m.end()
        return float(m.group(0))


def _require_int(value: float, what: str) -> int:
    if value != int(value):
        raise DegradationValueError(f"{what} must be an integer, got {value}")
    return int(value)


def _parse_stage(p: _Parser) -> Stage:
    name, name_off = p.ident("stage name")
    p.expect("(")
    kv: dict[str, float | str] = {}
    while True:
        key, key_off = p.ident("parameter name")
        if key in kv:
            raise DegradationValueError(f"duplicate key '{key}' at offset {key_off}")
        p.expect("=")
        if name == "down" and key == "method":
            value, _ = p.ident("method name")
        else:
            value = p.number()
        kv[key] = value
        if p.peek() == ",":
            p.expect(",")
            continue
        break
    p.expect(")")
    return _build_stage(name, name_off, kv)


def _build_stage(name: str, name_off: int, kv: dict) -> Stage:
    def take(key, default=None):
        return kv.pop(key, default)

    if name == "blur":
        sigma = take("sigma")
        if sigma is None:
            raise DegradationValueError("blur requires sigma")
        size = take("size")
        stage = Blur(float(sigma),
                     default_blur_size(float(sigma)) if size is None
                     else _require_int(size, "blur size"))
    elif name == "down":
        factor = take("factor")
        if factor is None:
            raise DegradationValueError("down requires factor")
        method = take("method", "bicubic")
        if method != "bicubic":
            raise DegradationValueError(f"unsupported down method '{method}'")
        stage = Down(_require_int(factor, "down factor"))
    elif name == "noise":
        sigma = take("sigma")
        if sigma is None:
            raise DegradationValueError("noise requires sigma")
        seed = take("seed", 0)
        stage = Noise(float(sigma), _require_int(seed, "noise seed"))
    elif name == "jpeg":
        qf = take("qf")
        if qf is None:
            raise DegradationValueError("jpeg requires qf")
        stage = Jpeg(_require_int(qf, "jpeg qf"))
    else:
        raise DegradationValueError(f"unknown stage '{name}' at offset {name_off}")
    if kv:
        raise DegradationValueError(f"unknown key '{next(iter(kv))}' for stage '{name}'")
    return stage


def parse_degradation(spec_text: str) -> DegradationSpec:
    """Parse the degradation mini-DSL; see the module docstring for the grammar."""
    p = _Parser(spec_text)
    stages = [_parse_stage(p)]
    while p.peek() == "|":
        p.expect("|")
        stages.append(_parse_stage(p))
    p.skip_ws()
    if p.pos != len(p.text):
        p.fail("'|' or end of spec")
    return DegradationSpec(tuple(stages))


# ---------------------------------------------------------------------------
# Kernels and convolution
# ---------------------------------------------------------------------------

def gaussian_kernel(sigma: float, size: int) -> np.ndarray:
    """Normalized 2-D Gaussian sampled on the centered integer grid."""
    if size % 2 == 0 or size < 3:
        raise DegradationValueError(f"kernel size must be odd and >= 3, got {size}")
    if not (sigma > 0):
        raise DegradationValueError(f"kernel sigma must be > 0, got {sigma}")
    r = size // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def conv2_reflect(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Correlate with half-sample symmetric ("reflect") padding.

    For the centro-symmetric kernels used here this equals convolution,
    and the resulting linear operator is exactly self-adjoint, which the
    gradient-based solvers rely on.
    """
    kh, kw = kernel.shape
    h, w = plane.shape
    if kh > h or kw > w:
        raise DegradationValueError(
            f"kernel {kh}x{kw} larger than image {h}x{w}")
    return ndimage.correlate(plane, kernel, mode="reflect")


# ---------------------------------------------------------------------------
# Bicubic (Catmull-Rom) resampling
# ---------------------------------------------------------------------------

def _catmull_rom(t: np.ndarray) -> np.ndarray:
    at = np.abs(t)
    near = ((1.5 * at - 2.5) * at) * at + 1.0
    far = ((-0.5 * at + 2.5) * at - 4.0) * at + 2.0
    return np.where(at <= 1.0, near, np.where(at < 2.0, far, 0.0))


def _fold_indices(idx: np.ndarray, n: int) -> np.ndarray:
    # half-sample symmetric extension, consistent with conv2_reflect
    idx = np.where(idx < 0, -1 - idx, idx)
    idx = np.where(idx >= n, 2 * n - 1 - idx, idx)
    return np.clip(idx, 0, n - 1)


def _resample_axis(arr: np.ndarray, out_n: int, scale: float, axis: int) -> np.ndarray:
    in_n = arr.shape[axis]
    filt = max(scale, 1.0)  # widen the kernel when minifying (antialias)
    centers = (np.arange(out_n) + 0.5) * scale - 0.5
    radius = 2.0 * filt
    lo = np.ceil(centers - radius).astype(np.int64)
    ntaps = int(np.floor(radius * 2)) + 2
    offsets = np.arange(ntaps)
    idx = lo[:, None] + offsets[None, :]
    weights = _catmull_rom((idx - centers[:, None]) / filt)
    weights /= weights.sum(axis=1, keepdims=True)
    idx = _fold_indices(idx, in_n)

    moved = np.moveaxis(arr, axis, 0)
    out = np.einsum("ot,ot...->o...", weights, moved[idx])
    return np.moveaxis(out, 0, axis)


def resize_bicubic(img: ImageBuffer, out_height: int, out_width: int) -> ImageBuffer:
    """Catmull-Rom resampling to arbitrary dimensions (antialiased when shrinking)."""
    if out_height < 1 or out_width < 1:
        raise DegradationValueError(f"bad target size {out_width}x{out_height}")
    data = img.data
    data = _resample_axis(data, out_height, img.height / out_height, axis=1)
    data = _resample_axis(data, out_width, img.width / out_width, axis=2)
    return ImageBuffer(data)


def _downsample(data: np.ndarray, factor: int) -> np.ndarray:
    h, w = data.shape[1], data.shape[2]
    oh, ow = h // factor, w // factor
    if oh == 0 or ow == 0:
        raise DegradationValueError(
            f"down(factor={factor}) reduces {w}x{h} to zero size")
    data = _resample_axis(data, oh, float(factor), axis=1)
    data = _resample_axis(data, ow, float(factor), axis=2)
    return data


# ---------------------------------------------------------------------------
# Deterministic counter-based Gaussian noise
# ---------------------------------------------------------------------------

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z + _SM_GAMMA).astype(np.uint64)
    z = ((z ^ (z >> np.uint64(30))) * _SM_M1).astype(np.uint64)
    z = ((z ^ (z >> np.uint64(27))) * _SM_M2).astype(np.uint64)
    return z ^ (z >> np.uint64(31))


def standard_normal_field(seed: int, count: int) -> np.ndarray:
    """``count`` unit Gaussians; sample i depends only on (seed, i).

    Construction: diffuse the seed once with SplitMix64, hash counters
    2i+1 and 2i+2 XORed with the diffused seed, map the pair through
    Box-Muller. Counter-based, so any sample can be regenerated alone.
    """
    with np.errstate(over="ignore"):
        base = _splitmix64(np.uint64(seed))
        idx = np.arange(count, dtype=np.uint64)
        h1 = _splitmix64(base ^ (np.uint64(2) * idx + np.uint64(1)))
        h2 = _splitmix64(base ^ (np.uint64(2) * idx + np.uint64(2)))
    # 53-bit mantissas; +1 keeps u1 in (0, 1] so log never sees zero
    u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    u2 = (h2 >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _add_noise(data: np.ndarray, stage: Noise) -> np.ndarray:
    field = standard_normal_field(stage.seed, data.size).reshape(data.shape)
    return data + (stage.sigma255 / 255.0) * field


# ---------------------------------------------------------------------------
# JPEG-style DCT quantization
# ---------------------------------------------------------------------------

# ITU-T81 Annex K.1 luminance table
_JPEG_LUMA_QT = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)


def jpeg_quant_table(qf: int) -> np.ndarray:
    """Luminance quantization table at the given quality factor."""
    if not (1 <= qf <= 100):
        raise DegradationValueError(f"jpeg qf must be in 1..100, got {qf}")
    scale = 5000.0 / qf if qf < 50 else 200.0 - 2.0 * qf
    table = np.floor((_JPEG_LUMA_QT * scale + 50.0) / 100.0)
    return np.clip(table, 1.0, 255.0)


def _jpeg_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    ph, pw = (-h) % 8, (-w) % 8
    padded = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    v = padded * 255.0 - 128.0
    nh, nw = v.shape[0] // 8, v.shape[1] // 8
    blocks = v.reshape(nh, 8, nw, 8).transpose(0, 2, 1, 3)
    coeffs = dctn(blocks, axes=(2, 3), norm="ortho")
    coeffs = np.rint(coeffs / table) * table
    rec = idctn(coeffs, axes=(2, 3), norm="ortho")
    rec = rec.transpose(0, 2, 1, 3).reshape(nh * 8, nw * 8)
    return (rec[:h, :w] + 128.0) / 255.0


def _apply_jpeg(data: np.ndarray, stage: Jpeg) -> np.ndarray:
    table = jpeg_quant_table(stage.qf)
    return np.stack([_jpeg_plane(p, table) for p in data])


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def _apply_stage(data: np.ndarray, stage: Stage) -> np.ndarray:
    if isinstance(stage, Blur):
        kernel = gaussian_kernel(stage.sigma, stage.size)
        return np.stack([conv2_reflect(p, kernel) for p in data])
    if isinstance(stage, Down):
        return _downsample(data, stage.factor)
    if isinstance(stage, Noise):
        return _add_noise(data, stage)
    if isinstance(stage, Jpeg):
        return _apply_jpeg(data, stage)
    raise DegradationError(f"unhandled stage {stage!r}")


def apply_degradation(img: ImageBuffer, spec: DegradationSpec | str) -> ImageBuffer:
    """Run every stage in order; the final result is clamped to [0, 1]."""
    if isinstance(spec, str):
        spec = parse_degradation(spec)
    data = img.data
    for stage in spec.stages:
        data = _apply_stage(data, stage)
    return ImageBuffer(np.clip(data, 0.0, 1.0))


def deg_psnr(restored: ImageBuffer, degraded: ImageBuffer,
             spec: DegradationSpec | str) -> float:
    """PSNR between the re-degraded restored image and the degraded image."""
    return psnr(apply_degradation(restored, spec), degraded)
