"""Deterministic synthetic images and restoration surrogates.

Real restoration models are out of scope, so experiments are driven by
two generators:

* :func:`synth_image` builds natural-looking test images (1/f-ish smooth
  background, geometric shapes, mild texture) from a seed.
* :func:`scrambled_detail_restoration` fabricates a plausible restored
  image: it keeps the reference's coarse subbands but replaces the fine
  detail bands with phase-scrambled versions of themselves. The result
  degrades to (almost) the same image as the reference does while its
  fine detail is statistically similar yet pointwise different, which is
  exactly the solution-space behavior generative restorers exhibit.
"""

from __future__ import annotations

import numpy as np

from .image import ImageBuffer
from .wavelet import dwt2, idwt2


def _smooth_field(rng: np.random.Generator, h: int, w: int, cutoff: float) -> np.ndarray:
    """Low-pass filtered white noise (periodic), normalized to [0, 1]."""
    spec = np.fft.rfft2(rng.standard_normal((h, w)))
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    mask = np.exp(-((fx * fx + fy * fy) / (2.0 * cutoff * cutoff)))
    field = np.fft.irfft2(spec * mask, s=(h, w))
    lo, hi = field.min(), field.max()
    return (field - lo) / (hi - lo + 1e-12)


def synth_image(seed: int, height: int = 128, width: int = 128,
                channels: int = 1) -> ImageBuffer:
    """Layered synthetic test image with energy at all scales."""
    rng = np.random.default_rng(seed)
    planes = []
    for _ in range(channels):
        img = 0.55 * _smooth_field(rng, height, width, 0.02) + 0.2
        # a few soft-edged rectangles and disks
        yy, xx = np.mgrid[0:height, 0:width]
        for _ in range(6):
            cy, cx = rng.uniform(0, height), rng.uniform(0, width)
            if rng.random() < 0.5:
                hh, ww = rng.uniform(4, height / 3), rng.uniform(4, width / 3)
                shape = (np.abs(yy - cy) < hh / 2) & (np.abs(xx - cx) < ww / 2)
            else:
                r = rng.uniform(3, min(height, width) / 4)
                shape = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
            img += rng.uniform(-0.35, 0.35) * shape
        # fine texture
        img += 0.05 * _smooth_field(rng, height, width, 0.25)
        img += 0.015 * rng.standard_normal((height, width))
        planes.append(np.clip(img, 0.0, 1.0))
    return ImageBuffer(np.stack(planes))


def phase_scramble(band: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Randomize the Fourier phase of a real array, keeping magnitudes."""
    spec = np.fft.rfft2(band)
    noise_phase = np.angle(np.fft.rfft2(rng.standard_normal(band.shape)))
    scrambled = np.fft.irfft2(np.abs(spec) * np.exp(1j * noise_phase), s=band.shape)
    return scrambled


def scrambled_detail_restoration(ref: ImageBuffer, seed: int, levels: int = 4,
                                 scramble_levels: int = 2) -> ImageBuffer:
    """Restoration surrogate: coarse structure of ``ref``, invented fine detail.

    The finest ``scramble_levels`` detail levels are phase-scrambled in
    place (energy preserved), so the output is consistent with any
    degradation that discards those scales.
    """
    if ref.channels != 1:
        raise ValueError("pass a single-channel (luma) reference")
    rng = np.random.default_rng(seed)
    pyr = dwt2(ref, levels)

    def maybe_scramble(name: str, band: np.ndarray) -> np.ndarray:
        if name == "LL":
            return band
        level = int(name[1:name.index(".")])
        if level <= scramble_levels:
            return phase_scramble(band, rng)
        return band

    return idwt2(pyr.map_bands(maybe_scramble))
