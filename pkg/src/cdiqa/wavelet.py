"""Orthonormal 2-D Haar wavelet decomposition and exact inverse.

The analysis filters are (1/sqrt(2), 1/sqrt(2)) and (1/sqrt(2), -1/sqrt(2)),
applied separably and recursively to the LL band. Because the basis is
orthonormal, total coefficient energy equals pixel energy and coefficient
L2 distances equal pixel L2 distances (both used heavily by callers).

Images whose dimensions are not divisible by 2**levels are center-cropped
first; the crop is recorded on the pyramid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import ImageBuffer

_SQRT2 = np.sqrt(2.0)


class WaveletError(Exception):
    """Raised for structurally invalid pyramids or impossible decompositions."""


@dataclass
class WaveletPyramid:
    """Multi-level Haar decomposition of one channel.

    ``details[k]`` holds the (LH, HL, HH) bands of level k+1, where level 1
    is the finest scale. ``approx`` is the LL band at the coarsest level.
    LH carries horizontal detail (lowpass rows / highpass columns), HL the
    transpose, HH the diagonal.
    """

    levels: int
    approx: np.ndarray
    details: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    original_dims: tuple[int, int] = (0, 0)  # (width, height) before cropping
    crop_offset: tuple[int, int] = (0, 0)    # (left, top)

    def band_names(self) -> list[str]:
        names = [f"L{lv}.{b}" for lv in range(1, self.levels + 1) for b in ("LH", "HL", "HH")]
        names.append("LL")
        return names

    def bands(self) -> list[tuple[str, np.ndarray]]:
        """All subbands as (name, array), finest detail first, LL last."""
        out = []
        for lv, (lh, hl, hh) in enumerate(self.details, start=1):
            out += [(f"L{lv}.LH", lh), (f"L{lv}.HL", hl), (f"L{lv}.HH", hh)]
        out.append(("LL", self.approx))
        return out

    def same_shape(self, other: "WaveletPyramid") -> bool:
        if self.levels != other.levels or self.approx.shape != other.approx.shape:
            return False
        return all(
            a.shape == b.shape
            for da, db in zip(self.details, other.details)
            for a, b in zip(da, db)
        )

    def map_bands(self, fn) -> "WaveletPyramid":
        """New pyramid with ``fn(name, band) -> band`` applied to every subband."""
        details = []
        for lv, (lh, hl, hh) in enumerate(self.details, start=1):
            details.append((fn(f"L{lv}.LH", lh), fn(f"L{lv}.HL", hl), fn(f"L{lv}.HH", hh)))
        return WaveletPyramid(self.levels, fn("LL", self.approx), details,
                              self.original_dims, self.crop_offset)

    def coeff_vector(self) -> np.ndarray:
        """All coefficients concatenated (fixed band order)."""
        return np.concatenate([b.ravel() for _, b in self.bands()])

    def energy(self) -> float:
        return float(sum(np.sum(b * b) for _, b in self.bands()))


def _haar_analyze(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    # rows (vertical pairing), then columns (horizontal pairing)
    lo_r = (plane[0::2, :] + plane[1::2, :]) / _SQRT2
    hi_r = (plane[0::2, :] - plane[1::2, :]) / _SQRT2
    ll = (lo_r[:, 0::2] + lo_r[:, 1::2]) / _SQRT2
    lh = (lo_r[:, 0::2] - lo_r[:, 1::2]) / _SQRT2
    hl = (hi_r[:, 0::2] + hi_r[:, 1::2]) / _SQRT2
    hh = (hi_r[:, 0::2] - hi_r[:, 1::2]) / _SQRT2
    return ll, lh, hl, hh


def _haar_synthesize(ll, lh, hl, hh) -> np.ndarray:
    h2, w2 = ll.shape
    lo_r = np.empty((h2, 2 * w2))
    lo_r[:, 0::2] = (ll + lh) / _SQRT2
    lo_r[:, 1::2] = (ll - lh) / _SQRT2
    hi_r = np.empty((h2, 2 * w2))
    hi_r[:, 0::2] = (hl + hh) / _SQRT2
    hi_r[:, 1::2] = (hl - hh) / _SQRT2
    out = np.empty((2 * h2, 2 * w2))
    out[0::2, :] = (lo_r + hi_r) / _SQRT2
    out[1::2, :] = (lo_r - hi_r) / _SQRT2
    return out


def crop_to_multiple(width: int, height: int, levels: int) -> tuple[int, int, int, int]:
    """(left, top, cropped_width, cropped_height) centering a 2**levels-aligned crop."""
    m = 1 << levels
    cw = (width // m) * m
    ch = (height // m) * m
    if cw == 0 or ch == 0:
        raise WaveletError(f"image {width}x{height} too small for {levels} levels")
    return (width - cw) // 2, (height - ch) // 2, cw, ch


def dwt2(img: ImageBuffer, levels: int = 4) -> WaveletPyramid:
    """Multi-level orthonormal Haar analysis of a single-channel image."""
    if img.channels != 1:
        raise WaveletError(f"dwt2 expects a 1-channel image, got {img.channels}")
    if levels < 1:
        raise WaveletError(f"levels must be >= 1, got {levels}")
    left, top, cw, ch = crop_to_multiple(img.width, img.height, levels)
    plane = img.plane()[top:top + ch, left:left + cw]
    details = []
    ll = plane
    for _ in range(levels):
        ll, lh, hl, hh = _haar_analyze(ll)
        details.append((lh, hl, hh))
    return WaveletPyramid(levels, ll, details, (img.width, img.height), (left, top))


def idwt2(pyr: WaveletPyramid) -> ImageBuffer:
    """Exact inverse of :func:`dwt2` on the cropped domain."""
    ll = pyr.approx
    for lh, hl, hh in reversed(pyr.details):
        if not (ll.shape == lh.shape == hl.shape == hh.shape):
            raise WaveletError(
                f"inconsistent band dimensions: LL {ll.shape}, "
                f"details {lh.shape}/{hl.shape}/{hh.shape}")
        ll = _haar_synthesize(ll, lh, hl, hh)
    return ImageBuffer.from_plane(ll)
