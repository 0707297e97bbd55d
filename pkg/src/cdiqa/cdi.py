"""Wavelet-domain consistency scoring with the degraded image.

The degraded image's subbands are modeled as ``y = mu_A * x + n_D``: a
per-band attenuation of the reference plus additive Gaussian noise.
Splitting the two is plain least squares on uncentered second moments.
The noise is then exchanged for the extra attenuation ``mu_D`` that costs
a human observer the same amount of transmitted information, giving a
noise-free "attenuated reference" ``mu_A * mu_D * x`` per band. A restored
image is scored by attenuating each of its subbands with the least-squares
gain ``mu_M`` that best matches the attenuated reference, reconstructing
both to the pixel domain, and taking PSNR.

Covariances here are uncentered second moments taken over a whole subband,
which makes the idempotency and cascade identities of the attenuation
operator hold to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .degrade import resize_bicubic
from .image import ImageBuffer, psnr, to_luma
from .wavelet import WaveletPyramid, dwt2, idwt2

#: floor for the HVS noise variance (keeps every division defined)
SIGMA_H2_FLOOR = 1e-12

#: bands with uncentered energy below this are treated as flat
FLAT_BAND_EPS = 1e-12

# The attenuation pipeline re-splits its own nearly-dead targets when the
# operator is composed; zeroing those at the 1e-12 threshold would inject
# errors around sqrt(1e-12). A far deeper cutoff keeps composition exact
# to ~1e-15 while still guarding the divisions.
_PIPELINE_FLAT_EPS = 1e-30

DEFAULT_LAMBDA = 0.3
DEFAULT_LEVELS = 4


class CdiError(Exception):
    """Raised for incompatible inputs to the consistency pipeline."""


@dataclass(frozen=True)
class BandStats:
    """Per-subband splitting and attenuation diagnostics."""

    band: str
    mu_A: float          # attenuation gain of the degraded band
    sigma_D2: float      # separated noise variance (>= 0)
    sigma_H2: float      # HVS noise variance (floored)
    mu_D: float          # noise-equivalent extra attenuation, in (0, 1]
    cov_xx: float
    cov_yy: float
    cov_xy: float
    mu_M: float | None = None  # adaptive gain of the restored band

    def to_json_dict(self) -> dict:
        d = {
            "band": self.band,
            "mu_A": self.mu_A,
            "sigma_D2": self.sigma_D2,
            "sigma_H2": self.sigma_H2,
            "mu_D": self.mu_D,
            "cov_xx": self.cov_xx,
            "cov_yy": self.cov_yy,
            "cov_xy": self.cov_xy,
        }
        if self.mu_M is not None:
            d["mu_M"] = self.mu_M
        return d


@dataclass(frozen=True)
class CdiScore:
    rgcdi_psnr: float
    per_band: tuple[BandStats, ...]
    lam: float
    levels: int

    def to_json_dict(self) -> dict:
        return {
            "v": 1,
            "rgcdi_psnr": self.rgcdi_psnr,
            "lambda": self.lam,
            "levels": self.levels,
            "bands": [b.to_json_dict() for b in self.per_band],
        }


def _ucov(a: np.ndarray, b: np.ndarray) -> float:
    """Uncentered second moment (1/N) sum(a*b) over a whole band."""
    return float(np.dot(a.ravel(), b.ravel())) / a.size


def split_attenuation_noise(x_band: np.ndarray, y_band: np.ndarray) -> tuple[float, float]:
    """Least-squares split of a degraded band into gain and noise variance.

    Returns (mu_A, sigma_D2) with sigma_D2 clamped at zero. A flat
    reference band yields mu_A = 0 and sigma_D2 = the band's energy.
    """
    if x_band.size != y_band.size:
        raise CdiError(f"band length mismatch: {x_band.size} vs {y_band.size}")
    cov_xx = _ucov(x_band, x_band)
    cov_yy = _ucov(y_band, y_band)
    if cov_xx < FLAT_BAND_EPS:
        return 0.0, cov_yy
    cov_xy = _ucov(y_band, x_band)
    mu_a = cov_xy / cov_xx
    return mu_a, max(0.0, cov_yy - mu_a * cov_xy)


def hvs_sigma2(mu_A: float, cov_xx: float, lam: float) -> float:
    """HVS noise variance, scaled to the attenuated band's dynamic range."""
    if not (lam > 0):
        raise CdiError(f"lambda must be > 0, got {lam}")
    return max(SIGMA_H2_FLOOR, lam * mu_A * mu_A * cov_xx)


def noise_equiv_gain(sigma_D2: float, sigma_H2: float) -> float:
    """The gain 1/sqrt(1 + sigma_D2/sigma_H2) that loses as much HVS
    information as the additive noise would."""
    if sigma_H2 < SIGMA_H2_FLOOR:
        raise CdiError(f"sigma_H2 below floor: {sigma_H2}")
    return 1.0 / math.sqrt(1.0 + sigma_D2 / sigma_H2)


def mutual_info(cov_xx: float, mu_A: float, sigma_D2: float, sigma_H2: float,
                variant: int) -> float:
    """Scalar HVS mutual information, in nats.

    variant 1: clean signal through the noisy HVS channel
    variant 2: attenuated signal (gain mu_A)
    variant 3: noisy signal (additive variance sigma_D2)
    variant 4: noise replaced by its equivalent attenuation

    Variants 3 and 4 are algebraically identical.
    """
    if sigma_H2 <= 0:
        raise CdiError(f"sigma_H2 must be > 0, got {sigma_H2}")
    if sigma_D2 < 0 or cov_xx < 0:
        raise CdiError("variances must be non-negative")
    c, h, d = cov_xx, sigma_H2, sigma_D2
    # log1p keeps full relative precision when the channel adds little
    # information (signal far below the noise floor)
    if variant == 1:
        return math.log1p(c / h)
    if variant == 2:
        return math.log1p(mu_A * mu_A * c / h)
    if variant == 3:
        return math.log1p(c / (d + h))
    if variant == 4:
        mu_d = noise_equiv_gain(d, h)
        return math.log1p(c * mu_d * mu_d / h)
    raise CdiError(f"unknown mutual information variant {variant}")


def adaptive_gain(xhat_band: np.ndarray, target_band: np.ndarray) -> float:
    """Gain minimizing ||g * xhat - target||^2 (uncentered least squares)."""
    if xhat_band.size != target_band.size:
        raise CdiError(f"band length mismatch: {xhat_band.size} vs {target_band.size}")
    cov_hh = _ucov(xhat_band, xhat_band)
    if cov_hh < FLAT_BAND_EPS:
        return 0.0
    return _ucov(xhat_band, target_band) / cov_hh


def band_split_stats(name: str, x_band: np.ndarray, y_band: np.ndarray,
                     lam: float) -> BandStats:
    """Full splitting record for one subband pair."""
    cov_xx = _ucov(x_band, x_band)
    cov_yy = _ucov(y_band, y_band)
    cov_xy = _ucov(y_band, x_band)
    if cov_xx < _PIPELINE_FLAT_EPS:
        mu_a, sigma_d2 = 0.0, cov_yy
    else:
        mu_a = cov_xy / cov_xx
        sigma_d2 = max(0.0, cov_yy - mu_a * cov_xy)
    sigma_h2 = hvs_sigma2(mu_a, cov_xx, lam)
    mu_d = noise_equiv_gain(sigma_d2, sigma_h2)
    return BandStats(name, mu_a, sigma_d2, sigma_h2, mu_d, cov_xx, cov_yy, cov_xy)


def attenuate_reference(x_pyr: WaveletPyramid, y_pyr: WaveletPyramid,
                        lam: float = DEFAULT_LAMBDA,
                        ) -> tuple[WaveletPyramid, list[BandStats]]:
    """Per-band noise removal plus noise-equivalent attenuation.

    Each target band is ``mu_A * mu_D * x_band``: the reference band scaled
    to carry exactly the information the degraded band transmits.
    """
    if not x_pyr.same_shape(y_pyr):
        raise CdiError("pyramid shape mismatch between reference and degraded")
    stats: list[BandStats] = []
    y_bands = dict(y_pyr.bands())

    def attenuate(name: str, x_band: np.ndarray) -> np.ndarray:
        st = band_split_stats(name, x_band, y_bands[name], lam)
        stats.append(st)
        return st.mu_A * st.mu_D * x_band

    target = x_pyr.map_bands(attenuate)
    return target, stats


def _luma_aligned_pair(ref: ImageBuffer, degraded: ImageBuffer) -> tuple[ImageBuffer, ImageBuffer]:
    x_img = to_luma(ref)
    y_img = to_luma(degraded)
    if (degraded.height, degraded.width) != (ref.height, ref.width):
        y_img = resize_bicubic(y_img, ref.height, ref.width)
    return x_img, y_img


def rgcdi_attenuated_image(ref: ImageBuffer, degraded: ImageBuffer,
                           lam: float = DEFAULT_LAMBDA, levels: int = DEFAULT_LEVELS,
                           ) -> ImageBuffer:
    """Pixel-domain attenuated reference (degraded upsampled back if needed)."""
    target, _ = _attenuated_pyramid(ref, degraded, lam, levels)
    return idwt2(target)


def _attenuated_pyramid(ref: ImageBuffer, degraded: ImageBuffer, lam: float,
                        levels: int) -> tuple[WaveletPyramid, list[BandStats]]:
    x_img, y_img = _luma_aligned_pair(ref, degraded)
    x_pyr = dwt2(x_img, levels)
    y_pyr = dwt2(y_img, levels)
    if all(_ucov(b, b) < FLAT_BAND_EPS for _, b in x_pyr.bands()[:-1]):
        raise CdiError("degenerate reference: every detail band is flat")
    return attenuate_reference(x_pyr, y_pyr, lam)


def score_against_attenuated(restored_luma: ImageBuffer, attenuated: ImageBuffer,
                             levels: int = DEFAULT_LEVELS,
                             ) -> tuple[float, dict[str, float]]:
    """Score a restored image against a pixel-domain attenuated reference.

    Both the reference-guided and the reference-agnostic scores funnel
    through this function, so a predictor that reproduces the attenuated
    reference reproduces the reference-guided score bit for bit.
    """
    t_pyr = dwt2(attenuated, levels)
    xh_pyr = dwt2(restored_luma, levels)
    if not t_pyr.same_shape(xh_pyr):
        raise CdiError(
            f"restored image {restored_luma.width}x{restored_luma.height} is not "
            f"compatible with attenuated reference {attenuated.width}x{attenuated.height}")
    t_bands = dict(t_pyr.bands())
    gains: dict[str, float] = {}

    def scale(name: str, xh_band: np.ndarray) -> np.ndarray:
        g = adaptive_gain(xh_band, t_bands[name])
        gains[name] = g
        return g * xh_band

    scored = xh_pyr.map_bands(scale)
    return psnr(idwt2(scored), idwt2(t_pyr)), gains


def rgcdi_psnr(ref: ImageBuffer, degraded: ImageBuffer, restored: ImageBuffer,
               lam: float = DEFAULT_LAMBDA, levels: int = DEFAULT_LEVELS) -> CdiScore:
    """Reference-guided consistency score between a restored image and the
    degraded image it should explain."""
    if (ref.height, ref.width) != (restored.height, restored.width):
        raise CdiError(
            f"reference {ref.width}x{ref.height} and restored "
            f"{restored.width}x{restored.height} dimensions differ")
    target, stats = _attenuated_pyramid(ref, degraded, lam, levels)
    attenuated = idwt2(target)
    score, gains = score_against_attenuated(to_luma(restored), attenuated, levels)
    per_band = tuple(replace(st, mu_M=gains[st.band]) for st in stats)
    return CdiScore(score, per_band, lam, levels)
