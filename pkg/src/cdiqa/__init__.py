"""Fidelity evaluation for blind image restoration by consistency with
the degraded image, plus the degradation simulator, 2AFC benchmark
harness and annotation service built around it."""

from .cdi import (
    BandStats,
    CdiError,
    CdiScore,
    adaptive_gain,
    attenuate_reference,
    hvs_sigma2,
    mutual_info,
    noise_equiv_gain,
    rgcdi_attenuated_image,
    rgcdi_psnr,
    split_attenuation_noise,
)
from .degrade import (
    DegradationError,
    DegradationSpec,
    apply_degradation,
    deg_psnr,
    gaussian_kernel,
    parse_degradation,
    resize_bicubic,
)
from .image import ImageBuffer, ImageError, load_image, psnr, save_image, ssim, to_luma
from .wavelet import WaveletPyramid, dwt2, idwt2

__version__ = "0.1.0"

__all__ = [
    "BandStats",
    "CdiError",
    "CdiScore",
    "DegradationError",
    "DegradationSpec",
    "ImageBuffer",
    "ImageError",
    "WaveletPyramid",
    "adaptive_gain",
    "apply_degradation",
    "attenuate_reference",
    "deg_psnr",
    "dwt2",
    "gaussian_kernel",
    "hvs_sigma2",
    "idwt2",
    "load_image",
    "mutual_info",
    "noise_equiv_gain",
    "parse_degradation",
    "psnr",
    "resize_bicubic",
    "rgcdi_attenuated_image",
    "rgcdi_psnr",
    "save_image",
    "split_attenuation_noise",
    "ssim",
    "to_luma",
]
