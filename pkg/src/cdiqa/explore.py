"""Gradient-descent exploration of the restoration solution space.

Two experiments, both minimizing a blur-consistency data term plus a
proximity regularizer with plain gradient descent:

* :func:`explore_nonunique` starts from different initial images and
  produces visually distinct results that degrade to (almost) the same
  image — the restoration problem has many valid solutions.
* :func:`explore_indeterminate` blurs with one kernel and inverts with a
  slightly different one — mismatched degradation parameters still admit
  valid solutions, so the true parameters cannot be pinned down from the
  degraded image alone.

The loss is ``||conv(xhat, k) - y||^2 + lambda_reg * ||xhat - anchor||^2``
(squared norms; the unsquared data term has the same minimizers but a
non-smooth gradient). Convolution uses the same reflect padding as the
degradation operators; that operator is self-adjoint for the symmetric
kernels used here, so the gradient below is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .degrade import conv2_reflect, deg_psnr, gaussian_kernel
from .image import ImageBuffer, psnr


class ExplorerError(Exception):
    """Raised on invalid setups or diverging descent."""


@dataclass(frozen=True)
class ExploreResult:
    image: ImageBuffer
    final_loss: float
    deg_psnr_vs_input: float
    psnr_vs_init: float
    iterations: int

    def to_json_dict(self) -> dict:
        return {
            "v": 1,
            "final_loss": self.final_loss,
            "deg_psnr_vs_input": self.deg_psnr_vs_input,
            "psnr_vs_init": self.psnr_vs_init,
            "iterations": self.iterations,
        }


def loss_and_grad(xhat: ImageBuffer, y: ImageBuffer, kernel: np.ndarray,
                  x0: ImageBuffer, lambda_reg: float) -> tuple[float, ImageBuffer]:
    """Loss and its exact gradient for one-channel images."""
    if lambda_reg <= 0:
        raise ExplorerError(f"lambda_reg must be > 0, got {lambda_reg}")
    if xhat.shape != y.shape or xhat.shape != x0.shape:
        raise ExplorerError("image dimensions are inconsistent")
    xh = xhat.plane()
    residual = conv2_reflect(xh, kernel) - y.plane()
    prox = xh - x0.plane()
    loss = float(np.sum(residual * residual)) + lambda_reg * float(np.sum(prox * prox))
    grad = 2.0 * conv2_reflect(residual, kernel) + 2.0 * lambda_reg * prox
    return loss, ImageBuffer.from_plane(grad)


def _descend(y: ImageBuffer, kernel: np.ndarray, init: ImageBuffer,
             anchor: ImageBuffer, lambda_reg: float, steps: int,
             step_size: float) -> tuple[np.ndarray, float, int]:
    if steps < 1:
        raise ExplorerError(f"steps must be >= 1, got {steps}")
    x = init.plane().copy()
    loss, grad = loss_and_grad(ImageBuffer.from_plane(x), y, kernel, anchor, lambda_reg)
    step = step_size
    accepted = 0
    for it in range(steps):
        trial = x - step * grad.plane()
        trial_loss, trial_grad = loss_and_grad(
            ImageBuffer.from_plane(trial), y, kernel, anchor, lambda_reg)
        if not np.isfinite(trial_loss):
            raise ExplorerError(f"gradient descent diverged at iteration {it}")
        if trial_loss > loss:
            step *= 0.5  # backtrack: reject and retry smaller
            continue
        x, loss, grad = trial, trial_loss, trial_grad
        accepted += 1
    return x, loss, accepted


def explore_nonunique(y: ImageBuffer, kernel: np.ndarray, init: ImageBuffer,
                      lambda_reg: float = 0.005, steps: int = 500,
                      step_size: float = 0.5) -> ExploreResult:
    """Pull an initial guess onto the blur-consistent solution manifold.

    The regularizer anchors the result near ``init``, so distinct inits
    land on distinct, equally consistent restorations.
    """
    if y.channels != 1 or init.channels != 1:
        raise ExplorerError("exploration operates on single-channel images")
    if init.shape != y.shape:
        raise ExplorerError("init dimensions must match the degraded image")
    x, loss, accepted = _descend(y, kernel, init, init, lambda_reg, steps, step_size)
    result = ImageBuffer(np.clip(x, 0.0, 1.0)[None])
    consistency = psnr(ImageBuffer.from_plane(conv2_reflect(result.plane(), kernel)), y)
    return ExploreResult(result, loss, consistency, psnr(result, init), accepted)


def explore_indeterminate(x: ImageBuffer, k1_sigma: float, k2_sigma: float,
                          size: int = 13, lambda_reg: float = 0.005,
                          steps: int = 500, step_size: float = 0.5) -> ExploreResult:
    """Invert a blur with a mismatched kernel, starting from the original.

    Degrades ``x`` with a Gaussian of ``k1_sigma``, then minimizes the
    consistency loss under a kernel of ``k2_sigma``. With matched sigmas
    the original is already the minimizer; mismatched sigmas move the
    solution away from ``x`` while staying consistent with the degraded
    image under the assumed kernel.
    """
    if x.channels != 1:
        raise ExplorerError("exploration operates on single-channel images")
    k1 = gaussian_kernel(k1_sigma, size)
    k2 = gaussian_kernel(k2_sigma, size)
    y = ImageBuffer.from_plane(conv2_reflect(x.plane(), k1))
    out, loss, accepted = _descend(y, k2, x, x, lambda_reg, steps, step_size)
    result = ImageBuffer(np.clip(out, 0.0, 1.0)[None])
    consistency = psnr(ImageBuffer.from_plane(conv2_reflect(result.plane(), k2)), y)
    return ExploreResult(result, loss, consistency, psnr(result, x), accepted)
