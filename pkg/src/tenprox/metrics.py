"""Reconstruction quality metrics."""

import math

import numpy as np

from .errors import DimensionError, ParameterError


def psnr(x, ref, peak=1.0):
    """Peak signal-to-noise ratio in dB, ``10 log10(peak^2 / MSE)``.

    MSE is taken over all entries. Identical inputs give ``math.inf``.
    """
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {ref.shape}")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def relative_error(x, ref):
    """``||x - ref||_F / ||ref||_F``."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {ref.shape}")
    denom = float(np.linalg.norm(ref))
    if denom == 0.0:
        raise ParameterError("relative error against a zero reference is undefined")
    return float(np.linalg.norm(x - ref)) / denom
