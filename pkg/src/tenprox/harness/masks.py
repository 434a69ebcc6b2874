"""Observed-entry masks for completion experiments."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DimensionError, ParameterError
from .images import load_image


@dataclass(frozen=True)
class MaskSpec:
    """How to pick the missing entries.

    ``kind="random"`` drops each pixel (all channels together) with
    probability `p`, or each entry independently when ``per_pixel`` is off.
    ``kind="pattern"`` reads a mask image and marks black pixels missing.
    """

    kind: str = "random"
    p: float = 0.5
    seed: int = 0
    per_pixel: bool = True
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("random", "pattern"):
            raise ParameterError(f"unknown mask kind {self.kind!r}")
        if self.kind == "random" and not (0.0 <= self.p < 1.0):
            raise ParameterError(f"missing fraction must lie in [0, 1), got {self.p}")
        if self.kind == "pattern" and not self.path:
            raise ParameterError("a pattern mask needs a path")

    @property
    def level(self):
        return self.p if self.kind == "random" else float("nan")


def make_mask(shape, spec):
    """Boolean tensor of `shape`, ``True`` where an entry is observed."""
    shape = tuple(int(s) for s in shape)
    if spec.kind == "pattern":
        pat = load_image(spec.path)
        if pat.shape[:2] != shape[:2]:
            raise DimensionError(f"mask image is {pat.shape[:2]}, data is {shape[:2]}")
        observed = pat.max(axis=2) > 0.0
        mask = np.broadcast_to(observed[:, :, None], shape).copy()
    else:
        rng = np.random.default_rng(spec.seed)
        if spec.per_pixel and len(shape) == 3:
            missing = rng.random(shape[:2]) < spec.p
            mask = np.broadcast_to(~missing[:, :, None], shape).copy()
        else:
            mask = ~(rng.random(shape) < spec.p)
    if not mask.any():
        raise ParameterError("mask leaves no observed entries")
    return mask
