"""Image-completion experiment harness."""

from .experiment import (ALGORITHMS, ExperimentParams, ExperimentRecord, emit_records,
                         read_records, run_completion_experiment)
from .images import bundled_synthetic, load_image, save_image, synthetic_image
from .masks import MaskSpec, make_mask

__all__ = [
    "ALGORITHMS", "ExperimentParams", "ExperimentRecord", "emit_records", "read_records",
    "run_completion_experiment", "bundled_synthetic", "load_image", "save_image",
    "synthetic_image", "MaskSpec", "make_mask",
]
