"""Image ingest/egress and the bundled synthetic test image."""

from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DimensionError

SYNTHETIC_NAME = "synthetic64.png"


def load_image(path):
    """Read an 8-bit PNG/PPM/etc. as an ``H x W x C`` float64 array in [0, 1].

    Grayscale images come back with ``C = 1``; anything with alpha or a
    palette is converted to RGB.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr.astype(np.float64) / 255.0


def to_bytes(img):
    img = np.asarray(img, dtype=np.float64)
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def save_image(img, path):
    """Write an ``H x W x C`` array in [0, 1] as 8-bit; the format follows the
    file suffix (``.png``, ``.ppm``, ``.pgm``...)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise DimensionError(f"expected H x W x 1 or H x W x 3, got {img.shape}")
    data = to_bytes(img)
    if data.shape[2] == 1:
        data = data[:, :, 0]
    path = Path(path)
    try:
        Image.fromarray(data).save(path)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot write image {path}: {exc}") from exc


def synthetic_image(size=64):
    """Deterministic RGB test image: smooth colour ramps with two flat shapes,
    quantized to 8 bits so that it survives a PNG round trip unchanged."""
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1.0)
    r = 0.25 + 0.5 * xx
    g = 0.2 + 0.6 * yy
    b = 0.5 + 0.3 * np.sin(np.pi * xx) * np.cos(np.pi * yy)
    img = np.stack([r, g, b], axis=-1)
    disc = (xx - 0.35) ** 2 + (yy - 0.4) ** 2 < 0.18 ** 2
    img[disc] = (0.9, 0.3, 0.2)
    rect = (xx > 0.55) & (xx < 0.85) & (yy > 0.6) & (yy < 0.85)
    img[rect] = (0.15, 0.35, 0.75)
    return np.rint(img * 255.0) / 255.0


def bundled_synthetic():
    """The packaged 64x64x3 copy of :func:`synthetic_image`."""
    ref = resources.files("tenprox.data").joinpath(SYNTHETIC_NAME)
    with resources.as_file(ref) as p:
        return load_image(p)
