"""8-bit grayscale PNG rendering of log-compressed images."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .variance import db_compress


def to_gray(img, dynamic_range_db: float = 60.0, shape=None) -> np.ndarray:
    """Map the dB floor to 0 and 0 dB to 255, rounding to the nearest level."""
    db = db_compress(img, dynamic_range_db)
    level = 255.0 * (db + dynamic_range_db) / dynamic_range_db
    # round half up; the small guard absorbs log10 rounding at exact half levels
    gray = np.floor(level + 0.5 + 1e-9).clip(0, 255).astype(np.uint8)
    if shape is None and hasattr(img, "grid"):
        shape = img.grid.shape
    return gray.reshape(shape) if shape is not None else gray


def render_png(img, dynamic_range_db: float, path, shape=None) -> None:
    gray = to_gray(img, dynamic_range_db, shape)
    if gray.ndim != 2:
        raise ValueError("render_png needs a 2-D image or a map carrying its grid")
    Image.fromarray(gray, mode="L").save(path, format="PNG", optimize=False)
