"""Image artefacts for the Poisson super-resolution runs."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..core import FloatArray

GAP = 2


def to_uint8(image: FloatArray) -> np.ndarray:
    """Linear stretch of [min, max] to [0, 255]; constant images map to 0."""
    low, high = float(np.min(image)), float(np.max(image))
    if high <= low:
        return np.zeros(image.shape, dtype=np.uint8)
    scaled = (image - low) / (high - low)
    return np.round(255.0 * scaled).astype(np.uint8)


def triptych(
    truth: FloatArray, observation: FloatArray, reconstruction: FloatArray, n_side: int
) -> np.ndarray:
    low_side = int(round(np.sqrt(observation.size)))
    factor = n_side // low_side
    upsampled = np.kron(observation.reshape(low_side, low_side), np.ones((factor, factor)))
    panels = [
        to_uint8(truth.reshape(n_side, n_side)),
        to_uint8(upsampled),
        to_uint8(reconstruction.reshape(n_side, n_side)),
    ]
    separator = np.full((n_side, GAP), 255, dtype=np.uint8)
    return np.hstack([panels[0], separator, panels[1], separator, panels[2]])


def write_triptych(
    path: Path | str,
    truth: FloatArray,
    observation: FloatArray,
    reconstruction: FloatArray,
    n_side: int,
) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(triptych(truth, observation, reconstruction, n_side)).save(target)
    return target


def write_intensity_csv(path: Path | str, image: FloatArray, n_side: int) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(target, image.reshape(n_side, n_side), fmt="%.17g", delimiter=",")
    return target


__all__ = ["to_uint8", "triptych", "write_intensity_csv", "write_triptych"]
