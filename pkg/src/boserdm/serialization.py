"""JSON encoding of complex arrays as nested ``[re, im]`` pairs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def complex_to_pairs(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def complex_from_pairs(data) -> np.ndarray:
    """Inverse of :func:`complex_to_pairs`; the trailing axis must have length 2."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise ValueError(f"expected trailing [re, im] axis, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def load_complex_array(path) -> np.ndarray:
    with open(Path(path)) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("coeffs", data.get("matrix"))
    return complex_from_pairs(data)


def save_complex_array(path, a) -> None:
    with open(Path(path), "w") as fh:
        json.dump(complex_to_pairs(a), fh)
