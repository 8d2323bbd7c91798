"""Plain-text complex matrix files.

Format: a header line ``GHOSTMAT v1 <rows> <cols> complex`` followed by one
line per row holding ``re im`` pairs written with 17 significant digits,
which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError

MAGIC = "GHOSTMAT"
VERSION = "v1"


def write_matrix(path, matrix) -> None:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2:
        raise ValueError("only 1D or 2D arrays can be written")
    rows, cols = m.shape
    interleaved = np.empty((rows, 2 * cols))
    interleaved[:, 0::2] = m.real
    interleaved[:, 1::2] = m.imag
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{MAGIC} {VERSION} {rows} {cols} complex\n")
        np.savetxt(fh, interleaved, fmt="%.17g")


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != MAGIC or header[4] != "complex":
            raise ConfigError(str(path), "not a GHOSTMAT file (bad header)")
        if header[1] != VERSION:
            raise ConfigError(str(path), f"unsupported GHOSTMAT version {header[1]}")
        try:
            rows, cols = int(header[2]), int(header[3])
            data = np.loadtxt(fh, ndmin=2)
        except ValueError as exc:
            raise ConfigError(str(path), f"malformed GHOSTMAT body: {exc}") from exc
    if data.shape != (rows, 2 * cols):
        raise ConfigError(str(path), f"expected {rows}x{2 * cols} numbers, found {data.shape}")
    return data[:, 0::2] + 1j * data[:, 1::2]
