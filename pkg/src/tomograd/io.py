"""Plain-text serialization of density matrices."""
from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError


def write_density(rho: np.ndarray, path) -> None:
    """Write ``dim <d>`` then one ``<row> <col> <re> <im>`` line per entry, row-major."""
    rho = np.asarray(rho)
    d = rho.shape[0]
    with open(path, "w") as fh:
        fh.write(f"dim {d}\n")
        for i in range(d):
            for j in range(d):
                z = rho[i, j]
                fh.write(f"{i} {j} {z.real:.17g} {z.imag:.17g}\n")


def read_density(path) -> np.ndarray:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 2 or head[0] != "dim":
            raise InvalidArgumentError(f"{path}: expected 'dim <d>' header")
        d = int(head[1])
        rho = np.zeros((d, d), dtype=complex)
        seen = 0
        for line in fh:
            if not line.strip():
                continue
            i, j, re, im = line.split()
            rho[int(i), int(j)] = complex(float(re), float(im))
            seen += 1
    if seen != d * d:
        raise InvalidArgumentError(f"{path}: expected {d * d} entries, found {seen}")
    return rho
