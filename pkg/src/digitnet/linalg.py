"""Dense real-valued matrix/vector helpers.

Matrices are 2-D float64 ndarrays (row-major), vectors are 1-D. Every
operation checks shapes up front; nothing broadcasts implicitly.
"""

from typing import Callable

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


def matrix(rows) -> np.ndarray:
    m = np.array(rows, dtype=DTYPE)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"expected a nonempty 2-D matrix, got shape {m.shape}")
    return m


def vector(values) -> np.ndarray:
    v = np.array(values, dtype=DTYPE)
    if v.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def zeros(rows: int, cols: int | None = None) -> np.ndarray:
    if cols is None:
        return np.zeros(rows, dtype=DTYPE)
    return np.zeros((rows, cols), dtype=DTYPE)


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=DTYPE)


def _require_ndim(x: np.ndarray, ndim: int, name: str) -> None:
    if x.ndim != ndim:
        kind = "matrix" if ndim == 2 else "vector"
        raise ShapeError(f"{name} must be a {kind}, got shape {x.shape}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_ndim(a, 2, "A")
    _require_ndim(b, 2, "B")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def affine(w: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return ``w @ a + b`` for a single input vector ``a``."""
    _require_ndim(w, 2, "W")
    _require_ndim(a, 1, "a")
    _require_ndim(b, 1, "b")
    if w.shape[1] != a.shape[0] or w.shape[0] != b.shape[0]:
        raise ShapeError(
            f"affine shapes disagree: W {w.shape[0]}x{w.shape[1]}, "
            f"a {a.shape[0]}, b {b.shape[0]}"
        )
    return w @ a + b


def affine_rows(w: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Apply ``affine`` to every row of ``a`` (one sample per row)."""
    _require_ndim(w, 2, "W")
    _require_ndim(a, 2, "A")
    _require_ndim(b, 1, "b")
    if w.shape[1] != a.shape[1] or w.shape[0] != b.shape[0]:
        raise ShapeError(
            f"affine shapes disagree: W {w.shape[0]}x{w.shape[1]}, "
            f"A {a.shape[0]}x{a.shape[1]}, b {b.shape[0]}"
        )
    return a @ w.T + b


def outer(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    _require_ndim(u, 1, "u")
    _require_ndim(v, 1, "v")
    if u.size == 0 or v.size == 0:
        raise ShapeError("outer product of an empty vector")
    return np.outer(u, v)


def map_elementwise(f: Callable[[np.ndarray], np.ndarray], m: np.ndarray) -> np.ndarray:
    """Apply ``f`` entrywise. ``f`` must accept and return arrays of the same shape."""
    out = np.asarray(f(m), dtype=DTYPE)
    if out.shape != m.shape:
        out = np.broadcast_to(out, m.shape).copy()
    return out
