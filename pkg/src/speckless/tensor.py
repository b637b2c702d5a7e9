"""Dense N-way tensors with column-major storage and their matricizations.

Tensors are stored as 64-bit floats in column-major (Fortran) order, so the
canonical (mode-(1,...,k)) unfolding is a zero-copy reshape of the flat data.
Matrices produced by the unfolding routines are plain 2-D ``numpy`` arrays;
mode indices are 1-based at the API boundary.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

__all__ = [
    "DenseTensor",
    "as_tensor",
    "unfold_mode_n",
    "fold_mode_n",
    "unfold_canonical",
    "fold_canonical",
    "mode_n_product",
    "contracted_product",
    "frobenius_norm",
]


class DenseTensor:
    """Immutable dense N-way tensor of 64-bit floats.

    Parameters
    ----------
    values : array_like
        Source data, copied into a read-only Fortran-ordered float64 array.
        All entries must be finite.
    """

    __slots__ = ("_array",)

    def __init__(self, values) -> None:
        arr = np.array(values, dtype=np.float64, order="F", copy=True)
        self._array = _validated(arr)

    @classmethod
    def _wrap_owned(cls, arr: np.ndarray) -> "DenseTensor":
        # Fast path for freshly computed buffers; skips the defensive copy.
        t = object.__new__(cls)
        t._array = _validated(np.asfortranarray(arr))
        return t

    @classmethod
    def from_flat(cls, data, dims: Sequence[int]) -> "DenseTensor":
        """Build a tensor from flat column-major data and a shape."""
        flat = np.asarray(data, dtype=np.float64).ravel(order="F")
        dims = tuple(int(d) for d in dims)
        if flat.size != math.prod(dims):
            raise ValueError(
                f"flat data of length {flat.size} does not fill dims {dims}"
            )
        return cls(flat.reshape(dims, order="F"))

    @property
    def array(self) -> np.ndarray:
        """Read-only N-D view of the data (Fortran order)."""
        return self._array.view()

    @property
    def data(self) -> np.ndarray:
        """Read-only flat column-major view of the data."""
        return self._array.ravel(order="F")

    @property
    def dims(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def order(self) -> int:
        return self._array.ndim

    @property
    def size(self) -> int:
        return self._array.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def __repr__(self) -> str:  # pragma: no cover
        return f"DenseTensor(dims={self.dims})"


def _validated(arr: np.ndarray) -> np.ndarray:
    if arr.ndim < 1:
        raise ValueError("tensor order must be at least 1")
    if any(d < 1 for d in arr.shape):
        raise ValueError(f"all dimensions must be >= 1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("tensor entries must be finite (no NaN/Inf)")
    if arr.base is not None or arr.flags.writeable:
        arr = arr.copy(order="F") if arr.base is not None else arr
    arr.setflags(write=False)
    return arr


def as_tensor(x) -> DenseTensor:
    """Coerce ``x`` to a :class:`DenseTensor`, validating the invariants."""
    if isinstance(x, DenseTensor):
        return x
    return DenseTensor(x)


def _check_mode(n: int, order: int) -> None:
    if not 1 <= n <= order:
        raise ValueError(f"mode {n} out of range for order-{order} tensor")


def _unfold_mode(arr: np.ndarray, n: int) -> np.ndarray:
    moved = np.moveaxis(arr, n - 1, 0)
    return np.asfortranarray(moved.reshape((arr.shape[n - 1], -1), order="F"))


def _fold_mode(m: np.ndarray, dims: tuple[int, ...], n: int) -> np.ndarray:
    moved_dims = (dims[n - 1],) + dims[: n - 1] + dims[n:]
    return np.moveaxis(m.reshape(moved_dims, order="F"), 0, n - 1)


def _unfold_canonical(arr: np.ndarray, k: int) -> np.ndarray:
    rows = math.prod(arr.shape[:k])
    return arr.reshape((rows, arr.size // rows), order="F")


def _fold_canonical(m: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
    return m.reshape(dims, order="F")


def unfold_mode_n(t: DenseTensor, n: int) -> np.ndarray:
    """Mode-n unfolding: rows indexed by mode ``n``, columns by the rest.

    Column ``j`` collects the remaining indices in ascending mode order with
    the earliest mode varying fastest, matching the standard (Kolda) index
    map. Returns an ``I_n x prod(other dims)`` array.
    """
    t = as_tensor(t)
    _check_mode(n, t.order)
    return _unfold_mode(t.array, n)


def fold_mode_n(m, dims: Sequence[int], n: int) -> DenseTensor:
    """Exact inverse of :func:`unfold_mode_n` for the given ``dims``."""
    dims = tuple(int(d) for d in dims)
    _check_mode(n, len(dims))
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a matrix")
    expected = (dims[n - 1], math.prod(dims) // dims[n - 1])
    if m.shape != expected:
        raise ValueError(f"matrix shape {m.shape} does not match {expected}")
    return DenseTensor(_fold_mode(m, dims, n))


def unfold_canonical(t: DenseTensor, k: int) -> np.ndarray:
    """Mode-(1,...,k) canonical unfolding: a pure reshape of the flat data.

    Returns a ``prod(dims[:k]) x prod(dims[k:])`` view (no copy) whose flat
    column-major data is identical to the tensor's.
    """
    t = as_tensor(t)
    if not 1 <= k <= t.order - 1:
        raise ValueError(
            f"split index {k} out of range for order-{t.order} tensor"
        )
    return _unfold_canonical(t.array, k)


def fold_canonical(m, dims: Sequence[int], k: int) -> DenseTensor:
    """Exact inverse of :func:`unfold_canonical` for the given ``dims``."""
    dims = tuple(int(d) for d in dims)
    if not 1 <= k <= len(dims) - 1:
        raise ValueError(f"split index {k} out of range for dims {dims}")
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a matrix")
    expected = (math.prod(dims[:k]), math.prod(dims[k:]))
    if m.shape != expected:
        raise ValueError(f"matrix shape {m.shape} does not match {expected}")
    return DenseTensor(_fold_canonical(m, dims))


def mode_n_product(a: DenseTensor, b, n: int) -> DenseTensor:
    """Mode-n product ``a x_n b`` of a tensor with a matrix.

    ``b`` must have as many columns as mode ``n`` of ``a``; that mode is
    replaced by the row count of ``b``.
    """
    a = as_tensor(a)
    _check_mode(n, a.order)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise ValueError("expected a matrix")
    if b.shape[1] != a.dims[n - 1]:
        raise ValueError(
            f"matrix with {b.shape[1]} columns cannot contract mode {n} "
            f"of size {a.dims[n - 1]}"
        )
    new_dims = a.dims[: n - 1] + (b.shape[0],) + a.dims[n:]
    return DenseTensor._wrap_owned(_fold_mode(b @ _unfold_mode(a.array, n), new_dims, n))


def contracted_product(a: DenseTensor, b: DenseTensor) -> DenseTensor:
    """Contract the last mode of ``a`` with the first mode of ``b``."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.dims[-1] != b.dims[0]:
        raise ValueError(
            f"last dim of a ({a.dims[-1]}) != first dim of b ({b.dims[0]})"
        )
    out = np.tensordot(a.array, b.array, axes=(a.order - 1, 0))
    if out.ndim == 0:
        raise ValueError("contraction of two vectors is a scalar, not a tensor")
    return DenseTensor._wrap_owned(out)


def frobenius_norm(t: DenseTensor) -> float:
    """Square root of the sum of squared entries."""
    return as_tensor(t).norm()
