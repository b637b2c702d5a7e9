"""Thin-SVD helpers shared by the thresholding and decomposition code.

For strongly rectangular matrices the singular triplets are obtained from an
eigendecomposition of the small Gram matrix, which is far cheaper than a
direct SVD; singular values below ~1e-8 of the largest lose accuracy on that
route, so it is only taken for matrices large enough that the exact path
would dominate the runtime.
"""

from __future__ import annotations

import numpy as np

GRAM_ASPECT = 4.0
GRAM_MIN_ELEMENTS = 2_000_000


def use_gram(shape: tuple[int, int]) -> bool:
    m, n = shape
    return m * n >= GRAM_MIN_ELEMENTS and max(m, n) >= GRAM_ASPECT * min(m, n)


def gram_singular(a: np.ndarray, side: str) -> tuple[np.ndarray, np.ndarray]:
    """Singular values and one-sided singular vectors via the Gram matrix.

    ``side='left'`` returns (s, U) from ``a @ a.T``; ``side='right'`` returns
    (s, V) from ``a.T @ a``. Values are descending and clipped at zero.
    """
    if side == "left":
        g = a @ a.T
    else:
        g = a.T @ a
    w, q = np.linalg.eigh(g)
    s = np.sqrt(np.clip(w[::-1], 0.0, None))
    return s, np.ascontiguousarray(q[:, ::-1])


def sign_normalize(u: np.ndarray, vt: np.ndarray | None = None):
    """Flip singular-vector signs so each left vector's largest-magnitude
    entry is nonnegative; the matching right vectors are flipped in step."""
    if u.size == 0:
        return (u, vt) if vt is not None else u
    peaks = np.abs(u).argmax(axis=0)
    signs = np.sign(u[peaks, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u = u * signs
    if vt is not None:
        return u, vt * signs[:, None]
    return u


def thin_svd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact thin SVD with the deterministic sign convention."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    u, vt = sign_normalize(u, vt)
    return u, s, vt
