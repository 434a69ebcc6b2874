r"""Dense N-way tensor algebra.

A tensor is a plain :class:`numpy.ndarray` of ``float64`` entries. Entries
are linearized in numpy's default row-major order (last index fastest);
the only place a linearization is visible is :func:`unfold`.

Mode indices are zero-based, like numpy axes: an order-3 tensor has modes
0, 1 and 2.

Unfolding convention
--------------------
The mode-``n`` unfolding places the mode-``n`` fibers as *columns* of an
``I_n x prod(I_m, m != n)`` matrix. Column indices run over the remaining
modes in increasing order with the earliest remaining mode varying fastest
(Kolda & Bader). For a 2x2x2 tensor ``X`` with ``X[i, j, k]``::

    unfold(X, 0) = [[X000, X010, X001, X011],
                    [X100, X110, X101, X111]]

    unfold(X, 2) = [[X000, X100, X010, X110],
                    [X001, X101, X011, X111]]
"""

import numpy as np

from .errors import DimensionError, NumericalError, ParameterError

__all__ = [
    "as_tensor",
    "inner_product",
    "k_norm",
    "frobenius_norm",
    "inf_norm",
    "unfold",
    "fold",
    "nuclear_norm",
    "unfolding_nuclear_norm",
    "einstein_product",
    "identity_tensor",
    "axpy",
]

# Singular values below this fraction of the largest are treated as zero.
SVD_ZERO_RTOL = 1e-12


def as_tensor(x, copy=False):
    """Return `x` as a finite float64 array of order >= 1."""
    arr = np.array(x, dtype=np.float64, copy=copy) if copy else np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        raise DimensionError("a tensor needs order >= 1, got a scalar")
    if 0 in arr.shape:
        raise DimensionError(f"every extent must be >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("tensor has non-finite entries")
    return arr


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def _check_mode(n, order):
    if not (0 <= n < order):
        raise DimensionError(f"mode {n} out of range for an order-{order} tensor")


def inner_product(a, b):
    """Sum of the entrywise products of two congruent tensors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    return float(np.vdot(a.ravel(), b.ravel()))


def k_norm(x, k):
    """Entrywise k-norm ``(sum |x|^k)^(1/k)`` for an integer ``k >= 1``."""
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k}")
    x = np.asarray(x, dtype=np.float64).ravel()
    if k == 1:
        return float(np.sum(np.abs(x)))
    # scale by the largest magnitude so tiny or huge entries neither
    # underflow nor overflow when raised to the k-th power
    top = float(np.max(np.abs(x))) if x.size else 0.0
    if top == 0.0 or not np.isfinite(top):
        return top
    return top * float(np.linalg.norm(x / top, ord=int(k)))


def frobenius_norm(x):
    return k_norm(x, 2)


def inf_norm(x):
    """Largest absolute entry."""
    return float(np.max(np.abs(np.asarray(x, dtype=np.float64))))


def unfold(x, n):
    """Mode-`n` matricization of `x` (see module docstring for ordering)."""
    x = np.asarray(x, dtype=np.float64)
    _check_mode(n, x.ndim)
    return np.moveaxis(x, n, 0).reshape(x.shape[n], -1, order="F")


def fold(m, n, shape):
    """Inverse of :func:`unfold`: rebuild a tensor of `shape` from its
    mode-`n` unfolding `m`."""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    _check_mode(n, len(shape))
    rest = shape[:n] + shape[n + 1:]
    expected = (shape[n], int(np.prod(rest, dtype=np.int64)))
    if m.shape != expected:
        raise DimensionError(
            f"mode-{n} unfolding of {shape} must be {expected}, got {m.shape}")
    return np.moveaxis(m.reshape((shape[n],) + rest, order="F"), 0, n)


def _singular_values(mat):
    try:
        s = np.linalg.svd(mat, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    if s.size and s[0] > 0:
        s = np.where(s < SVD_ZERO_RTOL * s[0], 0.0, s)
    return s


def unfolding_nuclear_norm(x, n):
    """Nuclear norm of the mode-`n` unfolding alone."""
    return float(np.sum(_singular_values(unfold(x, n))))


def nuclear_norm(x):
    """Tensor nuclear norm: the unweighted sum over all modes of the matrix
    nuclear norms of the unfoldings.

    Some references weight the modes so the weights sum to one; this one
    does not, so an order-2 tensor gets twice its matrix nuclear norm.
    """
    x = np.asarray(x, dtype=np.float64)
    return float(sum(unfolding_nuclear_norm(x, n) for n in range(x.ndim)))


def einstein_product(a, x):
    r"""Contract the trailing ``N`` indices of the order-``2N`` tensor `a`
    with the ``N`` indices of `x`.

    ``(a *_N x)[i1..iN] = sum_{j1..jN} a[i1..iN, j1..jN] x[j1..jN]``
    """
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    order = x.ndim
    if a.ndim != 2 * order:
        raise DimensionError(
            f"an order-{order} operand needs an order-{2 * order} tensor, got order {a.ndim}")
    if a.shape[order:] != x.shape:
        raise DimensionError(
            f"trailing extents {a.shape[order:]} do not match operand {x.shape}")
    return np.tensordot(a, x, axes=order)


def identity_tensor(shape):
    """Order-2N tensor ``delta(i1,j1)...delta(iN,jN)``, the unit of ``*_N``."""
    shape = tuple(int(s) for s in shape)
    size = int(np.prod(shape, dtype=np.int64))
    return np.eye(size).reshape(shape + shape)


def axpy(alpha, x, y):
    """``alpha * x + y`` for congruent tensors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_shape(x, y)
    return alpha * x + y
