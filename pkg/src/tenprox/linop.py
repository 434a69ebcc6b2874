"""Linear tensor operators with explicit adjoints.

Every operator maps tensors of ``domain_shape`` to tensors of
``codomain_shape`` and carries its exact adjoint. The discrete gradient
stacks its ``N`` partial-difference blocks along a new leading axis, so a
gradient field of an ``I1 x ... x IN`` tensor has shape
``(N, I1, ..., IN)`` and ``field[n]`` is the block for mode ``n``. Inner
products and norms over fields are then ordinary entrywise ones, i.e. sums
of the blockwise quantities.
"""

from typing import Callable, NamedTuple

import numpy as np

from .errors import DimensionError, ParameterError
from .tensor import as_tensor, einstein_product

__all__ = [
    "LinearOperator",
    "NormEstimate",
    "identity_op",
    "mask_op",
    "gradient_op",
    "gradient_adjoint",
    "forward_differences",
    "einstein_op",
    "compose",
    "operator_norm_estimate",
]


class LinearOperator:
    """A linear map between tensor spaces together with its adjoint.

    Parameters
    ----------
    domain_shape, codomain_shape : tuple of int
        Extents of inputs and outputs.
    apply, adjoint : callable
        ``apply(x)`` for ``x`` of ``domain_shape``; ``adjoint(p)`` for ``p`` of
        ``codomain_shape``. They must satisfy
        ``<apply(x), p> == <x, adjoint(p)>``.
    name : str
        Short label, used in reprs and reports.
    """

    def __init__(self, domain_shape, codomain_shape, apply: Callable,
                 adjoint: Callable, name="linop"):
        self.domain_shape = tuple(int(s) for s in domain_shape)
        self.codomain_shape = tuple(int(s) for s in codomain_shape)
        self._apply = apply
        self._adjoint = adjoint
        self.name = name

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.domain_shape:
            raise DimensionError(
                f"{self.name}: expected input of shape {self.domain_shape}, got {x.shape}")
        return self._apply(x)

    def adjoint(self, p):
        p = np.asarray(p, dtype=np.float64)
        if p.shape != self.codomain_shape:
            raise DimensionError(
                f"{self.name}: expected adjoint input of shape {self.codomain_shape}, got {p.shape}")
        return self._adjoint(p)

    __call__ = apply

    @property
    def T(self):
        """The adjoint as an operator in its own right."""
        return LinearOperator(self.codomain_shape, self.domain_shape,
                              self._adjoint, self._apply, name=f"{self.name}^T")

    def __repr__(self):
        return f"LinearOperator({self.name}: {self.domain_shape} -> {self.codomain_shape})"


def identity_op(shape):
    ident = lambda x: x  # noqa: E731
    return LinearOperator(shape, shape, ident, ident, name="identity")


def mask_op(mask):
    """Entry-selection projection onto the observed set.

    `mask` is a boolean tensor, ``True`` where an entry is observed. The
    operator zeroes unobserved entries; it is self-adjoint and idempotent.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ParameterError("the observed set must contain at least one entry")

    def select(x):
        return np.where(mask, x, 0.0)

    op = LinearOperator(mask.shape, mask.shape, select, select, name="mask")
    op.mask = mask
    return op


def forward_differences(x):
    """Stack of mode-wise forward differences, zero at each mode's last index."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros((x.ndim,) + x.shape)
    for n in range(x.ndim):
        head = [slice(None)] * x.ndim
        tail = [slice(None)] * x.ndim
        head[n] = slice(None, -1)
        tail[n] = slice(1, None)
        out[(n,) + tuple(head)] = x[tuple(tail)] - x[tuple(head)]
    return out


def gradient_adjoint(field):
    """Exact adjoint of :func:`forward_differences` (a negative divergence).

    For mode ``n`` and ``p = field[n]``, the contribution is ``-p[i]`` at
    ``i < I-1`` and ``+p[i-1]`` at ``i > 0``; the last slice of each block
    never enters, matching the zero rows of the forward map.
    """
    field = np.asarray(field, dtype=np.float64)
    order = field.ndim - 1
    if field.shape[0] != order:
        raise DimensionError(
            f"a gradient field of an order-{order} tensor needs {order} blocks, got {field.shape[0]}")
    out = np.zeros(field.shape[1:])
    for n in range(order):
        p = field[n]
        head = [slice(None)] * order
        tail = [slice(None)] * order
        head[n] = slice(None, -1)
        tail[n] = slice(1, None)
        out[tuple(head)] -= p[tuple(head)]
        out[tuple(tail)] += p[tuple(head)]
    return out


def gradient_op(shape):
    """Discrete gradient of an ``I1 x ... x IN`` tensor into ``(N, I1, ..., IN)``."""
    shape = tuple(int(s) for s in shape)
    return LinearOperator(shape, (len(shape),) + shape, forward_differences,
                          gradient_adjoint, name="gradient")


def einstein_op(a):
    """``x -> a *_N x`` for an order-2N tensor `a`; the adjoint contracts
    over the leading index group instead."""
    a = as_tensor(a)
    if a.ndim % 2:
        raise DimensionError(f"Einstein operator needs an even-order tensor, got order {a.ndim}")
    order = a.ndim // 2
    lead = tuple(range(order))

    def adjoint(p):
        return np.tensordot(a, p, axes=(lead, lead))

    op = LinearOperator(a.shape[order:], a.shape[:order],
                        lambda x: einstein_product(a, x), adjoint, name="einstein")
    op.tensor = a
    return op


def compose(outer, inner):
    """``outer o inner``; adjoint is ``inner^T o outer^T``."""
    if inner.codomain_shape != outer.domain_shape:
        raise DimensionError(
            f"cannot compose {outer.name} after {inner.name}: "
            f"{inner.codomain_shape} != {outer.domain_shape}")
    return LinearOperator(
        inner.domain_shape, outer.codomain_shape,
        lambda x: outer.apply(inner.apply(x)),
        lambda p: inner.adjoint(outer.adjoint(p)),
        name=f"{outer.name}*{inner.name}")


class NormEstimate(NamedTuple):
    norm: float
    converged: bool
    n_iter: int


def operator_norm_estimate(op, tol=1e-8, max_iter=1000, seed=0):
    """Spectral norm of `op` by power iteration on ``op^T op``.

    Starts from seeded uniform noise and stops once successive Rayleigh
    quotients agree to relative `tol`. Returns the square root of the
    final quotient, i.e. an estimate of ``||op||``. If `max_iter` runs out
    the best estimate is returned with ``converged=False``.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1.0, 1.0, size=op.domain_shape)
    v /= np.linalg.norm(v)
    prev = None
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = op.adjoint(op.apply(v))
        lam = float(np.vdot(v.ravel(), w.ravel()))
        wnorm = np.linalg.norm(w)
        if wnorm == 0.0:
            return NormEstimate(0.0, True, it)
        if prev is not None and abs(lam - prev) <= tol * abs(lam):
            return NormEstimate(float(np.sqrt(max(lam, 0.0))), True, it)
        prev = lam
        v = w / wnorm
    return NormEstimate(float(np.sqrt(max(lam, 0.0))), False, max_iter)
