r"""Proximal maps and the dual inner loop for composite regularizers.

The regularizer is ``mu * phi(L x)`` for a linear operator ``L`` and a
convex ``phi`` whose own prox is cheap. Its prox with parameter ``alpha``,

.. math::

    Z = \mathrm{argmin}_u\; \mu\phi(Lu) + \frac{1}{2\alpha}\|u - y\|_F^2,

is recovered as ``Z = y + alpha * L^T(P)`` from a minimizer ``P`` of the dual
problem ``N(P) + J(P)`` with

    N(P) = <(alpha/2) L L^T P + L y, P>,    J(P) = (mu phi)^*(-P),

which is itself solved by proximal gradient steps on ``P``.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, ParameterError
from .linop import operator_norm_estimate

__all__ = [
    "ProxFunction",
    "l1",
    "InnerLoopConfig",
    "soft_threshold",
    "prox_of_J",
    "grad_N",
    "dual_objective",
    "dual_prox_solve",
    "phi_value",
]

DUAL_SIGNS = ("moreau", "alg", "proof")
SCHEDULES = ("backtracking", "geometric")


@dataclass(frozen=True)
class ProxFunction:
    """A convex function known through its value and its prox.

    ``prox(v, gamma)`` returns ``argmin_u phi(u) + ||u - v||^2 / (2 gamma)``.
    ``conjugate``, when given, evaluates the convex conjugate ``phi^*``; it is
    only needed to monitor dual objectives.
    """

    name: str
    value: Callable
    prox: Callable
    conjugate: Optional[Callable] = None


def soft_threshold(p, gamma):
    """Entrywise shrinkage toward zero by `gamma`: the prox of ``gamma*||.||_1``.

    Works on any array, including stacked gradient fields.
    """
    if gamma < 0:
        raise ParameterError(f"threshold must be non-negative, got {gamma}")
    p = np.asarray(p, dtype=np.float64)
    return np.sign(p) * np.maximum(np.abs(p) - gamma, 0.0)


def _l1_conjugate(v):
    # indicator of the unit sup-norm ball
    return 0.0 if np.max(np.abs(v)) <= 1.0 + 1e-12 else np.inf


l1 = ProxFunction(
    name="l1",
    value=lambda x: float(np.sum(np.abs(x))),
    prox=soft_threshold,
    conjugate=_l1_conjugate,
)


@dataclass
class InnerLoopConfig:
    """Settings of the dual inner loop.

    Attributes
    ----------
    max_inner : int
        Number of dual steps per prox evaluation.
    beta0 : float or None
        Initial dual step. ``None`` means ``1 / (alpha * max(1, ||L L^T||))``.
    rho : float
        Step reduction factor in (0, 1).
    schedule : {"backtracking", "geometric"}
        ``"backtracking"`` shrinks the step by `rho` only when the quadratic
        upper bound on ``N`` is violated. ``"geometric"`` shrinks it by `rho`
        before every step regardless.
    dual_sign : {"moreau", "alg", "proof"}
        Form of the dual prox step; see :func:`prox_of_J`.
    """

    max_inner: int = 10
    beta0: Optional[float] = None
    rho: float = 0.5
    schedule: str = "backtracking"
    dual_sign: str = "moreau"

    def __post_init__(self):
        if self.max_inner < 1:
            raise ParameterError(f"max_inner must be >= 1, got {self.max_inner}")
        if not (0.0 < self.rho < 1.0):
            raise ParameterError(f"rho must lie in (0, 1), got {self.rho}")
        if self.beta0 is not None and self.beta0 <= 0:
            raise ParameterError(f"beta0 must be positive, got {self.beta0}")
        if self.schedule not in SCHEDULES:
            raise ParameterError(f"unknown schedule {self.schedule!r}")
        if self.dual_sign not in DUAL_SIGNS:
            raise ParameterError(f"unknown dual_sign {self.dual_sign!r}")


def prox_of_J(p, beta, phi, mu, sign="moreau"):
    r"""Prox of ``beta * J`` where ``J(P) = (mu phi)^*(-P)``.

    ``"moreau"`` (default) uses the Moreau decomposition with the step
    scaling kept: ``p + beta * prox_{(mu/beta) phi}(-p / beta)``. For
    ``phi = ||.||_1`` this is the clip of `p` to ``[-mu, mu]``.

    ``"alg"`` drops the scaling, ``p + prox_{beta mu phi}(-p)``; it agrees
    with ``"moreau"`` only when ``beta == 1``. ``"proof"`` is the sign-flipped
    ``-p - prox_{beta mu phi}(-p)``. Both are kept for comparison runs.
    """
    if beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if mu < 0:
        raise ParameterError(f"mu must be non-negative, got {mu}")
    p = np.asarray(p, dtype=np.float64)
    if mu == 0:
        # conjugate of the zero function is the indicator of {0}
        return np.zeros_like(p)
    if sign == "moreau":
        return p + beta * phi.prox(-p / beta, mu / beta)
    if sign == "alg":
        return p + phi.prox(-p, beta * mu)
    if sign == "proof":
        return -p - phi.prox(-p, beta * mu)
    raise ParameterError(f"unknown dual sign {sign!r}")


def grad_N(p, alpha, L, y, Ly=None):
    """Gradient of the smooth dual term: ``alpha * L(L^T p) + L(y)``."""
    if Ly is None:
        Ly = L.apply(y)
    return alpha * L.apply(L.adjoint(p)) + Ly


def dual_objective(p, y, alpha, L, phi, mu):
    """``N(p) + J(p)``; infinite when `p` leaves the domain of ``J``."""
    if phi.conjugate is None:
        raise ParameterError(f"{phi.name} has no conjugate; dual objective unavailable")
    LTp = L.adjoint(p)
    smooth = 0.5 * alpha * float(np.vdot(LTp, LTp)) + float(np.vdot(L.apply(y), p))
    if mu == 0:
        conj = 0.0 if not np.any(p) else np.inf
    else:
        conj = mu * phi.conjugate(-p / mu)
    return smooth + conj


def dual_prox_solve(y, alpha, L, phi, mu, cfg=None, dual_init=None, ll_norm=None,
                    return_dual=False, trace=None):
    """Approximate ``prox_{alpha mu phi(L .)}(y)`` with ``cfg.max_inner`` dual steps.

    Parameters
    ----------
    y : ndarray
        Point at which the prox is evaluated.
    alpha : float
        Prox parameter (the outer step size).
    L : LinearOperator
        Inner operator of the regularizer.
    phi : ProxFunction
    mu : float
        Regularization weight, ``>= 0``.
    cfg : InnerLoopConfig, optional
    dual_init : ndarray, optional
        Starting dual variable, in ``L``'s codomain; zeros by default.
    ll_norm : float, optional
        Estimate of ``||L L^T||`` for the default initial step; estimated
        by power iteration when omitted.
    return_dual : bool
        Also return the final dual variable (for warm starts).
    trace : list, optional
        If given, ``(beta, dual)`` for every accepted step is appended.

    Returns
    -------
    z : ndarray
        The approximate prox point ``y + alpha * L^T(P)``.
    dual : ndarray
        Only if `return_dual`.
    """
    cfg = cfg or InnerLoopConfig()
    if alpha <= 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    if mu < 0:
        raise ParameterError(f"mu must be non-negative, got {mu}")
    y = np.asarray(y, dtype=np.float64)

    if dual_init is None:
        p = np.zeros(L.codomain_shape)
    else:
        p = np.array(dual_init, dtype=np.float64)

    if mu == 0:
        # J is the indicator of {0}; every prox step lands on the origin
        p = np.zeros(L.codomain_shape)
        z = y + alpha * L.adjoint(p)
        return (z, p) if return_dual else z

    beta = cfg.beta0
    if beta is None:
        if ll_norm is None:
            ll_norm = operator_norm_estimate(L, tol=1e-6, max_iter=500).norm ** 2
        beta = 1.0 / (alpha * max(1.0, ll_norm))

    Ly = L.apply(y)
    for l in range(1, cfg.max_inner + 1):
        g = grad_N(p, alpha, L, y, Ly=Ly)
        if cfg.schedule == "geometric":
            beta = cfg.rho * beta
            p_new = prox_of_J(p - beta * g, beta, phi, mu, cfg.dual_sign)
        else:
            for _ in range(60):
                p_new = prox_of_J(p - beta * g, beta, phi, mu, cfg.dual_sign)
                d = p_new - p
                LTd = L.adjoint(d)
                # N is quadratic: N(p+d) = N(p) + <g, d> + (alpha/2)||L^T d||^2
                if alpha * beta * float(np.vdot(LTd, LTd)) <= (1.0 + 1e-10) * float(np.vdot(d, d)):
                    break
                beta *= cfg.rho
        if not np.all(np.isfinite(p_new)):
            raise DivergenceError(f"non-finite dual iterate at inner iteration {l}")
        p = p_new
        if trace is not None:
            trace.append((beta, p.copy()))

    z = y + alpha * L.adjoint(p)
    return (z, p) if return_dual else z


def phi_value(x, L, phi, mu):
    """Regularizer value ``mu * phi(L x)``."""
    if mu == 0:
        return 0.0
    return mu * phi.value(L.apply(x))
