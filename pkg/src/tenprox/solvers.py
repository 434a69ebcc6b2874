r"""Outer proximal-gradient solvers with a Tseng correction step.

All solvers minimize

.. math::

    \min_{X \in \Omega}\; \tfrac12\|F(X) - B\|_F^2 + \mu\,\phi(L(X))

with the iteration

    Y_k     = X_k - alpha * grad_f(X_k)
    Z_k     = prox_{alpha mu phi(L .)}(Y_k)          (dual inner loop)
    Q_k     = Z_k - alpha * grad_f(Z_k)
    X_{k+1} = Pi_Omega(X_k - Y_k + Q_k)

:func:`gtpg_solve` is the general driver. :func:`tista_solve`,
:func:`eista_solve` and :func:`tdpg_solve` only wire particular ``F``, ``L``
and ``phi`` into it.
"""

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import DimensionError, DivergenceError, NumericalError, ParameterError
from .linop import LinearOperator, einstein_op, gradient_op, identity_op, operator_norm_estimate
from .metrics import psnr
from .prox import InnerLoopConfig, ProxFunction, dual_prox_solve, l1, phi_value
from .tensor import fold, unfold

__all__ = [
    "ConstraintSet",
    "whole_space",
    "box",
    "nuclear_ball",
    "project_box",
    "project_nuclear_ball",
    "project_l1_ball_nonneg",
    "ProblemSpec",
    "SolverConfig",
    "IterationRecord",
    "SolveReport",
    "grad_f",
    "objective",
    "choose_alpha",
    "tseng_step",
    "GTPGIteration",
    "gtpg_solve",
    "tista_solve",
    "eista_solve",
    "tdpg_solve",
]


# -- constraint sets --------------------------------------------------------

def project_box(x, lo, hi):
    """Entrywise clamp to ``[lo, hi]``."""
    if lo > hi:
        raise ParameterError(f"empty box: lo={lo} > hi={hi}")
    return np.clip(np.asarray(x, dtype=np.float64), lo, hi)


def project_l1_ball_nonneg(s, radius):
    """Euclidean projection of a non-negative vector onto ``{v >= 0, sum v <= radius}``."""
    s = np.asarray(s, dtype=np.float64)
    if s.sum() <= radius:
        return s.copy()
    u = np.sort(s)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    k = np.nonzero(u - (css - radius) / j > 0)[0][-1]
    theta = (css[k] - radius) / (k + 1)
    return np.maximum(s - theta, 0.0)


def project_nuclear_ball(x, epsilon, mode=0):
    """Project onto ``{X : ||unfold(X, mode)||_* <= epsilon}``.

    Soft-thresholds the singular values of one unfolding so that they sum
    to `epsilon`. This is the exact Frobenius projection onto that
    single-mode ball; the sum-over-modes ball has no closed-form projection
    and this is used in its place.
    """
    if epsilon <= 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=np.float64)
    mat = unfold(x, mode)
    try:
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    if s.sum() <= epsilon * (1.0 + 1e-12):
        return x.copy()
    s_new = project_l1_ball_nonneg(s, epsilon)
    return fold((u * s_new) @ vt, mode, x.shape)


@dataclass(frozen=True)
class ConstraintSet:
    """A closed convex set given by its Euclidean projection.

    ``kind`` is one of ``"whole_space"``, ``"box"``, ``"nuclear_ball"``.
    """

    kind: str
    project: Callable
    params: dict = field(default_factory=dict)

    def contains(self, x, rtol=1e-8):
        if self.kind == "whole_space":
            return True
        if self.kind == "box":
            return bool(np.all(x >= self.params["lo"]) and np.all(x <= self.params["hi"]))
        eps = self.params["epsilon"]
        s = np.linalg.svd(unfold(x, self.params["mode"]), compute_uv=False)
        return float(s.sum()) <= eps * (1.0 + rtol)


def whole_space():
    return ConstraintSet("whole_space", lambda x: x)


def box(lo=0.0, hi=1.0):
    if lo > hi:
        raise ParameterError(f"empty box: lo={lo} > hi={hi}")
    return ConstraintSet("box", lambda x: project_box(x, lo, hi), {"lo": lo, "hi": hi})


def nuclear_ball(epsilon, mode=0):
    if epsilon <= 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    return ConstraintSet("nuclear_ball", lambda x: project_nuclear_ball(x, epsilon, mode),
                         {"epsilon": float(epsilon), "mode": int(mode)})


# -- problem and configuration ----------------------------------------------

@dataclass
class ProblemSpec:
    """``min_{X in omega} 0.5 ||F(X) - b||^2 + mu * phi(L(X))``."""

    F: LinearOperator
    b: np.ndarray
    L: LinearOperator
    phi: ProxFunction = l1
    mu: float = 0.0
    omega: ConstraintSet = field(default_factory=whole_space)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.mu < 0:
            raise ParameterError(f"mu must be non-negative, got {self.mu}")
        if self.F.codomain_shape != self.b.shape:
            raise DimensionError(
                f"F maps into {self.F.codomain_shape} but b has shape {self.b.shape}")
        if self.F.domain_shape != self.L.domain_shape:
            raise DimensionError(
                f"F and L act on different spaces: {self.F.domain_shape} vs {self.L.domain_shape}")

    @property
    def shape(self):
        return self.F.domain_shape


@dataclass
class SolverConfig:
    """Tunables of the outer iteration.

    ``alpha=None`` picks ``0.95 / (lipschitz_safety * ||F^T F||)``. The
    default safety factor of 2 is conservative: ``grad_f`` is actually
    ``||F^T F||``-Lipschitz, so ``lipschitz_safety=1`` is also admissible.
    ``gradient_adjoint=False`` uses ``F(X) - B`` in place of
    ``F^T(F(X) - B)``; that is only meaningful for square operators.
    """

    alpha: Optional[float] = None
    lipschitz_safety: float = 2.0
    inner: InnerLoopConfig = field(default_factory=InnerLoopConfig)
    tol: float = 1e-3
    max_outer: int = 500
    warm_start_dual: bool = True
    gradient_adjoint: bool = True
    divergence_factor: float = 1e3

    def __post_init__(self):
        if self.tol <= 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")
        if self.lipschitz_safety < 1:
            raise ParameterError(f"lipschitz_safety must be >= 1, got {self.lipschitz_safety}")
        if self.alpha is not None and self.alpha <= 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if self.max_outer < 1:
            raise ParameterError(f"max_outer must be >= 1, got {self.max_outer}")


@dataclass(frozen=True)
class IterationRecord:
    objective: float
    data_fit: float
    regularizer: float
    rel_change: float
    elapsed: float
    psnr: Optional[float] = None


@dataclass
class SolveReport:
    """Outcome of a solve.

    ``history[k]`` describes iterate ``k + 1``; ``stop_reason`` is ``"tol"``
    when the relative-change rule fired and ``"max_outer"`` otherwise.
    """

    final: np.ndarray
    history: List[IterationRecord]
    stop_reason: str
    alpha: float
    iterates: Optional[List[np.ndarray]] = None
    cycles: int = 0

    @property
    def iterates_used(self):
        return len(self.history)

    @property
    def objectives(self):
        return np.array([h.objective for h in self.history])


# -- building blocks --------------------------------------------------------

def grad_f(x, spec, adjoint=True):
    """Gradient of ``0.5 ||F(x) - b||^2``, i.e. ``F^T(F(x) - b)``."""
    r = spec.F.apply(x) - spec.b
    if not adjoint:
        if r.shape != spec.F.domain_shape:
            raise DimensionError("gradient without adjoint needs a square operator")
        return r
    return spec.F.adjoint(r)


def data_fit(x, spec):
    r = spec.F.apply(x) - spec.b
    return 0.5 * float(np.vdot(r, r))


def objective(x, spec):
    """``0.5 ||F(x) - b||^2 + mu * phi(L x)``."""
    return data_fit(x, spec) + phi_value(x, spec.L, spec.phi, spec.mu)


def choose_alpha(spec, safety=2.0, tol=1e-8, max_iter=2000):
    """Step ``0.95 / (safety * ||F^T F||)``, safely inside the admissible range."""
    if safety < 1:
        raise ParameterError(f"safety must be >= 1, got {safety}")
    est = operator_norm_estimate(spec.F, tol=tol, max_iter=max_iter)
    if not est.converged:
        warnings.warn(f"operator norm estimate for {spec.F.name} did not converge "
                      f"after {est.n_iter} iterations; using {est.norm:.6g}", RuntimeWarning)
    ftf = est.norm ** 2
    if ftf == 0:
        raise ParameterError("F is the zero operator")
    return 0.95 / (safety * ftf)


def tseng_step(x_k, y_k, z_k, alpha, spec, adjoint=True):
    """Forward-backward-forward correction: ``Pi(x - y + z - alpha*grad_f(z))``."""
    q_k = z_k - alpha * grad_f(z_k, spec, adjoint)
    return spec.omega.project(x_k - y_k + q_k)


def _ll_norm(L):
    if L.name == "identity":
        return 1.0
    return operator_norm_estimate(L, tol=1e-6, max_iter=500).norm ** 2


class GTPGIteration:
    """Stateful single-step map ``X_k -> X_{k+1}``.

    Holds the step size, the cached ``||L L^T||`` and, when warm starts are
    on, the last dual variable. Restarted accelerators drive this directly.
    """

    def __init__(self, spec, cfg=None):
        self.spec = spec
        self.cfg = cfg or SolverConfig()
        self.alpha = (self.cfg.alpha if self.cfg.alpha is not None
                      else choose_alpha(spec, self.cfg.lipschitz_safety))
        self.ll_norm = _ll_norm(spec.L) if spec.mu > 0 else 1.0
        self.dual = None
        self.steps = 0

    def step(self, x):
        spec, cfg, alpha = self.spec, self.cfg, self.alpha
        adj = cfg.gradient_adjoint
        y = x - alpha * grad_f(x, spec, adj)
        z, dual = dual_prox_solve(
            y, alpha, spec.L, spec.phi, spec.mu, cfg.inner,
            dual_init=self.dual if cfg.warm_start_dual else None,
            ll_norm=self.ll_norm, return_dual=True)
        if cfg.warm_start_dual:
            self.dual = dual
        self.steps += 1
        return tseng_step(x, y, z, alpha, spec, adj)

    def iterates(self, start, n_steps):
        """``[start, X_1, ..., X_n]`` from `n_steps` consecutive steps."""
        out = [np.asarray(start, dtype=np.float64)]
        for _ in range(n_steps):
            nxt = self.step(out[-1])
            if not np.all(np.isfinite(nxt)):
                raise DivergenceError(f"non-finite iterate after {self.steps} steps")
            out.append(nxt)
        return out


def _relative_change(new, old):
    num = float(np.linalg.norm(new - old))
    den = float(np.linalg.norm(old))
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / den


def default_x0(spec):
    """Observed data for entry-selection problems, zeros otherwise."""
    if spec.F.name == "mask":
        return spec.b.copy()
    return np.zeros(spec.shape)


def gtpg_solve(spec, cfg=None, x0=None, reference=None, keep_iterates=False):
    """Run the general solver until the relative change drops below ``cfg.tol``.

    Parameters
    ----------
    spec : ProblemSpec
    cfg : SolverConfig, optional
    x0 : ndarray, optional
        Starting point; see :func:`default_x0`.
    reference : ndarray, optional
        Ground truth; when given, each history record carries a PSNR.
    keep_iterates : bool
        Store every iterate in the report.

    Raises
    ------
    DivergenceError
        If an iterate is non-finite or the objective grows past
        ``cfg.divergence_factor`` times its initial value.
    """
    cfg = cfg or SolverConfig()
    it = GTPGIteration(spec, cfg)
    x = default_x0(spec) if x0 is None else np.array(x0, dtype=np.float64)
    obj0 = objective(x, spec)
    history = []
    iterates = [x] if keep_iterates else None
    t0 = time.monotonic()
    stop = "max_outer"
    for k in range(cfg.max_outer):
        x_new = it.step(x)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"non-finite iterate at outer iteration {k + 1}", history)
        fit = data_fit(x_new, spec)
        reg = phi_value(x_new, spec.L, spec.phi, spec.mu)
        change = _relative_change(x_new, x)
        rec = IterationRecord(
            objective=fit + reg, data_fit=fit, regularizer=reg, rel_change=change,
            elapsed=time.monotonic() - t0,
            psnr=None if reference is None else psnr(x_new, reference))
        history.append(rec)
        if obj0 > 0 and rec.objective > cfg.divergence_factor * obj0:
            raise DivergenceError(
                f"objective {rec.objective:.3g} exceeded {cfg.divergence_factor:g}x "
                f"its initial value at outer iteration {k + 1}", history)
        x = x_new
        if keep_iterates:
            iterates.append(x)
        if change < cfg.tol:
            stop = "tol"
            break
    return SolveReport(final=x, history=history, stop_reason=stop, alpha=it.alpha,
                       iterates=iterates)


def tista_solve(F, b, mu, cfg=None, omega=None, x0=None, reference=None, keep_iterates=False):
    """l1-regularized solve: ``L`` is the identity and ``phi = ||.||_1``."""
    spec = ProblemSpec(F=F, b=b, L=identity_op(F.domain_shape), phi=l1, mu=mu,
                       omega=omega or whole_space())
    return gtpg_solve(spec, cfg, x0, reference, keep_iterates)


def eista_solve(a, b, mu, cfg=None, omega=None, x0=None, reference=None, keep_iterates=False):
    """:func:`tista_solve` with ``F(X) = a *_N X`` for an order-2N tensor `a`."""
    return tista_solve(einstein_op(a), b, mu, cfg, omega, x0, reference, keep_iterates)


def tdpg_solve(F, b, mu, cfg=None, omega=None, x0=None, reference=None, keep_iterates=False):
    """Anisotropic total-variation solve: ``L`` is the discrete gradient and
    ``phi`` the entrywise l1 norm over the gradient field."""
    spec = ProblemSpec(F=F, b=b, L=gradient_op(F.domain_shape), phi=l1, mu=mu,
                       omega=omega or whole_space())
    return gtpg_solve(spec, cfg, x0, reference, keep_iterates)
