"""Extrapolation of tensor sequences and restarted acceleration.

Two transformations map a short window of iterates to an estimate of the
sequence's limit:

* :func:`gt_tet`, a topological (Brezinski-type) transformation that
  needs ``2m + 1`` terms and is exact when the error is a combination of
  ``m`` geometric modes.
* :func:`hosvd_mpe`, a minimal-polynomial transformation that takes
  ``m + 1`` terms and weights the first ``m`` of them by the normalized
  null-most direction of the difference Gram matrix.

:func:`restarted_accelerate` runs a base iteration for one window,
extrapolates, restarts the base iteration from the extrapolated point and
repeats.
"""

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg

from .errors import ParameterError
from .metrics import psnr
from .tensor import unfold

__all__ = [
    "ExtrapolationOutcome",
    "gt_tet",
    "hosvd_mpe",
    "CycleRecord",
    "AccelerationReport",
    "restarted_accelerate",
    "accelerate_solver",
]

_RANK_RTOL = 1e-12


@dataclass
class ExtrapolationOutcome:
    """Result of one extrapolation.

    ``condition`` is the ratio of the largest to smallest pivot of the
    weight system (``inf`` when singular). When ``failed`` is set, ``value``
    is the last term of the window and ``weights`` is empty.
    """

    value: np.ndarray
    weights: np.ndarray
    condition: float = 1.0
    failed: bool = False


def _window(terms):
    terms = [np.asarray(t, dtype=np.float64) for t in terms]
    if len(terms) < 2:
        raise ParameterError("an extrapolation window needs at least two terms")
    shape = terms[0].shape
    for t in terms[1:]:
        if t.shape != shape:
            raise ParameterError(f"window terms differ in shape: {shape} vs {t.shape}")
    return terms


def _failed(terms, condition=np.inf):
    return ExtrapolationOutcome(terms[-1].copy(), np.zeros(0), condition, True)


def _probe(kind, d1, shape, seed=0):
    if isinstance(kind, np.ndarray):
        if kind.shape != shape:
            raise ParameterError(f"probe shape {kind.shape} does not match {shape}")
        return kind
    if kind == "delta":
        return d1[0]
    if kind == "ones":
        return np.ones(shape)
    if kind == "random":
        return np.random.default_rng(seed).standard_normal(shape)
    raise ParameterError(f"unknown probe {kind!r}")


def _qr_solve(H, rhs):
    """Solve ``H c = rhs`` via QR, with a tiny ridge if ``R`` is near singular.

    Returns ``(c, condition)``; ``c`` is None when even the ridge fails.
    """
    m = H.shape[0]
    q, r = np.linalg.qr(H)
    diag = np.abs(np.diag(r))
    top = diag.max()
    if top == 0.0 or not np.all(np.isfinite(H)):
        return None, np.inf
    if diag.min() < _RANK_RTOL * top:
        ridge = _RANK_RTOL * abs(np.trace(H)) / m
        if ridge == 0.0:
            return None, np.inf
        q, r = np.linalg.qr(H + ridge * np.eye(m))
        diag = np.abs(np.diag(r))
        if diag.min() < _RANK_RTOL * diag.max():
            return None, np.inf
    c = scipy.linalg.solve_triangular(r, q.T @ rhs)
    return c, float(diag.max() / diag.min())


def gt_tet(window, m=None, probe="delta", positive_rhs=False, seed=0):
    r"""Topological extrapolation of ``S_n, ..., S_{n+2m}``.

    With ``Y`` the probe tensor, builds the Hankel system

        H[i, j] = <Y, D2 S_{n+i+j}>,   b[i] = <Y, D S_{n+i}>,   0 <= i, j < m

    and returns ``T = S_n + sum_j c_j D S_{n+j-1}`` where ``H c = -b``. That
    sign makes ``m = 1`` reduce to Aitken's delta-squared. With
    ``positive_rhs=True`` the system is solved as ``H c = b``
    instead, which is not exact on geometric sequences.

    Parameters
    ----------
    window : sequence of ndarray
        ``2m + 1`` congruent tensors.
    m : int, optional
        Number of weights; inferred from the window length if omitted.
    probe : {"delta", "ones", "random"} or ndarray
        The tensor ``Y``. ``"delta"`` uses the first difference ``D S_n``.
    """
    terms = _window(window)
    if m is None:
        m = (len(terms) - 1) // 2
    if m < 1 or len(terms) != 2 * m + 1:
        raise ParameterError(f"GT-TET with m={m} needs {2 * m + 1} terms, got {len(terms)}")
    d1 = [terms[i + 1] - terms[i] for i in range(2 * m)]
    d2 = [d1[i + 1] - d1[i] for i in range(2 * m - 1)]
    y = _probe(probe, d1, terms[0].shape, seed).ravel()
    yd2 = np.array([np.dot(y, d.ravel()) for d in d2])
    H = np.array([[yd2[i + j] for j in range(m)] for i in range(m)])
    b = np.array([np.dot(y, d1[i].ravel()) for i in range(m)])
    c, cond = _qr_solve(H, b if positive_rhs else -b)
    if c is None:
        return _failed(terms)
    value = terms[0].copy()
    for j in range(m):
        value += c[j] * d1[j]
    if not np.all(np.isfinite(value)):
        return _failed(terms, cond)
    return ExtrapolationOutcome(value, c, cond, False)


def hosvd_mpe(window, m=None, eigenvector="min"):
    """Minimal-polynomial extrapolation of ``X_n, ..., X_{n+m}``.

    The ``m`` differences are stacked as frontal slices of an order-(N+1)
    tensor ``D``; with ``N = unfold(D, N)`` and ``M = N N^T``, the weight
    vector ``delta`` is the unit eigenvector of ``M`` for its smallest
    eigenvalue (the minimizer of ``||D x||`` over unit ``x``). The result
    is ``sum_j c_j X_{n+j-1}`` with ``c = delta / sum(delta)``.

    ``eigenvector="max"`` takes the largest-eigenvalue eigenvector instead,
    for comparison only.

    A d-dimensional linear fixed-point iteration is reproduced exactly once
    ``m >= d + 1``: the estimate lies in the affine hull of the first ``m``
    terms, which has dimension ``m - 1``.
    """
    terms = _window(window)
    if m is None:
        m = len(terms) - 1
    if m < 1 or len(terms) != m + 1:
        raise ParameterError(f"HOSVD-MPE with m={m} needs {m + 1} terms, got {len(terms)}")
    diffs = np.stack([terms[i + 1] - terms[i] for i in range(m)], axis=-1)
    n_mat = unfold(diffs, diffs.ndim - 1)
    gram = n_mat @ n_mat.T
    if not np.any(gram):
        return _failed(terms)
    evals, evecs = np.linalg.eigh(gram)
    idx = 0 if eigenvector == "min" else m - 1
    delta = evecs[:, idx]
    total = delta.sum()
    if abs(total) < 1e-10:
        return _failed(terms)
    if total < 0:
        delta, total = -delta, -total
    c = delta / total
    value = np.zeros_like(terms[0])
    for j in range(m):
        value += c[j] * terms[j]
    cond = float(evals[-1] / evals[0]) if evals[0] > 0 else np.inf
    return ExtrapolationOutcome(value, c, cond, False)


@dataclass(frozen=True)
class CycleRecord:
    objective: Optional[float]
    base_best_objective: Optional[float]
    rel_change: float
    failed: bool
    fallback: bool
    base_steps: int
    elapsed: float
    psnr: Optional[float] = None


@dataclass
class AccelerationReport:
    """Outcome of a restarted acceleration run.

    ``base_iterations`` counts every base step taken across all cycles.
    """

    final: np.ndarray
    cycles: List[CycleRecord]
    base_iterations: int
    stop_reason: str
    extrapolated: List[np.ndarray] = field(default_factory=list)

    @property
    def n_cycles(self):
        return len(self.cycles)


def _rel(new, old):
    den = float(np.linalg.norm(old))
    num = float(np.linalg.norm(new - old))
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / den


def restarted_accelerate(base: Callable, x0, method="tet", m=2, tol=1e-3, max_cycles=100,
                         objective: Optional[Callable] = None,
                         project: Optional[Callable] = None,
                         reference=None, probe="delta", guard="final",
                         positive_rhs=False):
    """Accelerate a base iteration by extrapolation with restarts.

    Each cycle calls ``base(start, n_steps)``, which must return the list
    ``[start, X_1, ..., X_n]``; ``n_steps`` is ``2m`` for ``"tet"`` and ``m``
    for ``"hm"``. The window is extrapolated, passed through `project`
    (if given) and becomes the next start. If the extrapolation fails, or
    its `objective` is worse than the best base iterate of the cycle, the
    cycle's best base iterate is used instead. With ``guard="final"`` the
    objective comparison is only enforced on the cycle that ends the run
    (intermediate restarts may go uphill); ``guard="every"`` enforces it on
    every cycle. Iteration stops when two consecutive cycle outputs differ
    by less than `tol` relatively.
    """
    if guard not in ("final", "every"):
        raise ParameterError(f"unknown guard {guard!r}")
    if m < 1:
        raise ParameterError(f"window parameter m must be >= 1, got {m}")
    if method not in ("tet", "hm"):
        raise ParameterError(f"unknown extrapolation method {method!r}")
    n_steps = 2 * m if method == "tet" else m
    current = np.asarray(x0, dtype=np.float64)
    cycles = []
    extrapolated = []
    base_iters = 0
    stop = "max_cycles"
    t0 = time.monotonic()
    for _ in range(max_cycles):
        window = base(current, n_steps)
        base_iters += n_steps
        if method == "tet":
            out = gt_tet(window, m, probe=probe, positive_rhs=positive_rhs)
        else:
            out = hosvd_mpe(window, m)
        cand = out.value
        if project is not None and not out.failed:
            cand = project(cand)
        fallback = out.failed
        if out.failed:
            cand = window[-1]
        best_obj = cand_obj = best = None
        if objective is not None:
            base_objs = [objective(w) for w in window[1:]]
            ib = int(np.argmin(base_objs))
            best, best_obj = window[1 + ib], base_objs[ib]
            cand_obj = objective(cand)
            if guard == "every" and (not np.isfinite(cand_obj) or cand_obj > best_obj):
                cand, cand_obj, fallback = best, best_obj, True
        change = _rel(cand, current)
        last = change < tol or len(cycles) + 1 == max_cycles
        if last and best is not None and (not np.isfinite(cand_obj) or cand_obj > best_obj):
            cand, cand_obj, fallback = best, best_obj, True
        cycles.append(CycleRecord(
            objective=cand_obj, base_best_objective=best_obj, rel_change=change,
            failed=out.failed, fallback=fallback, base_steps=n_steps,
            elapsed=time.monotonic() - t0,
            psnr=None if reference is None else psnr(cand, reference)))
        extrapolated.append(cand)
        current = cand
        if last and change < tol:
            stop = "tol"
            break
    return AccelerationReport(current, cycles, base_iters, stop, extrapolated)


def accelerate_solver(spec, cfg=None, method="tet", m=2, x0=None, max_cycles=100,
                      reference=None, probe="delta", guard="final", positive_rhs=False):
    """Restarted acceleration of the general proximal-gradient iteration.

    Uses ``cfg.tol`` as the cycle-to-cycle stopping threshold.
    """
    from .solvers import GTPGIteration, SolverConfig, default_x0, objective as _obj

    cfg = cfg or SolverConfig()
    it = GTPGIteration(spec, cfg)
    start = default_x0(spec) if x0 is None else np.asarray(x0, dtype=np.float64)
    report = restarted_accelerate(
        it.iterates, start, method=method, m=m, tol=cfg.tol, max_cycles=max_cycles,
        objective=lambda x: _obj(x, spec), project=spec.omega.project,
        reference=reference, probe=probe, guard=guard,
        positive_rhs=positive_rhs)
    report.alpha = it.alpha
    return report
