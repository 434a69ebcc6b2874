"""Quick oracle checks, run by ``tenprox selftest``."""

import numpy as np

from .extrap import gt_tet, hosvd_mpe
from .linop import einstein_op, gradient_op, identity_op, mask_op, operator_norm_estimate
from .prox import InnerLoopConfig, dual_prox_solve, l1, soft_threshold
from .solvers import project_nuclear_ball
from .tensor import nuclear_norm, unfold, fold


def _soft_threshold():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10):
        y = rng.standard_normal((4, 4, 3))
        z = dual_prox_solve(y, 0.4, identity_op(y.shape), l1, 1.0, InnerLoopConfig(max_inner=200))
        worst = max(worst, float(np.max(np.abs(z - soft_threshold(y, 0.4)))))
    return worst < 1e-6, f"max error {worst:.2e}"


def _adjoints():
    rng = np.random.default_rng(1)
    shape = (5, 4, 3)
    ops = [identity_op(shape), mask_op(rng.random(shape) < 0.6), gradient_op(shape),
           einstein_op(rng.standard_normal((3, 2, 3, 2)))]
    worst = 0.0
    for op in ops:
        for _ in range(20):
            x = rng.standard_normal(op.domain_shape)
            p = rng.standard_normal(op.codomain_shape)
            lhs, rhs = np.vdot(op(x), p), np.vdot(x, op.T(p))
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return worst < 1e-10, f"max relative gap {worst:.2e}"


def _gradient_norm():
    n = 16
    est = operator_norm_estimate(gradient_op((n,)), tol=1e-12, max_iter=20000).norm
    exact = np.sqrt(2.0 - 2.0 * np.cos((n - 1) * np.pi / n))
    return abs(est - exact) < 1e-5, f"{est:.8f} vs {exact:.8f}"


def _unfold_round_trip():
    x = np.arange(24.0).reshape(2, 3, 4)
    ok = all(np.array_equal(fold(unfold(x, n), n, x.shape), x) for n in range(3))
    return ok, "fold(unfold(x)) == x for every mode"


def _nuclear():
    v = nuclear_norm(np.diag([3.0, 4.0]))
    p = project_nuclear_ball(np.diag([3.0, 4.0]), 5.0)
    ok = abs(v - 14.0) < 1e-12 and np.allclose(p, np.diag([2.0, 3.0]), atol=1e-12)
    return ok, f"||diag(3,4)||_* over both modes = {v:g}"


def _aitken():
    out = gt_tet([np.array([2.0]), np.array([1.5]), np.array([1.25])], 1)
    return abs(out.value[0] - 1.0) < 1e-12, f"limit {out.value[0]:.15g}"


def _mpe_linear():
    A = np.array([[0.5, 0.1], [0.0, 0.3]])
    c = np.array([1.0, 2.0])
    xs = [np.zeros(2)]
    for _ in range(3):
        xs.append(A @ xs[-1] + c)
    star = np.linalg.solve(np.eye(2) - A, c)
    out = hosvd_mpe(xs, 3)
    err = float(np.linalg.norm(out.value - star) / np.linalg.norm(star))
    return err < 1e-8, f"relative error {err:.2e} with m = d + 1"


CHECKS = [
    ("dual prox equals soft threshold", _soft_threshold),
    ("operator adjoint identities", _adjoints),
    ("gradient operator norm", _gradient_norm),
    ("unfold/fold round trip", _unfold_round_trip),
    ("nuclear norm and ball projection", _nuclear),
    ("Aitken limit of 2, 1.5, 1.25", _aitken),
    ("HOSVD-MPE on a linear map", _mpe_linear),
]


def run_selftest():
    """Run every check; returns a list of ``(name, passed, detail)``."""
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # report, don't abort the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
