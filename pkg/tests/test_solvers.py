import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import lsq_linear

from tenprox.errors import DimensionError, DivergenceError, ParameterError
from tenprox.linop import einstein_op, gradient_op, identity_op, mask_op
from tenprox.prox import InnerLoopConfig, l1, phi_value
from tenprox.solvers import (GTPGIteration, ProblemSpec, SolverConfig, box, choose_alpha,
                             data_fit, eista_solve, grad_f, gtpg_solve, nuclear_ball, objective,
                             project_box, project_l1_ball_nonneg, project_nuclear_ball,
                             tdpg_solve, tista_solve, tseng_step, whole_space)
from tenprox.tensor import identity_tensor, unfold, unfolding_nuclear_norm


def _f(x, spec):
    r = spec.F(x) - spec.b
    return 0.5 * float(np.sum(r * r))


def _families(rng, shape=(4, 3, 2)):
    a = rng.standard_normal((4, 3, 2, 4, 3, 2))
    return {
        "identity": identity_op(shape),
        "mask": mask_op(rng.random(shape) < 0.6),
        "einstein": einstein_op(a),
        "gradient": gradient_op(shape),
    }


@pytest.mark.parametrize("family", ["identity", "mask", "einstein", "gradient"])
def test_grad_f_central_differences(family):
    rng = np.random.default_rng(20)
    F = _families(rng)[family]
    spec = ProblemSpec(F, rng.standard_normal(F.codomain_shape), identity_op(F.domain_shape))
    h = 1e-6
    for _ in range(5):
        x, d = rng.standard_normal((2,) + F.domain_shape)
        fd = (_f(x + h * d, spec) - _f(x - h * d, spec)) / (2 * h)
        an = float(np.sum(grad_f(x, spec) * d))
        assert fd == pytest.approx(an, rel=1e-5)


def test_grad_f_examples():
    rng = np.random.default_rng(21)
    b = rng.standard_normal((3, 3))
    x = rng.standard_normal((3, 3))
    spec = ProblemSpec(identity_op(b.shape), b, identity_op(b.shape))
    assert not grad_f(b, spec).any()
    np.testing.assert_array_equal(grad_f(x, spec), x - b)


def test_grad_f_without_adjoint_needs_square_operator():
    F = gradient_op((3,))
    spec = ProblemSpec(F, np.zeros(F.codomain_shape), identity_op((3,)))
    with pytest.raises(DimensionError):
        grad_f(np.zeros(3), spec, adjoint=False)


def test_objective_examples():
    rng = np.random.default_rng(22)
    b = rng.standard_normal((3, 2))
    x = rng.standard_normal((3, 2))
    ident = identity_op(b.shape)
    assert objective(b, ProblemSpec(ident, b, ident)) == 0.0
    zero = ProblemSpec(ident, np.zeros_like(b), ident)
    assert objective(x, zero) == pytest.approx(0.5 * np.sum(x ** 2))
    m = mask_op(rng.random(b.shape) < 0.5)
    spec = ProblemSpec(m, m(b), gradient_op(b.shape), l1, 0.3)
    parts = 0.5 * np.sum((m(x) - m(b)) ** 2) + 0.3 * np.sum(np.abs(gradient_op(b.shape)(x)))
    assert objective(x, spec) == pytest.approx(parts, rel=1e-14)
    assert data_fit(x, spec) + phi_value(x, spec.L, l1, 0.3) == pytest.approx(parts, rel=1e-14)


def test_choose_alpha():
    rng = np.random.default_rng(23)
    shape = (3, 2)
    ident = identity_op(shape)
    assert choose_alpha(ProblemSpec(ident, np.zeros(shape), ident)) == pytest.approx(0.475,
                                                                                     abs=1e-8)
    m = mask_op(rng.random(shape) < 0.5)
    assert choose_alpha(ProblemSpec(m, np.zeros(shape), ident)) == pytest.approx(0.475, abs=1e-8)
    a = rng.standard_normal((2, 2, 2, 2))
    spec = ProblemSpec(einstein_op(a), np.zeros((2, 2)), identity_op((2, 2)))
    oracle = np.linalg.eigvalsh(a.reshape(4, 4).T @ a.reshape(4, 4)).max()
    assert choose_alpha(spec, 2.0) * 2.0 * oracle == pytest.approx(0.95, rel=1e-6)
    with pytest.raises(ParameterError):
        choose_alpha(spec, 0.5)


def test_tseng_step_examples():
    rng = np.random.default_rng(24)
    b = rng.standard_normal(3)
    ident = identity_op((3,))
    spec = ProblemSpec(ident, b, ident)
    x = rng.standard_normal(3)
    np.testing.assert_allclose(tseng_step(x, x, b, 0.3, spec), b)
    # with z = b the correction is z itself, so x - y = target - b
    boxed = ProblemSpec(ident, b, ident, omega=box(0.0, 1.0))
    target = np.array([-0.5, 0.5, 1.5])
    out = tseng_step(target - b, np.zeros(3), b, 0.3, boxed)
    np.testing.assert_allclose(out, [0.0, 0.5, 1.0])


def test_tseng_step_composition():
    rng = np.random.default_rng(25)
    m = mask_op(rng.random((4, 3)) < 0.5)
    b = m(rng.random((4, 3)))
    spec = ProblemSpec(m, b, identity_op((4, 3)), omega=box())
    x, y, z = rng.random((3, 4, 3))
    q = z - 0.4 * m.T(m(z) - b)
    np.testing.assert_array_equal(tseng_step(x, y, z, 0.4, spec), np.clip(x - y + q, 0, 1))


def test_project_box():
    x = np.array([0.2, 0.7])
    np.testing.assert_array_equal(project_box(x, 0, 1), x)
    np.testing.assert_array_equal(project_box(np.array([-1.0, 2.0]), 0, 1), [0.0, 1.0])
    y = np.random.default_rng(26).standard_normal(20) * 3
    once = project_box(y, -1, 1)
    np.testing.assert_array_equal(project_box(once, -1, 1), once)
    with pytest.raises(ParameterError):
        project_box(x, 1, 0)
    with pytest.raises(ParameterError):
        box(2.0, 1.0)


def test_l1_ball_projection_matches_qp_oracle():
    rng = np.random.default_rng(27)
    for _ in range(5):
        s = np.abs(rng.standard_normal(6)) * 3
        r = 0.4 * s.sum()
        p = project_l1_ball_nonneg(s, r)
        assert p.sum() == pytest.approx(r, rel=1e-12)
        # KKT: p = max(s - theta, 0) with a common theta
        active = p > 0
        theta = s[active] - p[active]
        np.testing.assert_allclose(theta, theta[0], atol=1e-12)
        assert np.all(s[~active] <= theta[0] + 1e-12)


def test_nuclear_ball_examples():
    d = np.diag([3.0, 4.0])
    np.testing.assert_allclose(project_nuclear_ball(d, 5.0), np.diag([2.0, 3.0]), atol=1e-12)
    assert unfolding_nuclear_norm(project_nuclear_ball(d, 5.0), 0) == pytest.approx(5.0)
    np.testing.assert_array_equal(project_nuclear_ball(d, 7.5), d)
    with pytest.raises(ParameterError):
        project_nuclear_ball(d, 0.0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 3, 2), elements=st.floats(-5, 5)),
       st.floats(0.05, 20), st.integers(0, 2))
def test_nuclear_ball_feasible_and_idempotent(x, eps, mode):
    ball = nuclear_ball(eps, mode)
    p = ball.project(x)
    assert ball.contains(p, rtol=1e-8)
    np.testing.assert_allclose(ball.project(p), p, atol=1e-10)
    if unfolding_nuclear_norm(x, mode) <= eps:
        np.testing.assert_array_equal(p, x)


def test_problem_spec_validation():
    ident = identity_op((3,))
    with pytest.raises(ParameterError):
        ProblemSpec(ident, np.zeros(3), ident, mu=-1.0)
    with pytest.raises(DimensionError):
        ProblemSpec(ident, np.zeros(4), ident)
    with pytest.raises(DimensionError):
        ProblemSpec(ident, np.zeros(3), identity_op((4,)))


def test_solver_config_validation():
    for bad in ({"tol": 0.0}, {"lipschitz_safety": 0.5}, {"alpha": -1.0}, {"max_outer": 0}):
        with pytest.raises(ParameterError):
            SolverConfig(**bad)


def test_gtpg_fixed_point_at_b():
    b = np.random.default_rng(28).standard_normal((3, 2))
    ident = identity_op(b.shape)
    it = GTPGIteration(ProblemSpec(ident, b, ident))
    np.testing.assert_array_equal(it.step(b), b)


def test_gtpg_mu_zero_contraction_closed_form():
    rng = np.random.default_rng(29)
    b = rng.standard_normal((4, 3))
    x0 = rng.standard_normal((4, 3))
    ident = identity_op(b.shape)
    alpha = 0.3
    rep = gtpg_solve(ProblemSpec(ident, b, ident), SolverConfig(alpha=alpha, max_outer=15,
                                                                tol=1e-300),
                     x0=x0, keep_iterates=True)
    rate = 1.0 - alpha + alpha ** 2
    e0 = np.linalg.norm(x0 - b)
    for k, x in enumerate(rep.iterates):
        assert np.linalg.norm(x - b) == pytest.approx(rate ** k * e0, rel=1e-10)


def test_gtpg_l1_matches_long_run_reference():
    rng = np.random.default_rng(30)
    shape = (4, 4, 3)
    b = rng.standard_normal(shape)
    ident = identity_op(shape)
    spec = ProblemSpec(ident, b, ident, l1, 0.3)
    x = gtpg_solve(spec, SolverConfig(tol=1e-8, max_outer=2000)).final
    ref = gtpg_solve(spec, SolverConfig(tol=1e-12, max_outer=20000,
                                        inner=InnerLoopConfig(max_inner=100))).final
    assert np.linalg.norm(x - ref) / np.linalg.norm(ref) < 1e-4
    # the minimizer of 0.5||x - b||^2 + mu||x||_1 is the soft threshold
    np.testing.assert_allclose(ref, np.sign(b) * np.maximum(np.abs(b) - 0.3, 0), atol=1e-8)


def test_stopping_rule_fires_exactly():
    rng = np.random.default_rng(31)
    m = mask_op(rng.random((8, 8, 3)) < 0.5)
    b = m(rng.random((8, 8, 3)))
    rep = tista_solve(m, b, 0.01, SolverConfig(tol=1e-3), omega=box())
    changes = [h.rel_change for h in rep.history]
    assert rep.stop_reason == "tol"
    assert changes[-1] < 1e-3
    assert all(c >= 1e-3 for c in changes[:-1])
    assert len(rep.history) == rep.iterates_used


def test_max_outer_reported():
    rng = np.random.default_rng(32)
    b = rng.standard_normal((4, 4))
    rep = tista_solve(identity_op(b.shape), b, 0.1, SolverConfig(tol=1e-14, max_outer=3),
                      x0=np.zeros_like(b))
    assert rep.stop_reason == "max_outer"
    assert rep.iterates_used == 3


def test_divergence_guard():
    b = np.ones((3, 3))
    ident = identity_op(b.shape)
    with pytest.raises(DivergenceError) as info:
        gtpg_solve(ProblemSpec(ident, b, ident), SolverConfig(alpha=5.0), x0=np.zeros_like(b))
    assert len(info.value.history) >= 1


def _completion(rng, shape=(8, 8, 3)):
    m = mask_op(rng.random(shape) < 0.5)
    return m, m(rng.random(shape))


def test_tista_equals_gtpg_bitwise():
    m, b = _completion(np.random.default_rng(33))
    cfg = SolverConfig(max_outer=20)
    a = tista_solve(m, b, 0.05, cfg, keep_iterates=True)
    g = gtpg_solve(ProblemSpec(m, b, identity_op(b.shape), l1, 0.05), cfg, keep_iterates=True)
    for x, y in zip(a.iterates, g.iterates):
        np.testing.assert_array_equal(x, y)


def test_eista_identity_equals_tista():
    rng = np.random.default_rng(34)
    b = rng.standard_normal((3, 2))
    cfg = SolverConfig(max_outer=20, alpha=0.45)
    e = eista_solve(identity_tensor(b.shape), b, 0.1, cfg, keep_iterates=True)
    t = tista_solve(identity_op(b.shape), b, 0.1, cfg, keep_iterates=True)
    for x, y in zip(e.iterates, t.iterates):
        np.testing.assert_allclose(x, y, atol=1e-12)


def test_eista_mu_zero_least_squares():
    rng = np.random.default_rng(35)
    a = (np.eye(4) + 0.3 * rng.standard_normal((4, 4))).reshape(2, 2, 2, 2)
    b = rng.standard_normal((2, 2))
    rep = eista_solve(a, b, 0.0, SolverConfig(tol=1e-13, max_outer=20000))
    A = a.reshape(4, 4)
    oracle = np.linalg.solve(A.T @ A, A.T @ b.ravel()).reshape(2, 2)
    np.testing.assert_allclose(rep.final, oracle, atol=1e-8)
    assert np.all(np.diff(rep.objectives) <= 1e-10)


def test_tdpg_mu_zero_equals_tista_mu_zero():
    m, b = _completion(np.random.default_rng(36))
    cfg = SolverConfig(max_outer=15)
    t = tista_solve(m, b, 0.0, cfg, omega=box(), keep_iterates=True)
    d = tdpg_solve(m, b, 0.0, cfg, omega=box(), keep_iterates=True)
    for x, y in zip(t.iterates, d.iterates):
        np.testing.assert_allclose(x, y, atol=1e-12)


def test_unobserved_entries_shrink_with_mu():
    rng = np.random.default_rng(37)
    shape = (6, 6, 3)
    mask = rng.random(shape) < 0.5
    m = mask_op(mask)
    b = m(rng.random(shape))
    # start away from zero so the unobserved entries have somewhere to shrink from
    x0 = np.where(mask, b, 0.5)
    sizes = []
    for mu in (0.01, 0.1, 1.0):
        x = tista_solve(m, b, mu, SolverConfig(tol=1e-6, max_outer=5000), x0=x0).final
        sizes.append(np.abs(x[~mask]).sum())
    assert sizes[0] >= sizes[1] >= sizes[2]


def test_tdpg_reduces_total_variation():
    rng = np.random.default_rng(38)
    clean = np.repeat([0.0, 1.0, 0.3], 8)
    noisy = clean + 0.05 * rng.standard_normal(clean.size)
    out = tdpg_solve(identity_op(noisy.shape), noisy, 0.1, SolverConfig(tol=1e-6)).final
    tv = lambda v: np.abs(gradient_op(v.shape)(v)).sum()  # noqa: E731
    assert tv(out) < tv(noisy)


def test_tdpg_five_point_matches_oracle():
    y = np.array([0.1, 0.9, 1.1, 0.2, 0.25])
    mu = 0.15
    rep = tdpg_solve(identity_op(y.shape), y, mu,
                     SolverConfig(tol=1e-10, max_outer=5000, inner=InnerLoopConfig(max_inner=50)))
    g = gradient_op(y.shape)
    D = np.stack([g(e).ravel() for e in np.eye(5)], axis=1)
    w = lsq_linear(D.T, y, bounds=(-mu, mu), method="bvls", tol=1e-14).x
    np.testing.assert_allclose(rep.final, y - D.T @ w, atol=1e-3)


def test_objective_monotone_whole_space():
    rng = np.random.default_rng(39)
    m, b = _completion(rng)
    rep = tista_solve(m, b, 0.05, SolverConfig(inner=InnerLoopConfig(max_inner=50), tol=1e-6))
    assert np.all(np.diff(rep.objectives) <= 1e-10)


def test_constraint_feasibility_along_solve():
    m, b = _completion(np.random.default_rng(40))
    eps = 0.3 * unfolding_nuclear_norm(b, 0)
    rep = tista_solve(m, b, 0.01, omega=nuclear_ball(eps), keep_iterates=True)
    for x in rep.iterates[1:]:
        assert np.linalg.svd(unfold(x, 0), compute_uv=False).sum() <= eps * (1 + 1e-8)
    whole = whole_space()
    assert whole.contains(b) and whole.project(b) is b
