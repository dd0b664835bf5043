import numpy as np
import pytest

from opmm import (
    AlgoParams,
    Box,
    InnerSolverParams,
    OnlineProblem,
    RoundOracle,
    ScalarTheta,
    aug_lagrangian,
    build_models,
    dual_objective,
    duality_gap,
    opmm_run,
    recover_multiplier,
    recover_primal,
    solve_dual,
    solve_subproblem,
    update_multipliers,
)
from opmm.dual import _parts
from opmm.streams import LinearDriftStream, ball_constraints, linear_constraints

from helpers import central_diff_grad


def flat_oracle(n):
    return RoundOracle(
        value=lambda x: np.zeros(np.shape(x)[:-1]) if np.ndim(x) > 1 else 0.0,
        gradient=lambda x: np.zeros(n),
        kappa_f=1.0, L_f=1.0, is_convex=True,
    )


def test_dual_objective_all_terms_vanish():
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    cons = linear_constraints([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], box,
                              slater_point=[-0.5, -0.5])
    # g(x_t) = 0 at the origin, zero loss gradient, interior anchor
    val, grad = dual_objective(box, flat_oracle(2), cons, np.zeros(2), 0.5, 1.0, 0.0,
                               np.zeros(2), np.zeros(2))
    assert val == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(grad, np.zeros(2), atol=1e-15)


def test_dual_gradient_matches_fd():
    rng = np.random.default_rng(17)
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    cons = linear_constraints([[1.0, 1.0], [-1.0, 0.5]], [0.8, 0.9], box,
                              slater_point=[0.0, 0.0])
    stream = LinearDriftStream(n=2, seed=5, c_scale=1.0, bias=(-0.8, -0.6))
    checked = 0
    for k in range(30):
        oracle = stream.oracle(k + 1)
        x_t = box.project(rng.uniform(-1.0, 1.0, 2))
        lam = rng.uniform(0.0, 1.0, 2)
        y = rng.uniform(0.05, 1.5, 2)
        sigma, alpha, eta = 0.6, 1.7, 0.4
        _, grad = dual_objective(box, oracle, cons, lam, sigma, alpha, eta, x_t, y)
        fd = central_diff_grad(
            lambda z: dual_objective(box, oracle, cons, lam, sigma, alpha, eta, x_t, z)[0],
            y, h=1e-6)
        np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-7)
        checked += 1
    assert checked == 30


def test_one_dimensional_dual_recovers_primal_minimizer():
    # loss x, constraint x - 5 on [-10, 10]: primal subproblem minimized at -1
    box = Box(lower=[-10.0], upper=[10.0])
    grad_f, g_vals, jac = np.array([1.0]), np.array([-5.0]), np.array([[1.0]])
    lam, sigma, alpha = np.zeros(1), 1.0, 1.0
    y_star, info = solve_dual(box, alpha, 0.0, np.zeros(1), grad_f, g_vals, jac, lam, sigma)
    assert info.converged
    np.testing.assert_allclose(y_star, [0.0], atol=1e-10)
    x_next = recover_primal(box, alpha, 0.0, np.zeros(1), grad_f, jac, sigma, y_star)
    np.testing.assert_allclose(x_next, [-1.0], atol=1e-10)


def test_recover_primal_examples():
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    x_t = np.array([0.3, -0.4])
    jac = np.array([[1.0, 0.0]])
    # zero gradient and zero dual: fixed point
    np.testing.assert_allclose(
        recover_primal(box, 2.0, 0.0, x_t, np.zeros(2), jac, 0.5, np.zeros(1)), x_t)
    # large step lands on the boundary
    out = recover_primal(box, 1.0, 0.0, x_t, np.array([-9.0, 0.0]), jac, 0.5, np.zeros(1))
    np.testing.assert_allclose(out, [1.0, -0.4])


def test_solve_dual_zero_when_strictly_feasible():
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    cons = linear_constraints([[1.0, 1.0]], [0.8], box, slater_point=[0.0, 0.0])
    x_t = np.array([-0.2, -0.2])      # g(x_t) = -1.2 <= -eps0
    grad_f = np.array([0.1, -0.05])
    jac = cons.jacobian(x_t)
    sigma = 0.05
    y_star, _ = solve_dual(box, 2.0, 0.0, x_t, grad_f, cons.value(x_t), jac,
                           np.zeros(1), sigma)
    np.testing.assert_allclose(y_star, [0.0], atol=1e-12)
    # first-order condition at zero: ascent direction nonpositive
    vg = _parts(box, 2.0, 0.0, x_t, grad_f, cons.value(x_t), jac, np.zeros(1), sigma)
    _, grad0, _ = vg(np.zeros(1))
    assert grad0[0] <= 1e-12


def test_solve_dual_monotone_from_warm_start():
    rng = np.random.default_rng(2)
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    cons = linear_constraints([[1.0, 1.0], [-1.0, 0.5]], [0.4, 0.5], box,
                              slater_point=[0.0, -0.3])
    for _ in range(10):
        x_t = box.project(rng.uniform(-1.0, 1.0, 2))
        lam = rng.uniform(0.0, 2.0, 2)
        grad_f = rng.uniform(-1.0, 1.0, 2)
        sigma, alpha = 0.7, 1.3
        vg = _parts(box, alpha, 0.2, x_t, grad_f, cons.value(x_t), cons.jacobian(x_t),
                    lam, sigma)
        y_star, _ = solve_dual(box, alpha, 0.2, x_t, grad_f, cons.value(x_t),
                               cons.jacobian(x_t), lam, sigma)
        assert vg(y_star)[0] >= vg(lam)[0] - 1e-12


def test_solve_dual_tolerance_self_consistency():
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    cons = linear_constraints([[1.0, 1.0]], [0.2], box, slater_point=[-0.4, -0.4])
    x_t = np.array([0.6, 0.6])
    grad_f = np.array([-1.0, -0.8])
    ys = {}
    for tol in (1e-6, 1e-10):
        ys[tol], _ = solve_dual(box, 1.5, 0.0, x_t, grad_f, cons.value(x_t),
                                cons.jacobian(x_t), np.zeros(1), 0.9,
                                inner=InnerSolverParams(tol=tol))
    assert np.linalg.norm(ys[1e-6] - ys[1e-10]) <= 1e-5


def test_recover_multiplier_identities():
    # interior stationary point: lam = sigma * y
    y = np.array([0.8, 1.2])
    np.testing.assert_allclose(recover_multiplier(np.zeros(2), 0.5, y), 0.5 * y)
    # clipped at zero when the gradient is nonpositive and y = 0
    np.testing.assert_allclose(
        recover_multiplier(np.array([-0.3, -1.0]), 0.5, np.zeros(2)), np.zeros(2))


def test_multiplier_recovery_matches_direct_update():
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    cons = ball_constraints(centers=[[0.6, 0.6]], radii=[1.0], set_=box,
                            slater_point=[0.0, 0.0])
    stream = LinearDriftStream(n=2, seed=9, c_scale=1.0, bias=(-1.0, -0.7))
    sigma, alpha, eta = 0.5, 2.0, 0.4
    x_t, lam = np.zeros(2), np.zeros(cons.p)
    for t in range(1, 30):
        oracle = stream.oracle(t)
        q0, qs = build_models(oracle, cons, x_t, ScalarTheta(eta))
        jac = np.stack([q.grad for q in qs])
        g_vals = np.array([q.const for q in qs])
        y_star, _ = solve_dual(box, alpha, eta, x_t, q0.grad, g_vals, jac, lam, sigma,
                               inner=InnerSolverParams(tol=1e-11))
        x_next = recover_primal(box, alpha, eta, x_t, q0.grad, jac, sigma, y_star)
        _, omega_grad = dual_objective(box, oracle, cons, lam, sigma, alpha, eta, x_t,
                                       y_star)
        lam_dual = recover_multiplier(omega_grad, sigma, y_star)
        lam_direct = update_multipliers(lam, sigma, qs, x_next)
        assert np.linalg.norm(lam_dual - lam_direct) <= 1e-6
        x_t, lam = x_next, lam_direct


def test_dual_concavity_probe():
    rng = np.random.default_rng(4)
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    cons = linear_constraints([[1.0, 1.0], [-1.0, 0.5]], [0.8, 0.9], box,
                              slater_point=[0.0, 0.0])
    stream = LinearDriftStream(n=2, seed=10, c_scale=1.0)
    oracle = stream.oracle(1)
    x_t = np.array([0.4, 0.2])
    lam = np.array([0.3, 0.0])
    for _ in range(50):
        u = rng.uniform(0.0, 3.0, 2)
        v = rng.uniform(0.0, 3.0, 2)
        m = 0.5 * (u + v)
        f = lambda y: dual_objective(box, oracle, cons, lam, 0.6, 1.4, 0.3, x_t, y)[0]
        assert f(m) >= 0.5 * (f(u) + f(v)) - 1e-9


def test_duality_gap_vanishes_at_solved_pair():
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    cons = linear_constraints([[1.0, 1.0], [-1.0, 0.5]], [0.8, 0.9], box,
                              slater_point=[0.0, 0.0])
    stream = LinearDriftStream(n=2, seed=13, c_scale=1.0, bias=(-1.0, -0.9))
    sigma, alpha, eta = 0.5, 2.0, 0.4
    x_t, lam = np.zeros(2), np.array([0.2, 0.1])
    oracle = stream.oracle(1)
    q0, qs = build_models(oracle, cons, x_t, ScalarTheta(eta))
    jac = np.stack([q.grad for q in qs])
    g_vals = np.array([q.const for q in qs])
    y_star, _ = solve_dual(box, alpha, eta, x_t, q0.grad, g_vals, jac, lam, sigma,
                           inner=InnerSolverParams(tol=1e-12))
    x_next = recover_primal(box, alpha, eta, x_t, q0.grad, jac, sigma, y_star)
    gap = duality_gap(box, q0, qs, lam, sigma, alpha, x_t, eta, x_next, y_star,
                      f_xt=float(oracle.value(x_t)))
    primal_val = aug_lagrangian(q0, qs, lam, sigma, x_next)[0]
    assert abs(gap) <= 1e-6 * (1.0 + abs(primal_val))


def test_routes_agree_on_convex_instance(conv2d_problem):
    params = AlgoParams(sigma=0.5, alpha=2.0, T=40, theta_strategy=ScalarTheta(0.5),
                        inner=InnerSolverParams(tol=1e-11))
    primal = opmm_run(conv2d_problem, params, route="primal")
    dual = opmm_run(conv2d_problem, params, route="dual")
    for a, b in zip(primal.trace, dual.trace):
        assert np.linalg.norm(a.x - b.x) <= 1e-6
        assert np.linalg.norm(a.lam - b.lam) <= 1e-6
    for rec in dual.records:
        gap = np.linalg.norm(
            rec.lam_next - np.maximum(rec.omega_grad + rec.sigma * rec.y, 0.0))
        assert gap <= 10.0 * rec.solver.tol


def test_dual_state_bundle():
    from opmm import dual_state
    box = Box(lower=[-1.0, -1.0], upper=[1.0, 1.0])
    cons = linear_constraints([[1.0, 1.0]], [0.8], box, slater_point=[0.0, 0.0])
    stream = LinearDriftStream(n=2, seed=2)
    st = dual_state(box, stream.oracle(1), cons, np.zeros(1), 0.5, 2.0, 0.3,
                    np.zeros(2), np.array([0.4]))
    val, grad = dual_objective(box, stream.oracle(1), cons, np.zeros(1), 0.5, 2.0,
                               0.3, np.zeros(2), np.array([0.4]))
    assert st.value == val
    np.testing.assert_array_equal(st.gradient, grad)


def test_dual_route_rejects_nonconvex_constraints(box2):
    from opmm.streams import sine_constraints
    sine = sine_constraints(offsets=[0.0], amps=[1.0], freqs=[[1.0, 0.0]], set_=box2,
                            slater_point=[-1.0, 0.0])
    stream = LinearDriftStream(n=2, seed=1)
    prob = OnlineProblem(set_=box2, cons=sine, stream=stream, x1=np.zeros(2))
    params = AlgoParams(sigma=0.5, alpha=2.0, T=3)
    with pytest.raises(ValueError, match="convex"):
        opmm_run(prob, params, route="dual")
