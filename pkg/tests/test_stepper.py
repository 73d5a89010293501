import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

import fhn_osc as fo
from conftest import constant_field_problem, polynomial_problem, stationary_problem
from fhn_osc.stepper import _rhs_coeffs


# -- stencils and extrapolation ------------------------------------------------


def test_predictor_stencil_equal_steps_is_central():
    a, b, c = fo.stencil_predictor_dt(0.25, 0.25)
    assert a == pytest.approx(2.0)
    assert b == 0.0
    assert c == pytest.approx(-2.0)


def test_predictor_stencil_exact_on_quadratics():
    tau_n, tau_m = 0.3, 0.17
    t_n = 1.4
    a, b, c = fo.stencil_predictor_dt(tau_n, tau_m)
    w = lambda t: t * t
    val = a * w(t_n + tau_n) + b * w(t_n) + c * w(t_n - tau_m)
    assert val == pytest.approx(2 * t_n, abs=1e-12)
    assert a + b + c == pytest.approx(0.0, abs=1e-13)


def test_predictor_stencil_reference_values():
    a, b, c = fo.stencil_predictor_dt(0.2, 0.1)
    assert a == pytest.approx(5.0 / 3.0, rel=1e-14)
    assert b == pytest.approx(5.0, rel=1e-14)
    assert c == pytest.approx(-20.0 / 3.0, rel=1e-14)
    with pytest.raises(ValueError):
        fo.stencil_predictor_dt(0.0, 0.1)


def test_corrector_stencil_exact_on_quadratics():
    w0, w1, w2 = fo.stencil_corrector_dt(0.5)
    assert w0 + w1 + w2 == pytest.approx(0.0, abs=1e-13)
    # w(t) = t^2 at nodes 0, 0.5, 1: derivative at 1 is 2
    assert w0 * 1.0 + w1 * 0.25 + w2 * 0.0 == pytest.approx(2.0, abs=1e-13)


def test_corrector_stencil_cubic_remainder():
    # remainder oracle by direct subtraction: for w = t^3 at (0, .5, 1) the
    # stencil misses w'(1) = 3 by tau^2 * w_ttt / 3 = 0.25 * 6 / 3 = 0.5
    w0, w1, w2 = fo.stencil_corrector_dt(0.5)
    stencil_val = w0 * 1.0 + w1 * 0.125 + w2 * 0.0
    assert 3.0 - stencil_val == pytest.approx(0.5, abs=1e-13)


def test_extrapolation():
    assert fo.extrapolate_F(np.array([3.0]), np.array([3.0]))[0] == 3.0
    # exact on linears: F(t) = t sampled at 0 and 0.5 extrapolates to 1
    assert fo.extrapolate_F(np.array([0.5]), np.array([0.0]))[0] == 1.0
    # quadratic remainder: F(t) = t^2 -> 0.5 vs true 1.0, gap tau^2 F'' = 0.5
    val = fo.extrapolate_F(np.array([0.25]), np.array([0.0]))[0]
    assert 1.0 - val == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fo.extrapolate_F(np.zeros(3), np.zeros(4))


# -- operator assembly: dual-route check ----------------------------------------


def _brute_force_blocks(basis, grid, params):
    """Dense A, B (and jump scale) assembled from raw point tables, fully
    independent of the Kronecker-sum assembly path."""
    V, G = basis.basis_tables(grid.points)
    w = grid.weights
    gamma = np.array(params.gamma)
    # per-component gamma weight: sum_c gamma_c sum_p w_p grad_k . grad_j
    A = np.einsum("c,kpcd,jpcd,p->jk", gamma, G, G, w)
    B = np.zeros_like(A)
    for edge in grid.boundary:
        Vb, _ = basis.basis_tables(edge.points)
        gb = gamma * np.array(params.beta)
        B += np.einsum("c,kpc,jpc,p->jk", gb, Vb, Vb, edge.weights)
    return A, B


def test_operator_assembly_dual_route(unit_square):
    params = fo.FhnParams(gamma1=1.0, gamma2=0.5, beta1=0.3, beta2=0.7)
    mesh = fo.build_mesh(unit_square, 0.5)
    grid = fo.build_collocation(mesh, fo.gauss_rule(4))
    basis = fo.orthonormalize(fo.build_spline_space(mesh, 3), grid)
    ops = fo.assemble_operators(basis, params)

    A_ref, B_ref = _brute_force_blocks(basis, grid, params)
    nu = basis.comp_sizes[0]
    A_kron = np.zeros((basis.dim, basis.dim))
    B_kron = np.zeros((basis.dim, basis.dim))
    J_kron = np.zeros((basis.dim, basis.dim))
    A_kron[:nu, :nu] = ops.dense_block("A", 0)
    A_kron[nu:, nu:] = ops.dense_block("A", 1)
    B_kron[:nu, :nu] = ops.dense_block("B", 0)
    B_kron[nu:, nu:] = ops.dense_block("B", 1)
    J_kron[:nu, :nu] = ops.dense_block("J", 0)
    J_kron[nu:, nu:] = ops.dense_block("J", 1)

    scaleA = np.abs(A_ref).max()
    assert np.abs(A_kron - A_ref).max() < 1e-11 * scaleA
    assert np.abs(B_kron - B_ref).max() < 1e-11 * max(1.0, np.abs(B_ref).max())
    # jump block is machine zero on the conforming space but kept in the
    # operator; its scale must stay far below the stiffness scale
    assert np.abs(J_kron).max() < 1e-9 * scaleA

    # operator application and solve agree with the dense route
    rng = np.random.default_rng(3)
    c = rng.standard_normal(basis.dim)
    dense_op = A_kron + B_kron - J_kron
    assert np.abs(ops.apply(c) - dense_op @ c).max() < 1e-11 * scaleA
    theta = 0.37
    x = ops.solve(theta, c)
    x_ref = np.linalg.solve(np.eye(basis.dim) + theta * dense_op, c)
    assert np.abs(x - x_ref).max() < 1e-9


def test_operator_symmetry_and_psd(quartic_disc):
    _, _, basis = quartic_disc
    params = fo.FhnParams(gamma1=1.0, gamma2=1.0, beta1=0.2, beta2=0.0)
    ops = fo.assemble_operators(basis, params)
    for k in range(2):
        A = ops.dense_block("A", k) + ops.dense_block("B", k)
        assert np.abs(A - A.T).max() < 1e-9 * np.abs(A).max()
        eig = np.linalg.eigvalsh(0.5 * (A + A.T))
        assert eig.min() > -1e-8 * eig.max()


def test_corrector_system_positive_definite_example2(rng):
    # factorization oracle: 1 + (2 tau/3) gamma (lam_x + lam_y) > 0
    prob = fo.example_problem(2)
    _, grid, basis = fo.discretize(prob, 4, m=4)
    ops = fo.assemble_operators(basis, prob.params)
    for comp in ops.comps:
        if comp.gamma == 0:
            continue
        lx, _, ly, _ = comp._eigendecomposition()
        for tau in rng.uniform(0.0, 1.0, 10):
            denom = 1.0 + (2 * tau / 3) * comp.gamma * \
                (lx[:, None] + ly[None, :])
            assert denom.min() > 0.99


# -- predictor ------------------------------------------------------------------


def test_predictor_explicit_matches_hand_leapfrog(quartic_disc, rng):
    _, _, basis = quartic_disc
    params = fo.FhnParams(gamma1=1.0, gamma2=0.3)
    ops = fo.assemble_operators(basis, params)
    c_n = rng.standard_normal(basis.dim)
    c_m = rng.standard_normal(basis.dim)
    rhs = rng.standard_normal(basis.dim)
    tau = 0.01
    state = fo.State(c_nm_half=c_m, c_n=c_n)
    before = ops.solve_count
    got = fo.predictor_step(state, ops, tau, tau, rhs, mode="explicit")
    assert ops.solve_count == before  # structurally explicit: no solve
    expected = c_m + 2 * tau * (rhs - ops.apply(c_n))
    assert np.abs(got - expected).max() < 1e-13 * max(1, np.abs(expected).max())


def test_predictor_modes_identical_without_diffusion(rng):
    prob = constant_field_problem()
    _, grid, basis = fo.discretize(prob, 2, m=3)
    ops = fo.assemble_operators(basis, prob.params)
    c_n = rng.standard_normal(basis.dim)
    c_m = rng.standard_normal(basis.dim)
    rhs = rng.standard_normal(basis.dim)
    state = fo.State(c_nm_half=c_m, c_n=c_n)
    a = fo.predictor_step(state, ops, 0.02, 0.015, rhs, mode="explicit")
    b = fo.predictor_step(state, ops, 0.02, 0.015, rhs, mode="stabilized")
    assert np.abs(a - b).max() < 1e-12


def test_predictor_stationary_state(rng):
    # stationary manufactured solution: one predictor step stays put
    prob = stationary_problem()
    mesh, grid, basis = fo.discretize(prob, 2, m=4)
    ops = fo.assemble_operators(basis, prob.params)
    c0, c_half = fo.initialize(prob, basis, grid, 0.01, ops)
    assert np.abs(c_half - c0).max() < 1e-10
    rhs = _rhs_coeffs(prob, basis, 0.02, c=c0)
    state = fo.State(c_nm_half=c0, c_n=c0)
    for mode in ("explicit", "stabilized"):
        c_next = fo.predictor_step(state, ops, 0.01, 0.01, rhs, mode=mode)
        assert np.abs(c_next - c0).max() < 1e-9


def test_predictor_zero_state(quartic_disc):
    _, _, basis = quartic_disc
    ops = fo.assemble_operators(basis, fo.FhnParams())
    state = fo.State(c_nm_half=basis.zeros(), c_n=basis.zeros())
    out = fo.predictor_step(state, ops, 0.1, 0.1, basis.zeros(), "explicit")
    assert np.all(out == 0.0)


# -- corrector -------------------------------------------------------------------


def test_corrector_zero_state(quartic_disc):
    _, _, basis = quartic_disc
    ops = fo.assemble_operators(basis, fo.FhnParams())
    state = fo.State(c_nm_half=None, c_n=basis.zeros(),
                     c_np_half=basis.zeros())
    out = fo.corrector_step(state, ops, 0.1, basis.zeros())
    assert np.all(out == 0.0)


def test_corrector_solve_residual_enforced(quartic_disc, rng):
    _, _, basis = quartic_disc
    ops = fo.assemble_operators(basis, fo.FhnParams(gamma1=2.0, gamma2=1.0))
    rhs = rng.standard_normal(basis.dim)
    theta = 0.2
    x = ops.solve(theta, rhs)
    res = rhs - x - theta * ops.apply(x)
    assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(rhs)


# -- initialization ---------------------------------------------------------------


def test_initialize_zero_problem():
    prob = constant_field_problem(uv0=(0.0, 0.0))
    mesh, grid, basis = fo.discretize(prob, 2, m=3)
    c0, c_half = fo.initialize(prob, basis, grid, 0.05)
    assert np.abs(c0).max() == 0.0
    assert np.abs(c_half).max() < 1e-14


def test_initialize_stationary_fixed_point():
    prob = stationary_problem(gamma=(1.0, 0.5))
    mesh, grid, basis = fo.discretize(prob, 3, m=4)
    c0, c_half = fo.initialize(prob, basis, grid, 0.02)
    assert np.abs(c_half - c0).max() < 1e-10


def test_initialize_rejects_bad_tau():
    prob = constant_field_problem()
    mesh, grid, basis = fo.discretize(prob, 2, m=3)
    with pytest.raises(ValueError):
        fo.initialize(prob, basis, grid, 0.0)


def test_initialize_nonconvergence_reported():
    prob = constant_field_problem(uv0=(0.4, 0.1))
    mesh, grid, basis = fo.discretize(prob, 2, m=3)
    cfg = fo.SolverConfig(init_max_iter=1, init_tol=1e-15)
    with pytest.raises(fo.InitializationError):
        fo.initialize(prob, basis, grid, 0.3, config=cfg)


def test_initial_projection_refinement_trend():
    # ||c0 - u0|| must decay at least like h^4 across halvings (observed
    # order is ~5; the frozen bound keeps slack below the measured 44x, 36x)
    prob = fo.example_problem(1)
    errs = []
    for n in (4, 8, 16):
        _, grid, basis = fo.discretize(prob, n, m=4)
        X, Y = grid.meshgrid()
        u0 = prob.u0(X, Y)
        c0 = basis.project_values(u0, prob.v0(X, Y))
        U, _ = basis.values_on_grid(c0)
        w2 = grid.weights.reshape(X.shape)
        errs.append(float(np.sqrt(np.sum(w2 * (U - u0) ** 2))))
    assert errs[0] / errs[1] >= 16.0
    assert errs[1] / errs[2] >= 16.0


# -- full runs --------------------------------------------------------------------


def test_run_zero_problem_trivial_horizon():
    prob = constant_field_problem(uv0=(0.0, 0.0))
    mesh, grid, basis = fo.discretize(prob, 2, m=3)
    tg = fo.build_uniform(prob.T, 2)
    traj = fo.run(prob, mesh, basis, grid, tg)
    assert all(np.abs(c).max() < 1e-13 for c in traj.coeffs)
    assert traj.labels == ["node", "mid", "node", "mid", "node"]
    assert traj.times == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])


@pytest.mark.parametrize("mode", ["stabilized", "explicit"])
def test_run_exactness_linear_in_time(mode):
    # jointly validates both stencils, the extrapolation, and spatial
    # exactness: polynomial-in-space, linear-in-time solution with beta = 0
    prob = polynomial_problem(gamma=(1.0, 1.0))
    tg = fo.build_uniform(prob.T, 8)
    traj = fo.solve_problem(prob, 3, tg, m=4,
                            config=fo.SolverConfig(predictor=mode))
    eu, ev = fo.error_linf_l2(traj)
    assert max(eu, ev) < 1e-8


def test_run_superposition_linearity(monkeypatch):
    # with the reaction silenced and no sources the map from initial data to
    # trajectory is linear; checked by superposition of random initial pairs
    import fhn_osc.stepper as stepper_mod

    monkeypatch.setattr(
        stepper_mod, "reaction_F",
        lambda u, v, p: (np.zeros_like(u), np.zeros_like(v)))

    base = fo.FhnParams(gamma1=1.0, gamma2=0.5)
    dom = fo.Domain(0, 1, 0, 1)

    def make(u0c, v0c):
        return fo.ProblemSpec(
            name="lin", domain=dom, T=1.0, params=base, bc_mode="robin",
            u0=lambda x, y: u0c[0] * np.sin(x) + u0c[1] * y,
            v0=lambda x, y: v0c[0] * np.cos(y) + v0c[1] * x,
        )

    mesh, grid, basis = fo.discretize(make((1, 0), (1, 0)), 2, m=3)
    tg = fo.build_uniform(1.0, 4)
    pa, pb = make((0.7, -0.2), (0.1, 0.4)), make((-0.3, 0.5), (0.9, -0.6))
    pab = make((0.4, 0.3), (1.0, -0.2))
    ta = fo.run(pa, mesh, basis, grid, tg)
    tb = fo.run(pb, mesh, basis, grid, tg)
    tab = fo.run(pab, mesh, basis, grid, tg)
    for ca, cb, cab in zip(ta.coeffs, tb.coeffs, tab.coeffs):
        assert np.abs(ca + cb - cab).max() < 1e-10


def test_zero_diffusion_against_ode_oracle():
    # gamma = 0 and constant data: the trajectory follows the plain reaction
    # ODE; solve_ivp provides the independent reference, and halving tau
    # shows second order
    prob = constant_field_problem(uv0=(0.3, -0.2))
    mesh, grid, basis = fo.discretize(prob, 2, m=3)
    p = prob.params

    def f(t, w):
        f1, f2 = fo.reaction_F(w[0], w[1], p)
        return [f1, f2]

    ref = solve_ivp(f, (0, 1.0), [0.3, -0.2], rtol=1e-12, atol=1e-14)
    wT = ref.y[:, -1]

    errs = []
    for N in (16, 32):
        tg = fo.build_uniform(1.0, N)
        traj = fo.run(prob, mesh, basis, grid, tg)
        uT = basis.eval_at_points(traj.coeffs[-1],
                                  np.array([[0.4, 0.6]]))
        errs.append(math.hypot(uT[0][0] - wT[0], uT[1][0] - wT[1]))
        # the state stays spatially constant and A = B = 0
        U, V = basis.values_on_grid(traj.coeffs[-1])
        assert np.ptp(U) < 1e-11 and np.ptp(V) < 1e-11
    assert errs[0] < 1e-4
    order = math.log2(errs[0] / errs[1])
    assert 1.7 < order < 2.3


def test_explicit_mode_conditional_stability():
    # diffusion eigenvalues far above 1/tau: the classical explicit midpoint
    # update amplifies roundoff catastrophically while the stabilized mode
    # stays accurate (this pins down why "stabilized" is the default)
    prob = fo.example_problem(1)
    tg = fo.build_uniform(1.0, 32)
    stab = fo.solve_problem(prob, 16, tg, m=4,
                            config=fo.SolverConfig(predictor="stabilized"))
    eu_stab, _ = fo.error_linf_l2(stab)
    try:
        expl = fo.solve_problem(prob, 16, tg, m=4,
                                config=fo.SolverConfig(predictor="explicit"))
        eu_expl, _ = fo.error_linf_l2(expl)
    except fo.BlowUpError:
        eu_expl = math.inf
    assert eu_stab < 5e-3
    assert eu_expl > 100 * eu_stab


def test_blowup_error_reports_step_and_phase():
    # Example 2 at a coarse step overflows through the explicitly treated
    # cubic; the failure must carry the step index and phase
    prob = fo.example_problem(2)
    tg = fo.build_uniform(prob.T, 16)
    with pytest.raises(fo.BlowUpError) as exc:
        fo.solve_problem(prob, 4, tg, m=3)
    assert exc.value.step >= 0
    assert exc.value.phase in ("predictor", "corrector")


def test_trajectory_reports_phases():
    prob = constant_field_problem()
    mesh, grid, basis = fo.discretize(prob, 2, m=3)
    tg = fo.build_uniform(prob.T, 3)
    traj = fo.run(prob, mesh, basis, grid, tg)
    phases = [r.phase for r in traj.reports]
    assert phases == ["init", "corrector", "predictor", "corrector",
                      "predictor", "corrector"]
    assert len(traj.times) == 2 * tg.N + 1


def test_graded_grid_smoke():
    prob = fo.example_problem(1)
    N = fo.choose_N_for_target(1.0, 2.0**-5, "graded")
    tg = fo.build_graded(1.0, N)
    traj = fo.solve_problem(prob, 8, tg, m=4)
    eu, ev = fo.error_linf_l2(traj)
    assert np.isfinite(eu) and np.isfinite(ev)
    assert eu < 2e-2 and ev < 1e-2


def test_solver_config_validation():
    with pytest.raises(ValueError):
        fo.SolverConfig(predictor="semi")
