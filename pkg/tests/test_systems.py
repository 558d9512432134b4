import numpy as np
import pytest
from numpy.testing import assert_allclose

from cnls_waves.analytic import (
    ModelParams,
    critical_coupling,
    embedded_eigenfunction_Psi,
    fundamental_profile,
    kappa,
)
from cnls_waves.collocation import (
    CollocationSolution,
    Mesh,
    NewtonSettings,
    assemble_residual,
    integral_functional,
    interpolate,
    solve_newton,
)
from cnls_waves.errors import DegenerateProjectionError
from cnls_waves.systems import (
    EigenSystem,
    GenEigSystem,
    HomoclinicSystem,
    eigen_asymptotic_matrix,
    eigen_bc,
    eigen_phase_ic2,
    eigen_projections,
    eigen_rhs,
    fredholm_integrals,
    geneig_asymptotic_matrix,
    geneig_ic3,
    geneig_ic4,
    geneig_projections,
    geneig_rhs,
    homoclinic_asymptotic_matrix,
    homoclinic_bc,
    homoclinic_projections,
    homoclinic_rhs,
    phase_condition_ic1,
)

from helpers import assert_jacobian_consistent, assert_parameter_column_consistent

MODEL = ModelParams(omega=1.0, s=4.0, beta1=3.0, beta2=2.0)


def params_dict(beta1, **extra):
    p = {"omega": 1.0, "s": 4.0, "beta1": beta1, "beta2": 2.0, "d1": 0.0,
         "d2": 0.0, "eps1": 0.0, "eps2": 0.0, "lambda_re": 0.0, "lambda_im": 0.0,
         "c1": 0.0, "c2": 0.0}
    p.update(extra)
    return p


def fundamental_state(x):
    u = fundamental_profile(x, 1.0)
    du = -np.tanh(x) * u
    return np.stack([u, np.zeros_like(u), du, np.zeros_like(u)])


class TestHomoclinicRhs:
    def test_origin_is_equilibrium(self):
        z = np.zeros((4, 3))
        out = homoclinic_rhs(np.zeros(3), z, params_dict(5.0, d1=0.2))
        assert np.all(out == 0.0)

    def test_analytic_solution_slope(self):
        x = np.linspace(-3, 3, 11)
        z = fundamental_state(x)
        out = homoclinic_rhs(x, z, params_dict(7.0))
        u = z[0]
        upp = u - u**3  # omega*U - U^3 at omega = 1
        assert_allclose(out[0], z[2], rtol=1e-14)
        assert_allclose(out[1], 0.0, atol=1e-300)
        assert_allclose(out[2], upp, rtol=1e-12)
        assert_allclose(out[3], 0.0, atol=1e-300)

    @pytest.mark.parametrize("d1", [0.0, 0.4])
    def test_origin_jacobian_eigenvalues(self, d1):
        # dense eigendecomposition oracle for the linearization at the origin
        A = homoclinic_asymptotic_matrix(1.0, 4.0, d1)
        w = np.sort(np.linalg.eigvals(A).real)
        expected = np.sort([
            d1 / 2 - np.sqrt(1.0 + (d1 / 2) ** 2), d1 / 2 + np.sqrt(1.0 + (d1 / 2) ** 2),
            d1 / 2 - np.sqrt(4.0 + (d1 / 2) ** 2), d1 / 2 + np.sqrt(4.0 + (d1 / 2) ** 2),
        ])
        assert_allclose(w, expected, atol=1e-12)


class TestHomoclinicBc:
    def test_exact_solution_exponentially_small(self):
        for xpm in (5.0, 9.0):
            za = fundamental_state(np.array([-xpm]))[:, 0]
            zb = fundamental_state(np.array([xpm]))[:, 0]
            res = homoclinic_bc(za, zb, params_dict(3.0))
            assert np.max(np.abs(res)) < 10.0 * np.exp(-2.0 * xpm)

    def test_annihilation_pattern(self):
        # rows for one subspace kill the eigenvectors of the other
        for d1 in (0.0, 0.25):
            A = homoclinic_asymptotic_matrix(1.0, 4.0, d1)
            w, V = np.linalg.eig(A)
            proj = homoclinic_projections(1.0, 4.0, d1)
            Vu = V[:, w.real > 0].real
            Vs = V[:, w.real < 0].real
            assert np.abs(proj.stable @ Vu).max() < 1e-12
            assert np.abs(proj.unstable @ Vs).max() < 1e-12

    def test_d1_dependence_matches_fd(self):
        za = fundamental_state(np.array([-6.0]))[:, 0]
        zb = fundamental_state(np.array([6.0]))[:, 0]
        h = 1e-6
        from cnls_waves.systems import homoclinic_bc_jac_param

        fd = (homoclinic_bc(za, zb, params_dict(3.0, d1=h))
              - homoclinic_bc(za, zb, params_dict(3.0, d1=-h))) / (2 * h)
        ana = homoclinic_bc_jac_param(za, zb, params_dict(3.0), "d1")
        assert_allclose(ana, fd, atol=1e-9)


@pytest.fixture(scope="module")
def hom_system():
    mesh = Mesh.uniform(-9.0, 9.0, 120, 4)
    return HomoclinicSystem(MODEL, mesh)


@pytest.fixture(scope="module")
def fundamental_sol(hom_system):
    return hom_system.seed_fundamental(beta1=3.0)


class TestPhaseCondition:
    def test_zero_at_reference(self, hom_system, fundamental_sol):
        assert abs(phase_condition_ic1(fundamental_sol, fundamental_sol)) < 1e-14

    def test_translation_first_order(self, hom_system, fundamental_sol):
        delta = 1e-3
        pts = fundamental_sol.mesh.representation_points()
        shifted = fundamental_sol.copy()
        shifted.coefficients = fundamental_state(pts - delta).T
        got = phase_condition_ic1(shifted, fundamental_sol)
        slope_sq = integral_functional(
            fundamental_sol, lambda x, u: u[2] ** 2 + u[3] ** 2
        )
        assert_allclose(got, -delta * slope_sq, rtol=5e-3)

    def test_overlap_against_quadrature_oracle(self, fundamental_sol):
        pts = fundamental_sol.mesh.representation_points()
        bump = 0.01 * np.sin(pts) * np.exp(-(pts**2) / 8.0)
        pert = fundamental_sol.copy()
        pert.coefficients = pert.coefficients.copy()
        pert.coefficients[:, 0] += bump
        got = phase_condition_ic1(pert, fundamental_sol)
        xf = np.linspace(-9, 9, 40001)
        z3 = fundamental_state(xf)[2]
        oracle = np.trapezoid(0.01 * np.sin(xf) * np.exp(-(xf**2) / 8.0) * z3, xf)
        assert_allclose(got, oracle, rtol=1e-6, atol=1e-14)


class TestHomoclinicSolve:
    def test_zero_solution_zero_residual(self, hom_system):
        mesh = hom_system.mesh
        sol = CollocationSolution(mesh, 4, np.zeros((mesh.n_points, 4)), params_dict(3.0))
        hom_system.set_reference(sol)
        res = assemble_residual(hom_system.spec, sol)
        assert np.max(np.abs(res)) == 0.0

    def test_exact_injection_residual(self):
        # the analytic profile injected on the working mesh; boundary rows are
        # exponentially small at x = +-9 and collocation rows are set by the
        # interpolation error of the representation
        mesh = Mesh.uniform(-9.0, 9.0, 360, 4)
        sys = HomoclinicSystem(MODEL, mesh)
        sol = sys.seed_fundamental(3.0)
        sys.set_reference(sol)
        res = assemble_residual(sys.spec, sol)
        assert np.max(np.abs(res)) < 1e-9

    def test_exact_injection_residual_coarse(self):
        # on the coarse benchmark mesh the boundary truncation at x = +-5
        # dominates; the collocation part alone sits near 2e-8
        mesh = Mesh.uniform(-5.0, 5.0, 100, 4)
        sys = HomoclinicSystem(MODEL, mesh)
        sol = sys.seed_fundamental(3.0)
        sys.set_reference(sol)
        res = assemble_residual(sys.spec, sol)
        n_col = 4 * 100 * 4
        assert np.max(np.abs(res[:n_col])) < 1e-7
        assert np.max(np.abs(res)) < 1e-5

    def test_newton_from_exact_converges_fast(self, hom_system, fundamental_sol):
        hom_system.set_reference(fundamental_sol)
        # two iterations must reach the tolerance from the analytic seed
        sol = solve_newton(hom_system.spec, fundamental_sol,
                           NewtonSettings(residual_tol=1e-10, max_iterations=2))
        assert abs(sol.parameter_values["d1"]) < 1e-8
        res = assemble_residual(hom_system.spec, sol)
        assert np.max(np.abs(res)) < 1e-10

    def test_jacobian_consistency(self):
        mesh = Mesh.uniform(-3.0, 3.0, 8, 3)
        sys = HomoclinicSystem(MODEL, mesh)
        sol = sys.seed_with_mode(0, amplitude=0.3)
        sol.parameter_values["d1"] = 0.05
        sys.set_reference(sol)
        assert_jacobian_consistent(sys.spec, sol)
        for name in ("d1", "beta1", "beta2"):
            assert_parameter_column_consistent(sys.spec, sol, name)


class TestEigenRhs:
    def test_translational_kernel_state(self):
        # zeta built from the profile slope solves the eigen part at lambda = 0
        x = np.linspace(-2.5, 2.5, 9)
        z = fundamental_state(x)
        u = z[0]
        state = np.zeros((20, len(x)))
        state[0:4] = z
        state[4] = z[2]                      # psi_1 = U'
        state[8] = u - u**3                  # psi_1' = U''
        p = params_dict(3.0)
        out = eigen_rhs(x, state, p)
        # slot 8 must equal psi_1'' = U''' = (omega - 3U^2) U'
        assert_allclose(out[4], state[8], rtol=1e-13)
        assert_allclose(out[8], (1.0 - 3.0 * u**2) * z[2], rtol=1e-12)
        # remaining eigen slots stay zero
        assert np.max(np.abs(out[9:12])) < 1e-14
        assert np.max(np.abs(out[16:20])) < 1e-14

    def test_gauge_kernel_state(self):
        x = np.linspace(-2.5, 2.5, 9)
        z = fundamental_state(x)
        u = z[0]
        state = np.zeros((20, len(x)))
        state[0:4] = z
        state[6] = u                         # psi_3 = U
        state[10] = z[2]                     # psi_3' = U'
        out = eigen_rhs(x, state, params_dict(3.0))
        # slot 10 must equal psi_3'' = (omega - U^2) U = U''
        assert_allclose(out[10], (1.0 - u**2) * u, rtol=1e-12)
        assert_allclose(out[6], state[10], rtol=1e-13)

    def test_analytic_embedded_eigenfunction(self):
        # psi = (0, Psi, 0, -i Psi) with lambda = 12i at the third threshold
        beta1 = critical_coupling(1.0, 4.0, 2)
        kap = kappa(beta1)
        x = np.array([0.25, 0.8, 1.5, 2.4])
        h = 3e-3
        psi = lambda xx: embedded_eigenfunction_Psi(xx, 1.0, kap, 0)
        d_psi = (-psi(x + 2 * h) + 8 * psi(x + h) - 8 * psi(x - h) + psi(x - 2 * h)) / (12 * h)
        dd_psi = (-psi(x + 2 * h) + 16 * psi(x + h) - 30 * psi(x) + 16 * psi(x - h)
                  - psi(x - 2 * h)) / (12 * h * h)
        z = fundamental_state(x)
        state = np.zeros((20, len(x)))
        state[0:4] = z
        state[5] = psi(x)        # zeta_R: psi_2 = Psi
        state[9] = d_psi
        state[15] = -psi(x)      # zeta_I: psi_4 = -Psi
        state[19] = -d_psi
        out = eigen_rhs(x, state, params_dict(beta1, lambda_re=0.0, lambda_im=12.0))
        assert np.max(np.abs(out[9] - dd_psi)) < 1e-8
        assert np.max(np.abs(out[19] + dd_psi)) < 1e-8
        # derivative slots reproduce the stored derivatives
        assert_allclose(out[5], state[9], rtol=1e-12)
        assert_allclose(out[15], state[19], rtol=1e-12)


class TestEigenBc:
    def test_rho_delta_against_explicit_formulas(self):
        # the explicit sign-convention expressions, evaluated in 50-digit
        # arithmetic to dodge their cancellation near the essential spectrum
        import mpmath as mp

        from cnls_waves.systems import _complex_decay_roots

        def explicit(freq, lr, li):
            with mp.workdps(50):
                sgn = 1 if lr >= 0 else -1
                ap = mp.mpf(freq) - mp.mpf(li)
                r = mp.sqrt(ap**2 + mp.mpf(lr) ** 2)
                rho_p = mp.sqrt((r + ap) / 2)
                del_p = sgn * mp.sqrt((r - ap) / 2)
                am = mp.mpf(freq) + mp.mpf(li)
                rm = mp.sqrt(am**2 + mp.mpf(lr) ** 2)
                rho_m = mp.sqrt((rm + am) / 2)
                del_m = -sgn * mp.sqrt((rm - am) / 2)
                return [float(rho_p), float(del_p), float(rho_m), float(del_m)]

        for (lr, li) in [(0.7, 0.0), (0.3, 1.9), (-0.4, 2.5), (1e-8, 12.0), (0.0, 0.5)]:
            w1p, w1m, w2p, w2m = _complex_decay_roots(1.0, 4.0, lr, li)
            assert_allclose([w1p.real, w1p.imag, w1m.real, w1m.imag],
                            explicit(1.0, lr, li), rtol=1e-12, atol=1e-300)
            assert_allclose([w2p.real, w2p.imag, w2m.real, w2m.imag],
                            explicit(4.0, lr, li), rtol=1e-12, atol=1e-300)

    def test_collapse_at_lambda_zero(self):
        proj = eigen_projections(1.0, 4.0, 0.0, 0.0)
        # decay rates reduce to sqrt(omega), sqrt(s) and the rotation parts vanish
        from cnls_waves.systems import _complex_decay_roots

        w1p, w1m, w2p, w2m = _complex_decay_roots(1.0, 4.0, 0.0, 0.0)
        assert_allclose([w1p.real, w2p.real, w1m.real, w2m.real], [1.0, 2.0, 1.0, 2.0])
        assert_allclose([w1p.imag, w2p.imag, w1m.imag, w2m.imag], 0.0, atol=1e-300)
        assert proj.stable.shape == (8, 16)

    @pytest.mark.parametrize("lam", [(0.3, 0.7), (0.05, 5.0), (1.2, 0.0), (0.02, 11.0)])
    def test_annihilation(self, lam):
        lr, li = lam
        A = eigen_asymptotic_matrix(1.0, 4.0, lr, li)
        w, V = np.linalg.eig(A)
        proj = eigen_projections(1.0, 4.0, lr, li)
        Vu = V[:, w.real > 1e-10]
        Vs = V[:, w.real < -1e-10]
        assert Vu.shape[1] == 8 and Vs.shape[1] == 8
        assert np.abs(proj.stable @ Vu).max() < 1e-10
        assert np.abs(proj.unstable @ Vs).max() < 1e-10

    def test_stable_tail_in_kernel_of_unstable_rows(self):
        # a state decaying exactly like a stable asymptotic mode is killed by
        # the x_plus rows
        lr, li = 0.4, 1.3
        A = eigen_asymptotic_matrix(1.0, 4.0, lr, li)
        w, V = np.linalg.eig(A)
        proj = eigen_projections(1.0, 4.0, lr, li)
        idx = np.argsort(w.real)[:8]
        tail = np.real(V[:, idx] @ np.array([0.3, -0.1, 0.7, 0.2, 0.05, -0.4, 0.6, 0.1]))
        assert np.abs(proj.unstable @ tail).max() < 1e-10

    def test_degenerate_projection_error(self):
        with pytest.raises(DegenerateProjectionError):
            eigen_projections(1.0, 4.0, 0.0, 12.0)

    def test_bc_assembles_homoclinic_and_eigen_rows(self):
        sa = np.arange(20.0) * 0.01
        sb = np.arange(20.0)[::-1] * 0.01
        p = params_dict(10.0, lambda_re=0.3, lambda_im=0.7)
        out = eigen_bc(sa, sb, p)
        assert out.shape == (20,)
        hom = homoclinic_bc(sa[0:4], sb[0:4], p)
        assert_allclose(out[0:4], hom, rtol=1e-14)


class TestEigenSystemClass:
    def test_spec_count_identity(self):
        mesh = Mesh.uniform(-3.0, 3.0, 6, 3)
        sys = EigenSystem(MODEL, mesh)
        assert sys.spec.n_bc + len(sys.spec.integral_conditions) == 20 + 3

    def test_jacobian_consistency(self):
        mesh = Mesh.uniform(-2.0, 2.0, 5, 3)
        sys = EigenSystem(ModelParams(1.0, 4.0, 10.0, 2.0), mesh)
        rng = np.random.default_rng(11)
        vals = 0.2 * rng.standard_normal((mesh.n_points, 20))
        sol = CollocationSolution(
            mesh, 20, vals,
            params_dict(10.0, d1=0.02, lambda_re=0.3, lambda_im=0.7),
        )
        sys.set_reference(sol)
        assert_jacobian_consistent(sys.spec, sol, rtol=1e-6, h=1e-6)
        for name in ("d1", "lambda_re", "lambda_im", "beta1"):
            assert_parameter_column_consistent(sys.spec, sol, name)

    def test_phase_ic2_rotation_and_scaling(self):
        mesh = Mesh.uniform(-6.0, 6.0, 40, 4)
        sys = EigenSystem(ModelParams(1.0, 4.0, 10.0, 2.0), mesh)
        pts = mesh.representation_points()
        psi = embedded_eigenfunction_Psi(pts, 1.0, 4.0, 0)
        dpsi = np.gradient(psi, pts)
        vals = np.zeros((mesh.n_points, 20))
        vals[:, 0:4] = fundamental_state(pts).T
        vals[:, 5] = psi
        vals[:, 9] = dpsi
        vals[:, 15] = -psi
        vals[:, 19] = -dpsi
        ref = CollocationSolution(mesh, 20, vals, params_dict(10.0, lambda_im=12.0))

        norm_sq = integral_functional(
            ref, lambda x, u: np.sum(u[4:8] ** 2 + u[12:16] ** 2, axis=0)
        )
        assert_allclose(eigen_phase_ic2(ref, ref), [0.0, 0.0], atol=1e-14)

        theta = 1e-3
        rot = ref.copy()
        zr = ref.coefficients[:, 4:12].copy()
        zi = ref.coefficients[:, 12:20].copy()
        rot.coefficients[:, 4:12] = np.cos(theta) * zr - np.sin(theta) * zi
        rot.coefficients[:, 12:20] = np.sin(theta) * zr + np.cos(theta) * zi
        first, second = eigen_phase_ic2(rot, ref)
        assert abs(first) < 1e-5 * norm_sq
        assert_allclose(second, theta * norm_sq, rtol=1e-5)

        r = 1e-3
        scaled = ref.copy()
        scaled.coefficients = ref.coefficients.copy()
        scaled.coefficients[:, 4:20] *= 1.0 + r
        first, second = eigen_phase_ic2(scaled, ref)
        assert_allclose(first, r * norm_sq, rtol=1e-10)
        assert abs(second) < 1e-12

    def test_flip_to_unstable(self):
        mesh = Mesh.uniform(-2.0, 2.0, 4, 3)
        sys = EigenSystem(ModelParams(1.0, 4.0, 10.0, 2.0), mesh)
        rng = np.random.default_rng(5)
        vals = rng.standard_normal((mesh.n_points, 20))
        sol = CollocationSolution(mesh, 20, vals.copy(),
                                  params_dict(10.0, lambda_re=-0.4, lambda_im=0.9))
        out = sys.flip_to_unstable(sol)
        assert out.parameter_values["lambda_re"] == 0.4
        assert out.parameter_values["lambda_im"] == 0.9
        # double flip of the transform part is the identity
        again = sys.flip_to_unstable(out)
        assert again.parameter_values["lambda_re"] == 0.4


class TestGenEig:
    def test_kernel_direction_zero_residual(self):
        x = np.linspace(-2.0, 2.0, 7)
        z = fundamental_state(x)
        u = z[0]
        state = np.zeros((8, len(x)))
        state[0:4] = z
        state[4] = z[2]          # eta_1 = U'
        state[6] = u - u**3      # eta_3 = U''
        out = geneig_rhs(x, state, params_dict(3.0))
        assert_allclose(out[4], state[6], rtol=1e-13)
        assert_allclose(out[6], (1.0 - 3.0 * u**2) * z[2], rtol=1e-12)
        assert np.max(np.abs(out[5])) < 1e-14
        assert np.max(np.abs(out[7])) < 1e-14

    def test_frequency_derivative_is_generalized_mode(self):
        # closed-form d/d omega of the fundamental profile satisfies the
        # eta equations with eps1 = 1, eps2 = 0
        x = np.linspace(-2.0, 2.0, 7)
        h = 3e-3

        def du_domega(xx, om=1.0):
            rt = np.sqrt(om)
            sech = 1.0 / np.cosh(rt * xx)
            th = np.tanh(rt * xx)
            return sech / np.sqrt(2.0 * om) - np.sqrt(2.0 * om) * xx * th * sech / (2.0 * rt)

        f = lambda xx: du_domega(xx)
        d1f = (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)
        d2f = (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (
            12 * h * h
        )
        z = fundamental_state(x)
        state = np.zeros((8, len(x)))
        state[0:4] = z
        state[4] = f(x)
        state[6] = d1f
        out = geneig_rhs(x, state, params_dict(3.0, eps1=1.0, eps2=0.0))
        assert np.max(np.abs(out[6] - d2f)) < 1e-7

    def test_frequency_derivative_from_two_solves(self):
        # finite-difference quotient of two neighbouring-frequency solves on a
        # two-component branch satisfies the full generalized-mode BVP with
        # unit source strength
        from cnls_waves.continuation import branch_switch_seed, correct_branch_seed
        from cnls_waves.systems import GenEigSystem
        from cnls_waves.collocation import integral_functional as intf

        mesh = Mesh.uniform(-8.0, 8.0, 160, 4)
        h = 1e-4
        beta1 = 3.5
        sols = {}
        for om in (1.0, 1.0 + h, 1.0 - h):
            model = ModelParams(om, 4.0, 3.0, 2.0)
            sys_h = HomoclinicSystem(model, mesh)
            seed = sys_h.seed_with_mode(0, amplitude=0.44, beta1=beta1)
            sys_h.set_reference(seed)
            sols[om] = solve_newton(sys_h.spec, seed,
                                    NewtonSettings(residual_tol=1e-11))
        base = sols[1.0]
        eta12 = (sols[1.0 + h].coefficients - sols[1.0 - h].coefficients) / (2 * h)

        gsys = GenEigSystem(ModelParams(1.0, 4.0, 3.0, 2.0), mesh)
        vals = np.concatenate([base.coefficients, eta12], axis=1)
        params = params_dict(beta1, eps1=1.0, eps2=0.0,
                             d1=base.parameter_values["d1"])
        state = CollocationSolution(mesh, 8, vals, params)
        L = 16.0
        state.parameter_values["c1"] = intf(state, lambda x, u: u[4]**2 + u[5]**2) / L
        state.parameter_values["c2"] = intf(state, lambda x, u: u[4]*u[2] + u[5]*u[3]) / L
        gsys.set_reference(state)
        res = assemble_residual(gsys.spec, state)
        assert np.max(np.abs(res)) < 5e-6

    def test_linearity_in_mode_and_eps1(self):
        rng = np.random.default_rng(2)
        x = np.linspace(-1.5, 1.5, 5)
        state = rng.standard_normal((8, len(x)))
        p = params_dict(5.0, eps1=0.7, eps2=0.3, d2=0.1)
        out1 = geneig_rhs(x, state, p)
        alpha = 2.5
        state2 = state.copy()
        state2[4:8] *= alpha
        p2 = dict(p, eps1=alpha * p["eps1"], d2=alpha * p["d2"])
        out2 = geneig_rhs(x, state2, p2)
        assert_allclose(out2[4:8], alpha * out1[4:8], rtol=1e-12)

    def test_corner_entries_vanish_without_coupling(self):
        proj = geneig_projections(1.0, 4.0, 0.0, 0.0, 0.0, 0.5)
        assert proj.stable[2, 0] == 0.0
        assert proj.stable[3, 1] == 0.0
        assert proj.unstable[2, 0] == 0.0
        assert proj.unstable[3, 1] == 0.0
        # eta rows reduce to the pure projections
        assert_allclose(proj.stable[2], [0, 0, 0, 0, -1.0, 0, 1, 0], atol=1e-300)
        assert_allclose(proj.unstable[3], [0, 0, 0, 0, 0, 2.0, 0, 1], atol=1e-300)

    def test_small_d1_replacement_accuracy(self):
        # exact ratio vs its small-d1 replacement: relative difference O(d1^2)
        om = 1.0
        rel = []
        for d1 in (1e-2, 1e-3):
            exact = (np.sqrt(om + (d1 / 2) ** 2) - np.sqrt(om)) / d1
            approx = d1 / (8.0 * np.sqrt(om))
            rel.append(abs(exact - approx) / abs(exact))
        assert rel[0] < 1e-4
        assert rel[1] / rel[0] < 0.02   # drops like d1^2

    def test_annihilation_at_converged_scales(self):
        # with the dummy parameters at their converged magnitudes the rows
        # annihilate the opposite subspace to full precision
        d1 = d2 = 1e-10
        for eps1, eps2 in ((0.0, 0.0), (0.5, 0.0), (0.5, 1.0), (0.3, 0.4)):
            A = geneig_asymptotic_matrix(1.0, 4.0, d1, d2, eps1, eps2)
            w, V = np.linalg.eig(A)
            proj = geneig_projections(1.0, 4.0, d1, d2, eps1, eps2)
            Vu = V[:, w.real > 0].real
            Vs = V[:, w.real < 0].real
            assert np.abs(proj.stable @ Vu).max() < 1e-10
            assert np.abs(proj.unstable @ Vs).max() < 1e-10

    def test_jacobian_consistency(self):
        mesh = Mesh.uniform(-2.0, 2.0, 6, 3)
        sys = GenEigSystem(ModelParams(1.0, 4.0, 20.0, 2.0), mesh)
        rng = np.random.default_rng(7)
        vals = 0.3 * rng.standard_normal((mesh.n_points, 8))
        sol = CollocationSolution(
            mesh, 8, vals,
            params_dict(20.0, d1=1e-3, d2=2e-3, eps1=0.4, eps2=0.3, c1=0.5, c2=0.1),
        )
        sys.set_reference(sol)
        assert_jacobian_consistent(sys.spec, sol)
        for name in ("eps1", "eps2", "d1", "d2", "beta1", "c1", "c2"):
            assert_parameter_column_consistent(sys.spec, sol, name)

    def test_ic3_ic4_values(self):
        # both conditions reduce to the interval-averaged slope norm when
        # eta = eta0 and c = 0
        mesh = Mesh.uniform(-6.0, 6.0, 60, 4)
        sys = GenEigSystem(MODEL, mesh)
        pts = mesh.representation_points()
        vals = np.zeros((mesh.n_points, 8))
        vals[:, 0:4] = fundamental_state(pts).T
        vals[:, 4] = vals[:, 2]
        vals[:, 5] = 0.0
        sol = CollocationSolution(mesh, 8, vals, params_dict(3.0, c1=0.0, c2=0.0))
        slope_sq = integral_functional(sol, lambda x, u: u[2] ** 2 + u[3] ** 2) / 12.0
        assert_allclose(geneig_ic3(sol), slope_sq, rtol=1e-12)
        assert_allclose(geneig_ic4(sol), slope_sq, rtol=1e-12)
        sol.parameter_values["c1"] = slope_sq
        sol.parameter_values["c2"] = slope_sq
        assert abs(geneig_ic3(sol)) < 1e-14
        assert abs(geneig_ic4(sol)) < 1e-14


class TestFredholm:
    def test_parity_zero_for_kernel_direction(self):
        mesh = Mesh.uniform(-8.0, 8.0, 80, 4)
        pts = mesh.representation_points()
        vals = np.zeros((mesh.n_points, 8))
        vals[:, 0:4] = fundamental_state(pts).T
        vals[:, 4] = vals[:, 2]
        vals[:, 5] = vals[:, 3]
        sol = CollocationSolution(mesh, 8, vals, params_dict(3.0))
        i1, i2, verdicts = fredholm_integrals(sol)
        assert abs(i1) < 1e-13
        assert abs(i2) < 1e-13
        assert "alpha2 = 0" in verdicts["first_problem_solvable_iff"]

    def test_sign_flip(self):
        mesh = Mesh.uniform(-6.0, 6.0, 40, 3)
        pts = mesh.representation_points()
        vals = np.zeros((mesh.n_points, 8))
        vals[:, 0:4] = fundamental_state(pts).T
        vals[:, 4] = np.exp(-(pts**2))
        vals[:, 5] = pts * np.exp(-(pts**2))
        sol = CollocationSolution(mesh, 8, vals, params_dict(3.0))
        i1, i2, _ = fredholm_integrals(sol)
        flipped = sol.copy()
        flipped.coefficients[:, 4:8] *= -1.0
        j1, j2, _ = fredholm_integrals(flipped)
        assert_allclose([j1, j2], [-i1, -i2], rtol=1e-14)
