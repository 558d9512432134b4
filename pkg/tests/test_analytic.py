import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from cnls_waves.analytic import (
    BifCoefficients,
    ModelParams,
    bif_coefficients,
    critical_coupling,
    embedded_eigenfunction_Psi,
    embedded_eigenvalues,
    essential_spectrum_gap,
    fundamental_profile,
    hyp2f1_terminating,
    kappa,
    kernel_mode_V1,
    onset_eigenvalues,
)
from cnls_waves.errors import QuadratureError


def hyp2f1_rational_oracle(k_neg: int, b: Fraction, c: Fraction, z: Fraction) -> Fraction:
    """Direct summation of the terminating series in exact rational arithmetic."""
    total = Fraction(0)
    for j in range(k_neg + 1):
        num = Fraction(1)
        for i in range(j):
            num *= Fraction(-k_neg + i) * (b + i)
        den = Fraction(1)
        for i in range(j):
            den *= Fraction(i + 1) * (c + i)
        total += num / den * z**j
    return total


def fd_second_derivative(f, x, h=3e-3):
    """Fourth-order central second derivative."""
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (
        12 * h * h
    )


class TestHyp2f1:
    def test_terminates_at_zero(self):
        assert hyp2f1_terminating(0, 2.5, 3.0, 0.7) == 1.0

    def test_two_term_series(self):
        # (1, b, c, z) -> 1 - b*z/c
        assert_allclose(hyp2f1_terminating(1, 4.5, 3.0, 0.5), 0.25, rtol=1e-15)

    def test_against_rational_oracle(self):
        # oracle value for (2, 7/2, 2, 1/2) is exactly -3/32
        exact = hyp2f1_rational_oracle(2, Fraction(7, 2), Fraction(2), Fraction(1, 2))
        assert exact == Fraction(-3, 32)
        assert_allclose(hyp2f1_terminating(2, 3.5, 2.0, 0.5), float(exact), rtol=1e-14)

    @given(
        k_neg=st.integers(0, 8),
        b2=st.integers(1, 40),
        c2=st.integers(1, 40),
        z_num=st.integers(-8, 8),
    )
    def test_matches_rational_oracle_everywhere(self, k_neg, b2, c2, z_num):
        b, c, z = Fraction(b2, 2), Fraction(c2, 2), Fraction(z_num, 8)
        exact = float(hyp2f1_rational_oracle(k_neg, b, c, z))
        got = hyp2f1_terminating(k_neg, float(b), float(c), float(z))
        assert_allclose(got, exact, rtol=1e-11, atol=1e-13)

    def test_vanishing_pochhammer_rejected(self):
        with pytest.raises(ValueError):
            hyp2f1_terminating(3, 1.5, 0.0, 0.5)
        with pytest.raises(ValueError):
            hyp2f1_terminating(3, 1.5, -2.0, 0.5)
        # c = -3 is outside the terminating range for k_neg = 3
        hyp2f1_terminating(3, 1.5, -3.5, 0.5)

    def test_array_input(self):
        z = np.array([0.0, 0.3, 0.9])
        out = hyp2f1_terminating(1, 2.0, 4.0, z)
        assert_allclose(out, 1.0 - 2.0 * z / 4.0, rtol=1e-15)


class TestFundamentalProfile:
    def test_peak_values(self):
        assert_allclose(fundamental_profile(0.0, 1.0), np.sqrt(2.0), rtol=1e-15)
        assert_allclose(fundamental_profile(0.0, 4.0), 2.0 * np.sqrt(2.0), rtol=1e-15)

    def test_even_and_positive(self):
        x = np.linspace(-8, 8, 101)
        u = fundamental_profile(x, 2.5)
        assert_allclose(u, u[::-1], rtol=1e-14)
        assert np.all(u > 0)

    def test_wave_equation_residual(self):
        # -U'' + omega*U - U^3 = 0 checked by finite differences
        omega = 1.0
        u = lambda x: fundamental_profile(x, omega)
        x0 = 0.7
        res = -fd_second_derivative(u, x0) + omega * u(x0) - u(x0) ** 3
        assert abs(res) < 1e-8


class TestKernelMode:
    def test_ell0_is_sech_squared(self):
        x = np.linspace(-6, 6, 41)
        assert_allclose(kernel_mode_V1(x, 1.0, 4.0, 0), 1.0 / np.cosh(x) ** 2, rtol=1e-14)

    def test_odd_mode_vanishes_at_origin(self):
        assert kernel_mode_V1(0.0, 1.0, 4.0, 1) == 0.0

    @pytest.mark.parametrize("ell", range(7))
    def test_parity(self, ell):
        x = np.linspace(0.1, 9, 60)
        left = kernel_mode_V1(-x, 1.0, 4.0, ell)
        right = kernel_mode_V1(x, 1.0, 4.0, ell)
        assert_allclose(left, (-1.0) ** ell * right, rtol=1e-12, atol=1e-300)

    @pytest.mark.parametrize("ell", range(7))
    @pytest.mark.parametrize("s", [1.0, 2.0, 4.0])
    def test_zero_count(self, ell, s):
        x = np.linspace(-12, 12, 10_000)
        v = kernel_mode_V1(x, 1.0, s, ell)
        signs = np.sign(v)
        signs = signs[signs != 0]
        assert int(np.sum(signs[1:] != signs[:-1])) == ell

    @pytest.mark.parametrize("ell", [0, 1, 2, 3, 4])
    def test_variational_equation_residual(self, ell):
        # (0, V1) solves the linearized wave equation at the critical coupling
        omega, s = 1.0, 4.0
        beta1 = critical_coupling(omega, s, ell)
        v = lambda x: kernel_mode_V1(x, omega, s, ell)
        for x0 in (0.3, 0.9, 1.7, 2.6):
            u0 = fundamental_profile(x0, omega)
            res = -fd_second_derivative(v, x0) + s * v(x0) - beta1 * u0**2 * v(x0)
            assert abs(res) < 1e-8

    def test_exponential_decay_bound(self):
        s = 4.0
        for ell in range(5):
            xs = np.linspace(5.0, 6.0, 11)
            c_fit = np.max(np.abs(kernel_mode_V1(xs, 1.0, s, ell)) * np.exp(np.sqrt(s) * xs))
            x = np.linspace(5.0, 12.0, 50)
            v = np.abs(kernel_mode_V1(x, 1.0, s, ell))
            assert np.all(v <= 1.05 * c_fit * np.exp(-np.sqrt(s) * x))


class TestCriticalCoupling:
    def test_reference_values(self):
        got = [critical_coupling(1.0, 4.0, ell) for ell in range(5)]
        assert_allclose(got, [3.0, 6.0, 10.0, 15.0, 21.0], atol=1e-12)

    def test_equal_frequencies(self):
        assert_allclose(critical_coupling(1.0, 1.0, 0), 1.0, atol=1e-14)

    @pytest.mark.parametrize("ratio", [1.0, 1.7, 4.0, 9.0])
    def test_monotone_with_unit_gaps(self, ratio):
        vals = [critical_coupling(1.0, ratio, ell) for ell in range(8)]
        diffs = np.diff(vals)
        assert np.all(diffs > 1.0)


class TestKappa:
    def test_reference_values(self):
        assert_allclose(kappa(3.0), 2.0, atol=1e-14)
        assert_allclose(kappa(6.0), 3.0, atol=1e-14)
        assert_allclose(kappa(10.0), 4.0, atol=1e-14)

    @given(st.floats(min_value=1e-6, max_value=1e6, allow_nan=False))
    def test_inverse_relation(self, beta1):
        k = kappa(beta1)
        assert_allclose(k * (k + 1.0) / 2.0, beta1, rtol=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            kappa(0.0)
        with pytest.raises(ValueError):
            kappa(-2.0)


class TestSpectrum:
    def test_embedded_at_beta1_10(self):
        ev = embedded_eigenvalues(ModelParams(1.0, 4.0, 10.0, 2.0))
        by_k = {e.k: e for e in ev}
        assert sorted(by_k) == [0, 1, 2, 3]
        assert_allclose([by_k[k].lambda_imag for k in range(4)], [12.0, 5.0, 0.0, 3.0], atol=1e-12)
        assert [by_k[k].embedded for k in range(4)] == [True, True, False, True]

    def test_embedded_at_beta1_3(self):
        ev = embedded_eigenvalues(ModelParams(1.0, 4.0, 3.0, 2.0))
        by_k = {e.k: e.lambda_imag for e in ev}
        assert by_k == {0: pytest.approx(0.0, abs=1e-12), 1: pytest.approx(3.0, abs=1e-12)}

    def test_onset_matches_embedded_at_threshold(self):
        for ell in range(5):
            beta1 = critical_coupling(1.0, 4.0, ell)
            a = onset_eigenvalues(1.0, 4.0, ell)
            b = embedded_eigenvalues(ModelParams(1.0, 4.0, beta1, 2.0))
            assert [e.k for e in a] == [e.k for e in b]
            assert_allclose(
                [e.lambda_imag for e in a], [e.lambda_imag for e in b], atol=1e-10
            )

    def test_onset_ell2(self):
        vals = {e.k: e.lambda_imag for e in onset_eigenvalues(1.0, 4.0, 2)}
        assert_allclose([vals[k] for k in range(4)], [12.0, 5.0, 0.0, 3.0], atol=1e-12)

    def test_onset_ell0(self):
        vals = {e.k: e.lambda_imag for e in onset_eigenvalues(1.0, 4.0, 0)}
        assert_allclose([vals[0], vals[1]], [0.0, 3.0], atol=1e-12)

    def test_gap(self):
        assert essential_spectrum_gap(ModelParams(1.0, 4.0, 1.0, 1.0)) == 1.0
        assert essential_spectrum_gap(ModelParams(4.0, 4.0, 1.0, 1.0)) == 4.0
        assert essential_spectrum_gap(ModelParams(2.0, 0.5, 1.0, 1.0)) == 0.5


class TestEigenfunctionPsi:
    def test_even_mode_peak(self):
        # k = 0 gives a pure sech power, value 1 at the origin; for k = 2 the
        # two-term hypergeometric factor gives 1 - (p + 3/2)/(p + 1) at z = 1
        assert_allclose(embedded_eigenfunction_Psi(0.0, 1.0, 4.0, 0), 1.0, rtol=1e-15)
        p = 4.0 - 2.0
        assert_allclose(
            embedded_eigenfunction_Psi(0.0, 1.0, 4.0, 2), 1.0 - (p + 1.5) / (p + 1.0), rtol=1e-14
        )

    def test_odd_mode_vanishes_at_origin(self):
        assert embedded_eigenfunction_Psi(0.0, 1.0, 4.0, 1) == 0.0
        assert embedded_eigenfunction_Psi(0.0, 1.0, 4.0, 3) == 0.0

    @pytest.mark.parametrize("k", [0, 1, 2, 3])
    def test_parity(self, k):
        x = np.linspace(0.2, 6, 30)
        left = embedded_eigenfunction_Psi(-x, 1.0, 4.3, k)
        right = embedded_eigenfunction_Psi(x, 1.0, 4.3, k)
        assert_allclose(left, (-1.0) ** k * right, rtol=1e-12)

    def test_eigenvalue_equation_residual(self):
        # full four-component residual of the linearization at lambda = 12i,
        # mode k = 0 at the third threshold
        omega, s = 1.0, 4.0
        beta1 = critical_coupling(omega, s, 2)  # 10
        kap = kappa(beta1)  # 4
        lam = 12.0j
        psi2 = lambda x: embedded_eigenfunction_Psi(x, omega, kap, 0)

        for x0 in (0.25, 0.8, 1.5, 2.4):
            u0 = fundamental_profile(x0, omega)
            p2 = psi2(x0)
            p4 = -1.0j * p2
            lm2 = -fd_second_derivative(psi2, x0) + s * p2 - beta1 * u0**2 * p2
            # rows of the linearized operator for psi = (0, p2, 0, p4)
            row1 = 0.0 - lam * 0.0
            row2 = -1.0j * lm2 - lam * p2
            row3 = 0.0 - lam * 0.0
            row4 = -lm2 - lam * p4
            for r in (row1, row2, row3, row4):
                assert abs(r) < 1e-8

    def test_rejects_nonpositive_exponent(self):
        with pytest.raises(ValueError):
            embedded_eigenfunction_Psi(0.0, 1.0, 2.0, 2)


class TestBifCoefficients:
    def test_a2_exact_for_ell0(self):
        # V1 = sech^2 so a2 = -2 * integral(sech^6) = -32/15
        got = bif_coefficients(4.0, 2.0, 0)
        assert_allclose(got.a_bar2, -32.0 / 15.0, rtol=1e-12)

    def test_b2_first_threshold(self):
        got = bif_coefficients(4.0, 2.0, 0)
        assert abs(got.b_bar2 - 5.486) < 1e-3

    def test_b2_fifth_threshold_negative(self):
        got = bif_coefficients(4.0, 2.0, 4)
        assert abs(got.b_bar2 - (-0.002094)) < 1e-5

    @pytest.mark.parametrize("s_norm", [1.3, 2.0, 4.0, 6.5])
    @pytest.mark.parametrize("ell", [0, 1, 2, 3])
    def test_a2_always_negative(self, s_norm, ell):
        got = bif_coefficients(s_norm, 2.0, ell)
        assert got.a_bar2 < 0.0
        assert got.ell == ell

    def test_refinement_guard(self):
        with pytest.raises(QuadratureError):
            bif_coefficients(4.0, 2.0, 0, tol=1e-18)

    def test_returns_dataclass(self):
        out = bif_coefficients(4.0, 2.0, 1)
        assert isinstance(out, BifCoefficients)


class TestModelParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            ModelParams(-1.0, 4.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            ModelParams(1.0, 0.0, 1.0, 1.0)
