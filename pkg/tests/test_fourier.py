import numpy as np
import pytest
from numpy.testing import assert_allclose

from timemg.dense import (dense_prolongation, dense_restriction, dense_smoother,
                          dense_system, dense_twogrid)
from timemg.dg import BasisSpec, assemble_local
from timemg.fourier import (block_dft, block_idft, frequencies, gamma,
                            harmonics_decomposition, mode_vector, predicted_rho,
                            rho_profile, symbol_smoother, symbol_system,
                            transfer_symbols, twogrid_symbol)
from timemg.smoothing import alpha, local_smoother_matrix, optimal_omega
from timemg.transfers import build_transfers


class TestFrequencies:
    def test_four_steps(self):
        fs = frequencies(4)
        assert_allclose(fs.all, [-np.pi / 2, 0.0, np.pi / 2, np.pi])
        assert_allclose(fs.low, [0.0, np.pi / 2])
        assert_allclose(fs.high, [-np.pi / 2, np.pi])

    def test_cardinality(self):
        fs = frequencies(8)
        assert len(fs.low) == 4 and len(fs.high) == 4
        assert np.pi in fs.high

    @pytest.mark.parametrize("n", [3, 2, 20, 0])
    def test_invalid_counts(self, n):
        with pytest.raises(ValueError):
            frequencies(n)


class TestGamma:
    def test_examples(self):
        assert gamma(np.pi / 2) == pytest.approx(-np.pi / 2)
        assert gamma(0.0) == pytest.approx(np.pi)
        assert gamma(-np.pi / 4) == pytest.approx(3 * np.pi / 4)

    @pytest.mark.parametrize("n", [8, 32])
    def test_involution_onto_high(self, n):
        fs = frequencies(n)
        img = gamma(fs.low)
        assert_allclose(np.sort(img), np.sort(fs.high), atol=1e-14)

    def test_double_application_identity(self):
        fs = frequencies(16)
        for theta in fs.low:
            g = gamma(theta)
            # map the high image back through the same formula
            back = g - np.sign(g) * np.pi if g != 0 else np.pi
            assert back == pytest.approx(theta, abs=1e-14)

    def test_rejects_high_frequency(self):
        with pytest.raises(ValueError):
            gamma(3.0)


class TestBlockDft:
    def test_single_mode_support(self):
        fs = frequencies(16)
        theta = fs.all[4]
        coeff = np.array([1.0, -2.0])
        spectrum = block_dft(mode_vector(theta, coeff, 16))
        idx = fs.index(theta)
        mask = np.ones(16, bool)
        mask[idx] = False
        assert np.max(np.abs(spectrum.coeffs[mask])) < 1e-12
        assert_allclose(spectrum.coeffs[idx], coeff, atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        u = rng.standard_normal((16, 2))
        back = block_idft(block_dft(u))
        assert np.max(np.abs(back - u)) < 1e-12

    def test_constant_vector_support(self):
        fs = frequencies(8)
        spectrum = block_dft(np.ones((8, 1)))
        for i, theta in enumerate(fs.all):
            if abs(theta) > 1e-14:
                assert np.max(np.abs(spectrum.coeffs[i])) < 1e-13
        assert_allclose(spectrum.coeffs[fs.index(0.0)], 1.0, atol=1e-13)

    def test_harmonics_reassembly(self):
        rng = np.random.default_rng(2)
        u = rng.standard_normal((32, 3))
        h = harmonics_decomposition(u)
        assert np.max(np.abs(h.reassemble() - u)) < 1e-12

    def test_shifting_property(self):
        # psi_{n-1}(theta) = e^{-i theta} psi_n(theta)
        fs = frequencies(8)
        for theta in fs.all:
            m = mode_vector(theta, np.array([0.3, -1.2]), 8)
            assert_allclose(m[:-1], np.exp(-1j * theta) * m[1:], atol=1e-14)


class TestLocalSymbols:
    def test_system_symbol_p0(self):
        ops = assemble_local(BasisSpec(0), 1.0)
        assert_allclose(symbol_system(ops, 0.0), [[1.0]], atol=1e-15)
        ops = assemble_local(BasisSpec(0), 0.4)
        assert_allclose(symbol_system(ops, np.pi), [[2.4]], atol=1e-14)

    def test_system_symbol_decoupled_limit(self):
        # with the step coupling zeroed out the symbol loses its frequency
        # dependence and reduces to the diagonal block
        from timemg.dg import LocalOperators
        base = assemble_local(BasisSpec(1), 0.5)
        ops = LocalOperators(BasisSpec(1), 0.5, base.stiffness, base.mass,
                             np.zeros_like(base.coupling), base.eval_start,
                             base.eval_end)
        for theta in (0.0, 1.3, np.pi):
            assert_allclose(symbol_system(ops, theta), base.step_matrix, atol=1e-15)

    def test_smoother_symbol_powers(self):
        ops = assemble_local(BasisSpec(2), 0.7)
        assert_allclose(symbol_smoother(ops, 1.2, 0.8, 0), np.eye(3), atol=0.0)
        s1 = symbol_smoother(ops, 1.2, 0.8, 1)
        assert_allclose(symbol_smoother(ops, 1.2, 0.8, 3), s1 @ s1 @ s1, atol=1e-14)

    def test_smoother_symbol_scalar_formula(self):
        basis = BasisSpec(0)
        tau, omega, theta = 0.6, 0.75, 1.9
        ops = assemble_local(basis, tau)
        want = (1 - omega) + np.exp(-1j * theta) * omega / (1 + tau)
        assert_allclose(symbol_smoother(ops, theta, omega, 1), [[want]], atol=1e-14)

    def test_smoother_symbol_nilpotent(self):
        ops = assemble_local(BasisSpec(1), 3.0)
        s2 = symbol_smoother(ops, 0.9, 1.0, 2)
        assert np.max(np.abs(s2)) < 1e-12

    def test_transfer_symbols_p0(self):
        r1, r2 = build_transfers(BasisSpec(0), 0.8)
        for theta in (0.0, 0.7, np.pi, -1.1):
            rhat, phat = transfer_symbols(r1, r2, theta)
            assert_allclose(rhat, [[np.exp(-1j * theta) + 1.0]], atol=1e-14)
            assert_allclose(phat, [[(np.exp(1j * theta) + 1.0) / 2.0]], atol=1e-14)
            assert_allclose(phat, rhat.conj().T / 2.0, atol=1e-14)
        rhat_pi, phat_pi = transfer_symbols(r1, r2, np.pi)
        assert abs(rhat_pi[0, 0]) < 1e-14 and abs(phat_pi[0, 0]) < 1e-14


@pytest.mark.parametrize("p_t", [0, 1, 2])
@pytest.mark.parametrize("tau", [0.3, 1.0, 4.0])
class TestBruteForceSymbols:
    """Dense periodic operators act on single modes exactly like the symbols."""

    N = 16

    def _setup(self, p_t, tau):
        basis = BasisSpec(p_t)
        ops_f = assemble_local(basis, tau)
        ops_c = assemble_local(basis, 2 * tau)
        r1, r2 = build_transfers(basis, tau)
        return basis, ops_f, ops_c, r1, r2

    def test_system_and_smoother(self, p_t, tau):
        basis, ops_f, _, _, _ = self._setup(p_t, tau)
        n = self.N
        fs = frequencies(n)
        rng = np.random.default_rng(4)
        l_dense = dense_system(ops_f, n, periodic=True)
        s_dense = dense_smoother(ops_f, n, 0.7, periodic=True)
        for theta in fs.all:
            u = rng.standard_normal(basis.n_t) + 1j * rng.standard_normal(basis.n_t)
            psi = mode_vector(theta, u, n).ravel()
            want = mode_vector(theta, symbol_system(ops_f, theta) @ u, n).ravel()
            assert np.max(np.abs(l_dense @ psi - want)) < 1e-12
            want = mode_vector(theta, local_smoother_matrix(ops_f, theta, 0.7) @ u, n).ravel()
            assert np.max(np.abs(s_dense @ psi - want)) < 1e-12

    def test_restriction_maps_harmonics_to_coarse_mode(self, p_t, tau):
        basis, ops_f, _, r1, r2 = self._setup(p_t, tau)
        n = self.N
        fs = frequencies(n)
        rng = np.random.default_rng(5)
        r_dense = dense_restriction(r1, r2, n)
        for theta in fs.low:
            u1 = rng.standard_normal(basis.n_t) + 1j * rng.standard_normal(basis.n_t)
            u2 = rng.standard_normal(basis.n_t) + 1j * rng.standard_normal(basis.n_t)
            psi = (mode_vector(theta, u1, n) + mode_vector(gamma(theta), u2, n)).ravel()
            rhat_t, _ = transfer_symbols(r1, r2, theta)
            rhat_g, _ = transfer_symbols(r1, r2, gamma(theta))
            want = mode_vector(2 * theta, rhat_t @ u1 + rhat_g @ u2, n // 2).ravel()
            assert np.max(np.abs(r_dense @ psi - want)) < 1e-12

    def test_prolongation_maps_coarse_mode_to_harmonics(self, p_t, tau):
        basis, ops_f, _, r1, r2 = self._setup(p_t, tau)
        n = self.N
        fs = frequencies(n)
        rng = np.random.default_rng(6)
        p_dense = dense_prolongation(r1, r2, n)
        for theta in fs.low:
            u = rng.standard_normal(basis.n_t) + 1j * rng.standard_normal(basis.n_t)
            psi_c = mode_vector(2 * theta, u, n // 2).ravel()
            _, phat_t = transfer_symbols(r1, r2, theta)
            _, phat_g = transfer_symbols(r1, r2, gamma(theta))
            want = (mode_vector(theta, phat_t @ u, n)
                    + mode_vector(gamma(theta), phat_g @ u, n)).ravel()
            assert np.max(np.abs(p_dense @ psi_c - want)) < 1e-12

    def test_twogrid_spectrum_equals_harmonic_union(self, p_t, tau):
        basis, ops_f, ops_c, r1, r2 = self._setup(p_t, tau)
        n = self.N
        omega = optimal_omega(alpha(basis, tau))
        m_dense = dense_twogrid(ops_f, ops_c, r1, r2, n, 1, 1, omega, periodic=True)
        union = []
        for theta in frequencies(n).low:
            m_hat = twogrid_symbol(ops_f, ops_c, (r1, r2), theta, 1, 1, omega)
            union.extend(np.linalg.eigvals(m_hat))
        got = np.sort(np.abs(np.linalg.eigvals(m_dense)))
        want = np.sort(np.abs(np.asarray(union)))
        assert np.max(np.abs(got - want)) < 1e-9


class TestFrequencyDoubling:
    @pytest.mark.parametrize("n", [8, 64])
    def test_low_maps_onto_coarse_set(self, n):
        fs = frequencies(n)
        coarse = frequencies(n // 2)
        assert_allclose(np.sort(2.0 * fs.low), np.sort(coarse.all), atol=1e-13)


class TestTwoGridSymbol:
    def test_closed_form_profile_p0(self):
        # spectral radius against the explicit degree-0 formula, per frequency
        tau = 1.0
        ops_f = assemble_local(BasisSpec(0), tau)
        ops_c = assemble_local(BasisSpec(0), 2 * tau)
        tr = build_transfers(BasisSpec(0), tau)
        omega = optimal_omega(alpha(BasisSpec(0), tau))
        for theta in np.linspace(-np.pi / 2 + 0.05, np.pi / 2, 11):
            m = twogrid_symbol(ops_f, ops_c, tr, theta, 1, 1, omega)
            rho = np.max(np.abs(np.linalg.eigvals(m)))
            e2 = np.exp(2j * theta)
            want = abs((4 * (1 + tau) ** 2 * np.sin(theta) ** 2
                        + tau**2 * (1 + 2 * tau - e2))
                       / ((2 + tau * (2 + tau)) ** 2 * ((1 + 2 * tau) * e2 - 1)))
            assert abs(rho - want) < 1e-12

    def test_quarter_frequency_value(self):
        ops_f = assemble_local(BasisSpec(0), 1.0)
        ops_c = assemble_local(BasisSpec(0), 2.0)
        tr = build_transfers(BasisSpec(0), 1.0)
        m = twogrid_symbol(ops_f, ops_c, tr, np.pi / 2, 1, 1, 0.8)
        assert abs(np.max(np.abs(np.linalg.eigvals(m))) - 0.2) < 1e-13

    @pytest.mark.parametrize("p_t", [0, 1, 2])
    def test_coarse_modes_annihilated_without_smoothing(self, p_t):
        # with no smoothing, the correction kills anything prolongated
        basis = BasisSpec(p_t)
        rng = np.random.default_rng(9)
        for tau in (0.4, 2.0):
            ops_f = assemble_local(basis, tau)
            ops_c = assemble_local(basis, 2 * tau)
            r1, r2 = build_transfers(basis, tau)
            for theta in (0.2, -1.0, np.pi / 2):
                m = twogrid_symbol(ops_f, ops_c, (r1, r2), theta, 0, 0, 1.0)
                _, phat_t = transfer_symbols(r1, r2, theta)
                _, phat_g = transfer_symbols(r1, r2, gamma(theta))
                c = rng.standard_normal(basis.n_t) + 1j * rng.standard_normal(basis.n_t)
                x = np.concatenate([phat_t @ c, phat_g @ c])
                assert np.max(np.abs(m @ x)) < 1e-12 * max(1.0, np.max(np.abs(x)))


class TestPredictedRho:
    @pytest.mark.parametrize("tau", [1e-3, 1e-1, 1.0, 10.0, 1e3])
    def test_closed_form_p0(self, tau):
        got = predicted_rho(BasisSpec(0), tau, 1024, 1, 1, "optimal")
        want = 1.0 / (2.0 + 2.0 * tau + tau * tau)
        assert abs(got - want) <= 1e-9 * want

    def test_small_step_limit(self):
        assert predicted_rho(BasisSpec(0), 1e-9, 256, 1, 1) == pytest.approx(0.5, abs=1e-6)

    def test_large_step_decay(self):
        got = predicted_rho(BasisSpec(0), 1e3, 256, 1, 1)
        assert got <= 10.0 / (2.0 + 2e3 + 1e6)

    def test_profile_locates_maximizer_p0(self):
        low, radii = rho_profile(BasisSpec(0), 1.0, 256, 1, 1)
        assert abs(abs(low[np.argmax(radii)]) - np.pi / 2) < 1e-12

    @pytest.mark.parametrize("nu", [1, 2, 5])
    def test_higher_degrees_no_worse_than_p0(self, nu):
        taus = np.logspace(-6, 6, 49)
        base = np.array([predicted_rho(BasisSpec(0), t, 64, nu, nu) for t in taus])
        for p_t in range(1, 6):
            vals = np.array([predicted_rho(BasisSpec(p_t), t, 64, nu, nu) for t in taus])
            assert np.all(vals <= base + 0.05)

    def test_invalid_step_count(self):
        with pytest.raises(ValueError):
            predicted_rho(BasisSpec(0), 1.0, 100)

    def test_basis_independence(self):
        a = predicted_rho(BasisSpec(1), 0.7, 64, 1, 1)
        b = predicted_rho(BasisSpec(1, "scaled_legendre"), 0.7, 64, 1, 1)
        assert abs(a - b) < 1e-11
