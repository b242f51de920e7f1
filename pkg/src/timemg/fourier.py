"""Blockwise Fourier-mode machinery: frequency sets, the block DFT, local
operator symbols, and the two-grid symbol on pairs of aliased harmonics.

The analysis is exact for time-periodic coupling; for the initial value
problem it predicts the asymptotic behavior of the actual cycles.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .dg import BasisSpec, LocalOperators, assemble_local
from .transfers import build_transfers

_BOUNDARY_TOL = 1e-12


def _check_n_steps(n_steps: int) -> None:
    if n_steps < 4 or (n_steps & (n_steps - 1)) != 0:
        raise ValueError(f"number of steps must be a power of two >= 4, got {n_steps}")


@dataclasses.dataclass(frozen=True)
class FrequencySet:
    """Frequencies 2*pi*k/n for k = 1 - n/2 .. n/2, split at |theta| = pi/2.

    ``low`` is the half in (-pi/2, pi/2] that survives coarsening; ``high``
    is its complement, aliased onto ``low`` by the map :func:`gamma`.
    """

    n_steps: int
    all: np.ndarray
    low: np.ndarray
    high: np.ndarray

    def index(self, theta: float) -> int:
        """Position of a frequency in ``all``."""
        k = int(round(theta * self.n_steps / (2.0 * np.pi)))
        idx = k + self.n_steps // 2 - 1
        if not 0 <= idx < self.n_steps or abs(self.all[idx] - theta) > _BOUNDARY_TOL:
            raise ValueError(f"{theta} is not a grid frequency for n_steps={self.n_steps}")
        return idx


def frequencies(n_steps: int) -> FrequencySet:
    """Build the frequency set for ``n_steps`` (power of two, >= 4)."""
    _check_n_steps(n_steps)
    k = np.arange(1 - n_steps // 2, n_steps // 2 + 1)
    theta = 2.0 * np.pi * k / n_steps
    low_mask = (theta > -np.pi / 2) & (theta <= np.pi / 2)
    return FrequencySet(n_steps=n_steps, all=theta,
                        low=theta[low_mask], high=theta[~low_mask])


def gamma(theta):
    """High frequency aliased with the low frequency ``theta`` under coarsening.

    gamma(theta) = theta - sign(theta)*pi with sign(0) := -1, so gamma(0) = pi;
    gamma is an involution between the low and high halves.
    """
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(theta_arr <= -np.pi / 2 - _BOUNDARY_TOL) or np.any(theta_arr > np.pi / 2 + _BOUNDARY_TOL):
        raise ValueError(f"{theta} is not a low frequency (expected (-pi/2, pi/2])")
    out = np.where(theta_arr > 0, theta_arr - np.pi, theta_arr + np.pi)
    return float(out) if np.isscalar(theta) else out


@dataclasses.dataclass(frozen=True)
class BlockSpectrum:
    """Blockwise DFT coefficients, one n_t-vector per frequency in freqs.all."""

    freqs: FrequencySet
    coeffs: np.ndarray  # (n_steps, n_t) complex


def block_dft(u: np.ndarray) -> BlockSpectrum:
    """Decompose a block vector into blockwise Fourier modes.

    Componentwise over the local index, coefficient k is
    (1/n) * sum_n u_n * exp(-i*n*theta_k) with 1-based block index n.
    """
    u = np.asarray(u)
    n_steps = u.shape[0]
    _check_n_steps(n_steps)
    freqs = frequencies(n_steps)
    raw = np.fft.fft(u, axis=0) / n_steps                  # sum over 0-based index
    k = np.arange(1 - n_steps // 2, n_steps // 2 + 1)
    phase = np.exp(-1j * freqs.all)                        # shift to 1-based blocks
    coeffs = raw[np.mod(k, n_steps)] * phase[:, None]
    return BlockSpectrum(freqs=freqs, coeffs=coeffs)


def block_idft(spectrum: BlockSpectrum) -> np.ndarray:
    """Invert :func:`block_dft`; returns a complex (n_steps, n_t) array."""
    freqs = spectrum.freqs
    n_steps = freqs.n_steps
    k = np.arange(1 - n_steps // 2, n_steps // 2 + 1)
    y = np.zeros((n_steps, spectrum.coeffs.shape[1]), dtype=complex)
    phase = np.exp(1j * freqs.all)
    np.add.at(y, np.mod(k, n_steps), spectrum.coeffs * phase[:, None])
    return np.fft.ifft(y, axis=0) * n_steps


def mode_vector(theta: float, coeff: np.ndarray, n_steps: int) -> np.ndarray:
    """Block vector of the single mode theta with coefficient vector ``coeff``."""
    n = np.arange(1, n_steps + 1)
    return np.exp(1j * n * theta)[:, None] * np.asarray(coeff)[None, :]


@dataclasses.dataclass(frozen=True)
class HarmonicsDecomposition:
    """Coefficients of the aliased pairs {theta, gamma(theta)} per low frequency."""

    low: np.ndarray       # (n/2,) low frequencies
    u1: np.ndarray        # (n/2, n_t) coefficients at theta
    u2: np.ndarray        # (n/2, n_t) coefficients at gamma(theta)
    n_steps: int

    def reassemble(self) -> np.ndarray:
        out = np.zeros((self.n_steps, self.u1.shape[1]), dtype=complex)
        for theta, c1, c2 in zip(self.low, self.u1, self.u2):
            out += mode_vector(theta, c1, self.n_steps)
            out += mode_vector(gamma(theta), c2, self.n_steps)
        return out


def harmonics_decomposition(u: np.ndarray) -> HarmonicsDecomposition:
    """Split a block vector into its pairs of aliased harmonics."""
    spectrum = block_dft(u)
    freqs = spectrum.freqs
    idx_low = np.array([freqs.index(t) for t in freqs.low])
    idx_high = np.array([freqs.index(gamma(t)) for t in freqs.low])
    return HarmonicsDecomposition(low=freqs.low, u1=spectrum.coeffs[idx_low],
                                  u2=spectrum.coeffs[idx_high], n_steps=freqs.n_steps)


def symbol_system(ops: LocalOperators, theta: float) -> np.ndarray:
    """Symbol of the periodic block operator: step_matrix - e^{-i theta} coupling."""
    return ops.step_matrix - np.exp(-1j * theta) * ops.coupling


def symbol_smoother(ops: LocalOperators, theta: float, omega: float, nu: int = 1) -> np.ndarray:
    """nu-th power of the local damped Jacobi iteration matrix at frequency theta."""
    if nu < 0:
        raise ValueError(f"smoothing count must be >= 0, got {nu}")
    s = (1.0 - omega) * np.eye(ops.n_t, dtype=complex) \
        + np.exp(-1j * theta) * omega * ops.step_inv_coupling
    return np.linalg.matrix_power(s, nu)


def transfer_symbols(r1: np.ndarray, r2: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Symbols (restriction, prolongation) of the transfer pair at frequency theta."""
    rhat = np.exp(-1j * theta) * r1 + r2
    phat = 0.5 * (np.exp(1j * theta) * r1.T + r2.T)
    return rhat, phat


def twogrid_symbol(ops_fine: LocalOperators, ops_coarse: LocalOperators,
                   transfers: tuple[np.ndarray, np.ndarray], theta: float,
                   nu1: int, nu2: int, omega: float) -> np.ndarray:
    """Two-grid iteration symbol on the harmonics pair {theta, gamma(theta)}.

    Returns the 2 n_t x 2 n_t matrix  S^{nu2} [I - P Lc(2 theta)^{-1} R Lf] S^{nu1}
    with the pre/post smoother symbols block diagonal over the pair.  The
    coarse symbol uses the operators at 2*tau and the doubled frequency.
    """
    g = gamma(theta)
    n_t = ops_fine.n_t
    r1, r2 = transfers
    lf_t = symbol_system(ops_fine, theta)
    lf_g = symbol_system(ops_fine, g)
    lc = symbol_system(ops_coarse, 2.0 * theta)
    rhat_t, phat_t = transfer_symbols(r1, r2, theta)
    rhat_g, phat_g = transfer_symbols(r1, r2, g)

    p_col = np.vstack([phat_t, phat_g])               # (2 n_t, n_t)
    r_row = np.hstack([rhat_t, rhat_g])               # (n_t, 2 n_t)
    l_diag = np.zeros((2 * n_t, 2 * n_t), dtype=complex)
    l_diag[:n_t, :n_t] = lf_t
    l_diag[n_t:, n_t:] = lf_g
    correction = np.eye(2 * n_t, dtype=complex) - p_col @ np.linalg.solve(lc, r_row @ l_diag)

    s_pre = np.zeros_like(correction)
    s_pre[:n_t, :n_t] = symbol_smoother(ops_fine, theta, omega, nu1)
    s_pre[n_t:, n_t:] = symbol_smoother(ops_fine, g, omega, nu1)
    s_post = np.zeros_like(correction)
    s_post[:n_t, :n_t] = symbol_smoother(ops_fine, theta, omega, nu2)
    s_post[n_t:, n_t:] = symbol_smoother(ops_fine, g, omega, nu2)
    return s_post @ correction @ s_pre


def _resolved_omega(basis: BasisSpec, tau: float, damping) -> float:
    from .smoothing import alpha, resolve_damping
    return resolve_damping(damping, alpha(basis, tau))


def rho_profile(basis: BasisSpec, tau: float, n_steps: int = 1024,
                nu1: int = 1, nu2: int = 1, damping="optimal"):
    """Spectral radius of the two-grid symbol at every low frequency.

    Returns (low_frequencies, radii); the max of ``radii`` is the predicted
    convergence factor and its argmax locates the worst frequency.
    """
    _check_n_steps(n_steps)
    omega = _resolved_omega(basis, tau, damping)
    ops_f = assemble_local(basis, tau)
    ops_c = assemble_local(basis, 2.0 * tau)
    transfers = build_transfers(basis, tau)
    low = frequencies(n_steps).low
    radii = np.empty(len(low))
    for i, theta in enumerate(low):
        m = twogrid_symbol(ops_f, ops_c, transfers, theta, nu1, nu2, omega)
        radii[i] = np.max(np.abs(np.linalg.eigvals(m)))
    return low, radii


def predicted_rho(basis: BasisSpec, tau: float, n_steps: int = 1024,
                  nu1: int = 1, nu2: int = 1, damping="optimal") -> float:
    """Predicted asymptotic two-grid convergence factor.

    Maximum over the low frequencies of the spectral radius of the two-grid
    symbol, with the damping resolved at the fine step size.
    """
    _, radii = rho_profile(basis, tau, n_steps, nu1, nu2, damping)
    return float(np.max(radii))
