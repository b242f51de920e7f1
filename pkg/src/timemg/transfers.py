"""Intergrid transfer blocks between a fine step tau and a coarse step 2*tau.

Restriction maps two consecutive fine blocks into one coarse block with the
pair (r1, r2); prolongation is its transpose and realizes the L2 projection
from the coarse onto the fine space, so coarse polynomials are reproduced
exactly on the fine grid.
"""

from __future__ import annotations

import numpy as np

from .dg import BasisSpec, basis_values


def build_transfers(basis: BasisSpec, tau_fine: float) -> tuple[np.ndarray, np.ndarray]:
    """Return the local restriction blocks (r1, r2) for one coarsening step.

    r1.T = mass^{-1} @ proj1 and r2.T = mass^{-1} @ proj2, where proj1/proj2
    are the cross mass matrices between the coarse basis on (0, 2 tau) and the
    fine basis on the first/second half.  Quadrature is Gauss-Legendre with
    p_t + 1 points, exact for the degree 2 p_t integrands.
    """
    if tau_fine <= 0:
        raise ValueError(f"time step must be positive, got {tau_fine}")
    xg, wg = np.polynomial.legendre.leggauss(basis.n_t)
    xg = (xg + 1.0) / 2.0
    wg = wg / 2.0
    phi = basis_values(basis, xg)                     # fine basis at fine ref points
    phi_c1 = basis_values(basis, xg / 2.0)            # coarse basis over first half
    phi_c2 = basis_values(basis, (xg + 1.0) / 2.0)    # coarse basis over second half
    mass = tau_fine * (phi * wg) @ phi.T
    proj1 = tau_fine * (phi * wg) @ phi_c1.T          # proj1[k, l] = int phi~_l phi_k
    proj2 = tau_fine * (phi * wg) @ phi_c2.T
    r1 = np.linalg.solve(mass, proj1).T
    r2 = np.linalg.solve(mass, proj2).T
    return r1, r2
