"""Pure-numpy implementations of the grid hot loops."""

import numpy as np


def apply_five_point(diag, cx, cy, u, out=None):
    """y = diag*u - cx*E(u) - cx'*W(u) - cy*N(u) - cy'*S(u).

    ``cx[i, j]`` couples (i, j) with (i+1, j); ``cy[i, j]`` couples
    (i, j) with (i, j+1).  Masked points carry zero couplings and u = 0.
    """
    if out is None:
        out = np.empty_like(u)
    np.multiply(diag, u, out=out)
    out[:-1, :] -= cx * u[1:, :]
    out[1:, :] -= cx * u[:-1, :]
    out[:, :-1] -= cy * u[:, 1:]
    out[:, 1:] -= cy * u[:, :-1]
    return out


def upwind_divergence(omega, fx, fy, dx):
    """First-order upwind flux divergence and plain mass-flux divergence.

    ``fx`` has shape (n+1, n): mass flux b*u through x-face i sitting
    between cells (i-1, j) and (i, j); positive flux moves in +x.  Faces
    touching exterior cells must carry zero flux (the stair-step boundary
    fluxes are accounted for separately).  Returns (adv, divv) where
    adv = div(flux * omega_upwind) and divv = div(flux), both per cell.
    """
    n = omega.shape[0]
    upx = np.where(fx[1:-1, :] > 0.0, omega[:-1, :], omega[1:, :])
    upy = np.where(fy[:, 1:-1] > 0.0, omega[:, :-1], omega[:, 1:])
    gx = np.zeros((n + 1, omega.shape[1]))
    gy = np.zeros((omega.shape[0], n + 1))
    gx[1:-1, :] = fx[1:-1, :] * upx
    gy[:, 1:-1] = fy[:, 1:-1] * upy
    adv = (gx[1:, :] - gx[:-1, :] + gy[:, 1:] - gy[:, :-1]) / dx
    divv = (fx[1:, :] - fx[:-1, :] + fy[:, 1:] - fy[:, :-1]) / dx
    return adv, divv
