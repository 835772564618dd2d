"""Optical Bloch equations of the four-level laser-cooled atom.

Basis ordering (see :mod:`atomtrap.constants`):

    0 excited F'=2   1 ground F=1   2 ground F=2   3 excited F'=3

The repump laser couples (1 <-> 0); the cooling laser couples (2 <-> 0)
and (2 <-> 3). That coupling graph is a tree, so a diagonal rotating
frame removes all optical time dependence exactly. With the frame phases

    theta_2 = w2(level),  theta_0 = theta_3 = theta_2 + w_cool,
    theta_1 = theta_0 - w_repump,

the transformed Hamiltonian (divided by hbar) is time independent:

    H/hbar = [[-D2,      -W1/2, -W2/2, 0    ],
              [-W1/2, -(D2-D1), 0,     0    ],
              [-W2/2,  0,       0,     -W3/2],
              [0,      0,       -W3/2, -D3  ]]

where D1 = w_repump - (w0 - w1), D2 = w_cool - (w0 - w2) and
D3 = w_cool - (w3 - w2) are the laser detunings from the (light-shifted)
transitions and W_i the Rabi rates.

Spontaneous emission enters as the relaxation matrix of the branching
F'=3 -> F=2 at rate Gamma and F'=2 -> {F=1, F=2} at Gamma/2 each
(equivalently Lindblad jumps sqrt(Gamma)|2><3|, sqrt(Gamma/2)|1><0|,
sqrt(Gamma/2)|2><0|); ground-state relaxation F=2 -> F=1 is neglected
on fluorescence timescales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .constants import EXC_F2, EXC_F3, GND_F1, GND_F2
from .params import ExperimentParams
from .trap import effective_detunings

DIM = 4


class DegenerateSteadyStateError(RuntimeError):
    """The Liouvillian has more than one stationary state."""


class IntegrationError(RuntimeError):
    """Master-equation integration failed."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.3e} s)")
        self.time = time


# -- density-matrix helpers -------------------------------------------------

def density_from_populations(pops) -> np.ndarray:
    """Diagonal density matrix from a length-4 population vector."""
    pops = np.asarray(pops, dtype=float)
    if pops.shape != (DIM,) or np.any(pops < 0):
        raise ValueError("need 4 non-negative populations")
    s = pops.sum()
    if s <= 0:
        raise ValueError("populations must not all vanish")
    return np.diag(pops / s).astype(complex)


def validate_density_matrix(rho: np.ndarray, *, herm_tol: float = 1e-10,
                            trace_tol: float = 1e-9, eig_floor: float = -1e-8):
    """Raise ValueError unless rho is a valid 4x4 state.

    Checks Hermiticity, unit trace and eigenvalue floor (small negative
    eigenvalues down to `eig_floor` are tolerated as integration noise).
    """
    rho = np.asarray(rho)
    if rho.shape != (DIM, DIM):
        raise ValueError(f"density matrix must be {DIM}x{DIM}")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > herm_tol:
        raise ValueError(f"not Hermitian: max |rho - rho^+| = {herm:.2e}")
    tr = rho.trace().real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"trace {tr!r} differs from 1 beyond {trace_tol}")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if lam.min() < eig_floor:
        raise ValueError(f"negative eigenvalue {lam.min():.2e} below {eig_floor}")


def excited_population(rho: np.ndarray) -> float:
    """Total population of the two excited levels (the emitting states)."""
    return float(rho[EXC_F2, EXC_F2].real + rho[EXC_F3, EXC_F3].real)


# -- rotating-frame system --------------------------------------------------

@dataclass(frozen=True)
class RotatingFrameSystem:
    """Time-independent rotating-frame generator of the master equation.

    h_rot is the Hamiltonian divided by hbar (rad/s, Hermitian); gamma is
    the excited-state decay rate shared by F'=2 and F'=3.
    """

    h_rot: np.ndarray
    gamma: float

    def __post_init__(self):
        h = np.asarray(self.h_rot, dtype=complex)
        if h.shape != (DIM, DIM) or np.abs(h - h.conj().T).max() > 1e-6 * max(1.0, np.abs(h).max()):
            raise ValueError("h_rot must be a 4x4 Hermitian matrix")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        object.__setattr__(self, "h_rot", h)

    def relaxation(self, rho: np.ndarray) -> np.ndarray:
        """Spontaneous-emission term R(rho) of the master equation."""
        g = self.gamma
        out = np.empty((DIM, DIM), dtype=complex)
        # coherence/population damping: -(G_i + G_j)/2 with G = (g, 0, 0, g)
        decay = np.array([g, 0.0, 0.0, g])
        out[:] = rho * (-(decay[:, None] + decay[None, :]) / 2.0)
        # feeding of the ground levels by the branching ratios
        out[GND_F1, GND_F1] += g / 2.0 * rho[EXC_F2, EXC_F2]
        out[GND_F2, GND_F2] += g / 2.0 * rho[EXC_F2, EXC_F2] + g * rho[EXC_F3, EXC_F3]
        return out

    def liouvillian_matrix(self) -> np.ndarray:
        """16x16 generator acting on row-major vec(rho)."""
        eye = np.eye(DIM)
        h = self.h_rot
        lmat = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        g = self.gamma
        decay = np.array([g, 0.0, 0.0, g])

        def idx(i, j):
            return DIM * i + j

        for i in range(DIM):
            for j in range(DIM):
                lmat[idx(i, j), idx(i, j)] += -(decay[i] + decay[j]) / 2.0
        lmat[idx(GND_F1, GND_F1), idx(EXC_F2, EXC_F2)] += g / 2.0
        lmat[idx(GND_F2, GND_F2), idx(EXC_F2, EXC_F2)] += g / 2.0
        lmat[idx(GND_F2, GND_F2), idx(EXC_F3, EXC_F3)] += g
        return lmat


def build_system(params: ExperimentParams) -> RotatingFrameSystem:
    """Rotating-frame system for the configured lasers and trap depth."""
    d1, d2, d3 = effective_detunings(params)
    w1, w2, w3 = params.rabi_repump, params.rabi_cool_fp2, params.rabi_cool_fp3
    h = np.zeros((DIM, DIM), dtype=complex)
    h[EXC_F2, EXC_F2] = -d2
    h[GND_F1, GND_F1] = -(d2 - d1)
    h[EXC_F3, EXC_F3] = -d3
    h[EXC_F2, GND_F1] = h[GND_F1, EXC_F2] = -w1 / 2.0
    h[EXC_F2, GND_F2] = h[GND_F2, EXC_F2] = -w2 / 2.0
    h[GND_F2, EXC_F3] = h[EXC_F3, GND_F2] = -w3 / 2.0
    return RotatingFrameSystem(h_rot=h, gamma=params.constants.gamma)


def liouville_rhs(rho: np.ndarray, system: RotatingFrameSystem) -> np.ndarray:
    """d(rho)/dt = -i[H, rho]/hbar + R(rho)."""
    h = system.h_rot
    return -1j * (h @ rho - rho @ h) + system.relaxation(rho)


def evolve(rho0: np.ndarray, system: RotatingFrameSystem, t_grid,
           rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """Integrate the master equation; returns states at t_grid, shape (n, 4, 4).

    t_grid must be sorted and non-negative; the first output equals rho0
    when t_grid[0] == 0. Adaptive explicit Runge-Kutta (DOP853).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if t_grid[0] < 0 or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be sorted and non-negative")
    rho0 = np.asarray(rho0, dtype=complex)
    validate_density_matrix(rho0)

    lmat = system.liouvillian_matrix()
    if t_grid[-1] == 0.0:
        return np.repeat(rho0[None, :, :], t_grid.size, axis=0)

    sol = solve_ivp(lambda _t, y: lmat @ y, (0.0, float(t_grid[-1])),
                    rho0.reshape(-1), t_eval=t_grid, method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        t_fail = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(sol.message, t_fail)
    return sol.y.T.reshape(-1, DIM, DIM)


def steady_state(system: RotatingFrameSystem, null_tol: float = 1e-12) -> np.ndarray:
    """Stationary density matrix from the vectorised Liouvillian.

    One linear solve with the trace condition replacing the (redundant)
    d rho_00/dt row. The null space of L is checked first: a dimension
    above one (e.g. both drive fields off, leaving a level decoupled)
    raises DegenerateSteadyStateError.
    """
    lmat = system.liouvillian_matrix()
    svals = np.linalg.svd(lmat, compute_uv=False)
    scale = svals[0] if svals[0] > 0 else 1.0
    null_dim = int(np.sum(svals <= null_tol * scale))
    if null_dim != 1:
        raise DegenerateSteadyStateError(
            f"stationary space has dimension {null_dim}; populations cannot "
            "equilibrate (is some level decoupled from the light fields?)")

    a = lmat.copy()
    trace_row = np.zeros(DIM * DIM, dtype=complex)
    trace_row[:: DIM + 1] = 1.0
    a[0, :] = trace_row
    b = np.zeros(DIM * DIM, dtype=complex)
    b[0] = 1.0
    rho = np.linalg.solve(a, b).reshape(DIM, DIM)
    rho = 0.5 * (rho + rho.conj().T)

    resid = np.abs(lmat @ rho.reshape(-1)).max()
    lscale = np.abs(lmat).max()
    if resid > 1e-10 * lscale:
        raise IntegrationError(
            f"steady-state residual {resid:.2e} exceeds 1e-10 * |L| = {1e-10 * lscale:.2e}",
            0.0)
    validate_density_matrix(rho)
    return rho
