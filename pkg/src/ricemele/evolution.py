"""Time-ordered propagation under a time-dependent flux.

Two routes share one contract, ``psi(t) = T exp[-i int_0^t H(phi(s)) ds] psi(0)``:

* Bloch blocks: each momentum sector evolves with the exact exponential of the
  midpoint-flux block, ``U = cos(B dt) - i dt sinc(B dt) H_k`` (second order in
  ``dt`` for time-dependent flux, exact for constant flux).
* Real space: RK4 on the full ring with adaptive sub-stepping, plus a dense
  ``expm`` midpoint oracle for small rings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .bloch import EP_TOL, GAUGE, band_energy, bloch_matrix, eigenvectors, field_components, near_exceptional
from .exceptions import ExceptionalPoint, StepSizeError
from .model import ModelParams, apply_hamiltonian, build_hamiltonian, k_grid
from .protocols import FluxProtocol, TimeGrid

__all__ = [
    "Trajectory",
    "EvolutionReport",
    "block_propagator",
    "to_bloch",
    "from_bloch",
    "propagate_bloch",
    "propagate_blocks",
    "evolve_state",
    "propagate_real_space",
    "amplification_factor",
    "adiabatic_reference",
    "fidelity",
    "evolve_eigenstate",
    "MAX_REAL_SPACE_CELLS",
    "MAX_DENSE_CELLS",
]

MAX_REAL_SPACE_CELLS = 4096
MAX_DENSE_CELLS = 64


@dataclass
class Trajectory:
    """Recorded states; ``states[i]`` is the state at ``times[i]`` (flux ``phi[i]``)."""

    times: np.ndarray
    phi: np.ndarray
    states: np.ndarray

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.times)


@dataclass
class EvolutionReport:
    times: np.ndarray
    phi: np.ndarray
    amplification: np.ndarray
    fidelity: np.ndarray
    final_state: np.ndarray


def _sinc(z):
    # sin(z)/z for complex z; Taylor branch keeps accuracy for |z| < 1e-6
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-6
    safe = np.where(small, 1.0, z)
    return np.where(small, 1 - z * z / 6, np.sin(safe) / safe)


def block_propagator(h: np.ndarray, dt: float, J: float = 1.0, check: bool = True) -> np.ndarray:
    """``exp(-i h dt)`` for a stack of traceless 2x2 matrices ``h`` (shape ``(..., 2, 2)``)."""
    b2 = h[..., 0, 0] ** 2 + h[..., 0, 1] * h[..., 1, 0]
    bmag = np.sqrt(b2)
    if check:
        scale = np.max(np.abs(h), axis=(-2, -1))
        # defective (non-diagonalisable) blocks have B ~ 0 while h itself is not small;
        # a Hermitian block always has max|h_ij| <= |B|
        bad = near_exceptional(bmag, J) & (np.abs(bmag) < 1e-3 * scale)
        if np.any(bad):
            raise ExceptionalPoint("propagation crosses an exceptional point")
    c = np.cos(bmag * dt)
    s = _sinc(bmag * dt) * dt
    U = -1j * s[..., None, None] * h
    U[..., 0, 0] += c
    U[..., 1, 1] += c
    return U


def _cell_ks(params: ModelParams) -> np.ndarray:
    return k_grid(params).values


def to_bloch(params: ModelParams, state: np.ndarray) -> np.ndarray:
    """Components ``(A_k, B_k)`` on the momentum grid, shape ``(N, 2)`` (unitary map).

    ``A_k = N^{-1/2} sum_m e^{-ikm} psi_{2m-1}`` and likewise for even sites.
    """
    state = np.asarray(state, dtype=complex)
    N = params.N
    cells = state.reshape(N, 2)  # row m-1 holds sites (2m-1, 2m)
    # sum_{m=1}^N e^{-ikm} x_m = e^{-ik} fft(x)[n mod N]
    order = np.arange(1, N + 1) % N
    ft = np.fft.fft(cells, axis=0)[order]
    ks = _cell_ks(params)
    return ft * np.exp(-1j * ks)[:, None] / math.sqrt(N)


def from_bloch(params: ModelParams, blocks: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_bloch`."""
    blocks = np.asarray(blocks, dtype=complex)
    N = params.N
    ks = _cell_ks(params)
    shifted = blocks * np.exp(1j * ks)[:, None] * math.sqrt(N)
    order = np.arange(1, N + 1) % N
    ft = np.empty_like(shifted)
    ft[order] = shifted
    cells = np.fft.ifft(ft, axis=0)
    return cells.reshape(2 * N)


def propagate_blocks(params: ModelParams, protocol: FluxProtocol, ks, initial, grid: TimeGrid,
                     record_every: int = 1) -> Trajectory:
    """Midpoint-exponential propagation of many 2-vectors, one per momentum in ``ks``.

    ``initial`` has shape ``(len(ks), 2)``. States are recorded every
    ``record_every`` steps and always at the final time.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    psi = np.array(initial, dtype=complex).reshape(len(ks), 2)
    dt = grid.dt
    t_rec, phi_rec, s_rec = [0.0], [protocol(0.0)], [psi.copy()]
    if grid.t_end == 0:
        return Trajectory(np.array(t_rec), np.array(phi_rec, dtype=float), np.array(s_rec))
    for n in range(grid.steps):
        t_mid = (n + 0.5) * dt
        h = bloch_matrix(params, protocol(t_mid), ks)
        U = block_propagator(h, dt, params.J)
        psi = np.einsum("kij,kj->ki", U, psi)
        if (n + 1) % record_every == 0 or n + 1 == grid.steps:
            t = (n + 1) * dt
            t_rec.append(t)
            phi_rec.append(protocol(t))
            s_rec.append(psi.copy())
    return Trajectory(np.array(t_rec), np.array(phi_rec, dtype=float), np.array(s_rec))


def propagate_bloch(params: ModelParams, protocol: FluxProtocol, k: float, initial, grid: TimeGrid,
                    record_every: int = 1) -> Trajectory:
    """Propagate a single 2-component Bloch state at momentum ``k``."""
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (2,):
        raise ValueError(f"initial must be a 2-vector, got shape {initial.shape}")
    if not np.any(initial):
        raise ValueError("initial state must be nonzero")
    traj = propagate_blocks(params, protocol, [k], initial[None, :], grid, record_every)
    traj.states = traj.states[:, 0, :]
    return traj


def evolve_state(params: ModelParams, protocol: FluxProtocol, state, grid: TimeGrid,
                 record_every: int = 1, space: str = "real") -> Trajectory:
    """Evolve a full ``2N``-site state through the Bloch route.

    ``space="real"`` records site amplitudes; ``space="bloch"`` records the
    ``(N, 2)`` block components instead (cheaper for long runs).
    """
    blocks = to_bloch(params, state)
    traj = propagate_blocks(params, protocol, _cell_ks(params), blocks, grid, record_every)
    if space == "real":
        traj.states = np.array([from_bloch(params, b) for b in traj.states])
    elif space != "bloch":
        raise ValueError(f"unknown space {space!r}")
    return traj


def _rk4_substep(params: ModelParams, protocol: FluxProtocol, t: float, h: float, psi):
    def f(tt, y):
        return -1j * apply_hamiltonian(params, protocol(tt), y)

    k1 = f(t, psi)
    k2 = f(t + h / 2, psi + h / 2 * k1)
    k3 = f(t + h / 2, psi + h / 2 * k2)
    k4 = f(t + h, psi + h * k3)
    return psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _hamiltonian_norm_bound(params: ModelParams) -> float:
    # row-sum bound on ||H||_2, flux independent
    return params.J * (2 * (1 + abs(params.delta)) + abs(params.potential))


def propagate_real_space(params: ModelParams, protocol: FluxProtocol, initial, grid: TimeGrid,
                         method: str = "rk4", local_tol: float = 1e-10, record_every: int = 1) -> Trajectory:
    """Propagate a ``2N``-site state on the ring.

    ``method="rk4"`` sub-steps each grid interval so the RK4 local error bound
    ``(L h)^5 / 120`` stays below ``local_tol * h`` (``L`` a norm bound of
    ``H``), i.e. below ``local_tol`` per unit time. ``method="expm"`` applies
    the dense exponential of the midpoint-flux Hamiltonian per grid step
    (``N <= 64``) and serves as a reference oracle.
    """
    if params.N > MAX_REAL_SPACE_CELLS:
        raise ValueError(f"N={params.N} exceeds the real-space limit {MAX_REAL_SPACE_CELLS}")
    psi = np.array(initial, dtype=complex)
    if psi.shape != (params.n_sites,):
        raise ValueError(f"initial must have shape ({params.n_sites},), got {psi.shape}")
    dt = grid.dt
    t_rec, phi_rec, s_rec = [0.0], [protocol(0.0)], [psi.copy()]
    if grid.t_end == 0:
        return Trajectory(np.array(t_rec), np.array(phi_rec, dtype=float), np.array(s_rec))
    if method == "rk4":
        L = _hamiltonian_norm_bound(params)
        h_max = (120 * local_tol / L**5) ** 0.25
        sub = max(1, math.ceil(dt / h_max))
        h = dt / sub
        if h <= 0 or 0.0 + h == 0.0:
            raise StepSizeError("RK4 sub-step underflow")
    elif method == "expm":
        if params.N > MAX_DENSE_CELLS:
            raise ValueError(f"dense exponential oracle limited to N <= {MAX_DENSE_CELLS}")
    else:
        raise ValueError(f"unknown method {method!r}")
    for n in range(grid.steps):
        t0 = n * dt
        if method == "rk4":
            for j in range(sub):
                psi = _rk4_substep(params, protocol, t0 + j * h, h, psi)
        else:
            H = build_hamiltonian(params, protocol(t0 + dt / 2))
            psi = expm(-1j * dt * H) @ psi
        if (n + 1) % record_every == 0 or n + 1 == grid.steps:
            t = (n + 1) * dt
            t_rec.append(t)
            phi_rec.append(protocol(t))
            s_rec.append(psi.copy())
    return Trajectory(np.array(t_rec), np.array(phi_rec, dtype=float), np.array(s_rec))


def amplification_factor(trajectory: Trajectory) -> np.ndarray:
    """Dirac-norm ratio ``||psi(t)|| / ||psi(0)||`` along the trajectory."""
    states = np.asarray(trajectory.states)
    norms = np.linalg.norm(states.reshape(len(states), -1), axis=1)
    return norms / norms[0]


def adiabatic_reference(params: ModelParams, k: float, band: int, phis, gauge: str = GAUGE,
                        max_dphi: float = 1e-2) -> np.ndarray:
    """Instantaneous right eigenvectors (unit Dirac norm) along ``phis``.

    The branch is followed by maximal overlap between neighbouring fluxes on a
    refined path (spacing at most ``max_dphi``), so the label stays on one
    continuous band even if ``Re eps`` crosses, however sparse ``phis`` is.
    """
    phis = np.asarray(phis, dtype=float)
    path, marks = [phis[:1]], [0]
    for a, b in zip(phis[:-1], phis[1:]):
        n = max(1, int(np.ceil(abs(b - a) / max_dphi)))
        path.append(np.linspace(a, b, n + 1)[1:])
        marks.append(marks[-1] + n)
    path = np.concatenate(path)
    bx, by, bz, bmag = field_components(params, path, k)
    refs = []
    for b in (1, -1):
        right, _, overlap = eigenvectors(bx, by, bz, bmag, b, gauge)
        if np.any(np.abs(overlap) < EP_TOL) or np.any(near_exceptional(bmag, params.J)):
            raise ExceptionalPoint("adiabatic reference passes an exceptional point")
        refs.append(right / np.linalg.norm(right, axis=-1, keepdims=True))
    plus, minus = refs
    chosen = np.empty_like(plus)
    current = plus[0] if band == 1 else minus[0]
    for i in range(len(path)):
        a, b = plus[i], minus[i]
        current = a if abs(np.vdot(current, a)) >= abs(np.vdot(current, b)) else b
        chosen[i] = current
    return chosen[marks]


def fidelity(trajectory: Trajectory, params: ModelParams, k: float, band: int,
             protocol: FluxProtocol | None = None, gauge: str = GAUGE) -> np.ndarray:
    """``|<Psi_ref(phi) | psi(t)>|`` with both states Dirac-normalised.

    ``protocol`` is accepted for interface symmetry; the recorded fluxes
    ``trajectory.phi`` define the reference path.
    """
    refs = adiabatic_reference(params, k, band, trajectory.phi, gauge)
    states = np.asarray(trajectory.states)
    states = states / np.linalg.norm(states, axis=-1, keepdims=True)
    return np.abs(np.einsum("ti,ti->t", refs.conj(), states))


def evolve_eigenstate(params: ModelParams, protocol: FluxProtocol, k: float, band: int, grid: TimeGrid,
                      record_every: int = 1, gauge: str = GAUGE) -> EvolutionReport:
    """Start in ``|psi_band^k(phi(0))>`` and report amplification and fidelity."""
    bx, by, bz, bmag = field_components(params, protocol(0.0), k)
    right, _, overlap = eigenvectors(bx, by, bz, bmag, band, gauge)
    if abs(overlap) < EP_TOL:
        raise ExceptionalPoint("initial eigenvector is self-orthogonal")
    traj = propagate_bloch(params, protocol, k, right, grid, record_every)
    return EvolutionReport(traj.times, traj.phi, amplification_factor(traj),
                           fidelity(traj, params, k, band, protocol, gauge), traj.final_state)


def instantaneous_energies(params: ModelParams, phi: float):
    """``(k, eps_+, eps_-)`` on the momentum grid at flux ``phi``."""
    ks = _cell_ks(params)
    return ks, band_energy(params, phi, ks, 1), band_energy(params, phi, ks, -1)
