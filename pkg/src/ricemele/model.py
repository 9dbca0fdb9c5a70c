"""Lattice parameters, momentum grid and the real-space ring Hamiltonian.

Sites are labelled ``j = 1..2N`` as in the model definition; array index
``j - 1`` holds site ``j``. Odd sites form sublattice A and carry the on-site
term ``-J(mu + i nu)``, even sites form sublattice B and carry ``+J(mu + i nu)``.
Energies are in units of ``J`` and times in units of ``1/J`` (hbar = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "KGrid",
    "k_grid",
    "build_hamiltonian",
    "apply_hamiltonian",
    "hopping_amplitudes",
    "onsite_potential",
    "shift_matrix",
]


@dataclass(frozen=True)
class ModelParams:
    """Static parameters of the flux-threaded Rice-Mele ring.

    Parameters
    ----------
    J : float
        Hopping energy scale.
    delta : float
        Dimerization, ``|delta| <= 1``.
    mu : float
        Real staggered potential (in units of ``J``).
    nu : float
        Imaginary staggered potential (in units of ``J``).
    N : int
        Number of unit cells; the ring has ``2N`` sites.
    """

    J: float = 1.0
    delta: float = 0.0
    mu: float = 0.0
    nu: float = 0.0
    N: int = 2

    def __post_init__(self):
        for name in ("J", "delta", "mu", "nu"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.integer, np.floating)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise ValueError(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        if self.J <= 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if abs(self.delta) > 1:
            raise ValueError(f"|delta| must be <= 1, got {self.delta}")

    @property
    def n_sites(self) -> int:
        return 2 * self.N

    @property
    def potential(self) -> complex:
        """Complex staggered potential ``mu + i nu``."""
        return complex(self.mu, self.nu)

    @property
    def is_hermitian(self) -> bool:
        return self.nu == 0.0

    def total_flux(self, phi: float) -> float:
        """Flux through the ring, ``2N phi``."""
        return 2 * self.N * phi

    def replace(self, **changes) -> "ModelParams":
        kwargs = dict(J=self.J, delta=self.delta, mu=self.mu, nu=self.nu, N=self.N)
        kwargs.update(changes)
        return ModelParams(**kwargs)


@dataclass(frozen=True)
class KGrid:
    """Cell momenta ``k = 2 pi n / N`` for ``n = 1..N`` (strictly increasing)."""

    values: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, item):
        return self.values[item]

    def index_of(self, k: float) -> int:
        """Index of the grid momentum closest to ``k`` (mod 2 pi)."""
        d = np.angle(np.exp(1j * (self.values - k)))
        return int(np.argmin(np.abs(d)))


def k_grid(params: ModelParams) -> KGrid:
    n = np.arange(1, params.N + 1)
    values = 2 * np.pi * n / params.N
    values.setflags(write=False)
    return KGrid(values)


def hopping_amplitudes(params: ModelParams) -> np.ndarray:
    """Bond strengths ``-J[1 + (-1)^j delta]`` for bonds ``j -> j+1``, ``j = 1..2N``."""
    j = np.arange(1, params.n_sites + 1)
    return -params.J * (1 + (-1.0) ** j * params.delta)


def onsite_potential(params: ModelParams) -> np.ndarray:
    j = np.arange(1, params.n_sites + 1)
    return params.J * params.potential * (-1.0) ** j


def build_hamiltonian(params: ModelParams, phi: float) -> np.ndarray:
    """Dense ``2N x 2N`` Hamiltonian at Peierls phase ``phi``.

    Entry ``(j, j+1)`` is ``-J[1 + (-1)^j delta] e^{i phi}`` and its transpose
    partner carries ``e^{-i phi}``; the closing bond ``(2N, 1)`` wraps around.
    """
    n = params.n_sites
    t = hopping_amplitudes(params)
    H = np.diag(onsite_potential(params)).astype(complex)
    rows = np.arange(n)
    cols = (rows + 1) % n
    H[rows, cols] += t * np.exp(1j * phi)
    H[cols, rows] += t * np.exp(-1j * phi)
    return H


def apply_hamiltonian(params: ModelParams, phi: float, psi: np.ndarray) -> np.ndarray:
    """Matrix-free ``H(phi) @ psi`` for a state (or a stack of states along axis 0)."""
    psi = np.asarray(psi)
    t = hopping_amplitudes(params)
    v = onsite_potential(params)
    if psi.ndim > 1:
        shape = (-1,) + (1,) * (psi.ndim - 1)
        t = t.reshape(shape)
        v = v.reshape(shape)
    forward = np.roll(psi, -1, axis=0)  # psi_{j+1}
    # bond (j-1, j) contributes t_{j-1} e^{-i phi} psi_{j-1} to row j
    backward = np.roll(t * psi, 1, axis=0)
    return v * psi + t * np.exp(1j * phi) * forward + np.exp(-1j * phi) * backward


def shift_matrix(params: ModelParams) -> np.ndarray:
    """Permutation moving every amplitude by two sites, ``psi_j -> psi_{j+2}``."""
    n = params.n_sites
    S = np.zeros((n, n))
    S[(np.arange(n) + 2) % n, np.arange(n)] = 1.0
    return S
