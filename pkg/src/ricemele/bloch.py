"""Two-band Bloch blocks ``H_k = B . sigma`` and their biorthogonal eigensystems.

In the cell basis ``(a_k, b_k)`` with ``a_k^+ = N^{-1/2} sum_m e^{ikm} c^+_{2m-1}``
(odd sites) and the analogous ``b_k`` (even sites), the ring Hamiltonian
splits into 2x2 blocks

    H_k = [[bz, bx - i by], [bx + i by, -bz]],   bx - i by = J Lambda(k, phi),

with real ``bx, by`` and ``bz = -J(mu + i nu)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exceptions import ExceptionalPoint
from .model import ModelParams, k_grid

__all__ = [
    "EP_TOL",
    "GAUGE",
    "FieldVector",
    "BlochBlock",
    "EigenPair",
    "SpectrumClass",
    "lambda_offdiag",
    "lambda_offdiag_sum",
    "field_components",
    "field_vector",
    "bloch_block",
    "bloch_matrix",
    "band_energy",
    "eigensystem",
    "eigenvectors",
    "classify_spectrum",
    "near_exceptional",
]

#: Exceptional-point threshold on ``|B|^2 / J^2``. ``B^2`` is formed by a sum
#: with cancellation, so ``|B|`` itself is only resolved to ~1e-8 J.
EP_TOL = 1e-10
#: Default eigenvector gauge. ``"dirac"``: right vectors have unit Dirac norm
#: and a real non-negative first component; ``"polar"``: the
#: ``(cos theta/2, sin theta/2 e^{i varphi})`` parametrisation, unit biorthogonal
#: norm but generally not unit Dirac norm.
GAUGE = "dirac"

Gauge = Literal["dirac", "polar"]


def near_exceptional(bmag, J: float = 1.0, tol: float = EP_TOL):
    """``|B|^2 < tol J^2`` (elementwise)."""
    return np.abs(bmag) ** 2 < tol * J * J


@dataclass(frozen=True)
class FieldVector:
    bx: float
    by: float
    bz: complex
    bmag: complex

    @property
    def energies(self):
        return self.bmag, -self.bmag


@dataclass(frozen=True)
class BlochBlock:
    k: float
    phi: float
    h: np.ndarray
    field: FieldVector
    lambda_offdiag: complex
    J: float = 1.0


@dataclass(frozen=True)
class EigenPair:
    """One band of a Bloch block.

    ``right`` solves ``H_k psi = energy psi``; ``left`` solves
    ``H_k^+ eta = conj(energy) eta`` and is scaled so ``eta^+ psi = 1``.
    """

    band: int
    energy: complex
    right: np.ndarray
    left: np.ndarray
    theta: complex
    varphi: float


@dataclass(frozen=True)
class SpectrumClass:
    tag: Literal["hermitian", "real_unbroken", "complex_broken"]
    max_imag: float
    exceptional: bool = False

    @property
    def is_real(self) -> bool:
        return self.tag != "complex_broken"


def _sqrt_branch(z):
    """Principal square root with ``Re >= 0``; ties on the imaginary axis go to ``Im >= 0``."""
    r = np.sqrt(np.asarray(z, dtype=complex))
    flip = (r.real == 0) & (r.imag < 0)
    return np.where(flip, -r, r)


def lambda_offdiag(params: ModelParams, phi, k):
    """``Lambda(k, phi) = -[(1 - delta) e^{i phi} + (1 + delta) e^{-i(k + phi)}]``."""
    d = params.delta
    return -((1 - d) * np.exp(1j * np.asarray(phi)) + (1 + d) * np.exp(-1j * (np.asarray(k) + phi)))


def lambda_offdiag_sum(params: ModelParams, phi, k):
    """Same quantity written as ``-e^{-ik/2} sum_{l=+-} (1 - l delta) e^{i l (k/2 + phi)}``."""
    d = params.delta
    k = np.asarray(k)
    total = sum((1 - lam * d) * np.exp(1j * lam * (k / 2 + phi)) for lam in (1, -1))
    return -np.exp(-1j * k / 2) * total


def field_components(params: ModelParams, phi, k):
    """Vectorised ``(bx, by, bz, bmag)``; broadcasts over ``phi`` and ``k``."""
    J, d = params.J, params.delta
    phi = np.asarray(phi, dtype=float)
    k = np.asarray(k, dtype=float)
    bx = J * (-(1 - d) * np.cos(phi) - (1 + d) * np.cos(k + phi))
    by = J * ((1 - d) * np.sin(phi) - (1 + d) * np.sin(k + phi))
    bz = -J * params.potential
    bmag = _sqrt_branch(bx * bx + by * by + bz * bz)
    bz = np.broadcast_to(np.complex128(bz), np.shape(bmag))
    return bx, by, bz, bmag


def band_energy(params: ModelParams, phi, k, band: int = 1):
    """``epsilon_band^k(phi) = band * B_k(phi)`` (vectorised)."""
    return band * field_components(params, phi, k)[3]


def field_vector(params: ModelParams, phi: float, k: float, tol: float = EP_TOL) -> FieldVector:
    bx, by, bz, bmag = (v.item() for v in field_components(params, phi, k))
    if near_exceptional(bmag, params.J, tol):
        raise ExceptionalPoint(f"|B| = {abs(bmag):.3e} at k={k:.6g}, phi={phi:.6g}")
    return FieldVector(float(bx), float(by), complex(bz), complex(bmag))


def bloch_matrix(params: ModelParams, phi, k):
    """Stack of 2x2 block matrices with shape ``broadcast(phi, k).shape + (2, 2)``."""
    bx, by, bz, _ = field_components(params, phi, k)
    h = np.empty(np.shape(bz) + (2, 2), dtype=complex)
    h[..., 0, 0] = bz
    h[..., 0, 1] = bx - 1j * by
    h[..., 1, 0] = bx + 1j * by
    h[..., 1, 1] = -bz
    return h


def bloch_block(params: ModelParams, phi: float, k: float, tol: float = EP_TOL) -> BlochBlock:
    field = field_vector(params, phi, k, tol)
    h = bloch_matrix(params, phi, k)
    lam = complex(lambda_offdiag(params, phi, k))
    return BlochBlock(k=float(k), phi=float(phi), h=h, field=field, lambda_offdiag=lam, J=params.J)


def _pick(v1, v2):
    """Per-row choice of the candidate vector with the larger norm."""
    n1 = np.linalg.norm(v1, axis=-1)
    n2 = np.linalg.norm(v2, axis=-1)
    return np.where((n1 >= n2)[..., None], v1, v2)


def eigenvectors(bx, by, bz, bmag, band: int, gauge: Gauge = GAUGE, tol: float = EP_TOL):
    """Right and left eigenvectors of ``B . sigma`` for ``band`` (vectorised).

    Returns ``(right, left, overlap)`` with the trailing axis of length 2.
    ``left`` is the column vector ``eta`` with ``eta^+ right = 1``; ``overlap``
    is the biorthogonal overlap before that rescaling (``~0`` near an
    exceptional point).
    """
    bx, by, bz, bmag = np.broadcast_arrays(*(np.asarray(v) for v in (bx, by, bz, bmag)))
    c = bx - 1j * by
    dn = bx + 1j * by
    eps = band * bmag
    if gauge == "dirac":
        right = _pick(np.stack([c, eps - bz], -1), np.stack([eps + bz, dn], -1))
        row = _pick(np.stack([dn, eps - bz], -1), np.stack([eps + bz, c], -1))
        nrm = np.linalg.norm(right, axis=-1, keepdims=True)
        nrm = np.where(nrm == 0, 1.0, nrm)
        right = right / nrm
        lead = np.where(np.abs(right[..., 0]) > tol, right[..., 0], right[..., 1])
        phase = np.where(np.abs(lead) > 0, np.abs(lead) / np.where(lead == 0, 1, lead), 1.0)
        right = right * phase[..., None]
    elif gauge == "polar":
        safe = np.where(np.abs(bmag) == 0, 1.0, bmag)
        cos_t = bz / safe
        ch = np.sqrt((1 + cos_t) / 2)
        sh = np.sqrt((1 - cos_t) / 2)
        rho = np.hypot(bx, by)
        sin_t = rho / safe
        sh = np.where(np.abs(2 * ch * sh - sin_t) > np.abs(2 * ch * sh + sin_t), -sh, sh)
        e_phi = np.where(rho > 0, dn / np.where(rho > 0, rho, 1.0), 1.0)
        if band == 1:
            right = np.stack([ch, sh * e_phi], -1)
            row = np.stack([ch, sh / e_phi], -1)
        else:
            right = np.stack([-sh, ch * e_phi], -1)
            row = np.stack([-sh, ch / e_phi], -1)
    else:
        raise ValueError(f"unknown gauge {gauge!r}")
    overlap = np.sum(row * right, axis=-1)
    safe_ov = np.where(np.abs(overlap) == 0, 1.0, overlap)
    left = np.conj(row / safe_ov[..., None])
    return right, left, overlap


def eigensystem(block: BlochBlock, gauge: Gauge = GAUGE, tol: float = EP_TOL):
    """Both eigenpairs ``(plus, minus)`` of a Bloch block.

    Raises
    ------
    ExceptionalPoint
        If ``|B|^2`` or the left/right overlap falls below ``tol``.
    """
    f = block.field
    if near_exceptional(f.bmag, block.J, tol):
        raise ExceptionalPoint(f"|B| = {abs(f.bmag):.3e}")
    cos_t = f.bz / f.bmag
    theta = complex(np.arccos(np.complex128(cos_t)))
    varphi = float(np.arctan2(f.by, f.bx))
    pairs = []
    for band in (1, -1):
        right, left, overlap = eigenvectors(f.bx, f.by, f.bz, f.bmag, band, gauge, tol)
        if abs(overlap) < tol:
            raise ExceptionalPoint(f"self-orthogonal eigenvector, |<eta|psi>| = {abs(overlap):.3e}")
        pairs.append(EigenPair(band, band * f.bmag, right, left, theta, varphi))
    return tuple(pairs)


def _continuum_energies(params: ModelParams, samples: int = 257):
    # epsilon^2 is affine in c = cos^2(k/2 + phi), which sweeps [0, 1] for any phi
    c = np.linspace(0.0, 1.0, samples)
    d = params.delta
    rad = params.potential**2 / 4 + d * d + (1 - d * d) * c
    return 2 * params.J * _sqrt_branch(rad)


def classify_spectrum(
    params: ModelParams,
    phi: float | None = 0.0,
    tol: float = 1e-10,
    resolution: Literal["lattice", "continuum"] = "lattice",
    n_phi: int = 720,
) -> SpectrumClass:
    """Tag the spectrum as hermitian, real (unbroken) or complex (broken).

    ``resolution="lattice"`` scans the ``N`` allowed momenta at the given flux;
    ``"continuum"`` uses the infinite-ring band, for which the result does not
    depend on ``phi``. ``phi=None`` scans ``n_phi`` uniform fluxes in ``[0, 2 pi)``.
    """
    if resolution == "continuum":
        eps = _continuum_energies(params)
    else:
        ks = k_grid(params).values
        phis = np.linspace(0, 2 * np.pi, n_phi, endpoint=False) if phi is None else np.array([phi])
        eps = band_energy(params, phis[:, None], ks[None, :])
    max_imag = float(np.max(np.abs(eps.imag)))
    exceptional = bool(np.any(near_exceptional(eps, params.J))) and not params.is_hermitian
    if params.is_hermitian:
        tag = "hermitian"
    elif max_imag > tol:
        tag = "complex_broken"
    else:
        tag = "real_unbroken"
    return SpectrumClass(tag, max_imag, exceptional)
