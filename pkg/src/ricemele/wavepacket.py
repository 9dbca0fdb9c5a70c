"""Gaussian wave packets on the ring: band decomposition, reduced energy,
centre-of-mass trajectories and band collapse under a winding flux."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bloch import EP_TOL, GAUGE, eigenvectors, field_components, near_exceptional
from .evolution import from_bloch, propagate_blocks, to_bloch
from .exceptions import DelocalizedError, ExceptionalPoint, TailWrapError
from .model import ModelParams, k_grid
from .phases import SweepSpec, geometric_phase, sign_of_im_gamma
from .protocols import FluxProtocol, Linear, TimeGrid

__all__ = [
    "GaussianSpec",
    "BandDecomposition",
    "ReducedEnergySeries",
    "TrajectoryReport",
    "CollapseReport",
    "build_gaussian",
    "band_decompose",
    "project_band",
    "reduced_energy",
    "reduced_energy_series",
    "center_of_mass",
    "center_trajectory",
    "band_collapse_run",
]


@dataclass(frozen=True)
class GaussianSpec:
    """Packet ``exp(-(w^2/2)(j - N_A)^2) exp(i k0 j)`` on sites ``j``.

    ``width`` is the inverse-length parameter ``w`` (larger is narrower);
    ``k0`` is a site-space wavenumber, so the packet sits at cell momentum
    ``2 k0 mod 2 pi`` in the Bloch picture.
    """

    k0: float
    width: float
    center_site: int

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width}")


@dataclass
class BandDecomposition:
    """Biorthogonal coefficients ``g[k, i] = <eta_band^k | state>`` with ``band = (+1, -1)[i]``."""

    params: ModelParams
    phi: float
    k: np.ndarray
    coefficients: np.ndarray
    right: np.ndarray
    energies: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """Dirac weight ``|g|^2 ||psi||^2`` per ``(k, band)``."""
        rn = np.linalg.norm(self.right, axis=-1) ** 2
        return np.abs(self.coefficients) ** 2 * rn

    @property
    def populations(self) -> tuple[float, float]:
        w = self.weights.sum(axis=0)
        return float(w[0]), float(w[1])

    @property
    def normalized_populations(self) -> tuple[float, float]:
        p, m = self.populations
        s = p + m
        return p / s, m / s

    def band_component(self, band: int) -> np.ndarray:
        """Real-space part of the state living in ``band``."""
        i = 0 if band == 1 else 1
        blocks = self.coefficients[:, i, None] * self.right[:, i, :]
        return from_bloch(self.params, blocks)

    def reconstruct(self) -> np.ndarray:
        return self.band_component(1) + self.band_component(-1)

    def mean_momentum(self, band: int) -> float:
        """Circular mean of ``k`` weighted by the Dirac weight in ``band``, in ``(0, 2 pi]``."""
        w = self.weights[:, 0 if band == 1 else 1]
        k = np.angle(np.sum(w * np.exp(1j * self.k))) % (2 * np.pi)
        return float(k if k > 0 else 2 * np.pi)

    def dominant(self, band: int | None = None) -> tuple[int, float]:
        """``(band, k)`` carrying the largest weight (restricted to ``band`` if given)."""
        w = self.weights
        if band is not None:
            i = 0 if band == 1 else 1
            return band, float(self.k[int(np.argmax(w[:, i]))])
        kk, i = np.unravel_index(int(np.argmax(w)), w.shape)
        return (1, -1)[i], float(self.k[kk])


@dataclass
class ReducedEnergySeries:
    times: np.ndarray
    energy: np.ndarray


@dataclass
class TrajectoryReport:
    times: np.ndarray
    phi: np.ndarray
    x_c: np.ndarray
    prediction: np.ndarray
    k_c: float
    band: int

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.x_c - self.prediction)))

    @property
    def traversed(self) -> float:
        """Total path length of the predicted centre."""
        return float(np.sum(np.abs(np.diff(self.prediction))))


@dataclass
class CollapseReport:
    times: np.ndarray
    phi: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    zeta: float
    surviving_band: int

    @property
    def normalized(self):
        s = self.p_plus + self.p_minus
        return self.p_plus / s, self.p_minus / s

    @property
    def log_ratio_growth(self) -> float:
        """Change of ``log(P_surviving / P_decaying)`` between first and last record."""
        ratio = self.p_plus / self.p_minus
        if self.surviving_band == -1:
            ratio = 1 / ratio
        return float(np.log(ratio[-1]) - np.log(ratio[0]))

    @property
    def predicted_growth(self) -> float:
        return 4 * abs(self.zeta)


def build_gaussian(params: ModelParams, spec: GaussianSpec, tail_tol: float = 1e-8) -> np.ndarray:
    """Dirac-normalised Gaussian packet on the ``2N``-site ring.

    Distances are taken as the minimum image around the ring so the envelope
    is continuous across the closing bond.

    Raises
    ------
    TailWrapError
        If the envelope at the site opposite ``center_site`` exceeds ``tail_tol``.
    """
    n = params.n_sites
    if not 1 <= spec.center_site <= n:
        raise ValueError(f"center_site must lie in [1, {n}], got {spec.center_site}")
    if math.exp(-(spec.width**2) / 2 * params.N**2) > tail_tol:
        raise TailWrapError(f"width {spec.width} too small for a ring of {n} sites")
    j = np.arange(1, n + 1)
    dist = (j - spec.center_site + params.N) % n - params.N
    amp = np.exp(-(spec.width**2) / 2 * dist.astype(float) ** 2) * np.exp(1j * spec.k0 * j)
    return amp / np.linalg.norm(amp)


def _band_vectors(params: ModelParams, phi: float, gauge: str):
    ks = k_grid(params).values
    bx, by, bz, bmag = field_components(params, phi, ks)
    rights, lefts = [], []
    for band in (1, -1):
        right, left, overlap = eigenvectors(bx, by, bz, bmag, band, gauge)
        if np.any(np.abs(overlap) < EP_TOL) or np.any(near_exceptional(bmag, params.J)):
            raise ExceptionalPoint(f"exceptional point on the momentum grid at phi={phi}")
        rights.append(right)
        lefts.append(left)
    energies = np.stack([bmag, -bmag], axis=1)
    return ks, np.stack(rights, axis=1), np.stack(lefts, axis=1), energies


def band_decompose(state, params: ModelParams, phi: float, gauge: str = GAUGE,
                   blocks: np.ndarray | None = None) -> BandDecomposition:
    """Project a ring state onto the biorthogonal band basis at flux ``phi``.

    ``blocks`` may pass precomputed :func:`to_bloch` components instead of
    ``state``.
    """
    if blocks is None:
        blocks = to_bloch(params, state)
    ks, right, left, energies = _band_vectors(params, phi, gauge)
    coeff = np.einsum("kbi,ki->kb", left.conj(), blocks)
    return BandDecomposition(params, phi, ks, coeff, right, energies)


def project_band(state, params: ModelParams, phi: float, band: int, normalize: bool = True) -> np.ndarray:
    out = band_decompose(state, params, phi).band_component(band)
    return out / np.linalg.norm(out) if normalize else out


def reduced_energy(state, params: ModelParams, phi: float, use_band_index: bool = False,
                   decomposition: BandDecomposition | None = None):
    """Biorthogonally weighted mean band energy ``sum eps |<eta|G>|^2 / sum |<eta|G>|^2``.

    With ``use_band_index`` the energies are replaced by the band labels ``+-1``.
    Returns a float when the imaginary part is negligible.
    """
    dec = decomposition if decomposition is not None else band_decompose(state, params, phi)
    w = np.abs(dec.coefficients) ** 2
    denom = w.sum()
    if denom == 0:
        raise ZeroDivisionError("state has no weight on the band basis")
    values = np.array([1.0, -1.0])[None, :] if use_band_index else dec.energies
    e = complex((values * w).sum() / denom)
    return e.real if abs(e.imag) <= 1e-9 * max(1.0, abs(e.real)) else e


def reduced_energy_series(blocks_series, times, phis, params: ModelParams, **kw) -> ReducedEnergySeries:
    energies = [reduced_energy(None, params, ph, decomposition=band_decompose(None, params, ph, blocks=b), **kw)
                for b, ph in zip(blocks_series, phis)]
    return ReducedEnergySeries(np.asarray(times), np.asarray(energies))


def center_of_mass(state) -> tuple[float, float]:
    """Circular mean site coordinate (in ``[1, 2N]``) and its resultant length."""
    prob = np.abs(np.asarray(state)) ** 2
    n = len(prob)
    j = np.arange(1, n + 1)
    z = np.sum(prob * np.exp(2j * np.pi * j / n)) / prob.sum()
    x = (np.angle(z) * n / (2 * np.pi)) % n
    return float(x if x > 0 else x + n), float(abs(z))


def center_trajectory(states, times, phis, params: ModelParams, protocol: FluxProtocol,
                      band: int | None = None, k_c: float | None = None,
                      min_resultant: float = 0.5) -> TrajectoryReport:
    """Unwrapped packet centre versus ``x_c(0) + [eps^{k_c}(phi) - eps^{k_c}(0)] / beta``.

    ``band`` defaults to the band carrying most weight at ``phis[0]`` and
    ``k_c`` to the weighted circular-mean momentum within that band.

    Raises
    ------
    DelocalizedError
        If the circular-mean resultant drops below ``min_resultant``.
    """
    if not isinstance(protocol, Linear):
        raise TypeError("the dispersion comparison assumes a Linear protocol")
    states = np.asarray(states)
    n = params.n_sites
    if band is None or k_c is None:
        dec = band_decompose(states[0], params, phis[0])
        if band is None:
            band = dec.dominant()[0]
        if k_c is None:
            k_c = dec.mean_momentum(band)
    xs = []
    prev = None
    for s in states:
        x, r = center_of_mass(s)
        if r < min_resultant:
            raise DelocalizedError(f"packet delocalised (resultant {r:.3f})")
        if prev is not None:
            x = prev + ((x - prev + n / 2) % n - n / 2)
        xs.append(x)
        prev = x
    xs = np.array(xs)
    eps = (band * field_components(params, np.asarray(phis), k_c)[3]).real
    pred = xs[0] + (eps - eps[0]) / protocol.beta
    return TrajectoryReport(np.asarray(times), np.asarray(phis), xs, pred, float(k_c), int(band))


def band_collapse_run(spec: GaussianSpec, params: ModelParams, protocol: Linear, windings: int = 1,
                      max_dphi: float = 1e-3, max_dt: float | None = None, records: int = 200,
                      initial=None, k_cutoff: float = 1e-12) -> CollapseReport:
    """Evolve a Gaussian packet through ``windings`` flux periods of ``2 pi``.

    Dirac populations of both bands are recorded at the instantaneous flux.
    ``zeta = -Im gamma^+(2 pi n)`` (momentum independent) and the band with
    ``Im gamma < 0`` is reported as the survivor.

    Momentum blocks are independent, so blocks whose initial amplitude is below
    ``k_cutoff`` times the largest one are left at zero (set ``k_cutoff=0`` to
    propagate every block).
    """
    if not isinstance(protocol, Linear):
        raise TypeError("band collapse runs use a Linear protocol")
    phi_end = protocol.phi0 + math.copysign(2 * math.pi * windings, protocol.beta)
    t_end = protocol.duration_for(phi_end)
    grid = TimeGrid.for_protocol(protocol, t_end, max_dphi, max_dt)
    state = build_gaussian(params, spec) if initial is None else np.asarray(initial, dtype=complex)
    ks = k_grid(params).values
    every = max(1, grid.steps // records)
    blocks = to_bloch(params, state)
    amp = np.linalg.norm(blocks, axis=1)
    active = amp > k_cutoff * amp.max()
    traj = propagate_blocks(params, protocol, ks[active], blocks[active], grid, every)
    pp, pm = [], []
    full = np.zeros_like(blocks)
    for b, ph in zip(traj.states, traj.phi):
        full[active] = b
        p, m = band_decompose(None, params, ph, blocks=full).populations
        pp.append(p)
        pm.append(m)
    gamma_plus = geometric_phase(params, SweepSpec(phi_end, float(ks[0]), 1, protocol.beta, protocol.phi0))
    direction = 1 if protocol.beta > 0 else -1
    survivor = 1 if sign_of_im_gamma(params, 1, direction) < 0 else -1
    return CollapseReport(traj.times, traj.phi, np.array(pp), np.array(pm), -gamma_plus.imag, survivor)
