from math import erf

import numpy as np
import pytest

import oracles
from ricemele.bloch import eigenvectors, field_components
from ricemele.evolution import propagate_real_space
from ricemele.exceptions import DelocalizedError, TailWrapError
from ricemele.model import ModelParams, k_grid
from ricemele.protocols import Constant, Linear, TimeGrid
from ricemele.wavepacket import (
    GaussianSpec,
    band_collapse_run,
    band_decompose,
    build_gaussian,
    center_of_mass,
    center_trajectory,
    project_band,
    reduced_energy,
)

NH = ModelParams(delta=0.15, mu=0.0, nu=-0.2, N=50)


def test_gaussian_is_normalised_and_localised():
    p = ModelParams(N=200)
    psi = build_gaussian(p, GaussianSpec(0.3, 0.05, 17))
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-14)
    x, r = center_of_mass(psi)
    assert x == pytest.approx(17.0, abs=1e-6)
    assert r > 0.9


def test_gaussian_wraps_continuously_and_rejects_wide_envelopes():
    p = ModelParams(N=200)
    psi = np.abs(build_gaussian(p, GaussianSpec(0.0, 0.05, 1)))
    assert psi[1] == pytest.approx(psi[-1], rel=1e-12)
    with pytest.raises(TailWrapError):
        build_gaussian(ModelParams(N=20), GaussianSpec(0.0, 0.05, 1))
    with pytest.raises(ValueError):
        GaussianSpec(0.0, 0.0, 1)


def test_narrow_envelope_is_a_site_delta():
    psi = build_gaussian(ModelParams(N=10), GaussianSpec(1.0, 50.0, 7))
    assert abs(psi[6]) == pytest.approx(1.0, abs=1e-12)


def test_decomposition_reconstructs_the_state():
    psi = build_gaussian(NH, GaussianSpec(0.4, 0.2, 30))
    dec = band_decompose(psi, NH, 0.7)
    assert np.max(np.abs(dec.reconstruct() - psi)) < 1e-10


def test_single_eigenstate_decomposition():
    p = NH
    k = k_grid(p)[9]
    bx, by, bz, bmag = field_components(p, 0.2, k)
    right, _, _ = eigenvectors(bx, by, bz, bmag, -1)
    psi = oracles.bloch_vector(p, k, right)
    dec = band_decompose(psi, p, 0.2)
    pp, pm = dec.normalized_populations
    assert pp < 1e-20 and pm == pytest.approx(1.0)
    assert dec.dominant() == (-1, pytest.approx(k))
    assert reduced_energy(psi, p, 0.2) == pytest.approx(complex(-bmag), abs=1e-12)
    assert reduced_energy(psi, p, 0.2, use_band_index=True) == pytest.approx(-1.0)


def test_site_wavenumber_lands_at_twice_the_cell_momentum():
    p = ModelParams(delta=0.7, nu=1.3, N=500)
    psi = build_gaussian(p, GaussianSpec(1.4 * np.pi, 0.05, 1000))
    dec = band_decompose(psi, p, 0.0)
    w = dec.weights.sum(axis=1)
    k_peak = (2 * 1.4 * np.pi) % (2 * np.pi)
    dist = np.abs((dec.k - k_peak + np.pi) % (2 * np.pi) - np.pi)
    # weights are Gaussian in cell momentum with rms sqrt(2) * width
    rms = np.sqrt(2) * 0.05
    step = 2 * np.pi / p.N
    within10 = w[dist <= 10 * step + 1e-12].sum() / w.sum()
    assert within10 == pytest.approx(erf(10.5 * step / (np.sqrt(2) * rms)), abs=0.01)
    assert w[dist <= 15 * step + 1e-12].sum() / w.sum() > 0.99


def test_reduced_energy_lies_within_band_range():
    p = ModelParams(delta=0.3, N=80)
    psi = build_gaussian(p, GaussianSpec(0.9, 0.1, 40))
    e = reduced_energy(psi, p, 0.0)
    bmag = field_components(p, 0.0, k_grid(p).values)[3].real
    assert -bmag.max() - 1e-12 <= e <= bmag.max() + 1e-12
    lower = project_band(psi, p, 0.0, -1)
    assert reduced_energy(lower, p, 0.0, use_band_index=True) == pytest.approx(-1.0, abs=1e-10)


def test_delocalised_packet_is_reported():
    p = ModelParams(N=20)
    flat = np.ones(40) / np.sqrt(40)
    with pytest.raises(DelocalizedError):
        center_trajectory([flat], [0.0], [0.0], p, Linear(0.1), band=1, k_c=1.0)
    with pytest.raises(TypeError):
        center_trajectory([flat], [0.0], [0.0], p, Constant(0.0))


def test_trajectory_follows_dispersion_and_fast_sweep_deviates():
    p = ModelParams(delta=-0.15, nu=0.05, N=300)
    spec = GaussianSpec(np.pi / 4, 0.08, 300)
    psi = project_band(build_gaussian(p, spec), p, 0.0, -1)

    def run(beta):
        proto = Linear(beta)
        grid = TimeGrid.for_protocol(proto, proto.duration_for(np.pi / 2), max_dphi=1e-3, max_dt=1.0)
        traj = propagate_real_space(p, proto, psi, grid, record_every=max(1, grid.steps // 20))
        return center_trajectory(traj.states, traj.times, traj.phi, p, proto)

    slow = run(1e-2)
    assert slow.band == -1
    assert slow.traversed > 20
    assert slow.max_deviation / slow.traversed < 0.05
    fast = run(0.3)
    assert fast.max_deviation / fast.traversed > slow.max_deviation / slow.traversed


def test_collapse_run_bookkeeping():
    p = ModelParams(delta=0.7, nu=1.3, N=60)
    rep = band_collapse_run(GaussianSpec(1.4 * np.pi, 0.3, 60), p, Linear(0.05), records=10)
    assert rep.phi[-1] == pytest.approx(2 * np.pi)
    a, b = rep.normalized
    assert np.allclose(a + b, 1)
    assert rep.surviving_band in (1, -1)
    assert rep.predicted_growth == pytest.approx(4 * abs(rep.zeta))
    with pytest.raises(TypeError):
        band_collapse_run(GaussianSpec(0.0, 0.3, 1), p, Constant(0.0))
