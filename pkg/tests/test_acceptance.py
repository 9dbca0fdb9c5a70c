"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Criteria that fail are implemented at their stated tolerance and left red;
the diagnostics at the end of the module quantify what the numbers are.
"""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

import oracles
from ricemele.bloch import band_energy, bloch_block, classify_spectrum, eigensystem, eigenvectors, field_components
from ricemele.evolution import evolve_eigenstate, evolve_state, from_bloch, propagate_blocks, propagate_real_space, to_bloch
from ricemele.model import ModelParams, build_hamiltonian, k_grid
from ricemele.phases import (
    SweepSpec,
    closed_form_phases,
    dynamic_phase,
    geometric_phase,
    inflection_flux,
    sign_of_im_gamma,
)
from ricemele.protocols import Constant, GaussianPulse, Linear, TimeGrid
from ricemele.wavepacket import (
    GaussianSpec,
    band_collapse_run,
    band_decompose,
    build_gaussian,
    center_trajectory,
    project_band,
    reduced_energy,
)

A_QUOTED = 27.58
E_QUOTED = 1.14

# amplification / fidelity set
AMP_PARAMS = ModelParams(delta=0.15, mu=0.0, nu=-0.2, N=50)
AMP_K = np.pi / 25
AMP_BAND = -1

# reduced-energy set
RE_PARAMS = ModelParams(delta=-0.7, mu=0.0, nu=1.3, N=500)
RE_SIGMA = 1e-3

# trajectory set
TR_PARAMS = ModelParams(delta=-0.15, mu=0.0, nu=0.05, N=1000)

# collapse set
CO_N = 500
CO_BETA = 1e-3

# closed-form sets
CF_SETS = {"hermitian": ModelParams(delta=-0.15, mu=0.05, nu=0.0, N=8),
           "non-hermitian": ModelParams(delta=-0.15, mu=0.0, nu=0.05, N=8)}
CF_KS = (np.pi / 4, np.pi / 2, 3 * np.pi / 4, np.pi)


def _rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture(scope="module")
def amplification_runs():
    """Evolution of the lower-band eigenstate to phi = pi for three sweep rates."""
    out = {}
    for beta in (1e-2, 1e-3, 1e-4):
        proto = Linear(beta)
        grid = TimeGrid.for_protocol(proto, proto.duration_for(np.pi), max_dphi=1e-4, max_dt=1.0)
        out[beta] = evolve_eigenstate(AMP_PARAMS, proto, AMP_K, AMP_BAND, grid, record_every=grid.steps)
    return out


def _reduced_energy_run(params, k0, direction):
    proto = GaussianPulse(RE_SIGMA, 6 / math.sqrt(RE_SIGMA), direction)
    grid = TimeGrid.for_protocol(proto, proto.settle_time(8.0), max_dphi=1e-3, max_dt=0.5)
    state = build_gaussian(params, GaussianSpec(k0, 0.05, params.N))
    ks = k_grid(params).values
    traj = propagate_blocks(params, proto, ks, to_bloch(params, state), grid, record_every=grid.steps)
    phi, blocks = float(traj.phi[-1]), traj.states[-1]
    dec = band_decompose(None, params, phi, blocks=blocks)
    return complex(reduced_energy(None, params, phi, decomposition=dec)), dec


@pytest.fixture(scope="module")
def reduced_energy_runs():
    return {d: _reduced_energy_run(RE_PARAMS, 1.5 * np.pi, d) for d in (1, -1)}


# ----------------------------------------------------------------------------------------------
# 1


def test_criterion_01_amplification(record_criterion, amplification_runs):
    gamma = geometric_phase(AMP_PARAMS, SweepSpec(np.pi, AMP_K, AMP_BAND))
    a_quad = math.exp(-gamma.imag)
    a_evol = float(amplification_runs[1e-4].amplification[-1])
    ok = _rel(a_quad, A_QUOTED) <= 0.02 and _rel(a_evol, A_QUOTED) <= 0.02
    record_criterion(1, "amplification", ok,
                     f"exp(-Im gamma)={a_quad:.5f}, evolved(beta=1e-4)={a_evol:.5f}, target {A_QUOTED} +-2%")
    assert ok


# 2


def test_criterion_02_fidelity(record_criterion, amplification_runs):
    f = {beta: float(rep.fidelity[-1]) for beta, rep in amplification_runs.items()}
    ok = f[1e-4] >= 0.99 and f[1e-2] < f[1e-3] < f[1e-4]
    record_criterion(2, "fidelity limit", ok, ", ".join(f"f(beta={b:g})={v:.12f}" for b, v in f.items()))
    assert ok


# 3


def test_criterion_03_reduced_energy(record_criterion, reduced_energy_runs):
    e_fwd, dec_fwd = reduced_energy_runs[1]
    e_rev, _ = reduced_energy_runs[-1]
    k_c = dec_fwd.mean_momentum(-1)
    eps_kc = band_energy(RE_PARAMS, 0.0, k_c, -1).real
    quoted_ok = _rel(e_fwd.real, -E_QUOTED) <= 0.02 and _rel(e_rev.real, E_QUOTED) <= 0.02
    kc_ok = _rel(e_fwd.real, eps_kc) <= 0.02
    ok = quoted_ok and kc_ok
    record_criterion(3, "reduced-energy collapse", ok,
                     f"E_fwd={e_fwd.real:.5f}, E_rev={e_rev.real:.5f} (target -+{E_QUOTED} +-2%: "
                     f"{'ok' if quoted_ok else 'miss'}); eps_-(k_c={k_c:.4f}, 0)={eps_kc:.5f} "
                     f"({'ok' if kc_ok else 'miss'})")
    assert ok


# 4

def _real_region():
    @st.composite
    def draw(draw_):
        mag = draw_(st.floats(0.05, 0.9))
        delta = mag * draw_(st.sampled_from([1, -1]))
        nu = draw_(st.floats(0.02, 1.8)) * mag * draw_(st.sampled_from([1, -1]))
        return ModelParams(delta=delta, mu=0.0, nu=nu, N=50)

    return draw()


SYM_SETTINGS = settings(max_examples=100, deadline=None, suppress_health_check=list(HealthCheck))
KS50 = list(k_grid(ModelParams(N=50)).values)


@SYM_SETTINGS
@given(_real_region(), st.sampled_from(KS50), st.integers(1, 2), st.sampled_from([1, -1]))
def _reverse_sweep(params, k, n, band):
    fwd = geometric_phase(params, SweepSpec(n * np.pi, k, band))
    rev = geometric_phase(params, SweepSpec(-n * np.pi, k, band))
    assert abs(fwd + rev) <= 1e-8


@SYM_SETTINGS
@given(_real_region(), st.sampled_from(KS50), st.floats(-2 * np.pi, 2 * np.pi), st.sampled_from([1, -1]))
def _delta_flip(params, k, phi, band):
    a = geometric_phase(params, SweepSpec(phi, k, band))
    b = geometric_phase(params.replace(delta=-params.delta), SweepSpec(phi, k, band))
    assert abs(a + b) <= 1e-8


@SYM_SETTINGS
@given(_real_region(), st.sampled_from(KS50), st.floats(-2 * np.pi, 2 * np.pi), st.sampled_from([1, -1]))
def _nu_flip(params, k, phi, band):
    a = geometric_phase(params, SweepSpec(phi, k, band))
    b = geometric_phase(params.replace(nu=-params.nu), SweepSpec(phi, k, band))
    assert abs(a - b.conjugate()) <= 1e-8


@SYM_SETTINGS
@given(_real_region(), st.sampled_from(KS50), st.integers(1, 2), st.sampled_from([1, -1]),
       st.sampled_from([1, -1]))
def _total_sign(params, k, n, band, direction):
    g = geometric_phase(params, SweepSpec(direction * n * np.pi, k, band))
    assert np.sign(g.imag) == sign_of_im_gamma(params, band, direction)


@SYM_SETTINGS
@given(_real_region(), st.integers(1, 2), st.sampled_from([1, -1]))
def _k_independence(params, n, band):
    gammas = np.array([geometric_phase(params, SweepSpec(n * np.pi, k, band)) for k in KS50])
    dyn = np.array([dynamic_phase(params, SweepSpec(n * np.pi, k, band, beta=1.0)) for k in KS50])
    assert np.max(np.abs(gammas - gammas[0])) <= 1e-8
    assert np.max(np.abs(dyn - dyn[0])) <= 1e-8


@SYM_SETTINGS
@given(_real_region(), st.sampled_from(KS50), st.sampled_from([1, -1]))
def _inflection(params, k, band):
    h = 1e-3
    phi_c = inflection_flux(k)
    # gamma(phi_c + h) - gamma(phi_c) and gamma(phi_c - h) - gamma(phi_c)
    up = geometric_phase(params, SweepSpec(phi_c + h, k, band, phi_start=phi_c))
    down = geometric_phase(params, SweepSpec(phi_c - h, k, band, phi_start=phi_c))
    assert abs((up + down) / h**2) <= 1e-4


def test_criterion_04_symmetry_suite(record_criterion):
    checks = {"reverse sweep": _reverse_sweep, "delta flip": _delta_flip, "nu flip": _nu_flip,
              "total sign": _total_sign, "k independence": _k_independence, "inflection": _inflection}
    failed = {}
    for name, prop in checks.items():
        try:
            prop()
        except Exception as exc:  # noqa: BLE001 - report every failing property
            failed[name] = f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
    ok = not failed
    detail = "6 properties x 100 draws" + ("" if ok else f"; failed {failed}")
    record_criterion(4, "symmetry suite", ok, detail)
    assert ok, failed


# 5


def test_criterion_05_classification(record_criterion):
    rng = np.random.default_rng(2024)
    phis = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    wrong, draws = [], 0
    while draws < 200:
        delta, nu, phi = rng.uniform(-1, 1), rng.uniform(-2.5, 2.5), rng.uniform(0, 2 * np.pi)
        if abs(abs(nu) - 2 * abs(delta)) < 1e-6:
            continue
        draws += 1
        params = ModelParams(delta=delta, mu=0.0, nu=nu, N=50)
        expected = abs(nu) < 2 * abs(delta)
        tag = classify_spectrum(params, phi, resolution="continuum").is_real
        scan = {classify_spectrum(params, p, resolution="continuum").is_real for p in phis}
        if tag != expected or scan != {expected}:
            wrong.append((delta, nu, phi))
    ok = not wrong
    record_criterion(5, "spectrum classification", ok, f"{draws} draws, {len(wrong)} misclassified, 720-point scans")
    assert ok, wrong[:5]


# 6


def test_criterion_06_eigensystem(record_criterion):
    rng = np.random.default_rng(7)
    worst = {"residual": 0.0, "biorth": 0.0, "complete": 0.0}
    for _ in range(200):
        delta = rng.uniform(0.05, 0.95) * rng.choice([-1, 1])
        nu = rng.uniform(-1.9, 1.9) * abs(delta)
        params = ModelParams(delta=delta, mu=rng.uniform(-0.3, 0.3) if rng.random() < 0.3 else 0.0,
                             nu=nu if rng.random() < 0.8 else 0.0, N=50)
        phi, k = rng.uniform(-np.pi, np.pi), rng.choice(KS50)
        block = bloch_block(params, phi, k)
        pairs = eigensystem(block)
        h = block.h
        for p in pairs:
            worst["residual"] = max(worst["residual"], np.linalg.norm(h @ p.right - p.energy * p.right),
                                    np.linalg.norm(h.conj().T @ p.left - np.conj(p.energy) * p.left))
        gram = np.array([[np.vdot(a.left, b.right) for b in pairs] for a in pairs])
        worst["biorth"] = max(worst["biorth"], np.max(np.abs(gram - np.eye(2))))
        comp = sum(np.outer(p.right, p.left.conj()) for p in pairs)
        worst["complete"] = max(worst["complete"], np.max(np.abs(comp - np.eye(2))))
    spec_err = 0.0
    for n in (4, 8, 16):
        params = ModelParams(delta=-0.3, mu=0.1, nu=0.2, N=n)
        for phi in (0.0, 0.37, 2.1):
            dense = np.linalg.eigvals(build_hamiltonian(params, phi))
            ks = k_grid(params).values
            bmag = field_components(params, phi, ks)[3]
            blocks = np.concatenate([bmag, -bmag])
            cost = np.abs(dense[:, None] - blocks[None, :])
            r, c = linear_sum_assignment(cost)
            spec_err = max(spec_err, cost[r, c].max())
    ok = max(worst.values()) <= 1e-12 and spec_err <= 1e-10
    record_criterion(6, "eigensystem contract", ok,
                     ", ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f", dense-vs-block={spec_err:.1e}")
    assert ok


# 7


def test_criterion_07_propagator_equivalence(record_criterion):
    params = ModelParams(delta=0.3, mu=0.0, nu=0.2, N=16)
    rng = np.random.default_rng(11)
    errs = {}
    for name, proto, t_end, steps in (("linear", Linear(0.1), 10.0, 20000),
                                      ("gaussian", GaussianPulse(0.5, 3.0), None, 60000)):
        t_end = t_end if t_end is not None else proto.settle_time()
        psi = rng.normal(size=32) + 1j * rng.normal(size=32)
        psi /= np.linalg.norm(psi)
        bloch = evolve_state(params, proto, psi, TimeGrid(t_end, steps), steps).final_state
        rk4 = propagate_real_space(params, proto, psi, TimeGrid(t_end, 50), record_every=50).final_state
        errs[f"bloch-rk4 {name}"] = float(np.max(np.abs(bloch - rk4)))
    for n in (16, 64):
        p = params.replace(N=n)
        psi = rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n)
        psi /= np.linalg.norm(psi)
        proto, grid = GaussianPulse(0.5, 3.0), TimeGrid(6.0, 300)
        dense = propagate_real_space(p, proto, psi, grid, method="expm", record_every=grid.steps).final_state
        prod = evolve_state(p, proto, psi, grid, grid.steps).final_state
        errs[f"expm-stepper N={n}"] = float(np.max(np.abs(dense - prod)))
    ok = max(errs.values()) <= 1e-8
    record_criterion(7, "propagator equivalence", ok, ", ".join(f"{k}={v:.1e}" for k, v in errs.items()))
    assert ok


# 8


def test_criterion_08_probability_preservation(record_criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        mag = rng.uniform(0.1, 0.9)
        params = ModelParams(delta=mag * rng.choice([-1, 1]), mu=0.0, nu=rng.uniform(-1.8, 1.8) * mag, N=32)
        phi0, band = rng.uniform(0, 2 * np.pi), rng.choice([1, -1])
        ks = k_grid(params).values
        right, _, _ = eigenvectors(*field_components(params, phi0, ks), band)
        picks = rng.choice(params.N, size=6, replace=False)
        blocks = np.zeros((params.N, 2), dtype=complex)
        coeff = rng.normal(size=6) + 1j * rng.normal(size=6)
        blocks[picks] = coeff[:, None] * right[picks]
        psi = from_bloch(params, blocks)
        psi /= np.linalg.norm(psi)
        traj = propagate_real_space(params, Constant(phi0), psi, TimeGrid(100.0, 100))
        norms = np.linalg.norm(traj.states, axis=1)
        worst = max(worst, float(np.max(np.abs(norms - 1))))
    ok = worst <= 1e-9
    record_criterion(8, "constant-flux probability", ok, f"max |norm - 1| over t in [0, 100] = {worst:.1e}")
    assert ok


# 9


def _trajectory_run(beta):
    spec = GaussianSpec(np.pi / 2, 0.05, 1900)
    psi = project_band(build_gaussian(TR_PARAMS, spec), TR_PARAMS, 0.0, -1)
    proto = Linear(beta)
    grid = TimeGrid.for_protocol(proto, proto.duration_for(np.pi), max_dphi=1e-3, max_dt=1.0)
    traj = evolve_state(TR_PARAMS, proto, psi, grid, max(1, grid.steps // 400))
    return center_trajectory(traj.states, traj.times, traj.phi, TR_PARAMS, proto, band=-1)


@pytest.mark.slow
def test_criterion_09_trajectory(record_criterion):
    runs = {beta: _trajectory_run(beta) for beta in (1e-3, 5e-4)}
    rel = {beta: r.max_deviation / r.traversed for beta, r in runs.items()}
    ok = rel[1e-3] <= 0.02 and rel[5e-4] < rel[1e-3]
    record_criterion(9, "trajectory-dispersion", ok,
                     ", ".join(f"beta={b:g}: max dev {r.max_deviation:.2f} of {r.traversed:.0f} sites "
                               f"({rel[b]:.2%})" for b, r in runs.items()))
    assert ok


# 10


@pytest.mark.slow
def test_criterion_10_band_collapse(record_criterion):
    spec = GaussianSpec(1.4 * np.pi, 0.05, CO_N)
    rows, ok = [], True
    for delta, nu in ((0.7, 1.3), (-0.7, 1.3), (0.7, -1.3), (-0.7, -1.3)):
        params = ModelParams(delta=delta, mu=0.0, nu=nu, N=CO_N)
        for direction in (1, -1):
            rep = band_collapse_run(spec, params, Linear(direction * CO_BETA), max_dphi=1e-3, max_dt=1.0,
                                    records=20)
            p_plus, p_minus = rep.normalized
            observed = 1 if p_plus[-1] > p_minus[-1] else -1
            predicted = sign_of_im_gamma(params, 1, direction) < 0 and 1 or -1
            growth_ok = _rel(rep.log_ratio_growth, rep.predicted_growth) <= 0.05
            ok &= observed == predicted and growth_ok
            rows.append(f"({delta:+.1f},{nu:+.1f},{direction:+d}) survivor {observed:+d}/{predicted:+d} "
                        f"growth {rep.log_ratio_growth:.2f}/{rep.predicted_growth:.2f}")
    record_criterion(10, "band collapse", ok, "; ".join(rows))
    assert ok


# 11


def test_criterion_11_closed_forms(record_criterion):
    rows, ok = [], True
    for label, params in CF_SETS.items():
        for k in CF_KS:
            sweep = SweepSpec(2 * np.pi, k, 1)
            alpha_cf, gamma_cf = closed_form_phases(params, sweep)
            gamma_q = geometric_phase(params, sweep)
            alpha_q = dynamic_phase(params, sweep)
            agree = (np.isfinite(gamma_cf) and np.isfinite(alpha_cf)
                     and _rel(gamma_cf, gamma_q) <= 0.05 and _rel(alpha_cf, alpha_q) <= 0.05)
            character = abs(gamma_q.imag) <= 1e-10 and (not np.isfinite(gamma_cf) or abs(gamma_cf.imag) <= 1e-10) \
                if label == "hermitian" else abs(gamma_q.imag) > 1e-10
            ok &= bool(agree and character)
            rows.append(f"{label} k={k / np.pi:.2f}pi: gamma cf {gamma_cf:.4f} vs {gamma_q:.4f}, "
                        f"alpha cf {alpha_cf.real:.4f} vs {alpha_q.real:.4f}")
    record_criterion(11, "closed-form consistency", ok, "; ".join(rows))
    assert ok


# ----------------------------------------------------------------------------------------------
# diagnostics for the red criteria


def test_quadrature_and_evolution_agree_on_amplification(amplification_runs):
    gamma = geometric_phase(AMP_PARAMS, SweepSpec(np.pi, AMP_K, AMP_BAND))
    assert amplification_runs[1e-4].amplification[-1] == pytest.approx(math.exp(-gamma.imag), rel=1e-4)


def test_quoted_amplification_is_the_fourth_power_of_the_half_winding_value():
    gamma = geometric_phase(AMP_PARAMS, SweepSpec(np.pi, AMP_K, AMP_BAND))
    assert math.exp(-4 * gamma.imag) == pytest.approx(A_QUOTED, rel=0.01)
    assert oracles.geometric_phase(AMP_PARAMS, AMP_K, AMP_BAND, np.pi) == pytest.approx(gamma, abs=1e-8)


def test_reduced_energy_tracks_packet_band_minimum(reduced_energy_runs):
    e_fwd, dec = reduced_energy_runs[1]
    e_rev, _ = reduced_energy_runs[-1]
    k_c = dec.mean_momentum(-1)
    eps = band_energy(RE_PARAMS, 0.0, k_c, 1).real
    assert e_fwd.real == pytest.approx(-eps, rel=0.02)
    assert e_rev.real == pytest.approx(eps, rel=0.02)


@pytest.mark.slow
def test_cell_momentum_packet_reaches_quoted_energy():
    for direction, sign in ((1, -1), (-1, 1)):
        e, _ = _reduced_energy_run(RE_PARAMS, 0.75 * np.pi, direction)
        assert e.real == pytest.approx(sign * E_QUOTED, rel=0.02)


@pytest.mark.parametrize("label", list(CF_SETS))
def test_halved_closed_form_tracks_quadrature_within_one_half_period(label):
    params = CF_SETS[label]
    k = np.pi / 2
    for phi in (inflection_flux(k) + 0.3, inflection_flux(k) + 1.0):
        sweep = SweepSpec(phi, k, 1)
        _, gamma_cf = closed_form_phases(params, sweep, prefactor="halved")
        gamma_q = geometric_phase(params, sweep)
        assert abs(gamma_cf - gamma_q) <= 0.05 * abs(gamma_q)
        _, literal = closed_form_phases(params, sweep)
        assert literal == pytest.approx(2 * gamma_cf, rel=1e-12)
