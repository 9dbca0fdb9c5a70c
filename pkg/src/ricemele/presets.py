"""Experiment runners and named presets.

Every runner takes a validated :class:`~ricemele.config.RunConfig` and
returns a :class:`Table`. Column dictionary:

``spectrum``
    k, re_eps_plus, im_eps_plus, re_eps_minus, im_eps_minus
``phases``
    phi, k, band, re_alpha_beta, im_alpha_beta, re_gamma, im_gamma
    (``alpha_beta`` is the reduced dynamic phase, independent of ``beta``)
``evolve``
    beta, k, band, t, phi, A, f, A_adiabatic
``wavepacket``
    beta, sigma, direction, t, phi, x_c, x_pred, resultant, P_plus, P_minus, E

A preset is a config text plus a list of variants (override sets). Its
table is the variants' tables stacked in order with a leading ``variant``
column; the header carries a provenance line naming the figure the
parameter set belongs to.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bloch import field_components
from .config import RunConfig, validate_config
from .evolution import evolve_eigenstate, from_bloch, propagate_blocks, to_bloch
from .exceptions import ExceptionalPoint
from .model import k_grid
from .phases import SweepSpec, dynamic_phase, geometric_phase
from .protocols import GaussianPulse, Linear, TimeGrid, make_protocol
from .wavepacket import GaussianSpec, band_decompose, build_gaussian, center_of_mass, reduced_energy

__all__ = ["Table", "Preset", "PRESETS", "RUNNERS", "run_config", "run_preset", "resolve_workers"]


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)
    header: list = field(default_factory=list)


@dataclass(frozen=True)
class Preset:
    name: str
    runner: str
    provenance: str
    text: str
    variants: tuple = ((None, ()),)


def resolve_workers(workers: int | None) -> int:
    return workers if workers and workers > 0 else (os.cpu_count() or 1)


def _pmap(fn, items, workers):
    """Index-ordered map; results do not depend on the worker count."""
    items = list(items)
    n = min(resolve_workers(workers), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _momenta(cfg: RunConfig) -> list[float]:
    return list(k_grid(cfg.model).values) if cfg.sweep["k"] == "all" else list(cfg.sweep["k"])


def _protocol(cfg: RunConfig):
    p = cfg.protocol
    return make_protocol(p["kind"], phi0=p["phi0"], beta=p["beta"], sigma=p["sigma"], tau=p["tau"],
                         direction=p["direction"])


def _duration(cfg: RunConfig, protocol) -> float:
    """Explicit ``grid.t_end``, else the sweep span (linear) or the pulse settle time."""
    if cfg.grid["t_end"] is not None:
        return cfg.grid["t_end"]
    if isinstance(protocol, Linear):
        return abs(cfg.sweep["phi_end"] - protocol.phi0) / abs(protocol.beta)
    if isinstance(protocol, GaussianPulse):
        return protocol.settle_time()
    raise ValueError("grid.t_end is required for a constant protocol")


def _grid(cfg: RunConfig, protocol, t_end: float) -> TimeGrid:
    if cfg.grid["steps"] is not None:
        return TimeGrid(t_end, cfg.grid["steps"])
    return TimeGrid.for_protocol(protocol, t_end, cfg.grid["max_dphi"], cfg.grid["max_dt"])


def _cumulative_gamma(params, k, band, phis) -> np.ndarray:
    out = np.zeros(len(phis), dtype=complex)
    for i in range(1, len(phis)):
        if phis[i] == phis[i - 1]:
            out[i] = out[i - 1]
            continue
        out[i] = out[i - 1] + geometric_phase(params, SweepSpec(phis[i], k, band, 1.0, phis[i - 1]))
    return out


def _cumulative_alpha_beta(params, k, band, phis) -> np.ndarray:
    out = np.zeros(len(phis), dtype=complex)
    for i in range(1, len(phis)):
        out[i] = out[i - 1] + dynamic_phase(params, SweepSpec(phis[i], k, band, 1.0, phis[i - 1]))
    return out


def run_spectrum(cfg: RunConfig, workers: int | None = None) -> Table:
    ks = k_grid(cfg.model).values
    eps = field_components(cfg.model, cfg.phi, ks)[3]
    rows = [(float(k), e.real, e.imag, 0.0 - e.real, 0.0 - e.imag) for k, e in zip(ks, eps)]
    header = [f"phi: {cfg.phi!r}", f"spectrum: {cfg.spectrum}"]
    return Table(["k", "re_eps_plus", "im_eps_plus", "re_eps_minus", "im_eps_minus"], rows, header)


def run_phases(cfg: RunConfig, workers: int | None = None) -> Table:
    phis = np.linspace(cfg.sweep["phi_start"], cfg.sweep["phi_end"], cfg.sweep["samples"])
    jobs = [(k, b) for k in _momenta(cfg) for b in cfg.sweep["bands"]]

    def one(job):
        k, band = job
        gamma = _cumulative_gamma(cfg.model, k, band, phis)
        ab = _cumulative_alpha_beta(cfg.model, k, band, phis)
        return [(float(ph), float(k), band, a.real, a.imag, g.real, g.imag) for ph, a, g in zip(phis, ab, gamma)]

    rows = [r for block in _pmap(one, jobs, workers) for r in block]
    cols = ["phi", "k", "band", "re_alpha_beta", "im_alpha_beta", "re_gamma", "im_gamma"]
    return Table(cols, rows, [f"spectrum: {cfg.spectrum}"])


def run_evolve(cfg: RunConfig, workers: int | None = None) -> Table:
    protocol = _protocol(cfg)
    t_end = _duration(cfg, protocol)
    grid = _grid(cfg, protocol, t_end)
    every = max(1, grid.steps // cfg.grid["records"])
    jobs = [(k, b) for k in _momenta(cfg) for b in cfg.sweep["bands"]]
    beta = protocol.beta if isinstance(protocol, Linear) else math.nan

    def one(job):
        k, band = job
        rep = evolve_eigenstate(cfg.model, protocol, k, band, grid, every)
        try:
            a_ad = np.exp(-_cumulative_gamma(cfg.model, k, band, rep.phi).imag)
        except ExceptionalPoint:
            a_ad = np.full(len(rep.phi), math.nan)
        return [(beta, float(k), band, float(t), float(ph), float(a), float(f), float(x))
                for t, ph, a, f, x in zip(rep.times, rep.phi, rep.amplification, rep.fidelity, a_ad)]

    rows = [r for block in _pmap(one, jobs, workers) for r in block]
    header = [f"protocol: {protocol.as_dict()}", f"grid: t_end={grid.t_end!r} steps={grid.steps}"]
    return Table(["beta", "k", "band", "t", "phi", "A", "f", "A_adiabatic"], rows, header)


def run_wavepacket(cfg: RunConfig, workers: int | None = None) -> Table:
    params = cfg.model
    protocol = _protocol(cfg)
    t_end = _duration(cfg, protocol)
    grid = _grid(cfg, protocol, t_end)
    every = max(1, grid.steps // cfg.grid["records"])
    wp = cfg.wavepacket
    state = build_gaussian(params, GaussianSpec(wp["k0"], wp["width"], wp["center_site"]))
    phi0 = protocol(0.0)
    dec0 = band_decompose(state, params, phi0)
    if wp["band"] is not None:
        state = dec0.band_component(wp["band"])
        state = state / np.linalg.norm(state)
        dec0 = band_decompose(state, params, phi0)
    band = wp["band"] if wp["band"] is not None else dec0.dominant()[0]
    k_c = dec0.mean_momentum(band)

    traj = propagate_blocks(params, protocol, k_grid(params).values, to_bloch(params, state), grid, every)
    n = params.n_sites
    rows, prev = [], None
    is_linear = isinstance(protocol, Linear)
    eps0 = (band * field_components(params, phi0, k_c)[3]).real
    x0 = None
    beta = protocol.beta if is_linear else math.nan
    sigma = protocol.sigma if isinstance(protocol, GaussianPulse) else math.nan
    direction = protocol.direction if isinstance(protocol, GaussianPulse) else int(np.sign(beta)) if is_linear else 0
    for t, ph, blocks in zip(traj.times, traj.phi, traj.states):
        dec = band_decompose(None, params, ph, blocks=blocks)
        x, r = center_of_mass(from_bloch(params, blocks))
        if prev is not None:
            x = prev + ((x - prev + n / 2) % n - n / 2)
        prev = x
        x0 = x if x0 is None else x0
        if is_linear:
            eps = (band * field_components(params, ph, k_c)[3]).real
            x_pred = x0 + (eps - eps0) / protocol.beta
        else:
            x_pred = math.nan
        p_plus, p_minus = dec.populations
        e = reduced_energy(None, params, ph, decomposition=dec)
        rows.append((beta, sigma, direction, float(t), float(ph), float(x), float(x_pred), float(r),
                     p_plus, p_minus, p_plus / (p_plus + p_minus), p_minus / (p_plus + p_minus),
                     float(np.real(e))))
    header = [f"protocol: {protocol.as_dict()}", f"grid: t_end={grid.t_end!r} steps={grid.steps}",
              f"packet: band={band} k_c={k_c!r}"]
    cols = ["beta", "sigma", "direction", "t", "phi", "x_c", "x_pred", "resultant", "P_plus", "P_minus",
            "p_plus_frame", "p_minus_frame", "E"]
    return Table(cols, rows, header)


RUNNERS = {
    "spectrum": run_spectrum,
    "phases": run_phases,
    "evolve": run_evolve,
    "wavepacket": run_wavepacket,
}


def run_config(cfg: RunConfig, runner: str, workers: int | None = None) -> Table:
    table = RUNNERS[runner](cfg, workers)
    table.header = [f"model: J={cfg.model.J!r} delta={cfg.model.delta!r} mu={cfg.model.mu!r} "
                    f"nu={cfg.model.nu!r} N={cfg.model.N}"] + table.header
    table.header += [f"warning: {w}" for w in cfg.warnings]
    return table


_FIG2 = """
[model]
delta = -0.15
mu = {mu}
nu = {nu}
N = 8
[sweep]
phi_start = 0
phi_end = 2*pi
k = pi/4, pi/2, 3*pi/4, pi
band = 1
samples = 129
"""

PRESETS = {
    "fig2-hermitian": Preset(
        "fig2-hermitian", "phases",
        "Figure 2(a) parameter set: delta=-0.15, mu=0.05, nu=0 (Hermitian, real phases)",
        _FIG2.format(mu=0.05, nu=0),
    ),
    "fig2-nonhermitian": Preset(
        "fig2-nonhermitian", "phases",
        "Figure 2(b) parameter set: delta=-0.15, mu=0, nu=0.05 (complex geometric phase)",
        _FIG2.format(mu=0, nu=0.05),
    ),
    "fig3": Preset(
        "fig3", "evolve",
        "Figure 3 parameter set: delta=0.15, mu=0, nu=-0.2, N=50, k=pi/25, lower band, sweep 0 to pi",
        """
[model]
delta = 0.15
mu = 0
nu = -0.2
N = 50
[protocol]
kind = linear
[sweep]
phi_end = pi
k = pi/25
band = -1
[grid]
max_dphi = 1e-4
max_dt = 1
records = 200
""",
        (("beta=1e-2", ("protocol.beta=1e-2",)),
         ("beta=1e-3", ("protocol.beta=1e-3",)),
         ("beta=1e-4", ("protocol.beta=1e-4",))),
    ),
    "fig4": Preset(
        "fig4", "wavepacket",
        "Figure 4 parameter set: k0=pi/2, width=0.05, N_A=1900, lower band, delta=-0.15, mu=0, nu=0.05, "
        "N=1000, beta=0.001",
        """
[model]
delta = -0.15
mu = 0
nu = 0.05
N = 1000
[protocol]
kind = linear
beta = 1e-3
[sweep]
phi_end = pi
[wavepacket]
k0 = pi/2
width = 0.05
center_site = 1900
band = lower
[grid]
max_dt = 1
records = 400
""",
    ),
    "fig5": Preset(
        "fig5", "wavepacket",
        "Figure 5 parameter set: k0=1.4*pi, width=0.05, N_A=1000, delta=-0.7, mu=0, nu=1.3, beta=0.001; "
        "(b) reversed flux, (c) reversed delta",
        """
[model]
delta = -0.7
mu = 0
nu = 1.3
N = 500
[protocol]
kind = linear
beta = 1e-3
[sweep]
phi_end = 2*pi
[wavepacket]
k0 = 1.4*pi
width = 0.05
center_site = 1000
[grid]
max_dt = 1
records = 200
""",
        (("a", ()),
         ("b", ("protocol.beta=-1e-3",)),
         ("c", ("model.delta=0.7",))),
    ),
    "fig6": Preset(
        "fig6", "wavepacket",
        "Figure 6 parameter set: k0=1.5*pi, delta=-0.7, mu=0, nu=1.3, Gaussian pulse; "
        "(b) forward and (c) reversed flux for two pulse widths",
        """
[model]
delta = -0.7
mu = 0
nu = 1.3
N = 500
[protocol]
kind = gaussian
[wavepacket]
k0 = 1.5*pi
width = 0.05
center_site = 500
[grid]
max_dphi = 1e-3
max_dt = 0.5
records = 200
""",
        (("sigma=1e-2 forward", ("protocol.sigma=1e-2", "protocol.tau=60", "protocol.direction=1")),
         ("sigma=1e-3 forward", ("protocol.sigma=1e-3", "protocol.tau=6/1e-3**0.5", "protocol.direction=1")),
         ("sigma=1e-2 reversed", ("protocol.sigma=1e-2", "protocol.tau=60", "protocol.direction=-1")),
         ("sigma=1e-3 reversed", ("protocol.sigma=1e-3", "protocol.tau=6/1e-3**0.5", "protocol.direction=-1"))),
    ),
}


def run_preset(name: str, overrides=(), workers: int | None = None) -> Table:
    """Run every variant of a preset; user ``overrides`` apply on top of each variant."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    preset = PRESETS[name]
    configs = [(label, validate_config(preset.text, tuple(extra) + tuple(overrides)))
               for label, extra in preset.variants]
    n = resolve_workers(workers)
    # variants in parallel when there are several, otherwise parallelise inside the runner
    outer, inner = (n, 1) if len(configs) > 1 else (1, n)
    tables = _pmap(lambda item: run_config(item[1], preset.runner, inner), configs, outer)
    with_variant = any(label is not None for label, _ in configs)
    columns = (["variant"] if with_variant else []) + tables[0].columns
    rows, header = [], [f"preset: {name}", f"provenance: {preset.provenance}"]
    for (label, _), table in zip(configs, tables):
        rows += [((label,) + tuple(r)) if with_variant else tuple(r) for r in table.rows]
        header += [f"[{label}] {h}" if with_variant else h for h in table.header]
    return Table(columns, rows, header)
