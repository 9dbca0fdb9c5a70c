"""Dynamic and geometric (Berry) phases accumulated along a linear flux sweep.

The geometric phase is integrated from the explicit, gauge-free integrand

    d gamma / d phi = -2 delta J^2 / (eps (eps - J (mu + i nu))),

which equals ``i <eta| d_phi |psi>`` in the ``(cos theta/2, sin theta/2 e^{i varphi})``
gauge. Both phases depend on ``k`` and ``phi`` only through ``k + 2 phi``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .bloch import band_energy, field_components, near_exceptional
from .exceptions import ExceptionalPoint, QuadratureError, RegimeError
from .model import ModelParams

__all__ = [
    "QUAD_EPSABS",
    "QUAD_LIMIT",
    "SweepSpec",
    "PhaseResult",
    "ClosedFormAux",
    "geometric_phase_integrand",
    "geometric_phase",
    "dynamic_phase",
    "phase_result",
    "geometric_phase_parts",
    "closed_form_aux",
    "closed_form_phases",
    "sign_of_im_gamma",
    "inflection_flux",
]

QUAD_EPSABS = 1e-10
QUAD_LIMIT = 2000


@dataclass(frozen=True)
class SweepSpec:
    """Sweep ``phi: phi_start -> phi_end`` at rate ``beta`` for band ``band`` at momentum ``k``."""

    phi_end: float
    k: float
    band: int = 1
    beta: float = 1.0
    phi_start: float = 0.0

    def __post_init__(self):
        if self.band not in (1, -1):
            raise ValueError(f"band must be +1 or -1, got {self.band}")


@dataclass(frozen=True)
class PhaseResult:
    alpha: complex
    gamma: complex
    zeta: float

    @property
    def amplification(self) -> float:
        """Adiabatic gain ``exp(-Im gamma)``."""
        return math.exp(-self.gamma.imag)


@dataclass(frozen=True)
class ClosedFormAux:
    theta_big: float
    gamma_big: float


def geometric_phase_integrand(params: ModelParams, phi, k, band: int):
    eps = band_energy(params, phi, k, band)
    J = params.J
    return -2 * params.delta * J * J / (eps * (eps - J * params.potential))


def _band_minima(k: float, a: float, b: float):
    """Fluxes in ``(a, b)`` where ``cos(k/2 + phi) = 0`` (sharpest integrand features)."""
    lo, hi = min(a, b), max(a, b)
    first = math.ceil((lo - (math.pi / 2 - k / 2)) / math.pi)
    pts = []
    m = first
    while True:
        p = math.pi / 2 - k / 2 + m * math.pi
        if p >= hi:
            break
        if p > lo:
            pts.append(p)
        m += 1
    return pts


def _min_bmag(params: ModelParams, k: float, a: float, b: float) -> float:
    cand = [a, b] + _band_minima(k, a, b)
    return float(np.min(np.abs(field_components(params, np.array(cand), k)[3])))


def _check_path(params: ModelParams, sweep: SweepSpec):
    bmin = _min_bmag(params, sweep.k, sweep.phi_start, sweep.phi_end)
    if near_exceptional(bmin, params.J):
        raise ExceptionalPoint(f"sweep passes through |B| = {bmin:.3e} at k={sweep.k:.6g}")


def _quad_complex(f, a: float, b: float, points, epsabs: float) -> complex:
    if a == b:
        return 0.0j
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    # breakpoints at the band minima, where the integrand is sharpest
    pts = [p for p in points if a < p < b] or None
    total = 0.0j
    for part in (np.real, np.imag):
        with np.errstate(divide="ignore", invalid="ignore"):
            res = quad(lambda x: float(part(f(x))), a, b, points=pts, epsabs=epsabs, epsrel=1e-13,
                       limit=QUAD_LIMIT, full_output=1)
        if len(res) > 3 or not math.isfinite(res[0]):
            if len(res) <= 3:
                raise QuadratureError(f"non-finite integrand on [{a}, {b}]")
            raise QuadratureError(f"quadrature did not converge on [{a}, {b}]: {res[3].splitlines()[0]}")
        total += res[0] if part is np.real else 1j * res[0]
    return sign * total


def geometric_phase(params: ModelParams, sweep: SweepSpec, epsabs: float = QUAD_EPSABS) -> complex:
    """Complex Berry phase ``gamma_k^band`` accumulated from ``phi_start`` to ``phi_end``.

    Raises
    ------
    ExceptionalPoint
        If the sweep crosses a point with ``|B| ~ 0``.
    QuadratureError
        If adaptive quadrature does not reach ``epsabs`` within the subdivision cap.
    """
    if params.delta == 0.0:
        return 0.0j
    _check_path(params, sweep)
    pts = _band_minima(sweep.k, sweep.phi_start, sweep.phi_end)

    def f(x):
        return geometric_phase_integrand(params, x, sweep.k, sweep.band).item()

    return _quad_complex(f, sweep.phi_start, sweep.phi_end, pts, epsabs)


def dynamic_phase(params: ModelParams, sweep: SweepSpec, epsabs: float = QUAD_EPSABS) -> complex:
    """``alpha = -(1/beta) int eps_band^k(phi) d phi``; real whenever the spectrum is."""
    if sweep.beta == 0:
        raise ValueError("beta must be nonzero for the dynamic phase")
    if sweep.phi_start == sweep.phi_end:
        return 0.0j
    _check_path(params, sweep)
    pts = _band_minima(sweep.k, sweep.phi_start, sweep.phi_end)

    def f(x):
        return band_energy(params, x, sweep.k, sweep.band).item()

    return -_quad_complex(f, sweep.phi_start, sweep.phi_end, pts, epsabs) / sweep.beta


def phase_result(params: ModelParams, sweep: SweepSpec) -> PhaseResult:
    gamma = geometric_phase(params, sweep)
    if sweep.band == 1:
        gamma_plus = gamma
    else:
        gamma_plus = geometric_phase(params, SweepSpec(sweep.phi_end, sweep.k, 1, sweep.beta, sweep.phi_start))
    return PhaseResult(dynamic_phase(params, sweep), gamma, -gamma_plus.imag)


def geometric_phase_parts(params: ModelParams, sweep: SweepSpec, epsabs: float = QUAD_EPSABS):
    """Real and imaginary parts of ``gamma`` from their separate real integrands.

    Only meaningful for ``mu = 0`` with a real spectrum; other inputs warn.
    """
    if params.delta == 0:
        return 0.0, 0.0
    if params.mu != 0:
        warnings.warn("the separate Re/Im integrals assume mu = 0", RuntimeWarning, stacklevel=2)
    _check_path(params, sweep)
    J, d, nu, lam = params.J, params.delta, params.nu, sweep.band
    pts = _band_minima(sweep.k, sweep.phi_start, sweep.phi_end)

    def bmag(x):
        return field_components(params, x, sweep.k)[3].item().real

    def re_f(x):
        b = bmag(x)
        return np.sign(d) * (-2 * abs(d) * J * J) / (b * b + J * J * nu * nu)

    def im_f(x):
        b = bmag(x)
        return np.sign(d * nu * lam) * (-2 * J**3 * abs(d * nu)) / (b * (b * b + J * J * nu * nu))

    re = _quad_complex(re_f, sweep.phi_start, sweep.phi_end, pts, epsabs).real
    im = _quad_complex(im_f, sweep.phi_start, sweep.phi_end, pts, epsabs).real
    return re, im


def closed_form_aux(params: ModelParams, k, phi) -> ClosedFormAux:
    """``Theta_k(phi) = sqrt(delta^-2 - 1)(k + 2 phi - pi)/2`` and ``Gamma_k = J Theta_k / B_k``."""
    d = params.delta
    theta = math.sqrt(d**-2 - 1) * (k + 2 * phi - math.pi) / 2
    bmag = field_components(params, phi, k)[3].item()
    return ClosedFormAux(theta, params.J * theta / bmag.real)


def closed_form_phases(params: ModelParams, sweep: SweepSpec, prefactor: str = "literal"):
    """Approximate ``(alpha, gamma)`` from the analytic small-gap expressions.

    The expressions linearise ``cos(k/2 + phi)`` about a single band minimum, so
    they track the exact phases only while the sweep stays within one half
    period of that minimum; outside the domain of the inverse functions the
    result is ``nan``. ``prefactor="literal"`` uses ``sgn(delta/2)/sqrt(1-delta^2)``
    in front of ``gamma``; ``"halved"`` uses ``sgn(delta)/(2 sqrt(1-delta^2))``,
    the value implied by integrating the linearised integrand.

    Raises
    ------
    RegimeError
        If both ``mu`` and ``nu`` are nonzero, or ``|delta| = 1``.
    """
    mu, nu, d, J = params.mu, params.nu, params.delta, params.J
    if mu != 0 and nu != 0:
        raise RegimeError("closed forms need nu = 0 (Hermitian) or mu = 0 (non-Hermitian)")
    if abs(d) == 1:
        raise RegimeError("closed forms diverge at |delta| = 1")
    if sweep.beta == 0:
        raise ValueError("beta must be nonzero")
    if prefactor not in ("literal", "halved"):
        raise ValueError(f"unknown prefactor {prefactor!r}")
    k, phi, lam, beta = sweep.k, sweep.phi_end, sweep.band, sweep.beta
    if sweep.phi_start != 0:
        raise ValueError("closed forms are referenced to phi = 0")
    root = math.sqrt(1 - d * d)
    b0 = field_components(params, 0.0, k)[3].item().real
    bp = field_components(params, phi, k)[3].item().real
    # |delta| * J * Theta, finite as delta -> 0
    dth0 = J * root * (k - math.pi) / 2
    dthp = J * root * (k + 2 * phi - math.pi) / 2
    hermitian = nu == 0
    coeff = 4 * d * d + mu * mu if hermitian else 4 * d * d - nu * nu
    with np.errstate(invalid="ignore", divide="ignore"):
        log_arg = (bp - 2 * dthp) / (b0 - 2 * dth0)
        log_term = np.log(log_arg) if log_arg > 0 else np.nan
        alpha = lam / (4 * beta) * (b0 * (k - math.pi) - bp * (k + 2 * phi - math.pi)
                                    + J * coeff / root * log_term)
        if d == 0:
            return complex(alpha), 0.0j
        pre = np.sign(d / 2) / root if prefactor == "literal" else np.sign(d) / (2 * root)
        a0 = closed_form_aux(params, k, 0.0)
        ap = closed_form_aux(params, k, phi)
        base = math.atan(a0.theta_big) - math.atan(ap.theta_big)
        if hermitian:
            corr = np.sign(mu * lam) * (math.atan(abs(mu) * ap.gamma_big) - math.atan(abs(mu) * a0.gamma_big))
            gamma = pre * (base - corr)
        else:
            x0, xp = abs(nu) * a0.gamma_big, abs(nu) * ap.gamma_big
            if abs(x0) < 1 and abs(xp) < 1:
                corr = np.sign(nu * lam) * (math.atanh(xp) - math.atanh(x0))
            else:
                corr = np.nan
            gamma = pre * (base - 1j * corr) if np.isfinite(corr) else complex(np.nan, np.nan)
    return complex(alpha), complex(gamma)


def sign_of_im_gamma(params: ModelParams, band: int, direction: int) -> int:
    """Predicted ``sgn Im gamma_k^band(direction * n pi) = -sgn(nu delta band direction)``."""
    return int(-np.sign(params.nu * params.delta * band * direction))


def inflection_flux(k):
    """Flux ``pi/2 - k/2`` where ``d^2 gamma / d phi^2`` vanishes."""
    return np.pi / 2 - np.asarray(k) / 2 if np.ndim(k) else math.pi / 2 - k / 2
