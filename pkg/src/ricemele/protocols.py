"""Time dependence of the Peierls phase and uniform time grids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

__all__ = ["FluxProtocol", "Constant", "Linear", "GaussianPulse", "TimeGrid", "make_protocol"]


class FluxProtocol:
    """Base class: ``protocol(t)`` returns ``phi(t)`` (vectorised over ``t``)."""

    kind = "abstract"

    def __call__(self, t):
        raise NotImplementedError

    def rate(self, t):
        """``d phi / dt``."""
        raise NotImplementedError

    def max_rate(self, t_end: float) -> float:
        t = np.linspace(0.0, t_end, 2049)
        return float(np.max(np.abs(self.rate(t))))

    def as_dict(self) -> dict:
        return {"kind": self.kind, **{k: v for k, v in vars(self).items()}}


@dataclass(frozen=True)
class Constant(FluxProtocol):
    phi0: float = 0.0
    kind = "constant"

    def __call__(self, t):
        return np.full(np.shape(t), self.phi0, dtype=float) if np.ndim(t) else float(self.phi0)

    def rate(self, t):
        return np.zeros(np.shape(t)) if np.ndim(t) else 0.0

    def as_dict(self):
        return {"kind": self.kind, "phi0": self.phi0}


@dataclass(frozen=True)
class Linear(FluxProtocol):
    """``phi(t) = phi0 + beta t``."""

    beta: float
    phi0: float = 0.0
    kind = "linear"

    def __call__(self, t):
        return self.phi0 + self.beta * np.asarray(t, dtype=float) if np.ndim(t) else self.phi0 + self.beta * t

    def rate(self, t):
        return np.full(np.shape(t), self.beta) if np.ndim(t) else self.beta

    def duration_for(self, phi_end: float) -> float:
        """Time needed to reach ``phi_end``."""
        if self.beta == 0:
            raise ValueError("beta must be nonzero")
        t = (phi_end - self.phi0) / self.beta
        if t < 0:
            raise ValueError(f"phi_end={phi_end} lies behind the sweep direction")
        return t

    def as_dict(self):
        return {"kind": self.kind, "beta": self.beta, "phi0": self.phi0}


@dataclass(frozen=True)
class GaussianPulse(FluxProtocol):
    """Flux pulse ``phi(t) = direction * 2 sqrt(sigma pi) int_0^t exp(-sigma (s - tau)^2) ds``.

    Evaluated in closed form as ``pi [erf(sqrt(sigma)(t - tau)) + erf(sqrt(sigma) tau)]``;
    the total delivered flux approaches ``2 pi`` when ``sqrt(sigma) tau >> 1``.
    """

    sigma: float
    tau: float
    direction: int = 1
    kind = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")

    def __call__(self, t):
        s = math.sqrt(self.sigma)
        val = np.pi * (erf(s * (np.asarray(t, dtype=float) - self.tau)) + erf(s * self.tau))
        return self.direction * (val if np.ndim(t) else float(val))

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        val = 2 * np.sqrt(self.sigma * np.pi) * np.exp(-self.sigma * (t - self.tau) ** 2)
        return self.direction * (val if val.ndim else float(val))

    def settle_time(self, width: float = 8.0) -> float:
        """``tau + width / sqrt(sigma)``: the pulse is over by then."""
        return self.tau + width / math.sqrt(self.sigma)

    def max_rate(self, t_end: float) -> float:
        if 0 <= self.tau <= t_end:
            return float(abs(self.rate(self.tau)))
        return super().max_rate(t_end)

    def as_dict(self):
        return {"kind": self.kind, "sigma": self.sigma, "tau": self.tau, "direction": self.direction}


def make_protocol(kind: str, **kw) -> FluxProtocol:
    kind = kind.lower()
    if kind == "constant":
        return Constant(kw.get("phi0", 0.0))
    if kind == "linear":
        return Linear(kw["beta"], kw.get("phi0", 0.0))
    if kind in ("gaussian", "gaussian_pulse", "pulse"):
        return GaussianPulse(kw["sigma"], kw["tau"], int(kw.get("direction", 1)))
    raise ValueError(f"unknown protocol {kind!r}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``steps`` intervals on ``[0, t_end]``."""

    t_end: float
    steps: int

    def __post_init__(self):
        if self.t_end < 0 or not math.isfinite(self.t_end):
            raise ValueError(f"t_end must be finite and >= 0, got {self.t_end}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.t_end / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.steps + 1)

    @classmethod
    def for_protocol(cls, protocol: FluxProtocol, t_end: float, max_dphi: float = 1e-3,
                     max_dt: float | None = None, min_steps: int = 1) -> "TimeGrid":
        """Smallest grid whose per-step flux change stays below ``max_dphi``."""
        rate = protocol.max_rate(t_end)
        steps = max(min_steps, math.ceil(rate * t_end / max_dphi) if rate > 0 else 1)
        if max_dt is not None and t_end > 0:
            steps = max(steps, math.ceil(t_end / max_dt))
        return cls(t_end, steps)
