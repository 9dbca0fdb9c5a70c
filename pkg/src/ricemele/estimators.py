"""scikit-learn style front ends.

Model parameters are constructor hyperparameters (so ``get_params`` /
``set_params`` / ``clone`` work), ``fit`` validates them and caches derived
structure, and ``transform`` acts on a batch of ring states with shape
``(n_samples, 2N)``. The two transformers chain in a ``Pipeline``::

    Pipeline([("evolve", FluxEvolver(...)), ("bands", BandProjector(...))])
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_states
from .evolution import evolve_state, from_bloch, propagate_real_space
from .model import ModelParams
from .protocols import TimeGrid, make_protocol
from .wavepacket import band_decompose

__all__ = ["BandProjector", "FluxEvolver"]


class _RiceMeleMixin:
    def _model_params(self) -> ModelParams:
        return ModelParams(J=self.J, delta=self.delta, mu=self.mu, nu=self.nu, N=self.n_cells)


class BandProjector(_RiceMeleMixin, TransformerMixin, BaseEstimator):
    """Map ring states to biorthogonal band coefficients at a fixed flux.

    ``transform`` returns ``(n_samples, 2N)`` complex coefficients: the first
    ``N`` columns are ``g_+^k`` and the last ``N`` are ``g_-^k``, both ordered
    along the momentum grid. ``inverse_transform`` rebuilds the states.

    Parameters
    ----------
    J, delta, mu, nu : float
        Model parameters.
    n_cells : int
        Number of unit cells ``N``.
    phi : float
        Flux at which the band basis is built.
    gauge : {"dirac", "polar"}
        Eigenvector gauge.
    """

    def __init__(self, J=1.0, delta=0.0, mu=0.0, nu=0.0, n_cells=2, phi=0.0, gauge="dirac"):
        self.J = J
        self.delta = delta
        self.mu = mu
        self.nu = nu
        self.n_cells = n_cells
        self.phi = phi
        self.gauge = gauge

    def fit(self, X=None, y=None):
        self.params_ = self._model_params()
        if X is not None:
            check_states(X, self.params_.n_sites)
        probe = band_decompose(np.zeros(self.params_.n_sites), self.params_, self.phi, self.gauge)
        self.k_ = probe.k
        self.right_ = probe.right
        self.energies_ = probe.energies
        self.n_features_in_ = self.params_.n_sites
        return self

    def _decompose(self, row):
        return band_decompose(row, self.params_, self.phi, self.gauge)

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_states(X, self.params_.n_sites)
        out = [self._decompose(row).coefficients for row in X]
        return np.array([np.concatenate([c[:, 0], c[:, 1]]) for c in out])

    def inverse_transform(self, G):
        check_is_fitted(self, "params_")
        G = check_states(G, self.params_.n_sites, name="G")
        N = self.params_.N
        states = []
        for row in G:
            blocks = row[:N, None] * self.right_[:, 0, :] + row[N:, None] * self.right_[:, 1, :]
            states.append(from_bloch(self.params_, blocks))
        return np.array(states)

    def populations(self, X):
        """Dirac populations ``(P_+, P_-)`` per sample, shape ``(n_samples, 2)``."""
        check_is_fitted(self, "params_")
        X = check_states(X, self.params_.n_sites)
        return np.array([self._decompose(row).populations for row in X])

    def reduced_energy(self, X):
        check_is_fitted(self, "params_")
        X = check_states(X, self.params_.n_sites)
        out = []
        for row in X:
            w = np.abs(self._decompose(row).coefficients) ** 2
            out.append((self.energies_ * w).sum() / w.sum())
        return np.real_if_close(np.array(out), tol=1e7)


class FluxEvolver(_RiceMeleMixin, TransformerMixin, BaseEstimator):
    """Evolve ring states under a flux protocol; ``transform`` returns final states.

    Parameters
    ----------
    J, delta, mu, nu, n_cells
        Model parameters.
    protocol : {"constant", "linear", "gaussian"}
    phi0, beta, sigma, tau, direction
        Protocol parameters (unused ones are ignored).
    t_end : float
        Evolution time (units of ``1/J``).
    steps : int or None
        Number of uniform steps; ``None`` picks the smallest grid with at most
        ``max_dphi`` flux change and ``max_dt`` time per step.
    method : {"bloch", "rk4", "expm"}
        Propagation route.
    """

    def __init__(self, J=1.0, delta=0.0, mu=0.0, nu=0.0, n_cells=2, protocol="linear", phi0=0.0,
                 beta=1e-3, sigma=1.0, tau=1.0, direction=1, t_end=1.0, steps=None, max_dphi=1e-3,
                 max_dt=1.0, method="bloch"):
        self.J = J
        self.delta = delta
        self.mu = mu
        self.nu = nu
        self.n_cells = n_cells
        self.protocol = protocol
        self.phi0 = phi0
        self.beta = beta
        self.sigma = sigma
        self.tau = tau
        self.direction = direction
        self.t_end = t_end
        self.steps = steps
        self.max_dphi = max_dphi
        self.max_dt = max_dt
        self.method = method

    def fit(self, X=None, y=None):
        if self.method not in ("bloch", "rk4", "expm"):
            raise ValueError(f"unknown method {self.method!r}")
        self.params_ = self._model_params()
        self.protocol_ = make_protocol(self.protocol, phi0=self.phi0, beta=self.beta, sigma=self.sigma,
                                       tau=self.tau, direction=self.direction)
        if self.steps is None:
            self.grid_ = TimeGrid.for_protocol(self.protocol_, self.t_end, self.max_dphi, self.max_dt)
        else:
            self.grid_ = TimeGrid(self.t_end, self.steps)
        if X is not None:
            check_states(X, self.params_.n_sites)
        self.n_features_in_ = self.params_.n_sites
        return self

    def _evolve(self, row):
        every = self.grid_.steps
        if self.method == "bloch":
            return evolve_state(self.params_, self.protocol_, row, self.grid_, every).final_state
        return propagate_real_space(self.params_, self.protocol_, row, self.grid_, method=self.method,
                                    record_every=every).final_state

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_states(X, self.params_.n_sites)
        return np.array([self._evolve(row) for row in X])

    def amplification(self, X):
        """``||psi(t_end)|| / ||psi(0)||`` per sample."""
        check_is_fitted(self, "params_")
        X = check_states(X, self.params_.n_sites)
        out = self.transform(X)
        return np.linalg.norm(out, axis=1) / np.linalg.norm(X, axis=1)
