"""Continuous-discrete extended Kalman filter that reconstructs the
averaged right-hand side of a seeking system from objective measurements.

State layout (2n+1 entries for an n-channel system):

* ``x1`` -- the averaged right-hand side per channel (the quantity the
  adaptation law consumes),
* ``x2`` -- its assumed-constant derivative,
* ``x3`` -- the held objective value from the previous measurement.

Between measurements the mean follows the constant-velocity model
``x1 += x2*dt`` with ``x2`` and ``x3`` frozen; covariance follows the
matching exact discrete transition.  The measurement model is the
first-order iterated-integral increment of the objective: knowing the
channel coefficients and the input integrals over the window, a new
objective sample is linear in ``x1`` once the gradient factor is
rewritten through ``x1 = -nu * a^2 * grad_i * b0_i``.  That inversion
makes the update exactly linear, so no measurement Jacobian
approximation is involved.

A filter instance is a single-owner mutable state machine; run separate
instances for separate systems.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, FilterDivergenceError
from .model import ChannelSpec, b0_of

B0_SINGULAR_TOL = 1e-12
PAUSED_J_DECAY = 0.999


@dataclass(frozen=True)
class GekfState:
    """Filter mean and covariance at time ``t``."""

    x1: np.ndarray
    x2: np.ndarray
    x3: float
    P: np.ndarray
    t: float

    @property
    def n(self) -> int:
        return self.x1.shape[0]

    def mean(self) -> np.ndarray:
        return np.concatenate([self.x1, self.x2, [self.x3]])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.mean())) and np.all(np.isfinite(self.P)))


@dataclass(frozen=True)
class GekfConfig:
    """Noise levels and update policy for one filter instance.

    ``q1``/``q2``/``q3`` are per-block process-noise densities, ``r`` the
    measurement variance, ``p0`` the initial covariance scale.  Channels
    whose amplitude magnitude falls below ``a_floor`` stop receiving
    measurement corrections (the measurement coefficient scales like
    1/a^2 and turns ill-conditioned); their exported estimate decays
    geometrically instead.  ``smooth_window`` is the moving-average
    length in samples, normally one dither period.
    """

    q1: float = 1e-2
    q2: float = 1e-3
    q3: float = 1e-2
    r: float = 1e-2
    p0: float = 10.0
    a_floor: float = 1e-3
    smoothing: bool = True
    smooth_window: int = 64
    n_meas: int = 1

    def __post_init__(self):
        for name in ("q1", "q2", "q3", "r", "p0", "a_floor"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.smooth_window < 1 or self.n_meas < 1:
            raise ConfigurationError("smooth_window and n_meas must be >= 1")


@dataclass(frozen=True)
class JSignal:
    """Exported estimate of the averaged right-hand side per channel."""

    j: np.ndarray
    t: float


def initial_state(cfg: GekfConfig, n: int, f0: float, t0: float = 0.0) -> GekfState:
    """Unbiased start: zero RHS estimate, first measurement as held value."""
    dim = 2 * n + 1
    return GekfState(x1=np.zeros(n), x2=np.zeros(n), x3=float(f0),
                     P=cfg.p0 * np.eye(dim), t=t0)


def _process_cov(cfg: GekfConfig, n: int) -> np.ndarray:
    return np.diag(np.concatenate([np.full(n, cfg.q1), np.full(n, cfg.q2),
                                   [cfg.q3]]))


def propagate(s: GekfState, cfg: GekfConfig, dt: float) -> GekfState:
    """Advance mean and covariance by the constant-velocity model."""
    if dt <= 0:
        raise ConfigurationError("propagation step must be positive")
    n = s.n
    x1 = s.x1 + dt * s.x2
    dim = 2 * n + 1
    phi = np.eye(dim)
    phi[:n, n:2 * n] = dt * np.eye(n)
    P = phi @ s.P @ phi.T + _process_cov(cfg, n) * dt
    P = 0.5 * (P + P.T)
    out = GekfState(x1=x1, x2=s.x2.copy(), x3=s.x3, P=P, t=s.t + dt)
    if not out.is_finite():
        raise FilterDivergenceError("filter state non-finite after propagation",
                                    t=out.t)
    return out


def eligible_channels(channels: Sequence[ChannelSpec], f1: float,
                      a: np.ndarray, cfg: GekfConfig) -> np.ndarray:
    """Channels whose measurement coefficient is well conditioned.

    A channel is skipped when its amplitude magnitude sits below the
    floor or its bracket factor at the anchor value is singular.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    ok = np.abs(a) >= cfg.a_floor
    for i, ch in enumerate(channels):
        if ok[i] and abs(b0_of(ch, f1)) < B0_SINGULAR_TOL:
            ok[i] = False
    return ok


def measurement_coefficients(channels: Sequence[ChannelSpec], f1: float,
                             u1_int: np.ndarray, u2_int: np.ndarray,
                             a: np.ndarray, nu_hat: np.ndarray,
                             cfg: GekfConfig) -> np.ndarray:
    """Per-channel weight of ``x1`` in the predicted objective sample.

    ``c_i = -(b1_i(f1) U1_i + b2_i(f1) U2_i) / (nu_i * a_i^2 * b0_i(f1))``
    with ineligible channels weighted zero.  Coefficients are anchored at
    the measured value ``f1`` from the start of the window.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    c = np.zeros(len(channels))
    ok = eligible_channels(channels, f1, a, cfg)
    for i, ch in enumerate(channels):
        if not ok[i]:
            continue
        num = ch.b1(f1) * u1_int[i] + ch.b2(f1) * u2_int[i]
        c[i] = -num / (nu_hat[i] * a[i] ** 2 * b0_of(ch, f1))
    return c


def measurement_update(s: GekfState, cfg: GekfConfig, f_meas_t2: float,
                       f_meas_t1: float, u1_int, u2_int, a,
                       channels: Sequence[ChannelSpec],
                       nu_hat) -> GekfState:
    """Scalar Kalman update against a new objective sample.

    Predicted sample: ``x3 + sum_i c_i x1_i``.  Joseph-form covariance
    update, re-symmetrized; afterwards the held value ``x3`` is pinned to
    the new measurement so the next window anchors at measured data.
    """
    n = s.n
    u1_int = np.atleast_1d(np.asarray(u1_int, dtype=float))
    u2_int = np.atleast_1d(np.asarray(u2_int, dtype=float))
    nu_hat = np.atleast_1d(np.asarray(nu_hat, dtype=float))
    c = measurement_coefficients(channels, f_meas_t1, u1_int, u2_int, a,
                                 nu_hat, cfg)
    dim = 2 * n + 1
    h = np.zeros(dim)
    h[:n] = c
    h[-1] = 1.0

    mean = s.mean()
    innovation = f_meas_t2 - float(h @ mean)
    sv = float(h @ s.P @ h) + cfg.r
    gain = (s.P @ h) / sv
    mean = mean + gain * innovation
    ikh = np.eye(dim) - np.outer(gain, h)
    P = ikh @ s.P @ ikh.T + cfg.r * np.outer(gain, gain)
    # Pinning x3 to the fresh measurement makes its error the measurement
    # error: reset its covariance row accordingly, or the stale cross
    # terms feed the pinned state back into x1 through later gains.
    P[-1, :] = 0.0
    P[:, -1] = 0.0
    P[-1, -1] = cfg.r
    P = 0.5 * (P + P.T)

    out = GekfState(x1=mean[:n], x2=mean[n:2 * n], x3=float(f_meas_t2), P=P,
                    t=s.t)
    if not out.is_finite():
        raise FilterDivergenceError("filter state non-finite after update", t=s.t)
    return out


def extract_J(s: GekfState, cfg: GekfConfig,
              history: Optional[Sequence[np.ndarray]] = None) -> JSignal:
    """Exported averaged-RHS estimate.

    With smoothing on, the estimate is the moving average of ``x1`` over
    the most recent window (nominally one dither period); otherwise raw
    ``x1``.
    """
    if cfg.smoothing and history is not None and len(history) > 0:
        window = np.asarray(list(history)[-cfg.smooth_window:], dtype=float)
        j = window.mean(axis=0)
    else:
        j = s.x1.copy()
    return JSignal(j=j, t=s.t)


class GekfFilter:
    """Stateful convenience wrapper used by the simulation loop.

    Owns the filter state, the smoothing history, and the per-channel
    pause bookkeeping: once a channel's amplitude falls under the floor
    its exported estimate decays geometrically per step instead of
    following ``x1``.
    """

    def __init__(self, cfg: GekfConfig, n: int, f0: float, nu_hat,
                 t0: float = 0.0):
        self.cfg = cfg
        self.nu_hat = np.atleast_1d(np.asarray(nu_hat, dtype=float))
        self.state = initial_state(cfg, n, f0, t0)
        self.history: deque[np.ndarray] = deque(maxlen=cfg.smooth_window)
        self.history.append(self.state.x1.copy())
        self.paused = np.zeros(n, dtype=bool)
        self._j = np.zeros(n)
        self.last_innovation = 0.0

    def propagate(self, dt: float) -> None:
        self.state = propagate(self.state, self.cfg, dt)

    def update(self, f2: float, f1: float, u1_int, u2_int, a,
               channels: Sequence[ChannelSpec]) -> None:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        prev = self.state
        h = np.zeros(2 * prev.n + 1)
        h[:prev.n] = measurement_coefficients(channels, f1, np.atleast_1d(u1_int),
                                              np.atleast_1d(u2_int), a,
                                              self.nu_hat, self.cfg)
        h[-1] = 1.0
        self.last_innovation = f2 - float(h @ prev.mean())
        self.state = measurement_update(prev, self.cfg, f2, f1, u1_int, u2_int,
                                        a, channels, self.nu_hat)
        self.paused = np.abs(a) < self.cfg.a_floor

    def step_export(self) -> np.ndarray:
        """Per-step estimate export with pause decay applied."""
        self.history.append(self.state.x1.copy())
        smoothed = extract_J(self.state, self.cfg, self.history).j
        active = ~self.paused
        self._j[active] = smoothed[active]
        self._j[self.paused] *= PAUSED_J_DECAY
        return self._j.copy()

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.state.P).min())
