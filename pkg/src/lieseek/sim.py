"""Deterministic fixed-step simulation of seeking systems.

Three runners share one integration core:

* :func:`run_baseline` -- constant-amplitude seeking (the classical
  persistent-oscillation behaviour),
* :func:`run_proposed` -- amplitude adaptation driven by the estimation
  filter's averaged-RHS signal,
* :func:`run_lbs` -- the averaged (bracket) system itself, exactly or
  with a synthetic decaying estimation error.

Runs are single-threaded and bit-deterministic for a given spec and
seed; optional measurement noise draws from a per-run seeded generator.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, InputError, IntegrationError
from .gekf import GekfConfig, GekfFilter
from .lie import lbs_rhs_exact
from .model import TAU, DitherSignal, EscSystemSpec, EstimationErrorModel

CSV_NAN = ""


def _scalar_dither(d: DitherSignal) -> Callable[[float], float]:
    """Scalar-argument fast path for the integrator's dither evaluations."""
    if d.kind == "cosine":
        freq, ph = TAU / d.period, d.phase
        return lambda th: math.cos(freq * th + ph)
    if d.kind == "sine":
        freq, ph = TAU / d.period, d.phase
        return lambda th: math.sin(freq * th + ph)
    return lambda th: float(d.value(th))


@dataclass
class SimState:
    """Mutable per-step state of a seeking run."""

    t: float
    x: np.ndarray
    a: np.ndarray
    u1_acc: np.ndarray
    u2_acc: np.ndarray


def rk4_step(rhs: Callable[[float, np.ndarray], np.ndarray], t: float,
             x: np.ndarray, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    if dt <= 0:
        raise IntegrationError("step size must be positive", t=t)
    x = np.asarray(x, dtype=float)
    half = 0.5 * dt
    k1 = np.asarray(rhs(t, x), dtype=float)
    k2 = np.asarray(rhs(t + half, x + half * k1), dtype=float)
    k3 = np.asarray(rhs(t + half, x + half * k2), dtype=float)
    k4 = np.asarray(rhs(t + dt, x + dt * k3), dtype=float)
    for stage, k in enumerate((k1, k2, k3, k4), start=1):
        # a non-finite entry poisons the sum, so one scalar check suffices
        if not math.isfinite(float(k.sum())):
            raise IntegrationError(f"non-finite RK4 stage {stage} at t={t}", t=t)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class TrajectoryLog:
    """Uniform-stride record of a run with optional filter diagnostics.

    Columns with no defined value (e.g. oracle columns without an
    oracle) hold NaN in memory and serialize to empty CSV cells.
    """

    COLUMNS = ("t", "x", "f", "a", "Jest", "Jexact", "zref")

    def __init__(self, t: np.ndarray, x: np.ndarray, f: np.ndarray,
                 a: np.ndarray, j_est: np.ndarray, j_exact: np.ndarray,
                 z_ref: np.ndarray, diag: Optional[dict] = None,
                 meta: Optional[dict] = None):
        self.t = t
        self.x = x
        self.f = f
        self.a = a
        self.j_est = j_est
        self.j_exact = j_exact
        self.z_ref = z_ref
        self.diag = diag
        self.meta = meta or {}
        if not np.all(np.diff(t) > 0):
            raise InputError("log times must be strictly increasing")

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def stride(self) -> float:
        return float(self.t[1] - self.t[0])

    def header(self) -> str:
        n = self.n
        cols = (["t"] + [f"x_{i}" for i in range(1, n + 1)] + ["f"]
                + [f"a_{i}" for i in range(1, n + 1)]
                + [f"Jest_{i}" for i in range(1, n + 1)]
                + [f"Jexact_{i}" for i in range(1, n + 1)]
                + [f"zref_{i}" for i in range(1, n + 1)])
        return ",".join(cols)

    def to_csv(self, path: str) -> None:
        """Write the stable-schema trajectory CSV atomically."""
        def fmt(v) -> str:
            v = float(v)
            return CSV_NAN if math.isnan(v) else repr(v)

        rows = [self.header()]
        for k in range(self.t.shape[0]):
            cells = [repr(float(self.t[k]))]
            cells += [fmt(v) for v in self.x[k]]
            cells.append(fmt(self.f[k]))
            cells += [fmt(v) for v in self.a[k]]
            cells += [fmt(v) for v in self.j_est[k]]
            cells += [fmt(v) for v in self.j_exact[k]]
            cells += [fmt(v) for v in self.z_ref[k]]
            rows.append(",".join(cells))
        _atomic_write(path, "\n".join(rows) + "\n")

    def diagnostics_to_csv(self, path: str) -> None:
        if not self.diag:
            raise InputError("log carries no filter diagnostics")
        names = list(self.diag)
        cols = ["t"]
        for name in names:
            arr = self.diag[name]
            if arr.ndim == 1:
                cols.append(name)
            else:
                cols += [f"{name}_{i}" for i in range(1, arr.shape[1] + 1)]
        rows = [",".join(cols)]
        for k in range(self.t.shape[0]):
            cells = [repr(float(self.t[k]))]
            for name in names:
                arr = self.diag[name]
                vals = [arr[k]] if arr.ndim == 1 else list(arr[k])
                cells += [repr(float(v)) for v in vals]
            rows.append(",".join(cells))
        _atomic_write(path, "\n".join(rows) + "\n")

    @staticmethod
    def from_csv(path: str) -> "TrajectoryLog":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln]
        if not lines:
            raise InputError(f"empty CSV: {path}")
        header = lines[0].split(",")
        n = sum(1 for c in header if c.startswith("x_"))
        expect = 2 + 5 * n
        if n == 0 or len(header) != expect or header[0] != "t":
            raise InputError(f"unrecognized trajectory CSV header in {path}")

        def parse(cell: str) -> float:
            return float("nan") if cell == CSV_NAN else float(cell)

        data = np.array([[parse(c) for c in ln.split(",")] for ln in lines[1:]])
        if data.shape[0] < 2:
            raise InputError(f"trajectory CSV needs at least two rows: {path}")
        t = data[:, 0]
        x = data[:, 1:1 + n]
        f = data[:, 1 + n]
        a = data[:, 2 + n:2 + 2 * n]
        j_est = data[:, 2 + 2 * n:2 + 3 * n]
        j_exact = data[:, 2 + 3 * n:2 + 4 * n]
        z_ref = data[:, 2 + 4 * n:2 + 5 * n]
        return TrajectoryLog(t, x, f, a, j_est, j_exact, z_ref)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _guard(spec: EscSystemSpec, x: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"state non-finite at t={t}", t_exit=t)
    box = spec.objective.domain_box
    if box is not None:
        limit = 10.0 * spec.objective.box_diagonal()
        if np.linalg.norm(x - spec.objective.box_center()) > limit:
            raise DivergenceError(
                f"state left 10x domain-box region at t={t}", t_exit=t)


def _exact_rhs(spec: EscSystemSpec, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    return lbs_rhs_exact(spec, z, amplitude=a).j


def _run_esc(spec: EscSystemSpec, adapt: bool, gcfg: Optional[GekfConfig],
             seed: int, noise_std: float,
             j_override) -> TrajectoryLog:
    dt = spec.resolved_dt
    steps = int(round(spec.horizon / dt))
    n = spec.n
    obj = spec.objective
    omega = spec.omega
    sqrt_w = math.sqrt(omega)
    channels = spec.channels
    u1s = [_scalar_dither(spec.dither(ch.u1_ref)) for ch in channels]
    u2s = [_scalar_dither(spec.dither(ch.u2_ref)) for ch in channels]
    lam = spec.lam
    has_oracle = obj.has_oracle
    rng = np.random.default_rng(seed)

    def u_hats(t: float) -> tuple[np.ndarray, np.ndarray]:
        th = omega * t
        return (np.array([fn(th) for fn in u1s]),
                np.array([fn(th) for fn in u2s]))

    def make_xdot(a_held: np.ndarray):
        def xdot(t: float, x: np.ndarray) -> np.ndarray:
            fv = obj.measured(x)
            uh1, uh2 = u_hats(t)
            b1 = np.array([ch.b1(fv) for ch in channels])
            b2 = np.array([ch.b2(fv) for ch in channels])
            return a_held * sqrt_w * (b1 * uh1 + b2 * uh2)
        return xdot

    use_filter = adapt and j_override is None
    filt: Optional[GekfFilter] = None
    if use_filter:
        if gcfg is None:
            raise InputError("proposed run needs a filter configuration")
        f0 = obj.measured(spec.x0)
        if noise_std > 0:
            f0 += rng.normal(0.0, noise_std)
        filt = GekfFilter(gcfg, n, f0, spec.nu_hats)
        f_prev_meas = f0

    def override_at(t: float) -> np.ndarray:
        if callable(j_override):
            return np.atleast_1d(np.asarray(j_override(t), dtype=float))
        return np.broadcast_to(np.asarray(j_override, dtype=float), (n,)).copy()

    state = SimState(t=0.0, x=spec.x0.copy(), a=spec.a0.copy(),
                     u1_acc=np.zeros(n), u2_acc=np.zeros(n))
    j_sig = override_at(0.0) if (adapt and j_override is not None) else np.zeros(n)

    total = steps + 1
    t_log = np.empty(total)
    x_log = np.empty((total, n))
    f_log = np.empty(total)
    a_log = np.empty((total, n))
    jest_log = np.full((total, n), np.nan)
    jex_log = np.full((total, n), np.nan)
    zref_log = np.full((total, n), np.nan)
    diag = None
    if use_filter:
        diag = {"x1": np.empty((total, n)), "x2": np.empty((total, n)),
                "x3": np.empty(total), "innovation": np.empty(total),
                "trace_p": np.empty(total), "min_eig_p": np.empty(total)}

    z_ref = spec.x0.copy() if has_oracle else None

    def log_row(k: int) -> None:
        t_log[k] = state.t
        x_log[k] = state.x
        f_log[k] = obj.value(state.x)
        a_log[k] = state.a
        if adapt:
            jest_log[k] = j_sig
        if has_oracle:
            jex_log[k] = _exact_rhs(spec, state.x, state.a)
            zref_log[k] = z_ref
        if use_filter:
            diag["x1"][k] = filt.state.x1
            diag["x2"][k] = filt.state.x2
            diag["x3"][k] = filt.state.x3
            diag["innovation"][k] = filt.last_innovation
            diag["trace_p"][k] = np.trace(filt.state.P)
            diag["min_eig_p"][k] = filt.min_eigenvalue()

    log_row(0)

    for step in range(steps):
        t0 = state.t
        a_held = state.a.copy()
        j_held = j_sig

        x_new = rk4_step(make_xdot(a_held), t0, state.x, dt)
        if adapt:
            a_new = rk4_step(lambda t, a: -lam * (a - j_held), t0, state.a, dt)
        else:
            a_new = state.a

        uh1_0, uh2_0 = u_hats(t0)
        uh1_h, uh2_h = u_hats(t0 + 0.5 * dt)
        uh1_1, uh2_1 = u_hats(t0 + dt)
        scale = a_held * sqrt_w * (dt / 4.0)
        state.u1_acc += scale * (uh1_0 + 2.0 * uh1_h + uh1_1)
        state.u2_acc += scale * (uh2_0 + 2.0 * uh2_h + uh2_1)

        _guard(spec, x_new, t0 + dt)
        if has_oracle:
            z_ref = rk4_step(lambda t, z: _exact_rhs(spec, z, spec.a0),
                             t0, z_ref, dt)

        state.x = x_new
        state.a = a_new
        state.t = t0 + dt

        if use_filter:
            filt.propagate(dt)
            if (step + 1) % gcfg.n_meas == 0:
                f2 = obj.measured(state.x)
                if noise_std > 0:
                    f2 += rng.normal(0.0, noise_std)
                filt.update(f2, f_prev_meas, state.u1_acc, state.u2_acc,
                            state.a, channels)
                f_prev_meas = f2
                state.u1_acc = np.zeros(n)
                state.u2_acc = np.zeros(n)
            j_sig = filt.step_export()
        elif adapt and j_override is not None:
            j_sig = override_at(state.t)

        log_row(step + 1)

    meta = {"omega": omega, "dt": dt, "mode": "proposed" if adapt else "baseline",
            "seed": seed}
    return TrajectoryLog(t_log, x_log, f_log, a_log, jest_log, jex_log,
                         zref_log, diag=diag, meta=meta)


def run_baseline(spec: EscSystemSpec) -> TrajectoryLog:
    """Constant-amplitude seeking run (persistently oscillating)."""
    return _run_esc(spec, adapt=False, gcfg=None, seed=0, noise_std=0.0,
                    j_override=None)


def run_proposed(spec: EscSystemSpec, gcfg: GekfConfig, seed: int = 0,
                 noise_std: float = 0.0, j_override=None) -> TrajectoryLog:
    """Adaptive-amplitude seeking run driven by the estimation filter.

    ``j_override`` replaces the filter with a fixed signal (scalar,
    vector, or callable of time); used to exercise the adaptation law in
    isolation.
    """
    return _run_esc(spec, adapt=True, gcfg=gcfg, seed=seed,
                    noise_std=noise_std, j_override=j_override)


def run_lbs(spec: EscSystemSpec,
            err: Optional[EstimationErrorModel] = None) -> TrajectoryLog:
    """Integrate the averaged system at the initial amplitudes.

    With ``err`` given the right-hand side gains the synthetic decaying
    error and the unperturbed averaged trajectory is co-logged as the
    reference.
    """
    if not spec.objective.has_oracle:
        raise InputError("averaged-system run needs an oracle gradient")
    dt = spec.resolved_dt
    steps = int(round(spec.horizon / dt))
    n = spec.n
    a0 = spec.a0

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        out = _exact_rhs(spec, z, a0)
        if err is not None:
            out = out + err.value(t)
        return out

    total = steps + 1
    t_log = np.empty(total)
    x_log = np.empty((total, n))
    f_log = np.empty(total)
    a_log = np.tile(a0, (total, 1))
    jest_log = np.full((total, n), np.nan)
    jex_log = np.empty((total, n))
    zref_log = np.empty((total, n))

    z = spec.x0.copy()
    z_exact = spec.x0.copy()
    t = 0.0
    for k in range(total):
        t_log[k] = t
        x_log[k] = z
        f_log[k] = spec.objective.value(z)
        jex_log[k] = _exact_rhs(spec, z, a0)
        if err is not None:
            jest_log[k] = rhs(t, z)
            zref_log[k] = z_exact
        else:
            zref_log[k] = z
        if k == steps:
            break
        z = rk4_step(rhs, t, z, dt)
        if err is not None:
            z_exact = rk4_step(lambda tt, zz: _exact_rhs(spec, zz, a0),
                               t, z_exact, dt)
        _guard(spec, z, t + dt)
        t = (k + 1) * dt

    meta = {"omega": spec.omega, "dt": dt, "mode": "lbs", "seed": 0}
    return TrajectoryLog(t_log, x_log, f_log, a_log, jest_log, jex_log,
                         zref_log, meta=meta)
