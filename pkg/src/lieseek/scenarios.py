"""Preset scenarios, the config format, and scenario (de)serialization.

A scenario is defined entirely by a JSON-compatible config dict: named
objective/coefficient/dither forms keep every preset round-trippable
through a human-readable file.  Multi-agent presets carry one seeking
system per agent under ``systems``; single-agent presets use the label
``main``.  The ``primary`` label marks the system that reports and
checks refer to.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from .analysis import B2Element
from .errors import ConfigurationError, LookupError_
from .gekf import GekfConfig
from .model import (TAU, ChannelSpec, DitherSignal, EscSystemSpec,
                    ObjectiveMap)


# -- coefficient forms -------------------------------------------------------

def _coeff_linear(cfg) -> tuple[Callable, Callable]:
    gain, offset = float(cfg.get("gain", 0.0)), float(cfg.get("offset", 0.0))
    return (lambda m: gain * m + offset), (lambda m: gain)


def _coeff_cosine(cfg) -> tuple[Callable, Callable]:
    amp, scale = float(cfg.get("amp", 1.0)), float(cfg.get("scale", 1.0))
    return (lambda m: amp * math.cos(scale * m)), \
        (lambda m: -amp * scale * math.sin(scale * m))


def _coeff_sine(cfg) -> tuple[Callable, Callable]:
    amp, scale = float(cfg.get("amp", 1.0)), float(cfg.get("scale", 1.0))
    return (lambda m: amp * math.sin(scale * m)), \
        (lambda m: amp * scale * math.cos(scale * m))


_COEFF_FORMS = {"linear": _coeff_linear, "cosine": _coeff_cosine,
                "sine": _coeff_sine}


def build_coefficient(cfg: Mapping) -> tuple[Callable, Callable]:
    """Callable pair (value, derivative) for a named coefficient form."""
    form = cfg.get("form")
    if form not in _COEFF_FORMS:
        raise ConfigurationError(f"unknown coefficient form {form!r}; "
                                 f"have {sorted(_COEFF_FORMS)}")
    return _COEFF_FORMS[form](cfg)


# -- objective forms ----------------------------------------------------------

def build_objective(cfg: Mapping) -> ObjectiveMap:
    form = cfg.get("form")
    if form != "quadratic":
        raise ConfigurationError(f"unknown objective form {form!r}")
    w = np.asarray(cfg["weights"], dtype=float)
    c = np.asarray(cfg["center"], dtype=float)
    offset = float(cfg.get("offset", 0.0))
    kind = cfg.get("kind", "min")
    box = cfg.get("domain_box")

    def fn(x: np.ndarray) -> float:
        d = x - c
        return float(np.dot(w, d * d) + offset)

    def grad(x: np.ndarray) -> np.ndarray:
        return 2.0 * w * (x - c)

    return ObjectiveMap(
        dimension=w.shape[0], fn=fn, gradient=grad,
        x_star=tuple(float(v) for v in c), f_star=offset, kind=kind,
        domain_box=tuple((float(a), float(b)) for a, b in box) if box else None,
        config=dict(cfg))


# -- system / scenario assembly ----------------------------------------------

def build_system(cfg: Mapping) -> EscSystemSpec:
    objective = build_objective(cfg["objective"])
    dithers = {name: DitherSignal.from_config(dc)
               for name, dc in cfg["dithers"].items()}
    channels = []
    for i, ch in enumerate(cfg["channels"]):
        b1, db1 = build_coefficient(ch["b1"])
        b2, db2 = build_coefficient(ch["b2"])
        channels.append(ChannelSpec(
            index=i, b1=b1, b2=b2, db1=db1, db2=db2,
            u1_ref=ch.get("u1", "u1"), u2_ref=ch.get("u2", "u2"),
            b1_config=dict(ch["b1"]), b2_config=dict(ch["b2"])))
    return EscSystemSpec(
        objective=objective, channels=tuple(channels), dithers=dithers,
        omega=float(cfg["omega"]), a0=np.asarray(cfg["a0"], dtype=float),
        lam=np.asarray(cfg["lambda"], dtype=float),
        x0=np.asarray(cfg["x0"], dtype=float), horizon=float(cfg["horizon"]),
        dt=None if cfg.get("dt") is None else float(cfg["dt"]))


@dataclass(frozen=True)
class AnalysisSettings:
    p: float = 1.05
    t_min: float = 1.0
    window: float = 10.0


@dataclass(frozen=True)
class GekfSettings:
    """Serializable filter settings; resolved per system at run time."""

    q1: float = 1e-2
    q2: float = 1e-3
    q3: float = 1e-2
    r: float = 1e-2
    p0: float = 10.0
    a_floor_rel: float = 1e-3
    smoothing: bool = True
    n_meas: int = 1

    def resolve(self, spec: EscSystemSpec) -> GekfConfig:
        return GekfConfig(q1=self.q1, q2=self.q2, q3=self.q3, r=self.r,
                          p0=self.p0,
                          a_floor=self.a_floor_rel * float(np.min(spec.a0)),
                          smoothing=self.smoothing,
                          smooth_window=spec.steps_per_period,
                          n_meas=self.n_meas)


class Scenario:
    """A named, fully resolved experiment built from a config dict."""

    def __init__(self, config: Mapping):
        self._config = copy.deepcopy(dict(config))
        cfg = self._config
        for key in ("name", "systems"):
            if key not in cfg:
                raise ConfigurationError(f"scenario config missing {key!r}")
        self.name: str = cfg["name"]
        self.systems: dict[str, EscSystemSpec] = {
            label: build_system(sys_cfg)
            for label, sys_cfg in cfg["systems"].items()}
        if not self.systems:
            raise ConfigurationError("scenario declares no systems")
        self.primary: str = cfg.get("primary", next(iter(self.systems)))
        if self.primary not in self.systems:
            raise ConfigurationError(f"primary system {self.primary!r} unknown")
        self.gekf = GekfSettings(**cfg.get("gekf", {}))
        self.analysis = AnalysisSettings(**cfg.get("analysis", {}))
        self.metadata: dict = cfg.get("metadata", {})

    @property
    def config(self) -> dict:
        return copy.deepcopy(self._config)

    @property
    def primary_system(self) -> EscSystemSpec:
        return self.systems[self.primary]

    def gekf_config(self, label: Optional[str] = None) -> GekfConfig:
        return self.gekf.resolve(self.systems[label or self.primary])

    def b2_setup(self) -> Optional[
            tuple[ObjectiveMap, tuple[B2Element, ...], Optional[dict]]]:
        """Objective, vector-field elements, and (documented-only)
        companion constants for the condition check."""
        b2 = self._config.get("b2")
        if not b2:
            return None
        objective = self.systems[b2["system"]].objective
        elements = []
        for el in b2["elements"]:
            fn, _ = build_coefficient(el["coeff"])
            elements.append(B2Element(s=int(el["s"]), i=int(el["i"]), fn=fn,
                                      label=el.get("label", "")))
        return objective, tuple(elements), b2.get("b1_constants")

    def x_star(self, label: Optional[str] = None) -> np.ndarray:
        obj = self.systems[label or self.primary].objective
        if obj.x_star is None:
            raise ConfigurationError("system declares no extremum point")
        return np.asarray(obj.x_star, dtype=float)

    def validate(self) -> None:
        for spec in self.systems.values():
            spec.validate()


def save_scenario(scenario: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.config, fh, indent=2)
        fh.write("\n")


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return Scenario(json.load(fh))


# -- presets -------------------------------------------------------------------

def _linear(gain: float, offset: float) -> dict:
    return {"form": "linear", "gain": gain, "offset": offset}


def _case1_config() -> dict:
    return {
        "name": "case1",
        "primary": "main",
        "systems": {"main": {
            "objective": {"form": "quadratic", "weights": [2.0],
                          "center": [1.0], "offset": 0.0, "kind": "min",
                          "domain_box": [[-2.0, 4.0]]},
            "dithers": {"u1": {"kind": "cosine", "phase": 0.0, "period": TAU,
                               "bound": 1.0},
                        "u2": {"kind": "sine", "phase": 0.0, "period": TAU,
                               "bound": 1.0}},
            "channels": [{"b1": _linear(1.0, 0.0), "b2": _linear(0.0, 1.0),
                          "u1": "u1", "u2": "u2"}],
            "omega": 8.0, "a0": [1.0], "lambda": [0.1], "x0": [2.0],
            "horizon": 100.0, "dt": None}},
        "gekf": {"q1": 30.0, "q2": 1e-3, "q3": 1e-2, "r": 3e-4, "p0": 1.0,
                 "a_floor_rel": 1e-3, "smoothing": True, "n_meas": 1},
        "analysis": {"p": 1.05, "t_min": 1.0, "window": 10.0},
        "b2": {"system": "main", "elements": [
            {"s": 1, "i": 1, "coeff": _linear(1.0, 0.0), "label": "b_11"},
            {"s": 2, "i": 1, "coeff": _linear(0.0, 1.0), "label": "b_21"}]},
        "metadata": {"note": "scalar quadratic seeking; objective coefficient "
                             "channel with unit companion input"},
    }


def _case2_config() -> dict:
    k = 2.0
    a0 = math.sqrt(0.5)
    return {
        "name": "case2",
        "primary": "main",
        "systems": {"main": {
            "objective": {"form": "quadratic", "weights": [1.0, 1.0],
                          "center": [0.0, 0.0], "offset": 0.0, "kind": "min",
                          "domain_box": [[-2.0, 2.0], [-2.0, 2.0]]},
            "dithers": {"u1": {"kind": "cosine", "phase": 0.0, "period": TAU,
                               "bound": 1.0},
                        "u2": {"kind": "sine", "phase": 0.0, "period": TAU,
                               "bound": 1.0}},
            "channels": [
                {"b1": {"form": "cosine", "amp": 1.0, "scale": k},
                 "b2": {"form": "sine", "amp": -1.0, "scale": k},
                 "u1": "u1", "u2": "u2"},
                {"b1": {"form": "sine", "amp": 1.0, "scale": k},
                 "b2": {"form": "cosine", "amp": 1.0, "scale": k},
                 "u1": "u1", "u2": "u2"}],
            "omega": 25.0, "a0": [a0, a0], "lambda": [0.1, 0.1],
            "x0": [1.0, 1.0], "horizon": 100.0, "dt": None}},
        "gekf": {"q1": 30.0, "q2": 1e-3, "q3": 1e-2, "r": 3e-4, "p0": 1.0,
                 "a_floor_rel": 1e-3, "smoothing": True, "n_meas": 1},
        "analysis": {"p": 1.05, "t_min": 1.0, "window": 10.0},
        "b2": {"system": "main", "elements": [
            {"s": 1, "i": 1, "coeff": {"form": "cosine", "amp": 1.0, "scale": k},
             "label": "b_11"},
            {"s": 2, "i": 1, "coeff": {"form": "sine", "amp": -1.0, "scale": k},
             "label": "b_21"},
            {"s": 1, "i": 2, "coeff": {"form": "sine", "amp": 1.0, "scale": k},
             "label": "b_12"},
            {"s": 2, "i": 2, "coeff": {"form": "cosine", "amp": 1.0, "scale": k},
             "label": "b_22"}]},
        "metadata": {"note": "planar vehicle with rotating coefficient pair; "
                             "both channels share one dither pair",
                     "x0_non_paper": True},
    }


def _case3_vehicle(center: list, offset: float, omega: float,
                   weights: list) -> dict:
    c3, a3 = 1.0, 0.3
    return {
        "objective": {"form": "quadratic", "weights": weights,
                      "center": center, "offset": offset, "kind": "max",
                      "domain_box": [[-4.0, 4.0], [-4.0, 4.0]]},
        "dithers": {"u1": {"kind": "cosine", "phase": 0.0, "period": TAU,
                           "bound": 1.0},
                    "u2": {"kind": "sine", "phase": 0.0, "period": TAU,
                           "bound": 1.0}},
        "channels": [
            {"b1": _linear(c3, 0.0), "b2": _linear(0.0, a3),
             "u1": "u1", "u2": "u2"},
            {"b1": _linear(0.0, a3), "b2": _linear(-c3, 0.0),
             "u1": "u1", "u2": "u2"}],
        "omega": omega, "a0": [1.0, 1.0], "lambda": [0.02, 0.02],
        "x0": [0.0, 0.0], "horizon": 100.0, "dt": None}


def _case3_config() -> dict:
    base = 25.0
    c3, a3 = 1.0, 0.3
    return {
        "name": "case3",
        "primary": "vehicle3",
        "systems": {
            "vehicle1": _case3_vehicle([1.0, -1.0], 0.0, round(base * 1.0, 6),
                                       [-0.5, -0.5]),
            "vehicle2": _case3_vehicle([0.0, 2.0], 0.0, round(base * 1.1, 6),
                                       [-0.5, -0.5]),
            "vehicle3": _case3_vehicle([-1.0, 1.0], 10.0, round(base * 1.2, 6),
                                       [-0.5, -1.5]),
        },
        "gekf": {"q1": 30.0, "q2": 1e-3, "q3": 1e-2, "r": 3e-4, "p0": 1.0,
                 "a_floor_rel": 1e-3, "smoothing": True, "n_meas": 1},
        "analysis": {"p": 1.05, "t_min": 1.0, "window": 10.0},
        # Elements follow the literature system (washout disabled, raw
        # objective inside the coefficient), expressed in the shifted
        # objective: b(ftilde) with ftilde = f - f*.
        "b2": {"system": "vehicle3", "elements": [
            {"s": 1, "i": 1, "coeff": _linear(c3, 10.0 * c3), "label": "b_11"},
            {"s": 2, "i": 1, "coeff": _linear(0.0, a3), "label": "b_21"},
            {"s": 1, "i": 2, "coeff": _linear(0.0, a3), "label": "b_12"},
            {"s": 2, "i": 2, "coeff": _linear(-c3, -10.0 * c3),
             "label": "b_22"}]},
        "metadata": {"note": "three independent single-integrator agents; "
                             "agent 3 carries the documented objective map",
                     "non_paper_defaults": ["c3", "a3", "lambda", "omega",
                                            "x0", "vehicle1_map",
                                            "vehicle2_map",
                                            "frequency_multipliers"],
                     "maximization": True},
    }


_PRESETS: dict[str, Callable[[], dict]] = {
    "case1": _case1_config,
    "case2": _case2_config,
    "case3": _case3_config,
}


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESETS))


def preset(name: str) -> Scenario:
    """Fully resolved scenario for a preset name."""
    if name not in _PRESETS:
        raise LookupError_(f"unknown scenario {name!r}; available: "
                           f"{', '.join(preset_names())}",
                           available=preset_names())
    return Scenario(_PRESETS[name]())
