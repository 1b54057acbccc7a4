"""Scenario documents: parsing, validation, defaults and presets.

A scenario is a JSON object with a versioned ``schema`` field::

    {"schema": "capbarrier.scenario/1",
     "name": "overlap",
     "origin": -1.0,
     "layers": [{"medium": "coarse", "length": 1.0, "cells": 64}, ...],
     "media": {...},                      # optional, else the shipped library
     "initial": {"kind": "linear", "params": {"ends": [[0.3, 0.7], [0.2, 0.6]]}},
     "time": {"dt": 5e-4, "T": 0.5, "outputs": [0.1, 0.5]},
     "regularization": {"n": [10, 40, 160], "k": 8, "K": null, "panels": 1024},
     "study": {"kind": "sola", "levels": 3},
     "solver": {"tol": 1e-12},
     "mode": "simulate",
     "seed": 0,
     "output": "out"}

Errors are ``ConfigError`` carrying the dotted path of the bad field.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .domain import DomainLayout, InitialData, build_mesh
from .errors import ConfigError, ConstructionError
from .media import (CapillaryPressureCurve, MobilityCurve, curve_from_dict, medium_from_dict,
                    medium_to_dict)
from .regularization import slope_budget

__all__ = [
    "SCENARIO_SCHEMA",
    "MEDIA_SCHEMA",
    "ScenarioConfig",
    "LayerSpec",
    "parse_scenario",
    "load_scenario",
    "load_media_library",
    "parse_media_document",
    "preset_names",
    "load_preset",
]

SCENARIO_SCHEMA = "capbarrier.scenario/1"
MEDIA_SCHEMA = "capbarrier.media/1"
MODES = ("simulate", "verify", "study")
INITIAL_KINDS = ("constant", "cosine", "layers", "linear", "table")
DEFAULT_PANELS = 1024
DEFAULT_N = [10, 40, 160]
DEFAULT_K_BLEND = 8


def _preset_dir():
    return resources.files("capbarrier") / "presets"


def preset_names():
    return sorted(p.name[:-5] for p in _preset_dir().iterdir()
                  if p.name.endswith(".json") and p.name != "media.json")


def _read_json(text, path):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"invalid JSON: {exc}") from None


def parse_media_document(doc, path="media"):
    """Media dictionary ``name -> Medium`` from a media-preset document."""
    if not isinstance(doc, dict):
        raise ConfigError(path, "must be an object")
    if "schema" in doc:
        if doc["schema"] != MEDIA_SCHEMA:
            raise ConfigError(f"{path}.schema", f"expected {MEDIA_SCHEMA!r}, got {doc['schema']!r}")
        doc = doc.get("media")
        path = f"{path}.media"
        if not isinstance(doc, dict):
            raise ConfigError(path, "must be an object")
    return {name: _parse_medium(d, name, f"{path}.{name}") for name, d in doc.items()}


def _parse_medium(doc, name, path):
    if not isinstance(doc, dict):
        raise ConfigError(path, "must be an object")
    for key in ("porosity", "mobility", "capillary"):
        if key not in doc:
            raise ConfigError(f"{path}.{key}", "missing")
    phi = doc["porosity"]
    if isinstance(phi, bool) or not isinstance(phi, (int, float)) or not 0.0 < phi <= 1.0:
        raise ConfigError(f"{path}.porosity", f"must be a number in (0, 1], got {phi!r}")
    for key in ("mobility", "capillary"):
        sub = doc[key]
        if not isinstance(sub, dict) or not isinstance(sub.get("params", {}), dict):
            raise ConfigError(f"{path}.{key}", "must be an object with 'kind' and 'params'")
    try:
        return medium_from_dict(doc, name)
    except ConstructionError as exc:
        where = path
        for key, cls in (("mobility", MobilityCurve), ("capillary", CapillaryPressureCurve)):
            if _curve_fails(doc[key], cls):
                where = f"{path}.{key}"
                break
        field_name = getattr(exc, "field", None)
        index = getattr(exc, "index", None)
        if field_name is not None:
            where = f"{where}.params.{field_name}" + (f"[{index}]" if index is not None else "")
        raise ConfigError(where, str(exc)) from None


def _curve_fails(doc, cls):
    try:
        curve_from_dict(doc, cls)
    except ConstructionError:
        return True
    return False


def load_media_library():
    """The shipped media presets."""
    text = (_preset_dir() / "media.json").read_text()
    return parse_media_document(_read_json(text, "media.json"), "media")


@dataclass(frozen=True)
class LayerSpec:
    medium: str
    length: float
    cells: int


@dataclass(eq=False)
class ScenarioConfig:
    name: str
    layers: list
    media: dict
    initial: dict
    dt: float
    T: float
    outputs: list
    n_list: list
    k: int
    K: float
    panels: int
    origin: float = 0.0
    mode: str = "simulate"
    seed: int = 0
    output: str | None = None
    study: dict = field(default_factory=dict)
    tol: float = 1e-12
    inline_media: bool = False

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.to_document() == other.to_document()

    # -- derived objects ---------------------------------------------------------------
    def layer_media(self):
        return [self.media[spec.medium] for spec in self.layers]

    def layout(self):
        return DomainLayout.of(self.layer_media(), [s.length for s in self.layers], self.origin)

    def cells(self):
        return [s.cells for s in self.layers]

    def mesh(self):
        return build_mesh(self.layout(), self.cells())

    def initial_data(self, layout=None):
        layout = self.layout() if layout is None else layout
        kind, p = self.initial["kind"], self.initial.get("params", {})
        if kind == "constant":
            return InitialData.constant(p["value"])
        if kind == "cosine":
            return InitialData.cosine(layout, p.get("mean", 0.5), p.get("amplitude", 0.25))
        if kind == "layers":
            return InitialData.layers(layout, p["values"])
        if kind == "linear":
            return InitialData.linear(layout, p["ends"])
        return InitialData.table(p["x"], p["u"])

    def to_document(self):
        used = sorted({s.medium for s in self.layers})
        doc = {
            "schema": SCENARIO_SCHEMA,
            "name": self.name,
            "mode": self.mode,
            "origin": self.origin,
            "layers": [{"medium": s.medium, "length": s.length, "cells": s.cells}
                       for s in self.layers],
            "media": {name: medium_to_dict(self.media[name]) for name in used},
            "initial": copy.deepcopy(self.initial),
            "time": {"dt": self.dt, "T": self.T, "outputs": list(self.outputs)},
            "regularization": {"n": list(self.n_list), "k": self.k, "K": self.K,
                               "panels": self.panels},
            "study": copy.deepcopy(self.study),
            "solver": {"tol": self.tol},
            "seed": self.seed,
        }
        if self.output is not None:
            doc["output"] = self.output
        return doc


# -- parsing ------------------------------------------------------------------------------
def _number(doc, key, path, positive=False, default=None):
    if key not in doc:
        if default is not None:
            return default
        raise ConfigError(f"{path}.{key}" if path else key, "missing")
    v = doc[key]
    where = f"{path}.{key}" if path else key
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where, f"must be a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(where, f"must be positive, got {v!r}")
    return float(v)


def _integer(v, where, minimum):
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(where, f"must be an integer >= {minimum}, got {v!r}")
    return v


def _parse_layers(doc, media):
    layers = doc.get("layers")
    if not isinstance(layers, list) or not layers:
        raise ConfigError("layers", "must be a nonempty list")
    out = []
    for i, entry in enumerate(layers):
        path = f"layers[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(path, "must be an object")
        name = entry.get("medium")
        if name not in media:
            raise ConfigError(f"{path}.medium", f"unknown medium {name!r}")
        length = _number(entry, "length", path, positive=True)
        cells = _integer(entry.get("cells"), f"{path}.cells", 1)
        out.append(LayerSpec(name, length, cells))
    return out


def _parse_initial(doc, nlayers):
    init = doc.get("initial")
    if not isinstance(init, dict):
        raise ConfigError("initial", "must be an object with 'kind' and 'params'")
    kind = init.get("kind")
    if kind not in INITIAL_KINDS:
        raise ConfigError("initial.kind", f"must be one of {', '.join(INITIAL_KINDS)}")
    p = init.get("params", {})
    if not isinstance(p, dict):
        raise ConfigError("initial.params", "must be an object")

    def unit(v, where):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
            raise ConfigError(where, f"must be a saturation in [0, 1], got {v!r}")
        return float(v)

    if kind == "constant":
        params = {"value": unit(p.get("value"), "initial.params.value")}
    elif kind == "cosine":
        mean = _number(p, "mean", "initial.params", default=0.5)
        amp = _number(p, "amplitude", "initial.params", default=0.25)
        if mean - abs(amp) < 0.0 or mean + abs(amp) > 1.0:
            raise ConfigError("initial.params", "mean +- amplitude must stay in [0, 1]")
        params = {"mean": mean, "amplitude": amp}
    elif kind == "layers":
        vals = p.get("values")
        if not isinstance(vals, list) or len(vals) != nlayers:
            raise ConfigError("initial.params.values", f"must list {nlayers} values")
        params = {"values": [unit(v, f"initial.params.values[{i}]") for i, v in enumerate(vals)]}
    elif kind == "linear":
        ends = p.get("ends")
        if not isinstance(ends, list) or len(ends) != nlayers:
            raise ConfigError("initial.params.ends", f"must list {nlayers} pairs")
        params = {"ends": []}
        for i, pair in enumerate(ends):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(f"initial.params.ends[{i}]", "must be a pair")
            params["ends"].append([unit(v, f"initial.params.ends[{i}][{j}]")
                                   for j, v in enumerate(pair)])
    else:
        x, u = p.get("x"), p.get("u")
        if not isinstance(x, list) or not isinstance(u, list) or len(x) != len(u) or len(x) < 2:
            raise ConfigError("initial.params", "table needs equal-length lists 'x' and 'u'")
        for i in range(1, len(x)):
            if not x[i] > x[i - 1]:
                raise ConfigError(f"initial.params.x[{i}]", "must be strictly increasing")
        params = {"x": [float(v) for v in x],
                  "u": [unit(v, f"initial.params.u[{i}]") for i, v in enumerate(u)]}
    return {"kind": kind, "params": params}


def parse_scenario(doc, base_dir=None):
    """Validate a scenario document and fill in defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "scenario must be a JSON object")
    if doc.get("schema") != SCENARIO_SCHEMA:
        raise ConfigError("schema", f"expected {SCENARIO_SCHEMA!r}, got {doc.get('schema')!r}")
    inline = "media" in doc
    media = load_media_library()
    if "media_file" in doc:
        path = Path(doc["media_file"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError("media_file", str(exc)) from None
        media.update(parse_media_document(_read_json(text, "media_file"), "media_file"))
    if inline:
        media.update(parse_media_document(doc["media"], "media"))
    layers = _parse_layers(doc, media)
    initial = _parse_initial(doc, len(layers))

    time = doc.get("time")
    if not isinstance(time, dict):
        raise ConfigError("time", "must be an object with 'dt' and 'T'")
    dt = _number(time, "dt", "time", positive=True)
    T = _number(time, "T", "time", positive=True)
    outputs = time.get("outputs", [T])
    if not isinstance(outputs, list) or not outputs:
        raise ConfigError("time.outputs", "must be a nonempty list")
    for i, t in enumerate(outputs):
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not 0.0 <= t <= T:
            raise ConfigError(f"time.outputs[{i}]", f"must lie in [0, T], got {t!r}")
        if i and not t > outputs[i - 1]:
            raise ConfigError(f"time.outputs[{i}]", "outputs must be strictly increasing")
    outputs = [float(t) for t in outputs]

    reg = doc.get("regularization", {})
    if not isinstance(reg, dict):
        raise ConfigError("regularization", "must be an object")
    n_list = reg.get("n", DEFAULT_N)
    if isinstance(n_list, int) and not isinstance(n_list, bool):
        n_list = [n_list]
    if not isinstance(n_list, list) or not n_list:
        raise ConfigError("regularization.n", "must be an integer or a nonempty list")
    n_list = [_integer(n, f"regularization.n[{i}]", 2) for i, n in enumerate(n_list)]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("regularization.n", "indices must be increasing")
    k = _integer(reg.get("k", DEFAULT_K_BLEND), "regularization.k", 2)
    panels = _integer(reg.get("panels", DEFAULT_PANELS), "regularization.panels", 64)
    used = [media[s.medium] for s in layers]
    K = reg.get("K")
    K = slope_budget(used) if K is None else _number(reg, "K", "regularization", positive=True)

    mode = doc.get("mode", "simulate")
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
    seed = _integer(doc.get("seed", 0), "seed", 0)
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", "must be a string")
    study = doc.get("study", {})
    if not isinstance(study, dict):
        raise ConfigError("study", "must be an object")
    study = dict(study)
    kind = study.setdefault("kind", "sola" if len(layers) > 1 else "mesh")
    if kind not in ("sola", "mesh"):
        raise ConfigError("study.kind", "must be 'sola' or 'mesh'")
    study["levels"] = _integer(study.get("levels", 3), "study.levels", 1)
    solver = doc.get("solver", {})
    if not isinstance(solver, dict):
        raise ConfigError("solver", "must be an object")
    tol = _number(solver, "tol", "solver", positive=True, default=1e-12)
    origin = _number(doc, "origin", "", default=0.0) if "origin" in doc else 0.0
    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        raise ConfigError("name", "must be a string")
    return ScenarioConfig(name, layers, media, initial, dt, T, outputs, n_list, k, K, panels,
                          origin, mode, seed, output, study, tol, inline)


def load_scenario(ref):
    """Load a scenario from a file path or a shipped preset name."""
    path = Path(ref)
    if path.is_file():
        return parse_scenario(_read_json(path.read_text(), str(path)), path.parent)
    if ref in preset_names():
        return load_preset(ref)
    raise ConfigError("--config", f"no such file or preset: {ref!r}")


def load_preset(name):
    res = _preset_dir() / f"{name}.json"
    if not res.is_file():
        raise ConfigError("--config", f"unknown preset {name!r}")
    return parse_scenario(_read_json(res.read_text(), name))
