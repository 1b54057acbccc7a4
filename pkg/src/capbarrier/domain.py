"""Layered 1-D geometry, cell meshes and initial data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, ParameterError
from .media import Medium

__all__ = [
    "Layer",
    "DomainLayout",
    "Mesh",
    "State",
    "InitialData",
    "build_mesh",
    "project_initial",
]


@dataclass(frozen=True, eq=False)
class Layer:
    medium: Medium
    length: float

    def __post_init__(self):
        if not self.length > 0.0:
            raise ParameterError(f"layer length must be positive, got {self.length}")


@dataclass(frozen=True, eq=False)
class DomainLayout:
    """Ordered homogeneous layers starting at ``origin``."""

    layers: tuple
    origin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ParameterError("a layout needs at least one layer")

    @classmethod
    def of(cls, media: Sequence[Medium], lengths: Sequence[float], origin=0.0):
        return cls(tuple(Layer(m, float(L)) for m, L in zip(media, lengths)), origin)

    @property
    def media(self):
        return [layer.medium for layer in self.layers]

    @property
    def edges(self):
        x = [self.origin]
        for layer in self.layers:
            x.append(x[-1] + layer.length)
        return np.array(x)

    @property
    def interfaces(self):
        return self.edges[1:-1]

    @property
    def extent(self):
        e = self.edges
        return e[0], e[-1]

    def layer_of(self, x):
        """Layer index of each point; interface points go to the right layer."""
        idx = np.searchsorted(self.interfaces, np.asarray(x, dtype=float), side="right")
        return idx


@dataclass(frozen=True, eq=False)
class Mesh:
    layout: DomainLayout
    cells_per_layer: tuple
    edges: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    layer_of_cell: np.ndarray
    layer_slices: tuple
    interface_cells: tuple
    porosity: np.ndarray

    @property
    def size(self):
        return self.centers.size

    @property
    def pore_volume(self):
        return float(np.sum(self.porosity * self.widths))

    def mass(self, u):
        return float(np.sum(self.porosity * self.widths * u))


def build_mesh(layout, cells_per_layer):
    """Uniform cells inside each layer; interfaces fall on cell edges."""
    cells = [int(c) for c in cells_per_layer]
    if len(cells) != len(layout.layers):
        raise ParameterError(
            f"{len(cells)} cell counts given for {len(layout.layers)} layers")
    if any(c <= 0 for c in cells):
        raise ParameterError("every layer needs a positive cell count")
    layer_edges = layout.edges
    edges = [np.array([layer_edges[0]])]
    for i, c in enumerate(cells):
        e = np.linspace(layer_edges[i], layer_edges[i + 1], c + 1)
        edges.append(e[1:])
    edges = np.concatenate(edges)
    widths = np.diff(edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    layer_of_cell = np.repeat(np.arange(len(cells)), cells)
    bounds = np.concatenate(([0], np.cumsum(cells)))
    slices = tuple(slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))
    interfaces = tuple((int(b) - 1, int(b)) for b in bounds[1:-1])
    porosity = np.array([layout.layers[k].medium.porosity for k in layer_of_cell])
    return Mesh(layout, tuple(cells), edges, centers, widths, layer_of_cell,
                slices, interfaces, porosity)


@dataclass(frozen=True, eq=False)
class State:
    """Cell-averaged saturations at time ``t``."""

    t: float
    u: np.ndarray


@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial saturation ``rule(x)`` with optional interface traces.

    ``traces[j]`` is the pair (left limit, right limit) at interface ``j``;
    when absent it is sampled just beside the interface.  ``pressures``
    records connected interface pressures when the data were built so.
    """

    rule: Callable
    traces: tuple | None = None
    pressures: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.rule(x)

    def interface_traces(self, layout):
        if self.traces is not None:
            return list(self.traces)
        a, b = layout.extent
        eps = 1e-12 * (b - a)
        out = []
        for x in layout.interfaces:
            left, right = self.rule(np.array([x - eps, x + eps]))
            out.append((float(left), float(right)))
        return out

    # -- common shapes ------------------------------------------------------
    @classmethod
    def constant(cls, value):
        value = float(value)
        return cls(lambda x: np.full(np.shape(x), value), meta={"kind": "constant"})

    @classmethod
    def cosine(cls, layout, mean=0.5, amplitude=0.25):
        """``mean + amplitude * cos(pi (x - x0) / L)`` over the whole layout."""
        a, b = layout.extent
        L = b - a

        def rule(x):
            return mean + amplitude * np.cos(np.pi * (np.asarray(x) - a) / L)
        return cls(rule, meta={"kind": "cosine"})

    @classmethod
    def layers(cls, layout, values):
        """Constant value per layer."""
        values = np.asarray(values, dtype=float)
        if values.size != len(layout.layers):
            raise ParameterError("one value per layer is required")

        def rule(x):
            return values[layout.layer_of(x)]
        traces = tuple((float(values[j]), float(values[j + 1]))
                       for j in range(values.size - 1))
        return cls(rule, traces=traces, meta={"kind": "layers"})

    @classmethod
    def linear(cls, layout, ends):
        """Linear per layer from ``ends[i][0]`` to ``ends[i][1]``."""
        ends = np.asarray(ends, dtype=float)
        if ends.shape != (len(layout.layers), 2):
            raise ParameterError("one (start, end) pair per layer is required")
        e = layout.edges

        def rule(x):
            x = np.asarray(x, dtype=float)
            k = layout.layer_of(x)
            k = np.clip(k, 0, len(layout.layers) - 1)
            theta = (x - e[k]) / (e[k + 1] - e[k])
            return ends[k, 0] + theta * (ends[k, 1] - ends[k, 0])
        traces = tuple((float(ends[j, 1]), float(ends[j + 1, 0]))
                       for j in range(len(ends) - 1))
        return cls(rule, traces=traces, meta={"kind": "linear"})

    @classmethod
    def table(cls, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return cls(lambda y: np.interp(y, x, u), meta={"kind": "table"})

    @classmethod
    def from_cells(cls, mesh, values):
        """Piecewise constant on mesh cells."""
        values = np.asarray(values, dtype=float)
        if values.size != mesh.size:
            raise ParameterError("one value per cell is required")
        inner = mesh.edges[1:-1]

        def rule(x):
            return values[np.searchsorted(inner, np.asarray(x, dtype=float), side="right")]
        traces = tuple((float(values[l]), float(values[r])) for l, r in mesh.interface_cells)
        return cls(rule, traces=traces, meta={"kind": "cells"})


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(5)


def project_initial(u0, mesh, t=0.0):
    """Cell averages of ``u0`` by 5-point Gauss-Legendre on every cell."""
    half = 0.5 * mesh.widths
    x = mesh.centers[:, None] + half[:, None] * _GAUSS_X[None, :]
    vals = np.asarray(u0(x), dtype=float)
    u = 0.5 * vals @ _GAUSS_W
    if not np.all(np.isfinite(u)):
        raise DataError("initial data are not finite")
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if lo < -1e-12 or hi > 1.0 + 1e-12:
        raise DataError(f"initial data leave [0, 1]: range [{lo}, {hi}]")
    return State(float(t), np.clip(u, 0.0, 1.0))
