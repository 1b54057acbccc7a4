"""Saturation curves and homogeneous media.

Every curve is stored as a piecewise cubic Hermite table on ``[0, 1]``: node
abscissae, node values and node slopes.  Cubic polynomials are reproduced
exactly on any node set, so polynomial presets of degree <= 3 carry no
representation error.  Tables given as samples get shape-preserving (PCHIP)
slopes unless slopes are supplied.

Documents use the layout::

    {"porosity": 0.3,
     "mobility": {"kind": "polynomial", "params": {"coefficients": [0, 4, -4]}},
     "capillary": {"kind": "table",
                   "params": {"s": [...], "values": [...], "slopes": [...]}}}

``coefficients`` are in ascending powers of the saturation.  ``slopes`` is
optional for tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import PchipInterpolator

from .errors import ConstructionError

__all__ = [
    "HermiteCurve",
    "CapillaryPressureCurve",
    "MobilityCurve",
    "Medium",
    "medium_from_dict",
    "medium_to_dict",
    "curve_from_dict",
]

_UNIFORM_PANELS = 1024


def _hermite_value(t, h, y0, y1, m0, m1):
    t2 = t * t
    t3 = t2 * t
    return ((2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * m0
            + (3.0 * t2 - 2.0 * t3) * y1 + (t3 - t2) * h * m1)


def _hermite_slope(t, h, y0, y1, m0, m1):
    t2 = t * t
    return ((6.0 * t2 - 6.0 * t) * (y0 - y1) / h + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (3.0 * t2 - 2.0 * t) * m1)


class HermiteCurve:
    """Piecewise cubic Hermite function on ``[nodes[0], nodes[-1]]``.

    Arguments outside the node range are clamped to the nearest end.
    Saturation curves live on ``[0, 1]``.
    """

    kind = "table"

    def __init__(self, nodes, values, slopes, source=None, left_slopes=None):
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        left = slopes if left_slopes is None else np.asarray(left_slopes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ConstructionError("a curve needs at least two nodes")
        if values.shape != nodes.shape or slopes.shape != nodes.shape or left.shape != nodes.shape:
            raise ConstructionError("nodes, values and slopes must have equal length")
        if np.any(np.diff(nodes) <= 0.0):
            raise ConstructionError("curve nodes must be strictly increasing")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(slopes))
                and np.all(np.isfinite(left))):
            raise ConstructionError("curve values and slopes must be finite")
        self.nodes = nodes
        self.values = values
        # slopes[j]: derivative at node j seen from the right; left_slopes[j]
        # from the left.  They differ only at kinks.
        self.slopes = slopes
        self.left_slopes = left
        self.kinked = left_slopes is not None and not np.array_equal(left, slopes)
        self.m0 = slopes[:-1]
        self.m1 = left[1:]
        self.source = source
        # list copies: scalar evaluation on Python floats is much cheaper
        self._x = nodes.tolist()
        self._y = values.tolist()
        self._m0 = self.m0.tolist()
        self._m1 = self.m1.tolist()
        self._last = nodes.size - 2
        self.lo = self._x[0]
        self.hi = self._x[-1]
        self._validate()

    def _validate(self):
        pass

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_function(cls, f, df, nodes, source=None):
        nodes = np.asarray(nodes, dtype=float)
        return cls(nodes, f(nodes), df(nodes), source=source)

    @classmethod
    def from_polynomial(cls, coefficients, panels=None):
        """Curve from ascending polynomial coefficients.

        Degree <= 3 uses a single panel (exact); higher degrees use ``panels``
        uniform panels (default 1024).
        """
        coefficients = [float(c) for c in coefficients]
        if not coefficients:
            raise ConstructionError("polynomial needs at least one coefficient")
        poly = Polynomial(coefficients)
        if panels is None:
            panels = 1 if poly.degree() <= 3 else _UNIFORM_PANELS
        nodes = np.linspace(0.0, 1.0, int(panels) + 1)
        source = {"kind": "polynomial", "params": {"coefficients": coefficients}}
        return cls(nodes, poly(nodes), poly.deriv()(nodes), source=source)

    @classmethod
    def from_samples(cls, s, values, slopes=None, left_slopes=None):
        s = np.asarray(s, dtype=float)
        values = np.asarray(values, dtype=float)
        if s.shape != values.shape:
            raise ConstructionError("table abscissae and values differ in length")
        bad = np.flatnonzero(np.diff(s) <= 0.0)
        if bad.size:
            err = ConstructionError(f"s[{bad[0] + 1}] is not strictly increasing")
            err.index = int(bad[0] + 1)
            err.field = "s"
            raise err
        if slopes is None:
            slopes = PchipInterpolator(s, values).derivative()(s)
        source = {"kind": "table", "params": {"s": s.tolist(), "values": values.tolist()}}
        source["params"]["slopes"] = np.asarray(slopes, dtype=float).tolist()
        if left_slopes is not None:
            source["params"]["left_slopes"] = np.asarray(left_slopes, dtype=float).tolist()
        return cls(s, values, slopes, source=source, left_slopes=left_slopes)

    @classmethod
    def from_curve(cls, other):
        return cls(other.nodes, other.values, other.slopes, source=other.source,
                   left_slopes=other.left_slopes if other.kinked else None)

    # -- evaluation -------------------------------------------------------
    def _panel(self, s):
        j = np.searchsorted(self.nodes, s, side="right") - 1
        return np.clip(j, 0, self._last)

    def __call__(self, s):
        if isinstance(s, float):
            return self.scalar(s)
        s = np.clip(np.asarray(s, dtype=float), self.lo, self.hi)
        j = self._panel(s)
        x0 = self.nodes[j]
        h = self.nodes[j + 1] - x0
        t = (s - x0) / h
        return _hermite_value(t, h, self.values[j], self.values[j + 1], self.m0[j], self.m1[j])

    def derivative(self, s, side="right"):
        """Derivative; at a node ``side`` selects the one-sided value."""
        s = np.clip(np.asarray(s, dtype=float), self.lo, self.hi)
        if side == "left":
            j = np.clip(np.searchsorted(self.nodes, s, side="left") - 1, 0, self._last)
        else:
            j = self._panel(s)
        x0 = self.nodes[j]
        h = self.nodes[j + 1] - x0
        t = (s - x0) / h
        return _hermite_slope(t, h, self.values[j], self.values[j + 1], self.m0[j], self.m1[j])

    def locate(self, s):
        """Panel index holding the scalar ``s`` (clamped)."""
        x = self._x
        if s <= self.lo:
            return 0
        if s >= self.hi:
            return self._last
        lo, hi = 0, self._last + 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if x[mid] <= s:
                lo = mid
            else:
                hi = mid
        return lo

    def scalar(self, s):
        s = self.lo if s < self.lo else (self.hi if s > self.hi else s)
        j = self.locate(s)
        return self.panel_value(j, s)

    def panel_value(self, j, s):
        x0 = self._x[j]
        h = self._x[j + 1] - x0
        return _hermite_value((s - x0) / h, h, self._y[j], self._y[j + 1],
                              self._m0[j], self._m1[j])

    def panel_slope(self, j, s):
        x0 = self._x[j]
        h = self._x[j + 1] - x0
        return _hermite_slope((s - x0) / h, h, self._y[j], self._y[j + 1],
                              self._m0[j], self._m1[j])

    def solve_panel(self, j, target):
        """Return ``s`` in panel ``j`` with ``curve(s) == target``.

        The curve must be nondecreasing on the panel and ``target`` must lie
        between the panel's end values.  Safeguarded Newton: every iterate
        that leaves the current bracket is replaced by bisection.
        """
        x0 = self._x[j]
        h = self._x[j + 1] - x0
        y0 = self._y[j]
        y1 = self._y[j + 1]
        m0 = self._m0[j]
        m1 = self._m1[j]
        if target <= y0:
            return x0
        if target >= y1:
            return self._x[j + 1]
        lo, hi = 0.0, 1.0
        t = (target - y0) / (y1 - y0)
        for _ in range(100):
            r = _hermite_value(t, h, y0, y1, m0, m1) - target
            if r == 0.0:
                break
            if r < 0.0:
                lo = t
            else:
                hi = t
            d = _hermite_slope(t, h, y0, y1, m0, m1) * h
            tn = t - r / d if d > 0.0 else -1.0
            if not lo < tn < hi:
                tn = 0.5 * (lo + hi)
            if abs(tn - t) <= 2e-16 or hi - lo <= 2e-16:
                t = tn
                break
            t = tn
        return x0 + t * h

    def invert(self, y):
        """Vectorized inverse of a nondecreasing curve.

        Values are clamped to the curve's range; on flat stretches the
        leftmost preimage is returned.
        """
        y = np.asarray(y, dtype=float)
        flat = y.ravel()
        out = np.empty_like(flat)
        vals = self.values
        j = np.clip(np.searchsorted(vals, flat, side="left") - 1, 0, self._last)
        below = flat <= vals[0]
        above = flat >= vals[-1]
        x0 = self.nodes[j]
        h = self.nodes[j + 1] - x0
        y0 = vals[j]
        y1 = vals[j + 1]
        m0 = self.m0[j]
        m1 = self.m1[j]
        span = y1 - y0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(span > 0.0, (flat - y0) / span, 0.0)
        t = np.clip(t, 0.0, 1.0)
        lo = np.zeros_like(t)
        hi = np.ones_like(t)
        active = (span > 0.0) & ~below & ~above
        for _ in range(100):
            if not active.any():
                break
            r = _hermite_value(t, h, y0, y1, m0, m1) - flat
            lo = np.where(active & (r < 0.0), t, lo)
            hi = np.where(active & (r > 0.0), t, hi)
            d = _hermite_slope(t, h, y0, y1, m0, m1) * h
            with np.errstate(divide="ignore", invalid="ignore"):
                tn = np.where(d > 0.0, t - r / d, -1.0)
            bad = ~((lo < tn) & (tn < hi))
            tn = np.where(bad, 0.5 * (lo + hi), tn)
            done = (r == 0.0) | (np.abs(tn - t) <= 2e-16) | (hi - lo <= 2e-16)
            t = np.where(active & (r != 0.0), tn, t)
            active &= ~done
        out[:] = x0 + t * h
        out[below] = self.lo
        # leftmost node of a flat top
        out[above] = self.nodes[np.searchsorted(vals, vals[-1], side="left")]
        return out.reshape(y.shape) if y.ndim else float(out[0])

    # -- misc -------------------------------------------------------------
    def to_dict(self):
        if self.source is not None:
            return {"kind": self.source["kind"], "params": dict(self.source["params"])}
        params = {"s": self.nodes.tolist(), "values": self.values.tolist(),
                  "slopes": self.slopes.tolist()}
        if self.kinked:
            params["left_slopes"] = self.left_slopes.tolist()
        return {"kind": "table", "params": params}

    def sup_slope(self, samples=4):
        """Max of the derivative over nodes and ``samples`` points per panel."""
        t = np.linspace(0.0, 1.0, samples + 1)
        s = (self.nodes[:-1, None] + t[None, :] * np.diff(self.nodes)[:, None]).ravel()
        return float(np.max(self.derivative(s)))

    def __repr__(self):
        return f"{type(self).__name__}(nodes={self.nodes.size}, source={self.to_dict()['kind']})"


def _check_unit_domain(curve):
    if curve.lo != 0.0 or curve.hi != 1.0:
        raise ConstructionError("saturation curves must be defined on [0, 1]")


class CapillaryPressureCurve(HermiteCurve):
    """Strictly increasing capillary pressure ``pi(s)``; ``alpha = pi(0)``, ``beta = pi(1)``."""

    def _validate(self):
        _check_unit_domain(self)
        bad = np.flatnonzero(np.diff(self.values) <= 0.0)
        if bad.size:
            err = ConstructionError(f"values[{bad[0] + 1}] is not strictly increasing")
            err.index = int(bad[0] + 1)
            err.field = "values"
            raise err
        if (np.any(self.m0 < 0.0) or np.any(self.m1 < 0.0)
                or np.any(self.m0[1:] <= 0.0) or np.any(self.m1[:-1] <= 0.0)):
            raise ConstructionError("capillary pressure slope must be positive inside (0, 1)")
        # interior check between nodes: 4 samples per panel
        t = np.array([0.25, 0.5, 0.75])
        s = (self.nodes[:-1, None] + t[None, :] * np.diff(self.nodes)[:, None]).ravel()
        if np.any(self.derivative(s) <= 0.0):
            raise ConstructionError("capillary pressure is not strictly increasing between nodes")

    @property
    def alpha(self):
        return self._y[0]

    @property
    def beta(self):
        return self._y[-1]


class MobilityCurve(HermiteCurve):
    """Global mobility ``lambda(s) >= 0``.

    Physical mobilities vanish at both ends; ``vanishes_at_ends`` reports
    whether this one does.  Nonvanishing curves are accepted for the
    linear-diffusion verification preset.
    """

    def _validate(self):
        _check_unit_domain(self)
        tol = 1e-14 * max(1.0, float(np.max(np.abs(self.values))))
        if np.any(self.values < -tol):
            raise ConstructionError("mobility must be nonnegative")
        t = np.array([0.25, 0.5, 0.75])
        s = (self.nodes[:-1, None] + t[None, :] * np.diff(self.nodes)[:, None]).ravel()
        if np.any(self(s) < -tol):
            raise ConstructionError("mobility becomes negative between nodes")

    @property
    def vanishes_at_ends(self):
        return self._y[0] == 0.0 and self._y[-1] == 0.0


@dataclass(frozen=True, eq=False)
class Medium:
    """Homogeneous layer: porosity, mobility and capillary pressure."""

    porosity: float
    mobility: MobilityCurve
    capillary: CapillaryPressureCurve
    name: str | None = None

    def __post_init__(self):
        if not 0.0 < self.porosity <= 1.0:
            raise ConstructionError(f"porosity must lie in (0, 1], got {self.porosity}")


def curve_from_dict(doc, cls=HermiteCurve):
    kind = doc.get("kind")
    params = doc.get("params", {})
    if kind == "polynomial":
        coeffs = params.get("coefficients")
        if not isinstance(coeffs, (list, tuple)) or not coeffs:
            raise ConstructionError("polynomial needs a nonempty 'coefficients' list")
        base = HermiteCurve.from_polynomial(coeffs, panels=params.get("panels"))
    elif kind == "table":
        if "s" not in params or "values" not in params:
            raise ConstructionError("table needs 's' and 'values'")
        base = HermiteCurve.from_samples(params["s"], params["values"], params.get("slopes"),
                                         params.get("left_slopes"))
    else:
        raise ConstructionError(f"unknown curve kind {kind!r}")
    return cls.from_curve(base)


def medium_from_dict(doc, name=None):
    return Medium(
        porosity=float(doc["porosity"]),
        mobility=curve_from_dict(doc["mobility"], MobilityCurve),
        capillary=curve_from_dict(doc["capillary"], CapillaryPressureCurve),
        name=name,
    )


def medium_to_dict(medium):
    return {
        "porosity": medium.porosity,
        "mobility": medium.mobility.to_dict(),
        "capillary": medium.capillary.to_dict(),
    }
