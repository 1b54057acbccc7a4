"""Nondegenerate approximations of layered media and matching initial data.

The ladder replaces each medium by one whose mobility is bounded below by
``1/n^2`` and whose capillary curve is strictly increasing with slope at
least ``1/n``.  All regularized capillary curves share the endpoint values
``A_n`` and ``B_n``, so every pair of regularized graphs overlaps fully and
interface traces can always be connected.

Construction for index ``n``:

* mobility: ``1/n^2`` on ``[0, 1/n]`` and ``[1 - 1/n, 1]``,
  ``max(lambda, 1/n^2)`` on ``[2/n, 1 - 2/n]``, smoothstep joins in between;
  the result is tabulated with shape-preserving slopes so it never dips below
  its samples.
* capillary: ``pi(s) + (s - 1/2)/n`` on ``[1/n, 1 - 1/n]`` with linear ramps
  to ``A_n = min_i pi_i(1/n) - sqrt(n)`` and ``B_n = max_i pi_i(1 - 1/n) + sqrt(n)``.
  The ramps must not be steeper than ``K n^{3/2}`` with
  ``K = 4 (1 + max_i sup pi_i')``.
* Kirchhoff transform: tabulated from the two curves above, then rescaled so
  that its range equals that of the original transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import InitialData
from .errors import ConstructionError, ParameterError, PreconditionError
from .graphs import (DEFAULT_PANELS, MonotoneGraph, build_kirchhoff, graphs_intersect,
                     tabulate_psi, _merged_grid)
from .media import CapillaryPressureCurve, Medium, MobilityCurve, medium_to_dict

__all__ = [
    "RegularizedFamily",
    "BlendedMedium",
    "regularize_media",
    "slope_budget",
    "smallest_valid_n",
    "build_psi_n",
    "approximate_initial",
    "blend_media",
    "layered_initial",
    "theta",
]

MEDIA_SCHEMA = "capbarrier.media/1"


def slope_budget(media):
    """Default ``K = 4 (1 + max_i sup pi_i')``."""
    return 4.0 * (1.0 + max(m.capillary.sup_slope() for m in media))


def _endpoints(media, n):
    lo = min(m.capillary.scalar(1.0 / n) for m in media) - math.sqrt(n)
    hi = max(m.capillary.scalar(1.0 - 1.0 / n) for m in media) + math.sqrt(n)
    return lo, hi


def _ramp_slopes(cap, n, A, B):
    eps = 1.0 / n
    a, b = 1.0 / n, 1.0 - 1.0 / n
    left = (cap.scalar(a) + eps * (a - 0.5) - A) * n
    right = (B - cap.scalar(b) - eps * (b - 0.5)) * n
    return left, right


def _max_ramp(media, n):
    A, B = _endpoints(media, n)
    return max(max(_ramp_slopes(m.capillary, n, A, B)) for m in media)


def smallest_valid_n(media, K=None, n_max=1_000_000):
    """Smallest ``n >= 2`` whose ramps respect the ``K n^{3/2}`` budget."""
    K = slope_budget(media) if K is None else float(K)
    for n in range(2, n_max + 1):
        if _max_ramp(media, n) <= K * n ** 1.5:
            return n
    raise ParameterError(f"no index up to {n_max} satisfies the slope budget K={K}")


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _regularize_mobility(lam, n, panels):
    floor = 1.0 / n ** 2
    cuts = [1.0 / n, 2.0 / n, 1.0 - 2.0 / n, 1.0 - 1.0 / n]
    s = _merged_grid(0.0, 1.0, panels, lam.nodes, cuts)
    w = _smoothstep(n * s - 1.0) * _smoothstep(n * (1.0 - s) - 1.0)
    values = floor + w * (np.maximum(lam(s), floor) - floor)
    # end intervals hold the floor exactly
    values[(s <= 1.0 / n) | (s >= 1.0 - 1.0 / n)] = floor
    return MobilityCurve.from_samples(s, values)


def _regularize_capillary(cap, n, A, B, panels):
    eps = 1.0 / n
    a, b = 1.0 / n, 1.0 - 1.0 / n
    s = _merged_grid(0.0, 1.0, panels, cap.nodes, [a, b])
    ramp_l, ramp_r = _ramp_slopes(cap, n, A, B)
    mid = (s > a) & (s < b)
    pa = cap.scalar(a) + eps * (a - 0.5)
    pb = cap.scalar(b) + eps * (b - 0.5)
    values = np.where(s <= a, A + ramp_l * s, B - ramp_r * (1.0 - s))
    values[mid] = cap(s[mid]) + eps * (s[mid] - 0.5)
    values[s == a] = pa
    values[s == b] = pb
    values[0], values[-1] = A, B
    right = np.where(s < a, ramp_l, np.where(s >= b, ramp_r, cap.derivative(s) + eps))
    left = np.where(s <= a, ramp_l, np.where(s > b, ramp_r,
                                             cap.derivative(s, side="left") + eps))
    return CapillaryPressureCurve.from_samples(s, values, right, left)


@dataclass(eq=False)
class RegularizedFamily:
    """Regularized media of index ``n`` sharing capillary endpoints ``A``, ``B``.

    ``kirchhoff[i]`` is the range-matched transform of ``media[i]``;
    ``raw_kirchhoff[i]`` is the transform before rescaling and ``base_kirchhoff[i]``
    that of the original medium ``base[i]``.
    """

    n: int
    K: float
    A: float
    B: float
    base: list
    media: list
    kirchhoff: list
    raw_kirchhoff: list
    base_kirchhoff: list
    panels: int = DEFAULT_PANELS

    def index_of(self, medium):
        for i, m in enumerate(self.base):
            if m is medium:
                return i
        raise ParameterError("medium is not part of this family")

    def check_invariants(self, grid=2001):
        """Return ``{name: (ok, measured)}`` for every family invariant."""
        n = self.n
        floor = 1.0 / n ** 2
        s = np.linspace(0.0, 1.0, grid)
        ends = (s <= 1.0 / n) | (s >= 1.0 - 1.0 / n)
        out = {}
        lam = np.array([m.mobility(s) for m in self.media])
        dev = float(np.max(np.abs(lam[:, ends] - floor))) if ends.any() else 0.0
        out["mobility_ends"] = (dev <= 1e-15 * floor * 16, dev)
        lam_min = float(np.min(lam))
        out["mobility_floor"] = (lam_min > 0.5 * floor, lam_min)
        same = all(m.capillary.alpha == self.A and m.capillary.beta == self.B
                   for m in self.media)
        out["shared_endpoints"] = (same, (self.A, self.B))
        slopes = np.array([np.minimum(m.capillary.derivative(s), m.capillary.derivative(s, "left"))
                           for m in self.media])
        tops = np.array([np.maximum(m.capillary.derivative(s), m.capillary.derivative(s, "left"))
                         for m in self.media])
        lo, hi = float(np.min(slopes)), float(np.max(tops))
        out["slope_floor"] = (lo >= 1.0 / n - 1e-12, lo)
        out["slope_ceiling"] = (hi <= self.K * n ** 1.5, hi)
        rng = max(abs(F.top - G.top) / max(abs(G.top), 1e-300)
                  for F, G in zip(self.kirchhoff, self.base_kirchhoff))
        out["kirchhoff_range"] = (rng <= 1e-10, rng)
        return out

    def kirchhoff_distance(self, i, grid=1001):
        """``(max|F_n - F|, max|F_n' - F'|)`` on a grid off the end intervals."""
        s = np.linspace(0.0, 1.0, grid)
        s = s[(s > 1.0 / self.n) & (s < 1.0 - 1.0 / self.n)]
        F, G = self.kirchhoff[i], self.base_kirchhoff[i]
        return (float(np.max(np.abs(F(s) - G(s)))),
                float(np.max(np.abs(F.derivative(s) - G.derivative(s)))))

    def to_document(self):
        """Media-preset document holding the regularized media."""
        names = [m.name or f"medium{i}" for i, m in enumerate(self.base)]
        return {
            "schema": MEDIA_SCHEMA,
            "media": {f"{name}_n{self.n}": medium_to_dict(m)
                      for name, m in zip(names, self.media)},
            "regularization": {"n": self.n, "K": self.K, "A": self.A, "B": self.B},
        }


def regularize_media(media, n, K=None, panels=DEFAULT_PANELS):
    """Build the regularized family of index ``n`` for ``media``."""
    media = list(media)
    if not media:
        raise ParameterError("at least one medium is required")
    if int(n) != n or n < 2:
        raise ParameterError(f"regularization index must be an integer >= 2, got {n}")
    n = int(n)
    K = slope_budget(media) if K is None else float(K)
    A, B = _endpoints(media, n)
    ramp = _max_ramp(media, n)
    if ramp > K * n ** 1.5:
        raise ParameterError(
            f"ramp slope {ramp:.6g} exceeds the budget K n^(3/2) = {K * n ** 1.5:.6g} "
            f"(n={n}, K={K:.6g}); smallest valid n is {smallest_valid_n(media, K)}")
    reg, Fn, raw, base_F = [], [], [], []
    for m in media:
        name = f"{m.name}_n{n}" if m.name else None
        r = Medium(m.porosity, _regularize_mobility(m.mobility, n, panels),
                   _regularize_capillary(m.capillary, n, A, B, panels), name)
        F0 = build_kirchhoff(m, panels)
        Fr = build_kirchhoff(r, panels)
        reg.append(r)
        raw.append(Fr)
        base_F.append(F0)
        Fn.append(Fr.scaled(F0.top / Fr.top) if Fr.top > 0.0 else Fr)
    return RegularizedFamily(n, K, A, B, media, reg, Fn, raw, base_F, panels)


def build_psi_n(family, panels=DEFAULT_PANELS):
    """``p -> int_A^p min_j lambda_{j,n}(pi_{j,n}^{-1}(a)) da`` on ``[A_n, B_n]``."""
    return tabulate_psi(family.media, family.A, family.B, panels)


# -- initial data ---------------------------------------------------------------
def _connect_traces(mL, mR, uL, uR, family, j):
    gL, gR = MonotoneGraph.of(mL), MonotoneGraph.of(mR)
    if not graphs_intersect(gL, uL, gR, uR):
        raise PreconditionError(
            f"initial traces ({uL}, {uR}) at interface {j} are not connected")
    loL, hiL = gL.value_set(uL)
    loR, hiR = gR.value_set(uR)
    lo = max(loL, loR, min(gL.alpha, gR.alpha))
    hi = min(hiL, hiR, max(gL.beta, gR.beta))
    return float(np.clip(0.5 * (lo + hi), family.A, family.B))


def approximate_initial(u0, family, layout):
    """Initial data connected for the regularized media of ``family``.

    On layer ``i`` the result is ``F_{i,n}^{-1}(T[F_i(u0) + shift_i])`` where
    ``T`` clamps to ``[0, F_i(1)]``.  The shift moves the interface trace onto
    ``a_{i,n}``, the regularized preimage of a common pressure ``P*``.  A layer
    between two interfaces gets a shift varying linearly in ``x``.
    """
    media = layout.media
    if len(media) != len(family.base) or any(a is not b for a, b in zip(media, family.base)):
        raise ParameterError("family must be built from the layout's media, in order")
    traces = u0.interface_traces(layout)
    nl = len(media)
    left_shift = [None] * nl
    right_shift = [None] * nl
    pressures, new_traces = [], []
    for j, (uL, uR) in enumerate(traces):
        P = _connect_traces(media[j], media[j + 1], uL, uR, family, j)
        aL = family.media[j].capillary.invert(P)
        aR = family.media[j + 1].capillary.invert(P)
        FL, FR = family.kirchhoff[j], family.kirchhoff[j + 1]
        right_shift[j] = float(FL(aL)) - float(family.base_kirchhoff[j](uL))
        left_shift[j + 1] = float(FR(aR)) - float(family.base_kirchhoff[j + 1](uR))
        pressures.append(P)
        new_traces.append((aL, aR))
    edges = layout.edges

    def shift(i, x):
        sl, sr = left_shift[i], right_shift[i]
        if sl is None and sr is None:
            return np.zeros_like(x)
        if sl is None:
            return np.full_like(x, sr)
        if sr is None:
            return np.full_like(x, sl)
        t = (x - edges[i]) / (edges[i + 1] - edges[i])
        return sl + t * (sr - sl)

    def rule(x):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u0(x), dtype=float)
        out = np.empty_like(u)
        k = np.clip(layout.layer_of(x), 0, nl - 1)
        for i in range(nl):
            sel = k == i
            if not np.any(sel):
                continue
            G = family.base_kirchhoff[i]
            y = np.clip(G(u[sel]) + shift(i, x[sel]), 0.0, G.top)
            out[sel] = family.kirchhoff[i].inverse(y)
        return out

    meta = {"kind": "regularized", "n": family.n, "source": u0.meta.get("kind")}
    return InitialData(rule, tuple(new_traces), tuple(pressures), meta)


# -- spatial blending -------------------------------------------------------------
def _h(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)


def theta(y):
    """Smooth symmetric step: 0 for ``y <= -1``, 1 for ``y >= 1``, 1/2 at 0."""
    y = np.asarray(y, dtype=float)
    a = _h(1.0 + y)
    b = _h(1.0 - y)
    return a / (a + b)


@dataclass(frozen=True, eq=False)
class BlendedMedium:
    """Two regularized media joined through a layer of half-width ``1/k``.

    Positions are measured in the layout coordinate; the layer is centred on
    ``interface``.  ``lengths`` are the extents of the two sides.
    """

    left: Medium
    right: Medium
    left_n: Medium
    right_n: Medium
    k: int
    interface: float = 0.0
    lengths: tuple = (1.0, 1.0)
    meta: dict = field(default_factory=dict)

    def weight(self, x):
        return theta(self.k * (np.asarray(x, dtype=float) - self.interface))

    def porosity(self, x):
        w = self.weight(x)
        return (1.0 - w) * self.left.porosity + w * self.right.porosity

    def mobility(self, s, x):
        w = self.weight(x)
        return (1.0 - w) * self.left_n.mobility(s) + w * self.right_n.mobility(s)

    def pressure(self, s, x):
        w = self.weight(x)
        return (1.0 - w) * self.left_n.capillary(s) + w * self.right_n.capillary(s)

    def medium_at(self, x):
        """The pure regularized medium at ``x`` outside the layer, else ``None``."""
        w = float(self.weight(float(x)))
        if w == 0.0:
            return self.left_n
        if w == 1.0:
            return self.right_n
        return None

    def solve_pressure(self, P, x, tol=1e-12):
        """Saturations ``u`` with ``pressure(u, x) = P`` by bisection."""
        x = np.asarray(x, dtype=float)
        w = self.weight(x)
        c1, c2 = self.left_n.capillary, self.right_n.capillary
        if not (c1.alpha <= P <= c1.beta and c2.alpha <= P <= c2.beta):
            raise ConstructionError(f"pressure {P} lies outside the blended range")
        lo = np.zeros_like(x)
        hi = np.ones_like(x)
        while np.max(hi - lo) > tol:
            mid = 0.5 * (lo + hi)
            below = (1.0 - w) * c1(mid) + w * c2(mid) < P
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def blend_media(m1, m2, family, k, interface=0.0, lengths=(1.0, 1.0)):
    """Blend the regularized versions of ``m1`` and ``m2`` over ``|x - interface| < 1/k``."""
    if int(k) != k or k < 2:
        raise ParameterError(f"blend index must be an integer >= 2, got {k}")
    k = int(k)
    if 1.0 / k >= min(lengths):
        raise ParameterError("the blending layer must be thinner than both sides")
    r1 = family.media[family.index_of(m1)]
    r2 = family.media[family.index_of(m2)]
    return BlendedMedium(m1, m2, r1, r2, k, float(interface),
                         (float(lengths[0]), float(lengths[1])), {"n": family.n})


def layered_initial(u0n, blended, k=None):
    """Initial data for the blended medium.

    Outside the layer ``u0n`` is pulled back so that each side is compressed
    by ``1/k``; inside, the saturation keeps the blended pressure at ``P*``.
    """
    k = blended.k if k is None else int(k)
    if k != blended.k:
        raise ParameterError("blend index differs from the blended medium's")
    if not u0n.pressures or not u0n.traces:
        raise PreconditionError("layered data need connected initial data with pressures")
    P = u0n.pressures[0]
    tL, tR = u0n.traces[0]
    xg = blended.interface
    L1, L2 = blended.lengths
    d = 1.0 / k

    def rule(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left = x <= xg - d
        right = x >= xg + d
        inside = ~(left | right)
        if np.any(left):
            y = (xg - L1) + (x[left] - (xg - L1)) * (L1 / (L1 - d))
            out[left] = np.where(y < xg, u0n(np.minimum(y, xg)), tL)
        if np.any(right):
            y = (xg + L2) - ((xg + L2) - x[right]) * (L2 / (L2 - d))
            out[right] = np.where(y > xg, u0n(np.maximum(y, xg)), tR)
        if np.any(inside):
            out[inside] = blended.solve_pressure(P, x[inside])
        return out

    return InitialData(rule, None, (P,), {"kind": "layered", "k": k})
