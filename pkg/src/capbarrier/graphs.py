"""Monotone capillary graphs, Kirchhoff transforms, truncations and Psi.

A capillary curve ``pi`` on ``[0, 1]`` is extended to a maximal monotone
graph by a downward ray at ``s = 0`` and an upward ray at ``s = 1``.  The
value set of the graph at ``s`` is a closed interval ``(lo, hi)`` with
``-inf``/``+inf`` standing for the unbounded ends, so that connection of two
graphs reduces to interval overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, NoOverlapError, ParameterError
from .media import CapillaryPressureCurve, HermiteCurve, Medium

__all__ = [
    "MonotoneGraph",
    "KirchhoffTransform",
    "TruncatedPair",
    "PsiFunction",
    "EquivalenceReport",
    "build_kirchhoff",
    "graph_inverse",
    "graphs_intersect",
    "truncate_pair",
    "check_equivalence",
    "build_psi",
    "tabulate_primitive",
    "monotone_hermite",
]

DEFAULT_PANELS = 1024
INTERSECT_ATOL = 1e-12


def monotone_hermite(nodes, values, right, left=None):
    """Hermite curve through nondecreasing ``values`` that stays monotone.

    ``right``/``left`` are one-sided node slopes.  Each panel's end slopes are
    clipped to ``[0, 3 * secant]`` (Fritsch-Carlson), which is sufficient for
    monotonicity.
    """
    left = right if left is None else left
    secant = np.maximum(np.diff(values) / np.diff(nodes), 0.0)
    m0 = np.clip(right[:-1], 0.0, 3.0 * secant)
    m1 = np.clip(left[1:], 0.0, 3.0 * secant)
    slopes = np.concatenate((m0, m1[-1:]))
    left_slopes = np.concatenate((m0[:1], m1))
    return HermiteCurve(nodes, values, slopes, left_slopes=left_slopes)


def tabulate_primitive(integrand, nodes, integrand_left=None):
    """Tabulate ``x -> int_{nodes[0]}^x integrand`` with composite Simpson.

    Simpson is applied on every sub-interval of ``nodes`` (weights 1-4-1),
    so node values carry an error of at most ``(b - a) h^4 max|f^(4)| / 2880``
    where the integrand is smooth on each sub-interval.  ``integrand_left``
    gives left limits at nodes where the integrand jumps.  Between nodes the
    primitive is interpolated by cubic Hermite with the integrand as slope,
    adding at most ``h^4 max|f^(3)| / 384``.  Returns node values and the
    right and left node slopes.
    """
    nodes = np.asarray(nodes, dtype=float)
    f_right = np.asarray(integrand(nodes), dtype=float)
    f_left = f_right if integrand_left is None else np.asarray(integrand_left(nodes), dtype=float)
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    f_mid = np.asarray(integrand(mid), dtype=float)
    h = np.diff(nodes)
    pieces = h / 6.0 * (f_right[:-1] + 4.0 * f_mid + f_left[1:])
    values = np.concatenate(([0.0], np.cumsum(pieces)))
    return values, f_right, f_left


def _merged_grid(lo, hi, panels, *extra):
    parts = [np.linspace(lo, hi, panels + 1)]
    for e in extra:
        e = np.asarray(e, dtype=float)
        parts.append(e[(e > lo) & (e < hi)])
    grid = np.unique(np.concatenate(parts))
    # drop near-duplicates that would make panels degenerate
    keep = np.concatenate(([True], np.diff(grid) > 1e-13 * max(1.0, hi - lo)))
    keep[-1] = True
    grid = grid[keep]
    grid[0], grid[-1] = lo, hi
    return grid


# -- monotone graphs ----------------------------------------------------------
@dataclass(frozen=True, eq=False)
class MonotoneGraph:
    """Capillary curve completed by vertical rays at saturations 0 and 1."""

    capillary: CapillaryPressureCurve

    @classmethod
    def of(cls, medium):
        return cls(medium.capillary)

    @property
    def alpha(self):
        return self.capillary.alpha

    @property
    def beta(self):
        return self.capillary.beta

    def value_set(self, s):
        """Closed interval ``(lo, hi)`` of pressures in the graph at ``s``."""
        if s <= 0.0:
            return -np.inf, self.alpha
        if s >= 1.0:
            return self.beta, np.inf
        p = self.capillary.scalar(s)
        return p, p

    def value_sets(self, s):
        s = np.asarray(s, dtype=float)
        p = self.capillary(s)
        lo = np.where(s <= 0.0, -np.inf, np.where(s >= 1.0, self.beta, p))
        hi = np.where(s >= 1.0, np.inf, np.where(s <= 0.0, self.alpha, p))
        return lo, hi

    def inverse(self, p):
        """The function that maps each pressure to the unique graph saturation."""
        return graph_inverse(self, p)


def graph_inverse(graph, p):
    """Saturation ``s`` with ``p`` in the graph's value set at ``s``.

    ``0`` below ``alpha``, ``1`` above ``beta``, otherwise ``pi^{-1}(p)`` by a
    bracketed, bisection-safeguarded Newton iteration (tolerance far below
    ``1e-12``).  Accepts scalars or arrays.
    """
    cap = graph.capillary
    if np.ndim(p) == 0:
        p = float(p)
        if p <= cap.alpha:
            return 0.0
        if p >= cap.beta:
            return 1.0
        return cap.invert(p)
    return cap.invert(np.asarray(p, dtype=float))


def graphs_intersect(g1, s1, g2, s2, atol=INTERSECT_ATOL):
    """True iff the graph value sets at ``s1`` and ``s2`` share a point.

    ``atol`` widens the overlap test; two interior saturations are only ever
    connected up to rounding of the pressures, never bitwise.
    """
    lo1, hi1 = g1.value_set(s1)
    lo2, hi2 = g2.value_set(s2)
    return max(lo1, lo2) <= min(hi1, hi2) + atol


# -- Kirchhoff transform ------------------------------------------------------
class KirchhoffTransform:
    """``F(s) = int_0^s lambda(a) pi'(a) da`` tabulated on ``[0, 1]``.

    ``F`` is nondecreasing with ``F(0) = 0``; ``inverse`` maps ``[0, F(1)]``
    back to saturations (leftmost preimage on flat stretches).
    """

    def __init__(self, curve, panels, medium=None, scale=1.0):
        self.curve = curve
        self.panels = panels
        self.medium = medium
        self.scale = scale
        self.top = curve.values[-1]
        self.nodes = curve.nodes

    def __call__(self, s):
        return self.curve(s)

    def derivative(self, s):
        return self.curve.derivative(s)

    def inverse(self, y):
        y = np.clip(np.asarray(y, dtype=float), 0.0, self.top)
        return self.curve.invert(y)

    def scaled(self, factor):
        """Same transform multiplied by ``factor`` (used for range matching)."""
        c = self.curve
        curve = HermiteCurve(c.nodes, c.values * factor, c.slopes * factor,
                             left_slopes=c.left_slopes * factor)
        return KirchhoffTransform(curve, self.panels, self.medium, self.scale * factor)

    def __repr__(self):
        return f"KirchhoffTransform(nodes={self.nodes.size}, F(1)={self.top:.6g})"


def kirchhoff_nodes(medium, panels):
    return _merged_grid(0.0, 1.0, panels, medium.capillary.nodes, medium.mobility.nodes)


def build_kirchhoff(medium, panels=DEFAULT_PANELS):
    """Tabulate the Kirchhoff transform of ``medium``.

    Nodes are ``panels`` uniform panels refined by every node of the medium's
    curves, so kinks of tabulated curves never fall inside a panel.
    """
    if panels < 64:
        raise ParameterError(f"panels must be >= 64, got {panels}")
    lam = medium.mobility
    cap = medium.capillary
    nodes = kirchhoff_nodes(medium, panels)
    values, right, left = tabulate_primitive(
        lambda s: lam(s) * cap.derivative(s), nodes,
        lambda s: lam(s) * cap.derivative(s, side="left"))
    steps = np.diff(values)
    tol = 1e-14 * max(1.0, float(np.max(np.abs(values))))
    bad = np.flatnonzero(steps < -tol)
    if bad.size:
        raise ConstructionError(
            f"Kirchhoff table decreases on panel {bad[0]}: invalid medium")
    values = np.maximum.accumulate(values)
    return KirchhoffTransform(monotone_hermite(nodes, values, right, left), panels, medium)


# -- truncations ----------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class TruncatedPair:
    """Truncated pressures of two overlapping media.

    ``alpha = max(alpha_1, alpha_2)`` and ``beta = min(beta_1, beta_2)``.  The
    truncation clamps each curve to ``[alpha, beta]``; for the usual ordering
    (medium 2 above medium 1) this is ``max(alpha, pi_1)`` and
    ``min(beta, pi_2)`` since the other clamp is inactive.
    """

    first: Medium
    second: Medium
    alpha: float
    beta: float
    alpha_min: float
    beta_max: float

    def media(self):
        return (self.first, self.second)

    def hat(self, i, s):
        cap = self.media()[i].capillary
        return np.clip(cap(s), self.alpha, self.beta)

    def breve_sets(self, i, s):
        """Value sets of the graph with the short end segments."""
        cap = self.media()[i].capillary
        s = np.asarray(s, dtype=float)
        p = cap(s)
        lo = np.where(s <= 0.0, self.alpha_min, np.where(s >= 1.0, cap.beta, p))
        hi = np.where(s >= 1.0, self.beta_max, np.where(s <= 0.0, cap.alpha, p))
        return lo, hi


def _ranges(m1, m2):
    a1, b1 = m1.capillary.alpha, m1.capillary.beta
    a2, b2 = m2.capillary.alpha, m2.capillary.beta
    return max(a1, a2), min(b1, b2), min(a1, a2), max(b1, b2)


def truncate_pair(m1, m2):
    alpha, beta, amin, bmax = _ranges(m1, m2)
    if not alpha < beta:
        raise NoOverlapError(
            f"capillary ranges do not overlap: max(alpha)={alpha} >= min(beta)={beta}")
    return TruncatedPair(m1, m2, alpha, beta, amin, bmax)


@dataclass
class EquivalenceReport:
    grid: int
    disagreements: int
    checked: int
    examples: list = field(default_factory=list)

    @property
    def passed(self):
        return self.disagreements == 0


def check_equivalence(m1, m2, grid=201, atol=INTERSECT_ATOL):
    """Compare the three interface conditions on a ``grid x grid`` lattice.

    Conditions: equal truncated pressures (to ``atol``), overlap of the full
    monotone graphs, overlap of the short-segment graphs.
    """
    pair = truncate_pair(m1, m2)
    s = np.linspace(0.0, 1.0, grid)
    s1 = s[:, None]
    s2 = s[None, :]
    hat1 = pair.hat(0, s)[:, None]
    hat2 = pair.hat(1, s)[None, :]
    c_hat = np.abs(hat1 - hat2) <= atol

    g1, g2 = MonotoneGraph.of(m1), MonotoneGraph.of(m2)
    lo1, hi1 = g1.value_sets(s)
    lo2, hi2 = g2.value_sets(s)
    c_graph = (np.maximum(lo1[:, None], lo2[None, :])
               <= np.minimum(hi1[:, None], hi2[None, :]) + atol)

    blo1, bhi1 = pair.breve_sets(0, s)
    blo2, bhi2 = pair.breve_sets(1, s)
    c_breve = (np.maximum(blo1[:, None], blo2[None, :])
               <= np.minimum(bhi1[:, None], bhi2[None, :]) + atol)

    bad = ~((c_hat == c_graph) & (c_graph == c_breve))
    idx = np.argwhere(bad)[:5]
    examples = [(float(s1[i, 0]), float(s2[0, j])) for i, j in idx]
    return EquivalenceReport(grid, int(bad.sum()), int(bad.size), examples)


# -- Psi ------------------------------------------------------------------------
@dataclass(eq=False)
class PsiFunction:
    """Tabulated ``p -> int_lower^p min_j lambda_j(graph_j^{-1}(a)) da``.

    ``tilde`` marks the variant defined on the whole working interval
    ``[min alpha_j, max beta_j]`` (zero below every graph).
    ``lipschitz_bound`` bounds the slope of ``Psi o hat(pi_i) o F_i^{-1}``.
    """

    lower: float
    upper: float
    curve: HermiteCurve
    tilde: bool = False
    pair: TruncatedPair | None = None
    lipschitz_bound: float = 1.0

    def __call__(self, p):
        return self.curve(p)

    @property
    def is_zero(self):
        return bool(np.all(self.curve.values == 0.0))


def _min_mobility(media, graphs):
    def integrand(p):
        out = None
        for m, g in zip(media, graphs):
            v = m.mobility(graph_inverse(g, p))
            out = v if out is None else np.minimum(out, v)
        return out
    return integrand


def tabulate_psi(media, lower, upper, panels=DEFAULT_PANELS, tilde=False, pair=None):
    graphs = [MonotoneGraph.of(m) for m in media]
    extra = [m.capillary(kirchhoff_nodes(m, panels)) for m in media]
    if upper <= lower:
        nodes = np.array([lower, lower + 1.0])
        curve = HermiteCurve(nodes, np.zeros(2), np.zeros(2))
        return PsiFunction(lower, upper, curve, tilde, pair)
    nodes = _merged_grid(lower, upper, panels, *extra)
    values, right, left = tabulate_primitive(_min_mobility(media, graphs), nodes)
    values = np.maximum.accumulate(values)
    return PsiFunction(lower, upper, monotone_hermite(nodes, values, right, left), tilde, pair)


def build_psi(m1, m2, panels=DEFAULT_PANELS, tilde=False):
    """Tabulate Psi on ``[alpha, beta]`` (or Psi-tilde with ``tilde=True``).

    Psi needs overlapping capillary ranges and raises ``NoOverlapError``
    otherwise.  Psi-tilde always exists; with degenerate mobilities it vanishes
    identically when the ranges do not overlap.
    """
    alpha, beta, amin, bmax = _ranges(m1, m2)
    if tilde:
        pair = truncate_pair(m1, m2) if alpha < beta else None
        return tabulate_psi((m1, m2), amin, bmax, panels, True, pair)
    pair = truncate_pair(m1, m2)
    return tabulate_psi((m1, m2), alpha, beta, panels, False, pair)
