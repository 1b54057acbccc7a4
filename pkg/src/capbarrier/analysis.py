"""Diagnostics computed from trajectories.

Every function here is pure: it reads trajectories, meshes and media and
returns a report object.  Discrete integrals are cell sums weighted by
``phi * dx`` and "sup over time" means max over output times.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import build_mesh, project_initial
from .errors import ComparisonError, NoOverlapError
from .graphs import DEFAULT_PANELS, build_kirchhoff, build_psi
from .regularization import approximate_initial, regularize_media
from .solver import Simulator

__all__ = [
    "ContractionReport",
    "WContinuityReport",
    "FluxBoundReport",
    "ConservationReport",
    "RangeReport",
    "StudyTable",
    "SolaReport",
    "check_contraction",
    "check_w_continuity",
    "check_flux_bound",
    "check_conservation",
    "check_maximum_principle",
    "kirchhoff_gradient_sup",
    "weighted_l1",
    "sola_study",
    "mesh_study",
    "run_many",
    "summary_line",
    "write_csv",
]

DEGENERATE = "degenerate: Psi-tilde is identically 0"


def summary_line(name, passed, detail=""):
    """One greppable line: ``PASS name: detail`` or ``FAIL name: detail``."""
    tag = "PASS" if passed else "FAIL"
    return f"{tag} {name}: {detail}" if detail else f"{tag} {name}"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def weighted_l1(mesh, u, v):
    """``sum phi_K dx_K |u_K - v_K|``."""
    return float(np.sum(mesh.porosity * mesh.widths * np.abs(np.asarray(u) - np.asarray(v))))


# -- contraction ------------------------------------------------------------------
@dataclass
class ContractionReport:
    times: list
    positive: list
    negative: list
    pore_volume: float

    @property
    def violation_positive(self):
        return max(p - self.positive[0] for p in self.positive)

    @property
    def violation_negative(self):
        return max(q - self.negative[0] for q in self.negative)

    @property
    def max_violation(self):
        return max(self.violation_positive, self.violation_negative)

    def passed(self, rtol=1e-8):
        return self.max_violation <= rtol * self.pore_volume

    def rows(self):
        return [(t, p, q) for t, p, q in zip(self.times, self.positive, self.negative)]


def check_contraction(traj_u, traj_v, mesh=None):
    """Positive and negative parts of ``u - v`` at every output time.

    The tolerance base is the pore volume ``sum phi dx``, the largest mass
    the domain can hold.
    """
    mesh = traj_u.mesh if mesh is None else mesh
    if traj_u.mesh is not traj_v.mesh and (
            traj_u.mesh.size != traj_v.mesh.size
            or not np.array_equal(traj_u.mesh.edges, traj_v.mesh.edges)):
        raise ComparisonError("trajectories live on different meshes")
    if len(traj_u.times) != len(traj_v.times) or not np.allclose(
            traj_u.times, traj_v.times, rtol=0.0, atol=1e-12):
        raise ComparisonError("trajectories have different output times")
    w = mesh.porosity * mesh.widths
    pos, neg = [], []
    for u, v in zip(traj_u.states, traj_v.states):
        d = u - v
        pos.append(float(np.sum(w * np.maximum(d, 0.0))))
        neg.append(float(np.sum(w * np.maximum(-d, 0.0))))
    return ContractionReport(list(traj_u.times), pos, neg, mesh.pore_volume)


# -- w-continuity --------------------------------------------------------------------
@dataclass
class WContinuityReport:
    times: list = field(default_factory=list)
    jumps: list = field(default_factory=list)
    degenerate: bool = False

    @property
    def marker(self):
        return DEGENERATE if self.degenerate else None

    @property
    def max_jump(self):
        return max(self.jumps) if self.jumps else 0.0

    def passed(self, tol=1e-10):
        return self.degenerate or self.max_jump <= tol


def check_w_continuity(traj, psi=None, mesh=None, interface=0):
    """Jump of ``Psi(hat pi)`` across one interface at every recorded time.

    ``psi`` defaults to the Psi function of the two media at the interface.
    Media without overlapping ranges give a degenerate report.
    """
    mesh = traj.mesh if mesh is None else mesh
    cl, cr = mesh.interface_cells[interface]
    mL = mesh.layout.layers[mesh.layer_of_cell[cl]].medium
    mR = mesh.layout.layers[mesh.layer_of_cell[cr]].medium
    if psi is None:
        try:
            psi = build_psi(mL, mR)
        except NoOverlapError:
            return WContinuityReport(degenerate=True)
    if psi.pair is None or psi.is_zero:
        return WContinuityReport(degenerate=True)
    pair = psi.pair
    per_time = {}
    for r in traj.interfaces:
        if r.index != interface:
            continue
        jump = abs(float(psi(pair.hat(0, r.u_minus))) - float(psi(pair.hat(1, r.u_plus))))
        per_time[r.t] = max(jump, per_time.get(r.t, 0.0))
    times = sorted(per_time)
    return WContinuityReport(times, [per_time[t] for t in times])


# -- flux bound ------------------------------------------------------------------------
def kirchhoff_gradient_sup(u0, layout, transforms, points=2001):
    """Max over layers of ``|d/dx F_i(u0)|`` by difference quotients.

    Each layer is sampled at ``points`` uniform abscissae, the ends pulled
    inward by ``1e-12`` of the layer length so that only that layer's data
    are seen.
    """
    edges = layout.edges
    best = 0.0
    for i, F in enumerate(transforms):
        a, b = edges[i], edges[i + 1]
        x = np.linspace(a, b, points)
        x[0] += 1e-12 * (b - a)
        x[-1] -= 1e-12 * (b - a)
        f = F(np.asarray(u0(x), dtype=float))
        best = max(best, float(np.max(np.abs(np.diff(f) / np.diff(x)))))
    return best


@dataclass
class FluxBoundReport:
    max_gradient: float
    initial_gradient: float
    slack: float = 1.1

    @property
    def bound(self):
        return self.slack * 2.0 * self.initial_gradient

    @property
    def margin(self):
        return self.bound - self.max_gradient

    def passed(self):
        return self.max_gradient <= self.bound


def check_flux_bound(traj, u0, media=None, transforms=None, slack=1.1, points=2001):
    """Largest discrete face flux of the run against ``2 max_i |d/dx F_i(u0)|``.

    Inner faces carry Kirchhoff differences over the centre distance;
    interface faces carry the connected half-cell flux.
    """
    layout = traj.mesh.layout
    if transforms is None:
        media = layout.media if media is None else media
        transforms = [build_kirchhoff(m) for m in media]
    g0 = kirchhoff_gradient_sup(u0, layout, transforms, points)
    gmax = max((s.max_gradient for s in traj.steps), default=0.0)
    return FluxBoundReport(gmax, g0, slack)


# -- audits -------------------------------------------------------------------------------
@dataclass
class ConservationReport:
    max_step_drift: float
    cumulative_drift: float
    pore_volume: float

    @property
    def step_relative(self):
        return self.max_step_drift / self.pore_volume

    @property
    def cumulative_relative(self):
        return self.cumulative_drift / self.pore_volume

    def passed(self, step_tol=1e-12, total_tol=1e-10):
        return self.step_relative <= step_tol and self.cumulative_relative <= total_tol


def check_conservation(traj):
    mesh = traj.mesh
    m0 = mesh.mass(traj.initial)
    masses = np.array([m0] + [s.mass for s in traj.steps])
    step = float(np.max(np.abs(np.diff(masses)))) if masses.size > 1 else 0.0
    total = float(np.max(np.abs(masses - m0)))
    return ConservationReport(step, total, mesh.pore_volume)


@dataclass
class RangeReport:
    umin: float
    umax: float

    def passed(self, tol=1e-9):
        return self.umin >= -tol and self.umax <= 1.0 + tol


def check_maximum_principle(traj):
    lo = min([float(np.min(u)) for u in traj.states] + [s.umin for s in traj.steps])
    hi = max([float(np.max(u)) for u in traj.states] + [s.umax for s in traj.steps])
    return RangeReport(lo, hi)


# -- parallel runs ---------------------------------------------------------------------------
def _run_task(task):
    mesh, u, dt, t_end, outputs, panels = task
    return Simulator(mesh, panels=panels).run(np.asarray(u), dt, t_end, outputs)


def run_many(tasks, jobs=1):
    """Run ``(mesh, u, dt, t_end, outputs, panels)`` tasks, in order.

    With ``jobs > 1`` the tasks go to a process pool; results keep task order.
    """
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_task, tasks))


# -- studies -------------------------------------------------------------------------------------
@dataclass
class StudyTable:
    """Rows ``(level, distance, ratio)``; ``ratio`` is previous over current distance."""

    levels: list
    distances: list

    @property
    def ratios(self):
        out = [None]
        for a, b in zip(self.distances[:-1], self.distances[1:]):
            if a is None or b is None:
                out.append(None)
            else:
                out.append(a / b if b > 0.0 else math.inf)
        return out[:len(self.distances)]

    def rows(self):
        return list(zip(self.levels, self.distances, self.ratios))

    def write(self, path):
        write_csv(path, ["level", "distance", "ratio"], self.rows())


@dataclass
class SolaReport:
    n_list: list
    distances: list
    initial_distances: list
    final_states: list = field(default_factory=list)

    def table(self):
        return StudyTable(list(self.n_list[1:]), list(self.distances))

    @property
    def bounded(self):
        return all(d <= d0 + 1e-8 for d, d0 in zip(self.distances, self.initial_distances))

    @property
    def nonincreasing(self):
        return all(b <= a + 1e-12 for a, b in zip(self.distances[:-1], self.distances[1:]))

    def passed(self):
        return self.bounded and self.nonincreasing


def sola_study(layout, cells, u0, n_list, dt, t_end, outputs=None,
               panels=DEFAULT_PANELS, jobs=1, K=None):
    """Runs from the regularized initial data ``u0_n`` for each ``n``.

    Every run uses the original media; only the initial data depend on ``n``.
    Distances are sup over output times of the weighted L1 distance between
    consecutive runs; initial distances are taken between projected data.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 2:
        raise ValueError("a study needs at least two indices")
    mesh = build_mesh(layout, cells)
    starts = []
    for n in n_list:
        fam = regularize_media(layout.media, n, K=K, panels=panels)
        starts.append(project_initial(approximate_initial(u0, fam, layout), mesh).u)
    outputs = [t_end] if outputs is None else outputs
    trajs = run_many([(mesh, u, dt, t_end, outputs, panels) for u in starts], jobs)
    dist, dist0 = [], []
    for a, b, ua, ub in zip(trajs[:-1], trajs[1:], starts[:-1], starts[1:]):
        dist.append(max(weighted_l1(mesh, x, y) for x, y in zip(a.states[1:], b.states[1:])))
        dist0.append(weighted_l1(mesh, ua, ub))
    return SolaReport(n_list, dist, dist0, [t.final for t in trajs])


def _restrict(u, factor):
    return u.reshape(-1, factor).mean(axis=1)


def mesh_study(layout, cells, u0, dt, t_end, levels=3, panels=DEFAULT_PANELS, jobs=1,
               exact=None):
    """Refine ``h -> h/2`` and ``dt -> dt/4`` ``levels - 1`` times.

    Without ``exact`` the distance of level ``l`` is the weighted L1 distance
    between level ``l`` and the restriction of level ``l + 1``.  With
    ``exact(mesh, t)`` returning reference cell averages it is the max error
    against those.
    """
    meshes = [build_mesh(layout, [c * 2 ** l for c in cells]) for l in range(levels)]
    tasks = [(m, project_initial(u0, m).u, dt / 4 ** l, t_end, [t_end], panels)
             for l, m in enumerate(meshes)]
    trajs = run_many(tasks, jobs)
    if exact is not None:
        dist = [float(np.max(np.abs(tr.final - exact(m, t_end)))) for m, tr in zip(meshes, trajs)]
        return StudyTable([m.size for m in meshes], dist)
    if levels == 1:
        return StudyTable([meshes[0].size], [None])
    dist = []
    for l in range(levels - 1):
        coarse = trajs[l].final
        fine = np.concatenate([_restrict(trajs[l + 1].final[sl], 2)
                               for sl in meshes[l + 1].layer_slices])
        dist.append(weighted_l1(meshes[l], coarse, fine))
    return StudyTable([m.size for m in meshes[:-1]], dist)
