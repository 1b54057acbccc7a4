"""The verification suite: ten property checks on the shipped presets.

``run_acceptance(seed)`` returns one ``CriterionResult`` per check, in
order.  Tolerances do not depend on the seed; the seed only drives the
random media and initial data of checks 1 and 4.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import (check_conservation, check_contraction, check_flux_bound,
                       check_maximum_principle, check_w_continuity, mesh_study, run_many,
                       sola_study, summary_line)
from .config import load_preset
from .domain import InitialData, build_mesh, project_initial
from .graphs import build_kirchhoff, check_equivalence
from .media import CapillaryPressureCurve, Medium, MobilityCurve
from .regularization import regularize_media

__all__ = ["CriterionResult", "Suite", "run_acceptance", "CRITERIA"]

PRESETS = ("heat", "overlap", "barrier", "three-layer")


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str = ""
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return summary_line(f"[{self.number}] {self.name}", self.passed, self.detail)


def _random_pair(rng):
    """Two media with random quadratic curves and overlapping capillary ranges."""
    def medium():
        b = rng.uniform(0.5, 2.0)
        c = rng.uniform(-0.2, 0.5) * b
        lam = rng.uniform(0.5, 4.0)
        return float(rng.uniform(0.1, 0.5)), [0.0, lam, -lam], [b, c]

    (phi1, lam1, cap1), (phi2, lam2, cap2) = medium(), medium()
    w1, w2 = sum(cap1), sum(cap2)
    # alpha_2 = shift; overlap needs -w2 < shift < w1
    shift = float(rng.uniform(-0.8 * w2, 0.8 * w1))
    m1 = Medium(phi1, MobilityCurve.from_polynomial(lam1),
                CapillaryPressureCurve.from_polynomial([0.0] + cap1))
    m2 = Medium(phi2, MobilityCurve.from_polynomial(lam2),
                CapillaryPressureCurve.from_polynomial([shift] + cap2))
    return m1, m2


def _random_state(rng, mesh, knots=5):
    """Piecewise-linear random saturations, independent in each layer."""
    u = np.empty(mesh.size)
    for sl in mesh.layer_slices:
        x = mesh.centers[sl]
        xs = np.linspace(x[0], x[-1], knots)
        u[sl] = np.interp(x, xs, rng.uniform(0.0, 1.0, knots))
    return u


class Suite:
    """Runs the checks, sharing preset trajectories between them."""

    def __init__(self, seed=0, jobs=1):
        self.seed = int(seed)
        self.jobs = int(jobs)
        self._runs = None

    def rng(self, number):
        return np.random.default_rng([self.seed, number])

    # shared preset runs (about 10^3 steps each)
    def preset_runs(self):
        if self._runs is None:
            cfgs = [load_preset(name) for name in PRESETS]
            tasks = []
            for cfg in cfgs:
                mesh = cfg.mesh()
                u = project_initial(cfg.initial_data(), mesh).u
                tasks.append((mesh, u, cfg.dt, cfg.T, cfg.outputs, cfg.panels))
            trajs = run_many(tasks, self.jobs)
            self._runs = {name: (cfg, tr) for name, cfg, tr in zip(PRESETS, cfgs, trajs)}
        return self._runs

    # -- 1 ------------------------------------------------------------------------
    def equivalence(self):
        cfg = load_preset("overlap")
        pairs = [tuple(cfg.layer_media())]
        rng = self.rng(1)
        pairs += [_random_pair(rng) for _ in range(5)]
        reports = [check_equivalence(a, b, grid=201) for a, b in pairs]
        bad = sum(r.disagreements for r in reports)
        return bad == 0, f"{bad} disagreements over {len(pairs)} pairs x 201^2", {
            "disagreements": bad}

    # -- 2 ------------------------------------------------------------------------
    def conservation(self):
        worst_step = worst_total = 0.0
        for cfg, tr in self.preset_runs().values():
            rep = check_conservation(tr)
            worst_step = max(worst_step, rep.step_relative)
            worst_total = max(worst_total, rep.cumulative_relative)
        ok = worst_step <= 1e-12 and worst_total <= 1e-10
        return ok, f"step drift {worst_step:.3e}, cumulative {worst_total:.3e}", {
            "step": worst_step, "cumulative": worst_total}

    # -- 3 ------------------------------------------------------------------------
    def maximum_principle(self):
        lo, hi = np.inf, -np.inf
        for cfg, tr in self.preset_runs().values():
            rep = check_maximum_principle(tr)
            lo, hi = min(lo, rep.umin), max(hi, rep.umax)
        ok = lo >= -1e-9 and hi <= 1.0 + 1e-9
        return ok, f"min u {lo:.3e}, max u {hi:.17g}", {"umin": lo, "umax": hi}

    # -- 4 ------------------------------------------------------------------------
    def contraction(self, pairs=20):
        rng = self.rng(4)
        worst = {}
        details = []
        for name in ("overlap", "barrier"):
            cfg = load_preset(name)
            mesh = build_mesh(cfg.layout(), [32] * len(cfg.layers))
            outputs = [0.01, 0.02, 0.03, 0.04, 0.05]
            tasks = []
            for _ in range(pairs):
                for u in (_random_state(rng, mesh), _random_state(rng, mesh)):
                    tasks.append((mesh, u, 1e-3, 0.05, outputs, cfg.panels))
            trajs = run_many(tasks, self.jobs)
            vp = vn = 0.0
            for a, b in zip(trajs[0::2], trajs[1::2]):
                rep = check_contraction(a, b)
                vp = max(vp, rep.violation_positive)
                vn = max(vn, rep.violation_negative)
            worst[name] = (vp, vn, mesh.pore_volume)
            details.append(f"{name} +{vp:.2e}/-{vn:.2e}")
        ok = all(max(vp, vn) <= 1e-8 * pv for vp, vn, pv in worst.values())
        return ok, ", ".join(details), {"violations": worst}

    # -- 5 ------------------------------------------------------------------------
    def heat(self):
        cfg = load_preset("heat")
        _, tr = self.preset_runs()["heat"]
        x = tr.mesh.centers
        err = max(float(np.max(np.abs(u - (0.5 + 0.25 * np.exp(-np.pi ** 2 * t)
                                             * np.cos(np.pi * x)))))
                  for t, u in zip(tr.times, tr.states))
        table = mesh_study(cfg.layout(), [16], cfg.initial_data(), 1.6e-3, cfg.T, levels=3,
                           panels=cfg.panels, jobs=self.jobs)
        ratio = table.ratios[-1]
        ok = err <= 5e-3 and 3.2 <= ratio <= 4.8
        return ok, f"Linf error {err:.3e}, self-convergence ratio {ratio:.3f}", {
            "error": err, "ratio": ratio, "distances": table.distances}

    # -- 6 ------------------------------------------------------------------------
    def trapping(self):
        cfg, tr = self.preset_runs()["barrier"]
        mesh = tr.mesh
        left = mesh.layer_slices[0]
        w = (mesh.porosity * mesh.widths)[left]
        m0 = float(np.sum(w * tr.initial[left]))
        drift = max(abs(float(np.sum(w * u[left])) - m0) for u in tr.states) / m0
        fmax = max(abs(r.flux) for r in tr.interfaces)
        # expulsion: wet fine layer next to a partially saturated coarse layer
        u = np.where(mesh.layer_of_cell == 0, 0.5, 0.3)
        ex = run_many([(mesh, u, cfg.dt, 0.25, [0.05, 0.1, 0.15, 0.2, 0.25], cfg.panels)])[0]
        fpos = max(r.flux for r in ex.interfaces)
        ok = fmax <= 1e-12 and drift <= 1e-10 and fpos <= 1e-12
        return ok, (f"max |flux| {fmax:.3e}, left mass drift {drift:.3e}, "
                    f"expulsion max flux {fpos:.3e}"), {
            "max_flux": fmax, "drift": drift, "expulsion_max_flux": fpos}

    # -- 7 ------------------------------------------------------------------------
    def ladder(self):
        ok = True
        parts = []
        for name in ("overlap", "barrier"):
            media = load_preset(name).layer_media()
            fams = [regularize_media(media, n) for n in (10, 40, 160)]
            inv = all(all(v[0] for v in f.check_invariants().values()) for f in fams)
            A = [f.A for f in fams]
            B = [f.B for f in fams]
            ends = all(a > b for a, b in zip(A, A[1:])) and all(a < b for a, b in zip(B, B[1:]))
            dec = True
            for i in range(len(media)):
                d = [f.kirchhoff_distance(i)[0] for f in fams]
                dec &= all(a > b for a, b in zip(d, d[1:]))
                parts.append(f"{name}[{i}] " + "/".join(f"{v:.2e}" for v in d))
            ok &= inv and ends and dec
        return ok, "max|F_n - F|: " + ", ".join(parts), {}

    # -- 8 ------------------------------------------------------------------------
    def sola(self):
        cfg = load_preset("overlap")
        layout = cfg.layout()

        def rule(x):
            x = np.asarray(x, dtype=float)
            return np.where(x < -0.5, 0.3, np.where(x < 0.0, 0.7, 0.2))
        u0 = InitialData(rule, traces=((0.7, 0.2),), meta={"kind": "steps"})
        rep = sola_study(layout, [64, 64], u0, [10, 40, 160], 1e-3, 0.1,
                         outputs=[0.02, 0.05, 0.1], panels=cfg.panels, jobs=self.jobs)
        ok = rep.passed()
        d = "/".join(f"{v:.3e}" for v in rep.distances)
        d0 = "/".join(f"{v:.3e}" for v in rep.initial_distances)
        return ok, f"distances {d}, initial {d0}", {
            "distances": rep.distances, "initial": rep.initial_distances}

    # -- 9 ------------------------------------------------------------------------
    def flux_bound(self):
        cfg = load_preset("overlap")
        layout = cfg.layout()
        u0 = cfg.initial_data(layout)
        mesh = build_mesh(layout, [64, 64])
        tr = run_many([(mesh, project_initial(u0, mesh).u, 1e-3, 0.2, [0.1, 0.2], cfg.panels)])[0]
        transforms = [build_kirchhoff(m, cfg.panels) for m in layout.media]
        rep = check_flux_bound(tr, u0, transforms=transforms)
        return rep.passed(), (f"max gradient {rep.max_gradient:.4g} vs bound {rep.bound:.4g} "
                              f"(initial {rep.initial_gradient:.4g})"), {
            "max_gradient": rep.max_gradient, "bound": rep.bound}

    # -- 10 -----------------------------------------------------------------------
    def w_continuity(self):
        runs = self.preset_runs()
        rep = check_w_continuity(runs["overlap"][1])
        deg = check_w_continuity(runs["barrier"][1])
        ok = (not rep.degenerate) and rep.max_jump <= 1e-10 and deg.degenerate
        return ok, f"overlap max jump {rep.max_jump:.3e}; barrier: {deg.marker}", {
            "max_jump": rep.max_jump, "barrier_marker": deg.marker}


CRITERIA = [
    (1, "graph/truncation equivalence", Suite.equivalence),
    (2, "conservation", Suite.conservation),
    (3, "maximum principle", Suite.maximum_principle),
    (4, "L1 contraction", Suite.contraction),
    (5, "heat oracle", Suite.heat),
    (6, "trapping", Suite.trapping),
    (7, "regularization ladder", Suite.ladder),
    (8, "SOLA study", Suite.sola),
    (9, "flux bound", Suite.flux_bound),
    (10, "w-continuity", Suite.w_continuity),
]


def run_acceptance(seed=0, jobs=1, only=None, suite=None):
    """Run the checks (all, or the numbers in ``only``) and return their results."""
    suite = Suite(seed, jobs) if suite is None else suite
    out = []
    for number, name, fn in CRITERIA:
        if only is not None and number not in only:
            continue
        t0 = time.perf_counter()
        ok, detail, metrics = fn(suite)
        out.append(CriterionResult(number, name, bool(ok), detail, metrics,
                                   time.perf_counter() - t0))
    return out
