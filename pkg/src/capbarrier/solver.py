"""Implicit finite-volume integrator for layered degenerate diffusion.

Inside a layer the two-point flux acts on the Kirchhoff variable ``F(u)``.
At an interface the two half-cell fluxes are balanced along the connected
monotone graphs: the connected pressure ``p`` solves

    (2/dxL) (F_L(uL) - F_L(gL^{-1}(p))) = (2/dxR) (F_R(gR^{-1}(p)) - F_R(uR)),

whose right side minus left side is nondecreasing in ``p``.  The single
resulting flux enters both neighbouring cell balances.  Time stepping is
backward Euler; each step is solved by a damped, projected Newton method
with a finite-difference tridiagonal Jacobian and a nonlinear Gauss-Seidel
fallback.
"""

from __future__ import annotations

import bisect
import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .domain import InitialData, State, project_initial
from .errors import ConstructionError, StepFailure
from .graphs import DEFAULT_PANELS, build_kirchhoff
from .media import HermiteCurve

__all__ = [
    "State",
    "InterfaceTrace",
    "StepRecord",
    "Trajectory",
    "InterfaceConnector",
    "Simulator",
    "interface_connect",
    "inner_flux",
]

logger = logging.getLogger(__name__)

MAX_HALVINGS = 20


@dataclass(frozen=True)
class InterfaceTrace:
    """Connected state at one interface.

    ``flux`` is the Kirchhoff-variable flux, positive from left to right.
    """

    index: int
    p: float
    u_minus: float
    u_plus: float
    flux: float
    t: float | None = None


@dataclass(frozen=True)
class StepRecord:
    t: float
    dt: float
    iterations: int
    residual: float
    method: str
    mass: float
    umin: float
    umax: float
    max_gradient: float


def inner_flux(F, uK, uK1, dxK, dxK1):
    """Two-point flux ``(F(uK) - F(uK1)) / ((dxK + dxK1) / 2)`` between cells of one layer."""
    return (F(uK) - F(uK1)) / (0.5 * (dxK + dxK1))


class _Side:
    """Capillary curve and Kirchhoff table of one interface side on shared nodes."""

    def __init__(self, medium, kirchhoff, weight):
        F = kirchhoff.curve
        cap = medium.capillary
        self.F = F
        self.pi = HermiteCurve(F.nodes, cap(F.nodes), cap.derivative(F.nodes),
                               left_slopes=cap.derivative(F.nodes, side="left"))
        self.w = weight
        self.alpha = self.pi._y[0]
        self.beta = self.pi._y[-1]
        self.top = F._y[-1]
        self.pressures = self.pi.values

    def at(self, j, p):
        """(saturation, F, dF/dp) at pressure ``p`` inside segment code ``j``."""
        if j == -1:
            return 0.0, 0.0, 0.0
        if j == -2:
            return 1.0, self.top, 0.0
        s = self.pi.solve_panel(j, p)
        dpi = self.pi.panel_slope(j, s)
        return s, self.F.panel_value(j, s), (self.F.panel_slope(j, s) / dpi if dpi > 0.0 else 0.0)


class InterfaceConnector:
    """Flux function of one interface for fixed media and cell widths."""

    def __init__(self, left, left_F, right, right_F, dxL, dxR, index=0):
        self.index = index
        self.left = _Side(left, left_F, 2.0 / float(dxL))
        self.right = _Side(right, right_F, 2.0 / float(dxR))
        L, R = self.left, self.right
        p = np.unique(np.concatenate((L.pressures, R.pressures)))
        HL = L.F(L.pi.invert(p))
        HR = R.F(R.pi.invert(p))
        HL[p <= L.alpha] = 0.0
        HL[p >= L.beta] = L.top
        HR[p <= R.alpha] = 0.0
        HR[p >= R.beta] = R.top
        Q = np.maximum.accumulate(L.w * HL + R.w * HR)
        self._p = p.tolist()
        self._Q = Q.tolist()
        self._jL = self._codes(L, p)
        self._jR = self._codes(R, p)
        self.scale = L.w * L.top + R.w * R.top

    @staticmethod
    def _codes(side, p):
        """Panel index of each segment ``[p_k, p_k+1]``; -1/-2 for the rays."""
        j = np.searchsorted(side.pressures, p, side="right") - 1
        codes = np.where(p < side.alpha, -1, np.where(p >= side.beta, -2, j))
        return codes.tolist()

    def _segment_of(self, p):
        k = bisect.bisect_right(self._p, p) - 1
        return min(max(k, 0), len(self._p) - 1)

    def _eval(self, k, p):
        sL, HL, dL = self.left.at(self._jL[k], p)
        sR, HR, dR = self.right.at(self._jR[k], p)
        return sL, HL, dL, sR, HR, dR

    def connect(self, uL, uR):
        """Return ``(p, u_minus, u_plus, flux)`` for cell values ``uL``, ``uR``."""
        L, R = self.left, self.right
        fL = L.F.scalar(uL)
        fR = R.F.scalar(uR)
        target = L.w * fL + R.w * fR
        Q = self._Q
        P = self._p
        lo = bisect.bisect_left(Q, target)
        hi = bisect.bisect_right(Q, target)
        if lo < hi:
            # target hit at breakpoints: the solution set is [P[lo], P[hi-1]]
            p = 0.5 * (P[lo] + P[hi - 1])
            k = self._segment_of(p)
        else:
            k = lo - 1
            if k < 0 or k >= len(P) - 1:
                raise ConstructionError("interface balance could not be bracketed")
            p = self._solve_segment(k, target)
        sL, HL, dL, sR, HR, dR = self._eval(k, p)
        if R.w * dR <= L.w * dL:
            flux = R.w * (HR - fR)
        else:
            flux = L.w * (fL - HL)
        return p, sL, sR, flux

    def _solve_segment(self, k, target):
        a, b = self._p[k], self._p[k + 1]
        qa = self._Q[k] - target
        qb = self._Q[k + 1] - target
        p = a - qa * (b - a) / (qb - qa)
        if not a < p < b:
            p = 0.5 * (a + b)
        Lw, Rw = self.left.w, self.right.w
        tol = 4e-16 * (abs(target) + 1e-300)
        for _ in range(200):
            _, HL, dL, _, HR, dR = self._eval(k, p)
            q = Lw * HL + Rw * HR - target
            if q == 0.0 or abs(q) <= tol:
                break
            if q < 0.0:
                a = p
            else:
                b = p
            d = Lw * dL + Rw * dR
            pn = p - q / d if d > 0.0 else a - 1.0
            if not a < pn < b:
                pn = 0.5 * (a + b)
            if pn == p or b - a <= 4e-16 * max(abs(a), abs(b), 1.0):
                p = pn
                break
            p = pn
        return p

    def trace(self, uL, uR, t=None):
        p, sL, sR, flux = self.connect(uL, uR)
        return InterfaceTrace(self.index, p, sL, sR, flux, t)


def interface_connect(left, right, uL, uR, dxL, dxR):
    """Connect two cells across an interface.

    ``left`` and ``right`` are ``(medium, kirchhoff)`` pairs (the transform is
    built when ``None``).  Returns an ``InterfaceTrace``.
    """
    (mL, FL), (mR, FR) = left, right
    FL = FL or build_kirchhoff(mL)
    FR = FR or build_kirchhoff(mR)
    return InterfaceConnector(mL, FL, mR, FR, dxL, dxR).trace(float(uL), float(uR))


@dataclass(eq=False)
class Trajectory:
    """States at output times plus per-step interface and solver records."""

    mesh: object
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    interfaces: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    def append(self, t, u):
        self.times.append(float(t))
        self.states.append(np.array(u, dtype=float))

    @property
    def initial(self):
        return self.states[0]

    @property
    def final(self):
        return self.states[-1]

    def masses(self):
        return np.array([self.mesh.mass(u) for u in self.states])

    def write_states(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "u"])
            for t, u in zip(self.times, self.states):
                for x, v in zip(self.mesh.centers, u):
                    w.writerow([_fmt(t), _fmt(x), _fmt(v)])

    def write_interfaces(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "interface_index", "p", "u_minus", "u_plus", "flux"])
            for r in self.interfaces:
                w.writerow([_fmt(r.t), r.index, _fmt(r.p), _fmt(r.u_minus),
                            _fmt(r.u_plus), _fmt(r.flux)])


def _fmt(v):
    return format(float(v), ".17g")


class Simulator:
    """Backward-Euler finite-volume solver on a layered mesh.

    Parameters
    ----------
    mesh : Mesh
    panels : int
        Quadrature panels of the Kirchhoff tables.
    tol : float
        Relative residual tolerance; a step is converged when
        ``max|R| <= tol * max(phi dx) / dt``.
    """

    def __init__(self, mesh, panels=DEFAULT_PANELS, tol=1e-12, max_newton=40,
                 max_sweeps=3000, kirchhoff=None):
        self.mesh = mesh
        self.tol = tol
        self.max_newton = max_newton
        self.max_sweeps = max_sweeps
        cache = dict(kirchhoff or {})
        self.transforms = []
        for layer in mesh.layout.layers:
            key = id(layer.medium)
            if key not in cache:
                cache[key] = build_kirchhoff(layer.medium, panels)
            self.transforms.append(cache[key])
        self._cache = cache
        self.pv = mesh.porosity * mesh.widths
        w = mesh.widths
        self._inv_half = 1.0 / (0.5 * (w[:-1] + w[1:]))
        self.connectors = []
        for j, (cl, cr) in enumerate(mesh.interface_cells):
            kl, kr = mesh.layer_of_cell[cl], mesh.layer_of_cell[cr]
            self.connectors.append(InterfaceConnector(
                mesh.layout.layers[kl].medium, self.transforms[kl],
                mesh.layout.layers[kr].medium, self.transforms[kr],
                w[cl], w[cr], index=j))
        self._iface = [(cl, cr, c) for (cl, cr), c in zip(mesh.interface_cells, self.connectors)]
        # per-cell face lookup for the Gauss-Seidel fallback
        n = mesh.size
        self._face_kind = np.zeros(n + 1, dtype=int)  # 0 boundary, 1 inner, 2 interface
        self._face_kind[1:n] = 1
        self._face_conn = {}
        for cl, cr, c in self._iface:
            self._face_kind[cr] = 2
            self._face_conn[cr] = c
        self._cell_F = [self.transforms[k] for k in mesh.layer_of_cell]

    # -- residual -----------------------------------------------------------
    def kirchhoff_values(self, u):
        Fc = np.empty_like(u)
        for sl, F in zip(self.mesh.layer_slices, self.transforms):
            Fc[sl] = F(u[sl])
        return Fc

    def face_fluxes(self, u):
        n = u.size
        Fc = self.kirchhoff_values(u)
        face = np.zeros(n + 1)
        face[1:n] = (Fc[:-1] - Fc[1:]) * self._inv_half
        for cl, cr, c in self._iface:
            face[cr] = c.connect(float(u[cl]), float(u[cr]))[3]
        return face

    def residual(self, u, uold, acc):
        face = self.face_fluxes(u)
        return acc * (u - uold) + face[1:] - face[:-1]

    def traces(self, u, t=None):
        return [c.trace(float(u[cl]), float(u[cr]), t) for cl, cr, c in self._iface]

    # -- Jacobian -------------------------------------------------------------
    def _jacobian(self, u, R, uold, acc):
        n = u.size
        ab = np.zeros((3, n))
        delta = 1e-7 * (1.0 + np.abs(u))
        delta = np.where(u + delta <= 1.0, delta, -delta)
        idx = np.arange(n)
        for color in range(3):
            cols = idx[color::3]
            up = u.copy()
            up[cols] += delta[cols]
            dR = (self.residual(up, uold, acc) - R)
            d = delta[cols]
            ab[1, cols] = dR[cols] / d
            left = cols[cols > 0]
            ab[0, left] = dR[left - 1] / delta[left]        # J[i-1, i]
            right = cols[cols < n - 1]
            ab[2, right] = dR[right + 1] / delta[right]     # J[i+1, i]
        return ab

    # -- one step -------------------------------------------------------------
    def step(self, state, dt):
        """Advance ``state`` by ``dt``; returns ``(State, info dict)``."""
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        uold = np.asarray(state.u, dtype=float)
        acc = self.pv / dt
        tol = self.tol * float(np.max(acc))
        u, R, its, ok = self._newton(uold.copy(), uold, acc, tol)
        method = "newton"
        if not ok:
            u, R, sweeps, ok = self._gauss_seidel(u, uold, acc, tol)
            its += sweeps
            method = "gauss-seidel"
        res = float(np.max(np.abs(R)))
        if not ok:
            raise StepFailure(
                f"nonlinear solve stalled at t={state.t} (residual {res:.3e}, tolerance {tol:.3e})",
                time=state.t, dt=dt, diagnostics={"residual": res, "iterations": its})
        return State(state.t + dt, u), {"iterations": its, "residual": res, "method": method}

    def _newton(self, u, uold, acc, tol):
        R = self.residual(u, uold, acc)
        rn = float(np.max(np.abs(R)))
        for it in range(self.max_newton):
            if rn <= tol:
                return u, R, it, True
            ab = self._jacobian(u, R, uold, acc)
            try:
                du = solve_banded((1, 1), ab, -R)
            except (np.linalg.LinAlgError, ValueError):
                return u, R, it, False
            if not np.all(np.isfinite(du)):
                return u, R, it, False
            lam = 1.0
            for _ in range(16):
                ut = np.clip(u + lam * du, 0.0, 1.0)
                Rt = self.residual(ut, uold, acc)
                rt = float(np.max(np.abs(Rt)))
                if rt < rn:
                    break
                lam *= 0.5
            else:
                return u, R, it, False
            u, R, rn = ut, Rt, rt
        return u, R, self.max_newton, rn <= tol

    def _cell_residual(self, K, x, u, uold, acc):
        kind = self._face_kind
        n = u.size
        FK = self._cell_F[K].curve.scalar(x)
        if kind[K] == 1:
            west = (self._cell_F[K - 1].curve.scalar(float(u[K - 1])) - FK) * self._inv_half[K - 1]
        elif kind[K] == 2:
            west = self._face_conn[K].connect(float(u[K - 1]), x)[3]
        else:
            west = 0.0
        if K + 1 < n and kind[K + 1] == 1:
            east = (FK - self._cell_F[K + 1].curve.scalar(float(u[K + 1]))) * self._inv_half[K]
        elif K + 1 < n and kind[K + 1] == 2:
            east = self._face_conn[K + 1].connect(x, float(u[K + 1]))[3]
        else:
            east = 0.0
        return acc[K] * (x - uold[K]) + east - west

    def _gauss_seidel(self, u, uold, acc, tol):
        """Nonlinear Gauss-Seidel with per-cell bisection (monotone in each cell)."""
        u = np.clip(u, 0.0, 1.0)
        R = self.residual(u, uold, acc)
        for sweep in range(1, self.max_sweeps + 1):
            for K in range(u.size):
                lo, hi = 0.0, 1.0
                if self._cell_residual(K, 0.0, u, uold, acc) >= 0.0:
                    u[K] = 0.0
                    continue
                if self._cell_residual(K, 1.0, u, uold, acc) <= 0.0:
                    u[K] = 1.0
                    continue
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if mid <= lo or mid >= hi:
                        break
                    if self._cell_residual(K, mid, u, uold, acc) < 0.0:
                        lo = mid
                    else:
                        hi = mid
                u[K] = 0.5 * (lo + hi)
            R = self.residual(u, uold, acc)
            if float(np.max(np.abs(R))) <= tol:
                return u, R, sweep, True
        return u, R, self.max_sweeps, False

    # -- time loop --------------------------------------------------------------
    def _advance(self, state, dt, traj, depth=0):
        try:
            new, info = self.step(state, dt)
        except StepFailure:
            if depth >= MAX_HALVINGS:
                raise
            logger.info("halving dt=%g at t=%g", dt, state.t)
            mid = self._advance(state, 0.5 * dt, traj, depth + 1)
            return self._advance(mid, 0.5 * dt, traj, depth + 1)
        u = new.u
        face = self.face_fluxes(u)
        traj.steps.append(StepRecord(
            new.t, dt, info["iterations"], info["residual"], info["method"],
            self.mesh.mass(u), float(np.min(u)), float(np.max(u)),
            float(np.max(np.abs(face))) if face.size else 0.0))
        traj.interfaces.extend(self.traces(u, new.t))
        return new

    def run(self, initial, dt, t_end, outputs=None):
        """Integrate from ``initial`` (``InitialData``, ``State`` or array) to ``t_end``.

        ``outputs`` lists the output times (default ``[t_end]``); every output
        interval is split into equal steps no longer than ``dt``, so outputs are
        hit exactly.  The first stored state is the projected initial data.
        """
        if isinstance(initial, InitialData):
            state = project_initial(initial, self.mesh)
        elif isinstance(initial, State):
            state = initial
        else:
            state = State(0.0, np.asarray(initial, dtype=float))
        traj = Trajectory(self.mesh)
        traj.append(state.t, state.u)
        if outputs is None:
            outputs = [t_end] if t_end > state.t else []
        outputs = sorted(float(t) for t in outputs if t > state.t)
        for t_out in outputs:
            span = t_out - state.t
            nsteps = max(1, int(np.ceil(span / dt - 1e-9)))
            h = span / nsteps
            for m in range(nsteps):
                state = self._advance(state, h, traj)
            state = State(t_out, state.u)
            traj.append(t_out, state.u)
        return traj
