import csv

import numpy as np
import pytest

from capbarrier.domain import DomainLayout, InitialData, State, build_mesh, project_initial
from capbarrier.errors import StepFailure
from capbarrier.graphs import MonotoneGraph, build_kirchhoff, graphs_intersect
from capbarrier.solver import InterfaceConnector, Simulator, inner_flux, interface_connect

from conftest import make_medium


def test_inner_flux_two_point(coarse):
    F = build_kirchhoff(coarse)
    assert inner_flux(F, 1.0, 0.0, 0.1, 0.1) == pytest.approx((2.0 / 3.0) / 0.1)
    assert inner_flux(F, 0.5, 0.5, 0.1, 0.3) == 0.0


def test_connect_identical_linear_media(unit):
    tr = interface_connect((unit, None), (unit, None), 1.0, 0.0, 0.5, 0.25)
    # 4 (1 - p) = 8 p
    assert tr.p == pytest.approx(1.0 / 3.0, abs=1e-14)
    assert tr.flux == pytest.approx(8.0 / 3.0, abs=1e-13)
    assert tr.u_minus == tr.u_plus


def test_connect_across_barrier(coarse, tight):
    tr = interface_connect((coarse, None), (tight, None), 1.0, 0.0, 0.1, 0.1)
    assert tr.flux == 0.0
    assert 1.0 <= tr.p <= 2.0
    assert (tr.u_minus, tr.u_plus) == (1.0, 0.0)
    # the tight side only ever drains into the coarse side
    tr = interface_connect((coarse, None), (tight, None), 0.8, 0.1, 0.1, 0.1)
    assert tr.flux < 0.0 and tr.u_plus == 0.0


def test_transmission_is_monotone(coarse, fine, rng):
    con = InterfaceConnector(coarse, build_kirchhoff(coarse), fine, build_kirchhoff(fine), 0.1, 0.05)
    for _ in range(100):
        uL, uR = rng.uniform(0, 1, 2)
        d = rng.uniform(0, 0.2)
        f = con.connect(uL, uR)[3]
        assert con.connect(min(uL + d, 1.0), uR)[3] >= f - 1e-13
        assert con.connect(uL, min(uR + d, 1.0))[3] <= f + 1e-13


@pytest.mark.parametrize("pair", [("coarse", "fine"), ("coarse", "tight"), ("fine", "coarse")])
def test_traces_lie_on_both_graphs(pair, request, rng):
    a, b = (request.getfixturevalue(n) for n in pair)
    con = InterfaceConnector(a, build_kirchhoff(a), b, build_kirchhoff(b), 0.1, 0.1)
    ga, gb = MonotoneGraph.of(a), MonotoneGraph.of(b)
    for _ in range(50):
        p, sL, sR, _ = con.connect(*rng.uniform(0, 1, 2))
        assert ga.value_set(sL)[0] - 1e-10 <= p <= ga.value_set(sL)[1] + 1e-10
        assert gb.value_set(sR)[0] - 1e-10 <= p <= gb.value_set(sR)[1] + 1e-10
        assert graphs_intersect(ga, sL, gb, sR)


def _two_layer(a, b, cells=16):
    return build_mesh(DomainLayout.of([a, b], [1.0, 1.0], -1.0), [cells, cells])


def test_constant_pressure_state_is_fixed(coarse, fine):
    mesh = _two_layer(coarse, fine)
    # p = 0.7 on both sides
    u = np.where(mesh.layer_of_cell == 0, 0.7, 0.2)
    new, info = Simulator(mesh).step(State(0.0, u), 0.01)
    assert np.allclose(new.u, u, atol=1e-12)
    assert info["iterations"] == 0


def test_one_step_conserves_mass(coarse, fine):
    mesh = _two_layer(coarse, fine)
    u = project_initial(InitialData.linear(mesh.layout, [[0.1, 0.9], [0.6, 0.0]]), mesh).u
    new, _ = Simulator(mesh).step(State(0.0, u), 0.01)
    assert abs(mesh.mass(new.u) - mesh.mass(u)) <= 1e-13 * mesh.pore_volume
    assert new.u.min() >= 0.0 and new.u.max() <= 1.0


def test_heat_equation(unit):
    mesh = build_mesh(DomainLayout.of([unit], [1.0]), [32])
    traj = Simulator(mesh).run(InitialData.cosine(mesh.layout), 2.5e-4, 0.05)
    exact = 0.5 + 0.25 * np.exp(-np.pi ** 2 * 0.05) * np.cos(np.pi * mesh.centers)
    assert np.max(np.abs(traj.final - exact)) < 1e-3


def test_identical_media_interface_is_invisible(coarse):
    split = _two_layer(coarse, coarse, 8)
    whole = build_mesh(DomainLayout.of([coarse], [2.0], -1.0), [16])
    u0 = InitialData.cosine(split.layout)
    a = Simulator(split).run(u0, 0.01, 0.1)
    b = Simulator(whole).run(u0, 0.01, 0.1)
    assert np.max(np.abs(a.final - b.final)) < 1e-10


def test_zero_length_run_keeps_initial(coarse):
    mesh = build_mesh(DomainLayout.of([coarse], [1.0]), [8])
    traj = Simulator(mesh).run(InitialData.constant(0.3), 0.01, 0.0)
    assert traj.times == [0.0] and traj.steps == []


def test_outputs_are_hit_exactly(coarse):
    mesh = build_mesh(DomainLayout.of([coarse], [1.0]), [8])
    traj = Simulator(mesh).run(InitialData.constant(0.3), 0.03, 0.1, outputs=[0.05, 0.1])
    assert traj.times == [0.0, 0.05, 0.1]
    assert len(traj.steps) == 2 + 2


def test_ordered_data_stay_ordered(coarse, tight):
    mesh = _two_layer(coarse, tight)
    sim = Simulator(mesh)
    lo = project_initial(InitialData.linear(mesh.layout, [[0.1, 0.5], [0.0, 0.3]]), mesh).u
    hi = np.minimum(lo + 0.2, 1.0)
    a = sim.run(lo, 0.01, 0.1)
    b = sim.run(hi, 0.01, 0.1)
    assert np.all(b.final >= a.final - 1e-12)


def test_csv_output_round_trips(tmp_path, coarse, fine):
    mesh = _two_layer(coarse, fine, 4)
    traj = Simulator(mesh).run(InitialData.linear(mesh.layout, [[0.3, 0.7], [0.2, 0.6]]),
                               0.05, 0.1)
    traj.write_states(tmp_path / "s.csv")
    traj.write_interfaces(tmp_path / "i.csv")
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["t", "x", "u"]
    u = np.array([float(r[2]) for r in rows[1:]]).reshape(len(traj.times), mesh.size)
    assert np.array_equal(u, np.array(traj.states))
    rows = list(csv.reader(open(tmp_path / "i.csv")))
    assert rows[0] == ["t", "interface_index", "p", "u_minus", "u_plus", "flux"]
    assert len(rows) - 1 == len(traj.interfaces)
    assert float(rows[-1][5]) == traj.interfaces[-1].flux


def test_stalled_step_reports_failure(coarse):
    mesh = build_mesh(DomainLayout.of([coarse], [1.0]), [8])
    sim = Simulator(mesh, max_newton=0, max_sweeps=0)
    u = np.linspace(0.1, 0.9, 8)
    with pytest.raises(StepFailure) as err:
        sim.step(State(0.0, u), 0.01)
    assert err.value.time == 0.0 and err.value.dt == 0.01
    with pytest.raises(ValueError):
        sim.step(State(0.0, u), 0.0)


def test_gauss_seidel_fallback_converges(coarse, fine):
    mesh = _two_layer(coarse, fine, 6)
    u = project_initial(InitialData.linear(mesh.layout, [[0.3, 0.7], [0.2, 0.6]]), mesh).u
    ref, _ = Simulator(mesh).step(State(0.0, u), 0.01)
    new, info = Simulator(mesh, max_newton=0).step(State(0.0, u), 0.01)
    assert info["method"] == "gauss-seidel"
    assert np.max(np.abs(new.u - ref.u)) < 1e-9


def test_connect_reference_values():
    lin = make_medium(0.3, [1.0], [0.0, 1.0])
    tr = interface_connect((lin, None), (lin, None), 0.8, 0.2, 0.1, 0.1)
    assert tr.u_minus == pytest.approx(0.5, abs=1e-12) and tr.u_plus == pytest.approx(0.5, abs=1e-12)
    assert tr.flux == pytest.approx(6.0, abs=1e-11)
    shifted = make_medium(0.3, [1.0], [2.0, 1.0])
    tr = interface_connect((lin, None), (shifted, None), 0.5, 0.0, 0.1, 0.1)
    assert tr.flux == 0.0
    assert (tr.u_minus, tr.u_plus) == (pytest.approx(0.5, abs=1e-12), 0.0)
