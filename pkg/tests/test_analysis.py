import csv

import numpy as np
import pytest

from capbarrier.analysis import (DEGENERATE, StudyTable, check_conservation, check_contraction,
                                 check_flux_bound, check_maximum_principle, check_w_continuity,
                                 kirchhoff_gradient_sup, mesh_study, run_many, sola_study,
                                 summary_line, weighted_l1, write_csv)
from capbarrier.domain import DomainLayout, InitialData, build_mesh, project_initial
from capbarrier.errors import ComparisonError
from capbarrier.graphs import build_kirchhoff
from capbarrier.solver import Simulator


def _mesh(a, b, cells=16):
    return build_mesh(DomainLayout.of([a, b], [1.0, 1.0], -1.0), [cells, cells])


def test_summary_line():
    assert summary_line("x", True, "ok") == "PASS x: ok"
    assert summary_line("x", False) == "FAIL x"


def test_contraction_of_identical_runs(coarse, fine):
    mesh = _mesh(coarse, fine)
    u0 = InitialData.linear(mesh.layout, [[0.3, 0.7], [0.2, 0.6]])
    a = Simulator(mesh).run(u0, 0.01, 0.05)
    rep = check_contraction(a, a)
    assert rep.max_violation == 0.0 and rep.passed()


def test_contraction_of_ordered_runs(coarse, tight):
    mesh = _mesh(coarse, tight)
    sim = Simulator(mesh)
    u = project_initial(InitialData.linear(mesh.layout, [[0.1, 0.5], [0.0, 0.3]]), mesh).u
    a = sim.run(u, 0.01, 0.05, outputs=[0.02, 0.05])
    b = sim.run(np.minimum(u + 0.3, 1.0), 0.01, 0.05, outputs=[0.02, 0.05])
    rep = check_contraction(b, a)
    assert rep.passed()
    assert max(rep.negative) <= 1e-12
    # swapping the roles swaps the parts
    back = check_contraction(a, b)
    assert back.positive == rep.negative and back.negative == rep.positive


def test_contraction_rejects_mismatch(coarse, fine):
    m1, m2 = _mesh(coarse, fine, 8), _mesh(coarse, fine, 4)
    u0 = InitialData.constant(0.4)
    a = Simulator(m1).run(u0, 0.01, 0.02)
    with pytest.raises(ComparisonError):
        check_contraction(a, Simulator(m2).run(u0, 0.01, 0.02))
    with pytest.raises(ComparisonError):
        check_contraction(a, Simulator(m1).run(u0, 0.01, 0.03))


def test_w_continuity_on_overlap(coarse, fine):
    mesh = _mesh(coarse, fine)
    tr = Simulator(mesh).run(InitialData.linear(mesh.layout, [[0.3, 0.7], [0.2, 0.6]]), 0.01, 0.05)
    rep = check_w_continuity(tr)
    assert not rep.degenerate and rep.passed()
    assert len(rep.times) == len(tr.steps)


def test_w_continuity_across_barrier_is_degenerate(coarse, tight):
    mesh = _mesh(coarse, tight, 4)
    tr = Simulator(mesh).run(InitialData.constant(0.5), 0.01, 0.02)
    rep = check_w_continuity(tr)
    assert rep.degenerate and rep.marker == DEGENERATE and rep.passed()


def test_gradient_sup_of_linear_data(unit):
    layout = DomainLayout.of([unit], [2.0])
    u0 = InitialData.table([0, 2], [0.0, 1.0])
    assert kirchhoff_gradient_sup(u0, layout, [build_kirchhoff(unit)]) == pytest.approx(0.5)


def test_flux_bound_holds(coarse, fine):
    mesh = _mesh(coarse, fine, 32)
    u0 = InitialData.linear(mesh.layout, [[0.3, 0.7], [0.2, 0.6]])
    tr = Simulator(mesh).run(u0, 1e-3, 0.05)
    rep = check_flux_bound(tr, u0)
    # the 10% slack is an engineering allowance for discretization, not a proven bound
    assert rep.passed() and rep.margin > 0
    assert rep.bound == pytest.approx(2.2 * rep.initial_gradient)


def test_audits_on_short_run(coarse, fine):
    mesh = _mesh(coarse, fine)
    tr = Simulator(mesh).run(InitialData.linear(mesh.layout, [[0.3, 0.7], [0.2, 0.6]]), 0.01, 0.05)
    assert check_conservation(tr).passed()
    rng = check_maximum_principle(tr)
    assert rng.passed()
    # saturation may leave its initial range; pressure may not
    p = np.concatenate([coarse.capillary(tr.final[:16]), fine.capillary(tr.final[16:])])
    assert 0.3 - 1e-12 <= p.min() and p.max() <= 1.1 + 1e-12


def test_run_many_keeps_order(coarse):
    mesh = build_mesh(DomainLayout.of([coarse], [1.0]), [8])
    tasks = [(mesh, np.full(8, c), 0.01, 0.02, None, 1024) for c in (0.1, 0.5, 0.9)]
    serial = run_many(tasks, 1)
    pooled = run_many(tasks, 2)
    for a, b in zip(serial, pooled):
        assert np.array_equal(a.final, b.final)
    assert [t.final[0] for t in serial] == pytest.approx([0.1, 0.5, 0.9])


def test_sola_study_of_constant_data(coarse):
    layout = DomainLayout.of([coarse, coarse], [1.0, 1.0], -1.0)
    rep = sola_study(layout, [8, 8], InitialData.constant(0.4), [10, 40], 0.01, 0.02)
    assert rep.passed()
    assert rep.distances[0] <= rep.initial_distances[0] + 1e-12
    assert rep.table().levels == [40]
    with pytest.raises(ValueError):
        sola_study(layout, [8, 8], InitialData.constant(0.4), [10], 0.01, 0.02)


def test_mesh_study_single_level(unit):
    layout = DomainLayout.of([unit], [1.0])
    table = mesh_study(layout, [8], InitialData.cosine(layout), 0.01, 0.02, levels=1)
    assert table.rows() == [(8, None, None)]


def test_study_table_ratios(tmp_path):
    t = StudyTable([16, 32, 64], [0.4, 0.1, 0.0])
    assert t.ratios == [None, 4.0, float("inf")]
    t.write(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows == [["level", "distance", "ratio"], ["16", "0.40000000000000002", ""],
                    ["32", "0.10000000000000001", "4"], ["64", "0", "inf"]]


def test_write_csv_round_trips_floats(tmp_path):
    vals = [1 / 3, np.pi * 1e-17, 2.0 ** 60 + 1]
    write_csv(tmp_path / "v.csv", ["v"], [[v] for v in vals])
    rows = list(csv.reader(open(tmp_path / "v.csv")))[1:]
    assert [float(r[0]) for r in rows] == [float(v) for v in vals]


def test_weighted_l1(coarse, fine):
    mesh = _mesh(coarse, fine, 2)
    d = weighted_l1(mesh, np.ones(4), np.zeros(4))
    assert d == pytest.approx(mesh.pore_volume)


def test_recorded_contraction_defect_on_barrier(coarse, tight):
    from capbarrier.acceptance import _random_state
    mesh = _mesh(coarse, tight)
    rng = np.random.default_rng(2024)
    a, b = _random_state(rng, mesh), _random_state(rng, mesh)
    sim = Simulator(mesh)
    rep = check_contraction(sim.run(a, 1e-3, 0.05, [0.01, 0.05]), sim.run(b, 1e-3, 0.05, [0.01, 0.05]))
    # recorded: both parts never grow on this pair
    assert rep.violation_positive == 0.0 and rep.violation_negative == 0.0
    assert rep.passed()


def test_recorded_sola_decay(coarse, fine):
    layout = DomainLayout.of([coarse, fine], [1.0, 1.0], -1.0)
    u0 = InitialData.linear(layout, [[0.3, 0.7], [0.2, 0.6]])
    rep = sola_study(layout, [16, 16], u0, [10, 40, 160], 1e-2, 0.1, outputs=[0.05, 0.1])
    assert rep.distances == pytest.approx([0.004884295211711912, 0.001788722286646133], rel=1e-6)
    assert rep.initial_distances == pytest.approx([0.007493079710003263, 0.002711712395179641],
                                                  rel=1e-6)
    assert rep.passed()


def test_recorded_flux_margin_on_ramp(coarse, fine):
    mesh = _mesh(coarse, fine, 32)
    u0 = InitialData.linear(mesh.layout, [[0.3, 0.7], [0.2, 0.6]])
    rep = check_flux_bound(Simulator(mesh).run(u0, 1e-3, 0.05), u0)
    assert rep.max_gradient == pytest.approx(0.39822613037518195, rel=1e-6)
    assert rep.margin == pytest.approx(0.48177382269138325, rel=1e-6)


def test_heat_flux_peaks_at_start(unit):
    layout = DomainLayout.of([unit], [1.0])
    mesh = build_mesh(layout, [64])
    u0 = InitialData.cosine(layout)
    tr = Simulator(mesh).run(u0, 1e-3, 0.1, [0.05, 0.1])
    rep = check_flux_bound(tr, u0)
    g = [s.max_gradient for s in tr.steps]
    assert all(b <= a + 1e-15 for a, b in zip(g, g[1:]))
    assert rep.max_gradient == g[0] <= rep.initial_gradient
    assert rep.max_gradient == pytest.approx(rep.initial_gradient, rel=0.02)
    assert rep.initial_gradient == pytest.approx(0.25 * np.pi, rel=1e-5)


def test_first_output_approaches_initial_data(coarse, fine):
    # empirical proxy for continuity at t = 0
    mesh = _mesh(coarse, fine)
    u0 = InitialData.linear(mesh.layout, [[0.3, 0.7], [0.2, 0.6]])
    sim = Simulator(mesh)
    d = []
    for dt in (1e-2, 1e-3, 1e-4):
        tr = sim.run(u0, dt, dt)
        d.append(weighted_l1(mesh, tr.states[1], tr.states[0]))
    assert d[0] > d[1] > d[2]
    assert d[2] < 0.02 * d[0]
