import copy
import csv
import json

import numpy as np
import pytest

from capbarrier.cli import EXIT_CONFIG, EXIT_OK, main
from capbarrier.config import (SCENARIO_SCHEMA, _preset_dir, load_media_library, load_preset,
                               load_scenario, parse_scenario, preset_names)
from capbarrier.errors import ConfigError

BASE = {
    "schema": SCENARIO_SCHEMA,
    "name": "small",
    "origin": -1.0,
    "layers": [{"medium": "coarse", "length": 1.0, "cells": 8},
               {"medium": "fine", "length": 1.0, "cells": 8}],
    "initial": {"kind": "linear", "params": {"ends": [[0.3, 0.7], [0.2, 0.6]]}},
    "time": {"dt": 0.01, "T": 0.04, "outputs": [0.02, 0.04]},
}


def doc(**changes):
    d = copy.deepcopy(BASE)
    d.update(changes)
    return d


def test_defaults_are_filled():
    cfg = parse_scenario(doc())
    assert cfg.n_list == [10, 40, 160] and cfg.k == 8 and cfg.panels == 1024
    assert cfg.K == 8.0
    assert cfg.study == {"kind": "sola", "levels": 3}
    assert cfg.tol == 1e-12 and cfg.seed == 0 and cfg.mode == "simulate"
    assert cfg.mesh().size == 16


def test_single_layer_defaults_to_mesh_study():
    d = doc(layers=[{"medium": "unit", "length": 1.0, "cells": 8}],
            initial={"kind": "cosine", "params": {"mean": 0.5, "amplitude": 0.25}})
    assert parse_scenario(d).study["kind"] == "mesh"


def test_presets_load():
    assert set(preset_names()) >= {"heat", "overlap", "barrier", "three-layer"}
    for name in preset_names():
        cfg = load_preset(name)
        assert cfg.name == name
        assert cfg.initial_data() is not None
    assert set(load_media_library()) >= {"unit", "coarse", "fine", "tight", "silt", "clay"}


def test_document_round_trip():
    cfg = parse_scenario(doc(media={"x": {"porosity": 0.3,
                                          "mobility": {"kind": "polynomial", "params": {"coefficients": [0, 1, -1]}},
                                          "capillary": {"kind": "polynomial", "params": {"coefficients": [0, 1]}}}},
                             layers=[{"medium": "x", "length": 1.0, "cells": 4}],
                             initial={"kind": "constant", "params": {"value": 0.5}}))
    again = parse_scenario(json.loads(json.dumps(cfg.to_document())))
    assert again == cfg


@pytest.mark.parametrize("change, path", [
    ({"schema": "capbarrier.scenario/0"}, "schema"),
    ({"layers": [{"medium": "coarse", "length": -1.0, "cells": 8}]}, "layers[0].length"),
    ({"layers": [{"medium": "nope", "length": 1.0, "cells": 8}]}, "layers[0].medium"),
    ({"time": {"dt": 0.01, "T": 0.04, "outputs": [0.03, 0.02]}}, "time.outputs[1]"),
    ({"regularization": {"n": [40, 10]}}, "regularization.n"),
    ({"initial": {"kind": "layers", "params": {"values": [0.5]}}}, "initial.params.values"),
])
def test_bad_fields_name_their_path(change, path):
    with pytest.raises(ConfigError) as err:
        parse_scenario(doc(**change))
    assert err.value.path == path


def test_bad_porosity_names_medium():
    media = load_media_library()
    bad = {"porosity": 1.5,
           "mobility": {"kind": "polynomial", "params": {"coefficients": [0, 4, -4]}},
           "capillary": {"kind": "polynomial", "params": {"coefficients": [0, 1]}}}
    assert "coarse" in media
    with pytest.raises(ConfigError) as err:
        parse_scenario(doc(media={"coarse": bad}))
    assert err.value.path == "media.coarse.porosity"


def test_decreasing_table_names_index():
    bad = {"porosity": 0.3,
           "mobility": {"kind": "polynomial", "params": {"coefficients": [0, 1, -1]}},
           "capillary": {"kind": "table", "params": {"s": [0, 0.5, 1], "values": [0, 0.6, 0.4]}}}
    with pytest.raises(ConfigError) as err:
        parse_scenario(doc(media={"coarse": bad}))
    assert err.value.path == "media.coarse.capillary.params.values[2]"


def test_media_file_is_resolved(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps({"mine": {
        "porosity": 0.2,
        "mobility": {"kind": "polynomial", "params": {"coefficients": [0, 1, -1]}},
        "capillary": {"kind": "polynomial", "params": {"coefficients": [1, 1]}}}}))
    d = doc(media_file="m.json", layers=[{"medium": "mine", "length": 1.0, "cells": 4}],
            initial={"kind": "constant", "params": {"value": 0.5}})
    (tmp_path / "s.json").write_text(json.dumps(d))
    cfg = load_scenario(str(tmp_path / "s.json"))
    assert cfg.layer_media()[0].porosity == 0.2
    with pytest.raises(ConfigError):
        load_scenario(str(tmp_path / "missing.json"))


# -- CLI ------------------------------------------------------------------------------------
def _write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def test_simulate_is_deterministic(tmp_path):
    cfg = _write(tmp_path, doc())
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")]) == EXIT_OK
    for f in ("small_trajectory.csv", "small_interfaces.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    rows = list(csv.reader(open(tmp_path / "a" / "small_trajectory.csv")))
    assert rows[0] == ["t", "x", "u"] and len(rows) == 1 + 3 * 16
    u = np.array([float(r[2]) for r in rows[1:]])
    assert np.all((0 <= u) & (u <= 1))
    rows = list(csv.reader(open(tmp_path / "a" / "small_interfaces.csv")))
    assert rows[0] == ["t", "interface_index", "p", "u_minus", "u_plus", "flux"]
    assert len(rows) == 1 + 4


def test_verify_rejects_bad_config(tmp_path, capsys):
    bad = doc(media={"coarse": {
        "porosity": 1.5,
        "mobility": {"kind": "polynomial", "params": {"coefficients": [0, 4, -4]}},
        "capillary": {"kind": "polynomial", "params": {"coefficients": [0, 1]}}}})
    assert main(["verify", "--config", _write(tmp_path, bad)]) == EXIT_CONFIG
    out = capsys.readouterr().out
    assert out.startswith("FAIL config: media.coarse.porosity")


def test_unknown_config_is_usage_error(capsys):
    assert main(["simulate", "--config", "no-such-thing"]) == EXIT_CONFIG
    assert main(["study", "--jobs", "0"]) == EXIT_CONFIG


def test_single_level_study(tmp_path):
    cfg = _write(tmp_path, doc(regularization={"n": 10}))
    assert main(["study", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "small_study.csv")))
    assert rows == [["level", "distance", "ratio"], ["10", "", ""]]


def test_sola_study_writes_table(tmp_path):
    cfg = _write(tmp_path, doc(regularization={"n": [10, 40]}))
    assert main(["study", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "small_study.csv")))
    assert rows[1][0] == "40" and float(rows[1][1]) >= 0.0


def test_barrier_interface_csv_shows_no_flux(tmp_path):
    d = json.loads((_preset_dir() / "barrier.json").read_text())
    d["time"] = {"dt": 0.01, "T": 0.1, "outputs": [0.1]}
    d["layers"] = [dict(layer, cells=16) for layer in d["layers"]]
    assert main(["simulate", "--config", _write(tmp_path, d), "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / f"{d['name']}_interfaces.csv")))[1:]
    assert len(rows) == 10
    assert max(abs(float(r[5])) for r in rows) <= 1e-12


def test_heat_mesh_study_ratio(tmp_path, capsys):
    d = json.loads((_preset_dir() / "heat.json").read_text())
    d["layers"] = [dict(d["layers"][0], cells=16)]
    d["time"] = {"dt": 1.6e-3, "T": 0.1}
    assert main(["study", "--config", _write(tmp_path, d), "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / f"{d['name']}_study.csv")))[1:]
    assert [r[0] for r in rows] == ["16", "32"]
    assert 3.2 <= float(rows[1][2]) <= 4.8
