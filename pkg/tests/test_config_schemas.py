import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from gifkit.config import (
    PATH_MEASURE_SCHEMA,
    BrenierConfig,
    BuildParams,
    ConfigError,
    load_model,
    schema_documents,
)
from gifkit.constructors import random_gif
from gifkit.path_measure import StateSpace, TimeGrid, measure_to_dict

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"


def test_shipped_schemas_are_current():
    for name, text in schema_documents().items():
        assert (SCHEMAS / name).read_text() == text


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        load_model(BuildParams, {"space": {"n_cells": 4, "cells": 3}})
    with pytest.raises(ConfigError):
        load_model(BrenierConfig, {"space": {"n_cells": 2}, "grid": {"horizon": 1, "n_steps": 1},
                                   "eta": {"independent": True}, "extra": 0})


def test_coupling_needs_exactly_one_source():
    base = {"space": {"n_cells": 2}, "grid": {"horizon": 1, "n_steps": 1}}
    with pytest.raises(ConfigError):
        load_model(BrenierConfig, {**base, "eta": {}})
    with pytest.raises(ConfigError):
        load_model(BrenierConfig, {**base, "eta": {"map": [1, 0], "independent": True}})
    cfg = load_model(BrenierConfig, json.dumps({**base, "eta": {"map": [1, 0]}}))
    assert cfg.solver.tol == 1e-9


def test_bad_json_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_model(BuildParams, "{not json")
    with pytest.raises(ConfigError):
        load_model(BuildParams, tmp_path / "nope.json")


def test_configs_validate_against_shipped_schema():
    doc = {"space": {"n_cells": 3}, "grid": {"horizon": 2.0, "n_steps": 2},
           "eta": {"matrix": [[1 / 3, 0, 0], [0, 1 / 3, 0], [0, 0, 1 / 3]]}}
    schema = json.loads((SCHEMAS / "brenier_config.schema.json").read_text())
    jsonschema.validate(doc, schema)
    load_model(BrenierConfig, doc)


def test_measure_documents_match_schema():
    rng = np.random.default_rng(1)
    for mode in ("window", "periodic"):
        q = random_gif(rng, StateSpace("circle", 4), TimeGrid(1.0, 3, mode))
        jsonschema.validate(measure_to_dict(q), PATH_MEASURE_SCHEMA)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"space": {}}, PATH_MEASURE_SCHEMA)
