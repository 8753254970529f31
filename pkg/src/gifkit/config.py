"""
Validated configuration documents for the command-line driver.

Every model rejects unknown keys.  JSON schemas generated from these models
are shipped in ``docs/schemas``; :func:`schema_documents` regenerates them.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from gifkit.errors import GifError


class ConfigError(GifError):
    """Configuration failed to parse or validate."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SpaceConfig(_Strict):
    kind: Literal["circle", "torus2d"] = "circle"
    n_cells: int = Field(ge=1, le=64)
    circumference: float = Field(default=2 * math.pi, gt=0)


class GridConfig(_Strict):
    horizon: float = Field(gt=0)
    n_steps: int = Field(ge=1)
    mode: Literal["window", "periodic"] = "window"


class BuildParams(_Strict):
    """
    Parameters for ``gifkit build``.

    ``classical`` takes ``step_map`` (or ``shift`` for a rigid rotation, the
    identity when both are absent) and an optional initial ``marginal``.
    ``kb-average`` averages the measure stored at ``measure`` over ``n`` shifts.
    """

    space: Optional[SpaceConfig] = None
    grid: Optional[GridConfig] = None
    step_map: Optional[list[int]] = None
    shift: Optional[Union[int, list[int]]] = None
    marginal: Optional[list[float]] = None
    measure: Optional[str] = None
    n: Optional[int] = Field(default=None, ge=1)


class CouplingConfig(_Strict):
    """Exactly one of ``map``, ``matrix`` or ``independent``."""

    map: Optional[list[int]] = None
    matrix: Optional[list[list[float]]] = None
    independent: bool = False

    @model_validator(mode="after")
    def _one_source(self):
        given = (self.map is not None) + (self.matrix is not None) + bool(self.independent)
        if given != 1:
            raise ValueError("give exactly one of map, matrix, independent")
        return self


class SolverConfig(_Strict):
    enumeration_cap: int = Field(default=10 ** 6, ge=1)
    tol: float = Field(default=1e-9, gt=0)
    probe_degeneracy: bool = True
    oracle: bool = False
    oracle_cap: int = Field(default=4096, ge=1)
    seed: int = 0


class BrenierConfig(_Strict):
    space: SpaceConfig
    grid: GridConfig
    eta: CouplingConfig
    potential: Optional[Union[list[float], list[list[float]]]] = None
    rho: Optional[list[float]] = None
    solver: SolverConfig = SolverConfig()
    warm_start: Optional[str] = None

    @field_validator("grid")
    @classmethod
    def _window(cls, g: GridConfig) -> GridConfig:
        if g.mode != "window":
            raise ValueError("the action problem needs a window grid")
        return g


MODELS = {"build_params": BuildParams, "brenier_config": BrenierConfig}


def load_model(model: type[_Strict], source: str | Path | dict):
    """
    Validate a dict, a JSON file path, or an inline JSON string.

    Raises :class:`ConfigError` with the validation message on failure.
    """
    if isinstance(source, dict):
        data = source
    else:
        text = str(source)
        try:
            if text.lstrip().startswith("{"):
                data = json.loads(text)
            else:
                data = json.loads(Path(text).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {text}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def schema_documents() -> dict[str, str]:
    """File name to JSON text for every shipped schema."""
    docs = {f"{name}.schema.json": json.dumps(m.model_json_schema(), indent=2, sort_keys=True) + "\n"
            for name, m in MODELS.items()}
    docs["path_measure.schema.json"] = json.dumps(PATH_MEASURE_SCHEMA, indent=2, sort_keys=True) + "\n"
    return docs


PATH_MEASURE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "PathMeasure",
    "type": "object",
    "additionalProperties": False,
    "required": ["space", "grid", "atoms"],
    "properties": {
        "space": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "n_cells", "circumference"],
            "properties": {
                "kind": {"enum": ["circle", "torus2d"]},
                "n_cells": {"type": "integer", "minimum": 1},
                "circumference": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["horizon", "n_steps", "mode"],
            "properties": {
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "n_steps": {"type": "integer", "minimum": 1},
                "mode": {"enum": ["window", "periodic"]},
            },
        },
        "atoms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["cells", "weight"],
                "properties": {
                    "cells": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "weight": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
    },
}


def write_schemas(directory: str | Path) -> list[Path]:
    out = []
    for name, text in schema_documents().items():
        p = Path(directory) / name
        p.write_text(text)
        out.append(p)
    return out
