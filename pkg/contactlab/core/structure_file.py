"""
Structure-definition files: JSON with expression strings for eta, g and
optionally xi, phi and an adapted frame.
"""

import json
import os

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from contactlab.core.contactcore import ContactStructure, StructureError, contact_structure
from contactlab.core.jetcalc import ScalarField, parse_expression
from contactlab.core.sampling import DEFAULT_GRID, SampleDomain, sample_points
from contactlab.core.tensorlab import EndoField, MetricField, OneFormField, VectorField

SYMMETRY_TOLERANCE = 1e-12


def _check_square(v):
    if v is not None and (len(v) != 3 or any(len(row) != 3 for row in v)):
        raise ValueError("must be a 3x3 array of expressions")
    return v


class StructureFile(BaseModel):
    name: str = "structure"
    eta: list[str]
    xi: list[str] | None = None
    phi: list[list[str]] | None = None  # derived from d eta = 2 g(., phi .) when absent
    g: list[list[str]]
    domain: SampleDomain
    frame: dict[str, list[str]] | None = None  # keys E and phiE
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")

    @field_validator("eta", "xi")
    @classmethod
    def validate_vector(cls, v):
        if v is not None and len(v) != 3:
            raise ValueError("must list 3 expressions")
        return v

    @field_validator("g", "phi")
    @classmethod
    def validate_square(cls, v):
        return _check_square(v)

    @field_validator("frame")
    @classmethod
    def validate_frame(cls, v):
        if v is None:
            return v
        if set(v) != {"E", "phiE"}:
            raise ValueError("frame needs exactly the keys 'E' and 'phiE'")
        if any(len(c) != 3 for c in v.values()):
            raise ValueError("frame vectors must list 3 expressions")
        return v


def read_structure_file(path: str) -> StructureFile:
    try:
        with open(os.path.expanduser(path)) as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise RuntimeError(f"Structure file '{path}' not found.") from e
    except json.JSONDecodeError as e:
        raise RuntimeError(f"JSON syntax error in '{path}': {e}") from e
    try:
        return StructureFile(**raw)
    except (ValidationError, TypeError) as e:
        raise RuntimeError(f"Structure file validation error: {e}") from e


def build_from_file(spec: StructureFile) -> ContactStructure:
    """Parse every expression and assemble the structure.

    Raises:
        ExpressionSyntaxError: an expression does not parse.
        StructureError: g is not symmetric at the domain samples, or the
            supplied xi is not the Reeb field of eta.
    """
    periods = spec.domain.periods

    def parse(text: str) -> ScalarField:
        return parse_expression(text, periods=periods)

    g_rows = [[parse(e) for e in row] for row in spec.g]
    points = sample_points(spec.domain, DEFAULT_GRID)
    for i in range(3):
        for j in range(i + 1, 3):
            gap = float(np.max(np.abs(g_rows[i][j].evaluate(points) - g_rows[j][i].evaluate(points))))
            if gap > SYMMETRY_TOLERANCE:
                raise StructureError(f"g is not symmetric: |g[{i}][{j}] - g[{j}][{i}]| = {gap:.3e}")
    frame = None
    if spec.frame is not None:
        frame = {k: VectorField.of(*(parse(e) for e in v)) for k, v in spec.frame.items()}
    return contact_structure(
        spec.name,
        eta=OneFormField.of(*(parse(e) for e in spec.eta)),
        g=MetricField.of(g_rows),
        domain=spec.domain,
        xi=None if spec.xi is None else VectorField.of(*(parse(e) for e in spec.xi)),
        phi=None if spec.phi is None else EndoField.of([[parse(e) for e in row] for row in spec.phi]),
        frame=frame,
        provenance={"model": f"file:{spec.name}"},
    )


def load_structure(path: str) -> ContactStructure:
    return build_from_file(read_structure_file(path))
