"""
Scenario registry and runner.

A scenario names a structure (built-in model, optional deformation, or a
structure file), the checks to run on it and the expected outcome. The
registry is the packaged `scenarios.yaml`; checks are looked up in CHECKS.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from importlib import resources
from typing import Any, Literal

import numpy as np
import yaml
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from contactlab.core import contactcore as cc
from contactlab.core import deformlab as dl
from contactlab.core.contactcore import ContactStructure
from contactlab.core.instrumentation import check_span, record_report
from contactlab.core.jetcalc import ScalarField, parse_expression
from contactlab.core.report import (
    CheckReport,
    Expectation,
    Provenance,
    concat_reports,
    error_report,
    merge_reports,
)
from contactlab.core.sampling import SamplingSpec, chunks, sample_with
from contactlab.core.structure_file import load_structure
from contactlab.core.tensorlab import VectorField

REGISTRY_RESOURCE = "scenarios.yaml"

Models = Literal["flat-torus", "heisenberg", "gf", "file"]


class StructureSpec(BaseModel):
    model: Models
    a: float | None = None  # D-homothety applied on top of the model
    convention: Literal["standard", "inverse"] = "standard"
    f: str | None = None  # g^f deformation function of z
    variant: dl.GfVariant = dl.GfVariant.PAPER_LITERAL
    file: str | None = None
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def validate_model(self):
        if self.model == "gf" and self.f is None:
            raise ValueError("model 'gf' needs f")
        if self.model == "file" and self.file is None:
            raise ValueError("model 'file' needs file")
        if self.a is not None and not self.a > 0:
            raise ValueError("a must be positive")
        return self


class CheckCall(BaseModel):
    check: str
    params: dict[str, Any] = Field(default_factory=dict)
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")


class Scenario(BaseModel):
    name: str
    description: str = ""
    structure: StructureSpec
    checks: list[CheckCall]
    tolerance: float | None = None
    sampling: SamplingSpec | None = None
    expect: Expectation = "pass"
    floor: float | None = None  # for expect: exceeds
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def validate_scenario(self):
        if not self.checks:
            raise ValueError(f"scenario '{self.name}' has no checks")
        unknown = [c.check for c in self.checks if c.check not in CHECKS]
        if unknown:
            raise ValueError(f"scenario '{self.name}' uses undeclared checks: {unknown}")
        if self.expect == "exceeds" and self.floor is None:
            raise ValueError(f"scenario '{self.name}' expects 'exceeds' without a floor")
        return self

    def with_overrides(
        self,
        structure_file: str | None = None,
        f: str | None = None,
        variant: str | None = None,
        a: float | None = None,
    ) -> Scenario:
        """Copy with CLI overrides; `a` replaces every homothety constant."""
        spec = self.structure.model_copy()
        if structure_file is not None:
            spec = StructureSpec(model="file", file=structure_file, a=spec.a, convention=spec.convention)
        if f is not None:
            spec = spec.model_copy(update={"model": "gf", "f": f})
        if variant is not None:
            spec = spec.model_copy(update={"variant": dl.GfVariant(variant)})
        checks = self.checks
        if a is not None:
            if spec.a is not None:
                spec = spec.model_copy(update={"a": a})
            checks = [
                c.model_copy(update={"params": {**c.params, "a": a}}) if "a" in c.params else c
                for c in checks
            ]
        return self.model_copy(update={"structure": StructureSpec(**spec.model_dump()), "checks": checks})


# Check adapters: (structure, points, tolerance, seed, params) -> report

Adapter = Callable[[ContactStructure, np.ndarray, float, int, Mapping[str, Any]], CheckReport]


def _scalar(value: Any, S: ContactStructure) -> ScalarField | float:
    if isinstance(value, int | float):
        return float(value)
    if value in ("gf-kappa", "gf-mu"):
        kappa, mu = dl.gf_closed_forms(dl.gf_parameter(S))
        return kappa if value == "gf-kappa" else mu
    return parse_expression(str(value))


def _vector(value: Any, S: ContactStructure) -> VectorField:
    if value == "xi":
        return S.xi
    if isinstance(value, str) and value in S.frame:
        return S.frame[value]
    if isinstance(value, list) and len(value) == 3:
        return VectorField.of(*(_scalar(v, S) for v in value))
    raise ValueError(f"Cannot read vector field from {value!r}")


def _optional(params: Mapping[str, Any], key: str, S: ContactStructure):
    return _scalar(params[key], S) if key in params else None


def _gf_f(S: ContactStructure) -> ScalarField | None:
    return S.parameters.get("f")


CHECKS: dict[str, Adapter] = {
    "contact-axioms": lambda S, p, tol, seed, kw: cc.check_contact_axioms(S, p, tol),
    "reeb-consistency": lambda S, p, tol, seed, kw: cc.check_reeb_consistency(S, p, tol),
    "sasakian": lambda S, p, tol, seed, kw: cc.check_sasakian(S, p, tol),
    "k-contact": lambda S, p, tol, seed, kw: cc.check_k_contact(S, p, tol),
    "kmu-jacobi": lambda S, p, tol, seed, kw: cc.check_kmu_jacobi(
        S, p, tol, _optional(kw, "kappa", S), _optional(kw, "mu", S)
    ),
    "full-kmu": lambda S, p, tol, seed, kw: cc.check_full_kmu(
        S, _scalar(kw["kappa"], S), _scalar(kw["mu"], S), p, tol
    ),
    "q-formula": lambda S, p, tol, seed, kw: cc.check_q_formula_3d(
        S, _scalar(kw["kappa"], S), _scalar(kw["mu"], S), p, tol
    ),
    "kmu-structural": lambda S, p, tol, seed, kw: cc.check_kmu_structural(
        S, _scalar(kw["kappa"], S), _scalar(kw["mu"], S), p, tol
    ),
    "kmu-frame": lambda S, p, tol, seed, kw: cc.check_kmu_frame_identities(
        S, _scalar(kw["kappa"], S), _scalar(kw["mu"], S), p, tol
    ),
    "h-divergence": lambda S, p, tol, seed, kw: cc.check_h_divergence(S, p, tol),
    "jacobi-decomposition": lambda S, p, tol, seed, kw: cc.check_jacobi_decomposition(S, p, tol),
    "eta-einstein": lambda S, p, tol, seed, kw: cc.check_eta_einstein(
        S, p, tol, kw.get("lambda_ric"), kw.get("gamma")
    ),
    "eta-einstein-differentials": lambda S, p, tol, seed, kw: (
        cc.check_eta_einstein_differentials(S, p, tol, kw.get("n", 1))
    ),
    "non-k-contact-eta-einstein": lambda S, p, tol, seed, kw: (
        cc.check_non_k_contact_eta_einstein(S, p, tol)
    ),
    "eta-einstein-kappa": lambda S, p, tol, seed, kw: cc.check_eta_einstein_kappa(S, p, tol),
    "killing-automorphism": lambda S, p, tol, seed, kw: cc.killing_and_automorphism(
        S, _vector(kw["Z"], S), p, tol
    ),
    "universal-identities": lambda S, p, tol, seed, kw: cc.check_universal_identities(
        S, p, tol, seed
    ),
    "christoffel-oracle": lambda S, p, tol, seed, kw: cc.check_christoffel_oracle(S, p, tol),
    "ricci-transform-law": lambda S, p, tol, seed, kw: dl.check_ricci_transform_law(
        S, float(kw["a"]), p, tol, kw.get("convention", "standard"), kw.get("n", 1)
    ),
    "ricci-z-identity": lambda S, p, tol, seed, kw: dl.check_ricci_z_identity(
        S, _vector(kw["Z"], S), float(kw["a"]), p, tol, kw.get("n", 1)
    ),
    "flat-frame": lambda S, p, tol, seed, kw: dl.check_flat_frame(S, p, tol, _gf_f(S)),
    "gf-h": lambda S, p, tol, seed, kw: dl.check_gf_h(S, p, tol),
    "gf-proposition": lambda S, p, tol, seed, kw: dl.check_gf_proposition(S, p, tol),
    "gf-zero-gap": lambda S, p, tol, seed, kw: dl.check_gf_zero_gap(S, p, tol),
    "gf-remark": lambda S, p, tol, seed, kw: dl.check_remark_condition(S, p, tol),
    "gf-defining-relation": lambda S, p, tol, seed, kw: dl.check_gf_defining_relation(S, p, tol),
    "gf-flat-limit": lambda S, p, tol, seed, kw: dl.check_gf_flat_limit(
        S.provenance.get("variant", dl.GfVariant.PAPER_LITERAL), p, tol
    ),
}


def load_registry(text: str | None = None) -> dict[str, Scenario]:
    """Parse the scenario table; names must be unique.

    Raises:
        RuntimeError: YAML or validation error, or a duplicate name.
    """
    if text is None:
        text = resources.files("contactlab.core").joinpath(REGISTRY_RESOURCE).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise RuntimeError(f"YAML syntax error in scenario registry: {e}") from e
    if not isinstance(raw, dict) or not isinstance(raw.get("scenarios"), list):
        raise RuntimeError("Scenario registry must contain a 'scenarios' list.")
    registry: dict[str, Scenario] = {}
    for row in raw["scenarios"]:
        try:
            scenario = Scenario(**row)
        except (ValidationError, TypeError) as e:
            raise RuntimeError(f"Scenario validation error: {e}") from e
        if scenario.name in registry:
            raise RuntimeError(f"Duplicate scenario name '{scenario.name}'")
        registry[scenario.name] = scenario
    return registry


def build_structure(spec: StructureSpec) -> ContactStructure:
    if spec.model == "flat-torus":
        S = dl.model_flat_torus()
    elif spec.model == "heisenberg":
        S = dl.model_heisenberg_sasakian()
    elif spec.model == "gf":
        deform = dl.DeformParams(
            f=parse_expression(spec.f), f_text=spec.f, variant=spec.variant
        )
        S = deform.apply(dl.model_flat_torus())
    else:
        S = load_structure(spec.file)
    if spec.a is not None:
        S = dl.DeformParams(a=spec.a, convention=spec.convention).apply(S)
    return S


def expectation_met(report: CheckReport, expect: Expectation, floor: float | None) -> bool:
    if report.verdict == "error":
        return False
    if expect == "record":
        return True
    if expect == "exceeds":
        return report.summary.max > (floor or 0.0)
    return report.verdict == expect


def _run_check(
    call: CheckCall, S: ContactStructure, points: np.ndarray, tol: float, seed: int
) -> CheckReport:
    with check_span(f"check.{call.check}", check=call.check, points=len(points)) as span:
        report = CHECKS[call.check](S, points, tol, seed, call.params)
        record_report(span, report)
        return report


def _provenance(S: ContactStructure | None, spec: SamplingSpec, tol: float) -> Provenance:
    extra = {} if S is None else {k: S.provenance.get(k) for k in ("variant", "convention")}
    return Provenance(tolerance=tol, seed=spec.seed, sampling=spec.describe(), **extra)


def run_scenario(
    scenario: Scenario,
    *,
    tolerance: float | None = None,
    sampling: SamplingSpec | None = None,
    workers: int = 1,
    chunk_size: int = 1024,
) -> CheckReport:
    """Build the structure, run each check over point chunks and merge.

    Chunks are fixed-size and concatenated in order, so the report does not
    depend on `workers`. Any construction or evaluation error becomes an
    "error" verdict; failing identities are ordinary "fail" verdicts.
    """
    tol = tolerance if tolerance is not None else scenario.tolerance
    tol = cc.DEFAULT_TOLERANCE if tol is None else tol
    spec = sampling or scenario.sampling or SamplingSpec()
    with check_span(f"scenario.{scenario.name}", scenario=scenario.name) as span:
        S = None
        try:
            S = build_structure(scenario.structure)
            points = sample_with(S.domain, spec)
            parts = chunks(points, chunk_size)
            reports = []
            for call in scenario.checks:
                pieces = Parallel(n_jobs=workers, prefer="threads")(
                    delayed(_run_check)(call, S, part, tol, spec.seed) for part in parts
                )
                reports.append(concat_reports(scenario.name, pieces, tol))
            report = merge_reports(scenario.name, reports, tol)
        except (ValueError, ArithmeticError, RuntimeError, KeyError) as e:
            report = error_report(scenario.name, f"{type(e).__name__}: {e}", _provenance(S, spec, tol))
        if report.verdict != "error":
            report = report.model_copy(update={"provenance": _provenance(S, spec, tol)})
        report = report.model_copy(
            update={
                "scenario": scenario.name,
                "expectation": scenario.expect,
                "met": expectation_met(report, scenario.expect, scenario.floor),
            }
        )
        record_report(span, report)
        return report


def exit_code(reports: list[CheckReport]) -> int:
    """2 on any error verdict, 1 on any missed expectation, else 0."""
    if any(r.verdict == "error" for r in reports):
        return 2
    if any(not r.met for r in reports):
        return 1
    return 0

