"""
deformlab.py

Model structures (flat contact torus, Sasakian Heisenberg group) and the two
deformations run against them: the D-homothety and the fiber-invariant g^f
deformation of the flat torus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Literal

import numpy as np

from contactlab.core.contactcore import (
    ContactStructure,
    KmuFit,
    StructureError,
    axioms_hold,
    contact_structure,
    fit_eta_einstein,
    fit_kappa_mu_jacobi,
    is_k_contact,
)
from contactlab.core.jetcalc import ScalarField, coordinate, cos, lift, periodicity_residual, sin
from contactlab.core.report import DEFAULT_TOLERANCE, CheckReport, build_report
from contactlab.core.sampling import SampleDomain
from contactlab.core.tensorlab import (
    EndoField,
    MetricField,
    OneFormField,
    VectorField,
    apply,
    inner,
    lie_bracket,
    lie_derivative_metric,
    max_abs,
)

Convention = Literal["standard", "inverse"]

# |f| bound keeping 1 - 3/4 f^4 > 0, with margin
F_BOUND = (4.0 / 3.0) ** 0.25 - 1e-6
F_GRID = 1024
ZERO_OF_F = 1e-12
ZERO_GAP_TOLERANCE = 1e-8
PERIODICITY_TOLERANCE = 1e-10


class GfVariant(StrEnum):
    PAPER_LITERAL = "paper-literal"
    DERIVED = "derived"
    HALF_OFFDIAG = "half-offdiag"


@dataclass(frozen=True)
class DeformParams:
    """Either a homothety constant `a` or a deformation function `f`."""

    a: float | None = None
    f: ScalarField | None = None
    f_text: str | None = None
    variant: GfVariant = GfVariant.PAPER_LITERAL
    convention: Convention = "standard"

    def __post_init__(self):
        if (self.a is None) == (self.f is None):
            raise ValueError("DeformParams takes exactly one of a or f")
        if self.a is not None and not self.a > 0:
            raise ValueError(f"homothety constant must be positive, got {self.a}")

    def apply(self, S: ContactStructure) -> ContactStructure:
        """D-homothety of S, or the g^f deformation when f is set.

        Raises:
            StructureError: f is set and S is not the flat contact torus.
        """
        if self.a is not None:
            return d_homothety(S, self.a, self.convention)
        if S.provenance.get("model") != "flat-torus":
            raise StructureError(
                f"the g^f deformation is defined on the flat torus, got '{S.name}'"
            )
        return gf_structure(self.f, self.variant, self.f_text)


# Models


def _z_periodic() -> ScalarField:
    return coordinate(2).with_periods((None, None, math.pi))


def _torus_domain() -> SampleDomain:
    return SampleDomain(bounds=[(0.0, math.pi)] * 3, periods=[math.pi] * 3)


def _torus_coframe() -> tuple[ScalarField, ScalarField]:
    z = _z_periodic()
    return cos(2.0 * z), sin(2.0 * z)


def model_flat_torus() -> ContactStructure:
    """Euclidean chart with eta = cos 2z dx + sin 2z dy on the box [0, pi)^3.

    The frame E = d/dz, phiE = sin 2z d/dx - cos 2z d/dy is parallel and
    satisfies [xi, E] = 2 phiE, [xi, phiE] = 0, [E, phiE] = 2 xi.
    """
    c, s = _torus_coframe()
    return contact_structure(
        "flat-torus",
        eta=OneFormField.of(c, s, 0.0),
        g=MetricField.of([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        domain=_torus_domain(),
        xi=VectorField.of(c, s, 0.0),
        phi=EndoField.of([[0.0, 0.0, s], [0.0, 0.0, -c], [-s, c, 0.0]]),
        frame={"E": VectorField.coordinate(2), "phiE": VectorField.of(s, -c, 0.0)},
        provenance={"model": "flat-torus"},
    )


def model_heisenberg_sasakian() -> ContactStructure:
    """eta = 1/2 (dz - y dx), g = 1/4 (dx^2 + dy^2) + eta (x) eta on [-1, 1]^3.

    xi and phi are derived; xi = 2 d/dz.
    """
    y = coordinate(1)
    eta = OneFormField.of(-0.5 * y, 0.0, 0.5)
    g = MetricField.of(
        [
            [0.25 + 0.25 * y * y, 0.0, -0.25 * y],
            [0.0, 0.25, 0.0],
            [-0.25 * y, 0.0, 0.25],
        ]
    )
    return contact_structure(
        "heisenberg",
        eta=eta,
        g=g,
        domain=SampleDomain(bounds=[(-1.0, 1.0)] * 3),
        frame={"E": VectorField.of(2.0, 0.0, 2.0 * y), "phiE": VectorField.of(0.0, -2.0, 0.0)},
        provenance={"model": "heisenberg"},
    )


# D-homothety


def d_homothety(
    S: ContactStructure, a: float, convention: Convention = "standard"
) -> ContactStructure:
    """g' = a g + a(a - 1) eta (x) eta, xi' = xi / a, phi' = phi.

    "standard" takes eta' = a eta, the only choice with eta'(xi') = 1;
    "inverse" takes eta' = eta / a, for which eta'(xi') = 1 / a^2.

    Raises:
        StructureError: a <= 0, or S fails the contact metric axioms.
    """
    if not a > 0:
        raise StructureError(f"homothety constant must be positive, got {a}")
    if convention not in ("standard", "inverse"):
        raise StructureError(f"Unknown D-homothety convention '{convention}'")
    if not axioms_hold(S, S.at(), DEFAULT_TOLERANCE):
        raise StructureError(f"'{S.name}' is not a contact metric structure")
    eta = S.eta.scale(a if convention == "standard" else 1.0 / a)
    g = MetricField.of(
        [
            [a * S.g.components[i][j] + a * (a - 1.0) * S.eta[i] * S.eta[j] for j in range(3)]
            for i in range(3)
        ]
    )
    root = 1.0 / math.sqrt(a)
    return contact_structure(
        f"{S.name}-dhomothety",
        eta=eta,
        g=g,
        domain=S.domain,
        xi=S.xi.scale(1.0 / a),
        phi=S.phi,
        frame={k: v.scale(root) for k, v in S.frame.items()},
        provenance={**S.provenance, "convention": convention, "a": repr(a)},
        parameters=S.parameters,
        verify_reeb=convention == "standard",
    )


def ricci_transform_law(lambda_ric: float, a: float, n: int = 1) -> tuple[float, float]:
    """Coefficients of a K-contact eta-Einstein structure after a D-homothety."""
    if not a > 0:
        raise ValueError(f"homothety constant must be positive, got {a}")
    lam = (lambda_ric + 2.0 - 2.0 * a) / a
    return lam, 2.0 * n - lam


def _k_contact_eta_einstein(S: ContactStructure, points: np.ndarray, tol: float) -> list[str]:
    reasons = []
    if not is_k_contact(S, S.at(points), tol):
        reasons.append("structure is not K-contact")
    if float(np.max(fit_eta_einstein(S, points).residual)) >= tol:
        reasons.append("structure is not eta-Einstein")
    return reasons


def check_ricci_transform_law(
    S: ContactStructure,
    a: float,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
    convention: Convention = "standard",
    n: int = 1,
) -> CheckReport:
    """Fitted (lambda, gamma) of the deformed structure against the law."""
    deformed = d_homothety(S, a, convention)
    sample = S.at(points)
    pts = sample.points
    before = fit_eta_einstein(S, pts)
    after = fit_eta_einstein(deformed, pts)
    lam_bar = (before.lambda_ric + 2.0 - 2.0 * a) / a
    gam_bar = 2.0 * n - lam_bar
    residuals = {
        "lambda_bar": np.abs(after.lambda_ric - lam_bar),
        "gamma_bar": np.abs(after.gamma - gam_bar),
        "eta_einstein_bar": after.residual,
    }
    reasons = _k_contact_eta_einstein(S, pts, tol)
    return build_report(
        "ricci-transform-law",
        pts,
        residuals,
        tolerance=tol,
        trusted=sample.trusted & deformed.at(pts).trusted,
        values={"lambda_ric": before.lambda_ric, "lambda_bar": after.lambda_ric, "gamma_bar": after.gamma},
        notes={"hypothesis": "; ".join(reasons)} if reasons else {},
        provenance={"convention": convention},
        verdict="not-applicable" if reasons else None,
    )


def check_ricci_z_identity(
    S: ContactStructure,
    Z: VectorField,
    a: float,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
    n: int = 1,
) -> CheckReport:
    """Ric'(Z,Z) = (lambda + 2 - 2a)[g(Z,Z) - eta(Z)^2] + 2n a^2 eta(Z)^2 for a
    Killing Z, and Ric'(Z,Z) <= -2a[g(Z,Z) - eta(Z)^2 - n a eta(Z)^2] when
    lambda <= -2."""
    deformed = d_homothety(S, a)
    sample = S.at(points)
    pts = sample.points
    z = Z.evaluate(pts)
    lam = fit_eta_einstein(S, pts).lambda_ric
    g_zz = inner(sample.g, z, z)
    eta_z = np.einsum("nk,nk->n", sample.eta, z)
    ric_bar = inner(deformed.at(pts).bundle.ricci_tensor, z, z)
    expected = (lam + 2.0 - 2.0 * a) * (g_zz - eta_z**2) + 2.0 * n * a**2 * eta_z**2
    residuals = {"ricci_z": np.abs(ric_bar - expected)}
    values = {"ricci_z_bar": ric_bar, "ricci_z_formula": expected}
    bound = -2.0 * a * (g_zz - eta_z**2 - n * a * eta_z**2)
    if np.all(lam <= -2.0 + tol):
        residuals["ricci_z_bound"] = np.maximum(0.0, ric_bar - bound - tol)
    values["ricci_z_bound"] = bound
    reasons = _k_contact_eta_einstein(S, pts, tol)
    if float(np.max(max_abs(lie_derivative_metric(Z, S.g).evaluate(pts)))) >= tol:
        reasons.append("Z is not Killing")
    return build_report(
        "ricci-z-identity",
        pts,
        residuals,
        tolerance=tol,
        trusted=sample.trusted,
        values=values,
        notes={"hypothesis": "; ".join(reasons)} if reasons else {},
        provenance={"convention": "standard"},
        verdict="not-applicable" if reasons else None,
    )


# The g^f deformation


def gf_coefficients(
    f: ScalarField | float, variant: GfVariant
) -> tuple[ScalarField, ScalarField, ScalarField]:
    """(A, B, C) = (g(E,E), g(E,phiE), g(phiE,phiE)) of the deformed metric."""
    f = lift(f)
    A = 1.0 + f + 0.5 * f * f
    C = 1.0 - f + 0.5 * f * f
    B = 0.5 * f * f if variant == GfVariant.HALF_OFFDIAG else f * f
    return A, B, C


def gf_closed_forms(f: ScalarField | float) -> tuple[ScalarField, ScalarField]:
    """kappa = (f - f^2/2)(2 - f + f^2/2), mu = 2(f - f^2/2)."""
    f = lift(f)
    u = f - 0.5 * f * f
    return u * (2.0 - f + 0.5 * f * f), 2.0 * u


def _admissible(f: ScalarField, variant: GfVariant) -> ScalarField:
    if f.depends_on(0) or f.depends_on(1):
        raise StructureError("f must depend on z only")
    z = np.arange(F_GRID) * math.pi / F_GRID
    line = np.stack([np.zeros(F_GRID), np.zeros(F_GRID), z], axis=-1)
    if f.depends_on(2):
        f = f.with_periods((None, None, math.pi))
        gap = periodicity_residual(f, line)
        if gap > PERIODICITY_TOLERANCE:
            raise StructureError(f"f is not pi-periodic in z (gap {gap:.3e})")
    values = np.broadcast_to(f.evaluate(line), (F_GRID,))
    if variant != GfVariant.HALF_OFFDIAG and float(np.max(np.abs(values))) >= F_BOUND:
        raise StructureError(
            f"max |f| = {float(np.max(np.abs(values))):.6g} breaks the positivity bound {F_BOUND:.6g}"
        )
    A, B, C = gf_coefficients(f, variant)
    det = A * C - B * B
    if float(np.min(A.evaluate(line))) <= 0 or float(np.min(det.evaluate(line))) <= 0:
        raise StructureError("deformed metric is not positive definite")
    return f


def gf_structure(
    f: ScalarField | float,
    variant: GfVariant | str = GfVariant.PAPER_LITERAL,
    label: str | None = None,
) -> ContactStructure:
    """Deform the flat torus metric on the frame {xi, E, phiE} by f(z).

    g(E,E) = 1 + f + f^2/2, g(phiE,phiE) = 1 - f + f^2/2, g(E,phiE) = f^2
    (f^2/2 for half-offdiag), xi orthonormal to the rest. phi maps
    E -> s(-B E + A phiE) and phiE -> s(-C E + B phiE), with s = 1 for
    paper-literal and s = 1/(AC - B^2) otherwise, which solves
    d eta = 2 g(., phi .) exactly.

    Raises:
        StructureError: f not a pi-periodic function of z, or the metric
            leaves the positive cone.
    """
    variant = GfVariant(variant)
    f = _admissible(lift(f), variant)
    c, s = _torus_coframe()
    eta = OneFormField.of(c, s, 0.0)
    theta_E = (lift(0.0), lift(0.0), lift(1.0))
    theta_P = (s, -c, lift(0.0))
    A, B, C = gf_coefficients(f, variant)
    g = MetricField.of(
        [
            [
                (1.0 if i == j else 0.0)
                + (A - 1.0) * theta_E[i] * theta_E[j]
                + (C - 1.0) * theta_P[i] * theta_P[j]
                + B * (theta_E[i] * theta_P[j] + theta_P[i] * theta_E[j])
                for j in range(3)
            ]
            for i in range(3)
        ]
    )
    scale = lift(1.0) if variant == GfVariant.PAPER_LITERAL else 1.0 / (A * C - B * B)
    # images of E and phiE in chart components, E = d/dz
    phi_E = [scale * (-B * theta_E[k] + A * theta_P[k]) for k in range(3)]
    phi_P = [scale * (-C * theta_E[k] + B * theta_P[k]) for k in range(3)]
    phi = EndoField.of(
        [[phi_E[a] * theta_E[b] + phi_P[a] * theta_P[b] for b in range(3)] for a in range(3)]
    )
    return contact_structure(
        f"gf-{variant.value}",
        eta=eta,
        g=g,
        domain=_torus_domain(),
        xi=VectorField.of(c, s, 0.0),
        phi=phi,
        frame={"E": VectorField.coordinate(2), "phiE": VectorField.of(*theta_P)},
        provenance={"model": "gf", "variant": variant.value, "f": label or "f"},
        parameters={"f": f},
    )


def gf_parameter(S: ContactStructure) -> ScalarField:
    f = S.parameters.get("f")
    if f is None:
        raise StructureError(f"'{S.name}' was not built by gf_structure")
    return f


def _frame(S: ContactStructure, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return S.frame["E"].evaluate(points), S.frame["phiE"].evaluate(points)


def check_gf_h(
    S_f: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """h phiE = -(1 - f + f^2/2) phiE with h = 1/2 L_xi phi computed from phi."""
    f = gf_parameter(S_f)
    sample = S_f.at(points)
    _, phiE = _frame(S_f, sample.points)
    C = (1.0 - f + 0.5 * f * f).evaluate(sample.points)
    C = np.broadcast_to(C, (sample.size,))
    residuals = {"h_phiE": max_abs(apply(sample.h, phiE) + C[:, None] * phiE)}
    return build_report(
        "gf-h",
        sample.points,
        residuals,
        tolerance=tol,
        values={"f": np.broadcast_to(f.evaluate(sample.points), (sample.size,))},
        provenance={"variant": S_f.provenance.get("variant")},
    )


@dataclass(frozen=True)
class _ClosedFormGaps:
    kappa: np.ndarray
    mu: np.ndarray
    fit: KmuFit
    kappa_gap: np.ndarray
    mu_gap: np.ndarray
    at_zero: np.ndarray

    @property
    def zero_of_f_gap(self) -> np.ndarray:
        return np.where(self.at_zero, np.maximum(self.kappa_gap, self.mu_gap), 0.0)


def _closed_form_gaps(S_f: ContactStructure, f: ScalarField, pts: np.ndarray) -> _ClosedFormGaps:
    n = len(pts)
    kappa_f, mu_f = gf_closed_forms(f)
    kappa = np.broadcast_to(kappa_f.evaluate(pts), (n,))
    mu = np.broadcast_to(mu_f.evaluate(pts), (n,))
    fit = fit_kappa_mu_jacobi(S_f, pts)
    return _ClosedFormGaps(
        kappa=kappa,
        mu=mu,
        fit=fit,
        kappa_gap=np.abs(fit.kappa - kappa),
        mu_gap=np.where(fit.mu_identifiable, np.abs(fit.mu - mu), 0.0),
        at_zero=np.abs(np.broadcast_to(f.evaluate(pts), (n,))) < ZERO_OF_F,
    )


def check_gf_proposition(
    S_f: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """R(X,xi)xi = kappa (X - eta(X)xi) + mu hX on {E, phiE, xi} with the
    closed-form kappa, mu; the least-squares refit is reported alongside."""
    f = gf_parameter(S_f)
    sample = S_f.at(points)
    pts = sample.points
    gaps = _closed_form_gaps(S_f, f, pts)
    E, phiE = _frame(S_f, pts)
    residuals = {}
    for name, X in (("E", E), ("phiE", phiE), ("xi", sample.xi)):
        lhs = apply(sample.jacobi, X)
        rhs = gaps.kappa[:, None] * apply(sample.projector, X) + gaps.mu[:, None] * apply(
            sample.h, X
        )
        residuals[f"jacobi_{name}"] = max_abs(lhs - rhs)
    values = {
        "kappa": gaps.kappa,
        "mu": gaps.mu,
        "kappa_fit": gaps.fit.kappa,
        "mu_fit": gaps.fit.mu,
        "kappa_gap": gaps.kappa_gap,
        "mu_gap": gaps.mu_gap,
        "fit_residual": gaps.fit.residual,
        "gap_at_zero_of_f": gaps.zero_of_f_gap,
    }
    return build_report(
        "gf-proposition",
        pts,
        residuals,
        tolerance=tol,
        trusted=sample.trusted,
        values=values,
        provenance={"variant": S_f.provenance.get("variant")},
    )


def check_gf_zero_gap(
    S_f: ContactStructure, points: np.ndarray | None = None, tol: float = ZERO_GAP_TOLERANCE
) -> CheckReport:
    """The (kappa, mu) refit equals the closed forms wherever f = 0.

    Samples away from the zeros of f carry a zero residual; the number of
    samples at a zero is reported as a value.
    """
    f = gf_parameter(S_f)
    sample = S_f.at(points)
    gaps = _closed_form_gaps(S_f, f, sample.points)
    zeros = float(np.count_nonzero(gaps.at_zero))
    return build_report(
        "gf-zero-gap",
        sample.points,
        {"zero_of_f_gap": gaps.zero_of_f_gap},
        tolerance=tol,
        trusted=sample.trusted,
        values={"zero_of_f_samples": np.full(sample.size, zeros)},
        provenance={"variant": S_f.provenance.get("variant")},
    )


def check_remark_condition(
    S_f: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """Chart norm of R(phiE, phi phiE)xi; vanishes only for constant f."""
    gf_parameter(S_f)
    sample = S_f.at(points)
    _, phiE = _frame(S_f, sample.points)
    Y = apply(sample.phi, phiE)
    R = np.einsum("nlkij,nk,ni,nj->nl", sample.bundle.riemann_tensor, sample.xi, phiE, Y)
    return build_report(
        "gf-remark",
        sample.points,
        {"remark": max_abs(R)},
        tolerance=tol,
        trusted=sample.trusted,
        provenance={"variant": S_f.provenance.get("variant")},
    )


def check_gf_defining_relation(
    S_f: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """d eta(X, Y) = 2 g(X, phi Y) over all pairs of {xi, E, phiE}."""
    sample = S_f.at(points)
    E, phiE = _frame(S_f, sample.points)
    frame = (sample.xi, E, phiE)
    worst = np.zeros(sample.size)
    for X in frame:
        for Y in frame:
            lhs = np.einsum("nij,ni,nj->n", sample.d_eta, X, Y)
            rhs = 2.0 * inner(sample.g, X, apply(sample.phi, Y))
            worst = np.maximum(worst, np.abs(lhs - rhs))
    return build_report(
        "gf-defining-relation",
        sample.points,
        {"defining_relation": worst},
        tolerance=tol,
        provenance={"variant": S_f.provenance.get("variant")},
    )


def check_gf_flat_limit(
    variant: GfVariant | str,
    points: np.ndarray | None = None,
    tol: float = 1e-12,
) -> CheckReport:
    """g^f at f = 0 against the flat torus, tensor by tensor."""
    flat = model_flat_torus()
    deformed = gf_structure(0.0, variant, "0")
    pts = flat.default_points() if points is None else points
    a, b = flat.at(pts), deformed.at(pts)
    residuals = {
        "eta": max_abs(a.eta - b.eta),
        "xi": max_abs(a.xi - b.xi),
        "phi": max_abs(a.phi - b.phi),
        "g": max_abs(a.g - b.g),
        "h": max_abs(a.h - b.h),
    }
    return build_report(
        "gf-flat-limit",
        a.points,
        residuals,
        tolerance=tol,
        provenance={"variant": GfVariant(variant).value},
    )


def check_flat_frame(
    S: ContactStructure,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
    f: ScalarField | None = None,
) -> CheckReport:
    """nabla E = 0, [xi, E] = 2 phiE, [xi, phiE] = 0, [E, phiE] = 2 xi, R = 0
    and hE = E on the supplied frame; df(xi) = 0 = df(phiE) when f is given."""
    sample = S.at(points)
    pts, B = sample.points, sample.bundle
    E_f, P_f = S.frame["E"], S.frame["phiE"]
    E, dE = E_f.jets(pts, 1)
    P = P_f.evaluate(pts)
    nabla_E = dE + np.einsum("nkij,nj->nki", B.gamma, E)
    residuals = {
        "nabla_E": max_abs(nabla_E),
        "phi_frame": max_abs(apply(sample.phi, E) - P),
        "bracket_xi_E": max_abs(lie_bracket(S.xi, E_f).evaluate(pts) - 2.0 * P),
        "bracket_xi_phiE": max_abs(lie_bracket(S.xi, P_f).evaluate(pts)),
        "bracket_E_phiE": max_abs(lie_bracket(E_f, P_f).evaluate(pts) - 2.0 * sample.xi),
        "riemann": max_abs(B.riemann_tensor),
        "h_E": max_abs(apply(sample.h, E) - E),
    }
    if f is not None:
        df = np.stack([f.derivative(i).evaluate(pts) for i in range(3)], axis=-1)
        residuals["fiber_xi"] = np.abs(np.einsum("na,na->n", df, sample.xi))
        residuals["fiber_phiE"] = np.abs(np.einsum("na,na->n", df, P))
    return build_report(
        "flat-frame", pts, residuals, tolerance=tol, trusted=sample.trusted
    )

