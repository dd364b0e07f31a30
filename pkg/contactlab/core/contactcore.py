"""
contactcore.py

Contact metric structures (eta, xi, phi, g) on a chart box, and the checks
run on them: contact metric axioms, Sasakian and K-contact criteria,
(kappa, mu) conditions, eta-Einstein fits and Killing/automorphism tests.

Every check returns a CheckReport with per-point residuals; a failing
identity is report content, never an exception.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from contactlab.core.jetcalc import DIVISION_GUARD, ScalarField, as_points, lift
from contactlab.core.report import DEFAULT_TOLERANCE, CheckReport, build_report
from contactlab.core.sampling import (
    DEFAULT_GRID,
    DEFAULT_SEED,
    SampleDomain,
    probe_vectors,
    sample_points,
)
from contactlab.core.tensorlab import (
    BilinearField,
    CurvatureBundle,
    EndoField,
    MetricField,
    OneFormField,
    VectorField,
    apply,
    christoffel_oracle_residual,
    contracted_bianchi_residual,
    covariant_derivative_sampled,
    curvature_symmetry_residuals,
    exterior_derivative,
    inner,
    lie_bracket,
    lie_derivative_endo,
    lie_derivative_form,
    lie_derivative_metric,
    max_abs,
    metric_compatibility_residual,
    nabla_endo,
    petersen_residual,
    torsion_residual,
)

H_ZERO = 1e-8
REEB_MISMATCH = 1e-10
VOLUME_FLOOR = 1e-6
SAMPLE_CACHE_SIZE = 64
LAMBDA_FLOOR = 1e-6


class StructureError(ValueError):
    """A structure could not be built (bad input, failed precondition)."""


class DegenerateFrameError(ValueError):
    """The h-eigenframe is undefined where an operation needs it."""


# Symbolic construction


def inverse_metric(g: BilinearField) -> EndoField:
    """G^ij from the adjugate; the determinant is a guarded denominator."""
    m = g.components
    cof = [
        [
            m[(i + 1) % 3][(j + 1) % 3] * m[(i + 2) % 3][(j + 2) % 3]
            - m[(i + 1) % 3][(j + 2) % 3] * m[(i + 2) % 3][(j + 1) % 3]
            for j in range(3)
        ]
        for i in range(3)
    ]
    det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2]
    return EndoField.of([[cof[j][i] / det for j in range(3)] for i in range(3)])


def reeb_field(
    eta: OneFormField, g: MetricField | None = None, points: np.ndarray | None = None
) -> VectorField:
    """Solve eta(xi) = 1, d eta(xi, .) = 0 by Cramer's rule.

    The kernel of d eta is spanned by w = (d eta_yz, d eta_zx, d eta_xy) and
    eta(w) is the coefficient of eta ^ d eta, so xi = w / eta(w). The metric
    plays no role; it is accepted to match the structure signature. When
    `points` are given the system is checked for degeneracy there.
    """
    d = exterior_derivative(eta).components
    w = VectorField.of(d[1][2], d[2][0], d[0][1])
    volume = eta(w)
    if points is not None:
        vol = volume.evaluate(points)
        bad = np.abs(vol) < DIVISION_GUARD
        if np.any(bad):
            p = as_points(points)[int(np.argmax(bad))]
            raise StructureError(f"eta is not a contact form at {p.tolist()}")
    return VectorField.of(*(w[k] / volume for k in range(3)))


def derive_phi(eta: OneFormField, g: MetricField) -> EndoField:
    """phi^a_j = 1/2 G^ai (d eta)_ij, the solution of d eta(X,Y) = 2 g(X, phi Y)."""
    G = inverse_metric(g).components
    d = exterior_derivative(eta).components
    rows = []
    for a in range(3):
        row = []
        for j in range(3):
            acc = lift(0.0)
            for i in range(3):
                acc = acc + G[a][i] * d[i][j]
            row.append(0.5 * acc)
        rows.append(row)
    return EndoField.of(rows)


@dataclass(frozen=True)
class EigenFrame:
    """Positive h-eigenvalue and its g-unit eigenvector, per point."""

    lambda_h: np.ndarray
    E: np.ndarray
    phiE: np.ndarray
    defined: np.ndarray


@dataclass(frozen=True)
class KmuFit:
    """Pointwise (kappa, mu) fit of R(X,xi)xi = kappa (X - eta(X)xi) + mu hX."""

    kappa: np.ndarray
    mu: np.ndarray
    residual: np.ndarray
    mu_identifiable: np.ndarray


@dataclass(frozen=True)
class EtaEinsteinFit:
    """Pointwise fit of Q = lambda_ric Id + gamma eta (x) xi."""

    lambda_ric: np.ndarray
    gamma: np.ndarray
    residual: np.ndarray


@dataclass(frozen=True, eq=False)
class ContactStructure:
    name: str
    eta: OneFormField
    xi: VectorField
    phi: EndoField
    g: MetricField
    domain: SampleDomain
    frame: Mapping[str, VectorField] = field(default_factory=dict)
    provenance: Mapping[str, str] = field(default_factory=dict)
    parameters: Mapping[str, ScalarField] = field(default_factory=dict)

    @cached_property
    def h(self) -> EndoField:
        return h_tensor(self)

    def default_points(self) -> np.ndarray:
        return sample_points(self.domain, DEFAULT_GRID)

    def at(self, points: np.ndarray | None = None) -> StructureSample:
        """Sampled tensors at `points`, cached for recent point sets."""
        pts = self.default_points() if points is None else as_points(points)
        return _sample_at(self, pts.tobytes())


@lru_cache(maxsize=SAMPLE_CACHE_SIZE)
def _sample_at(S: ContactStructure, key: bytes) -> StructureSample:
    return StructureSample(S, np.frombuffer(key, dtype=np.float64).reshape(-1, 3).copy())


def contact_structure(
    name: str,
    eta: OneFormField,
    g: MetricField,
    domain: SampleDomain,
    xi: VectorField | None = None,
    phi: EndoField | None = None,
    frame: Mapping[str, VectorField] | None = None,
    provenance: Mapping[str, str] | None = None,
    parameters: Mapping[str, ScalarField] | None = None,
    verify_reeb: bool = True,
) -> ContactStructure:
    """Assemble a structure, deriving xi and phi when they are not supplied.

    Raises:
        StructureError: eta degenerate on the domain samples, or supplied xi
            differs from the derived Reeb field by more than REEB_MISMATCH.
    """
    points = sample_points(domain, DEFAULT_GRID)
    derived = reeb_field(eta, g, points if verify_reeb else None)
    if xi is None:
        xi = derived
    elif verify_reeb:
        gap = float(np.max(np.abs(xi.evaluate(points) - derived.evaluate(points))))
        if gap > REEB_MISMATCH:
            raise StructureError(
                f"Supplied xi differs from the Reeb field of eta by {gap:.3e}"
            )
    if phi is None:
        phi = derive_phi(eta, g)
    return ContactStructure(
        name=name,
        eta=eta,
        xi=xi,
        phi=phi,
        g=g,
        domain=domain,
        frame=dict(frame or {}),
        provenance=dict(provenance or {}),
        parameters=dict(parameters or {}),
    )


def h_tensor(S: ContactStructure) -> EndoField:
    """h = 1/2 L_xi phi."""
    return lie_derivative_endo(S.xi, S.phi).scale(0.5)


class StructureSample:
    """Lazily evaluated tensors of a structure at a fixed point set."""

    def __init__(self, structure: ContactStructure, points: np.ndarray):
        self.structure = structure
        self.points = points

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @cached_property
    def _eta_jets(self) -> list[np.ndarray]:
        return self.structure.eta.jets(self.points, 1)

    @cached_property
    def _xi_jets(self) -> list[np.ndarray]:
        return self.structure.xi.jets(self.points, 1)

    @cached_property
    def _phi_jets(self) -> list[np.ndarray]:
        return self.structure.phi.jets(self.points, 1)

    @cached_property
    def _h_jets(self) -> list[np.ndarray]:
        return self.structure.h.jets(self.points, 1)

    @property
    def eta(self) -> np.ndarray:
        return self._eta_jets[0]

    @property
    def deta(self) -> np.ndarray:
        """deta[n, m, i] = d_i eta_m."""
        return self._eta_jets[1]

    @cached_property
    def d_eta(self) -> np.ndarray:
        """Two-form (d eta)_ij = d_i eta_j - d_j eta_i."""
        return np.swapaxes(self.deta, 1, 2) - self.deta

    @property
    def xi(self) -> np.ndarray:
        return self._xi_jets[0]

    @property
    def dxi(self) -> np.ndarray:
        return self._xi_jets[1]

    @property
    def phi(self) -> np.ndarray:
        return self._phi_jets[0]

    @property
    def dphi(self) -> np.ndarray:
        return self._phi_jets[1]

    @property
    def h(self) -> np.ndarray:
        return self._h_jets[0]

    @property
    def dh(self) -> np.ndarray:
        return self._h_jets[1]

    @cached_property
    def g(self) -> np.ndarray:
        return self.structure.g.evaluate(self.points)

    @cached_property
    def bundle(self) -> CurvatureBundle:
        return CurvatureBundle(self.structure.g, self.points)

    @property
    def trusted(self) -> np.ndarray:
        return self.bundle.trusted

    @cached_property
    def projector(self) -> np.ndarray:
        """P = Id - xi (x) eta."""
        return np.eye(3) - np.einsum("na,nb->nab", self.xi, self.eta)

    @cached_property
    def jacobi(self) -> np.ndarray:
        """Jacobi operator l(X) = R(X, xi)xi as an endomorphism [n, l, i]."""
        xi = self.xi
        return np.einsum("nlkij,nk,nj->nli", self.bundle.riemann_tensor, xi, xi)

    @cached_property
    def ricci_xi_xi(self) -> np.ndarray:
        return inner(self.bundle.ricci_tensor, self.xi, self.xi)

    @cached_property
    def d_ricci_xi_xi(self) -> np.ndarray:
        """d_a Ric(xi, xi) including the derivative of xi."""
        B, xi = self.bundle, self.xi
        return np.einsum("njka,nj,nk->na", B.dricci, xi, xi) + 2.0 * np.einsum(
            "njk,nja,nk->na", B.ricci_tensor, self.dxi, xi
        )

    @cached_property
    def eigen(self) -> EigenFrame:
        return _eigenframe(self.g, self.h, self.phi)

    @cached_property
    def eigen_derivative(self) -> np.ndarray:
        """dE[n, k, i] = d_i E^k of the smooth h-eigenvector field through E(p)."""
        ef = self.eigen
        if not np.all(ef.defined):
            p = self.points[int(np.argmin(ef.defined))]
            raise DegenerateFrameError(f"h vanishes at {p.tolist()}; eigenframe undefined")
        return _eigenvector_derivative(
            self.g, self.bundle.dg, self.dh, self.deta, self.xi, ef.lambda_h, ef.E
        )

    @cached_property
    def adapted(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(E, phiE, xi): h-eigenframe where defined, else a unit horizontal E."""
        ef = self.eigen
        E = ef.E.copy()
        if not np.all(ef.defined):
            fallback = _horizontal_unit(self.g, self.eta, self.xi)
            E[~ef.defined] = fallback[~ef.defined]
        return E, apply(self.phi, E), self.xi


def _eigenframe(g: np.ndarray, h: np.ndarray, phi: np.ndarray) -> EigenFrame:
    # generalized symmetric problem (g h) v = lambda g v via Cholesky of g
    A = np.einsum("nac,ncb->nab", g, h)
    A = 0.5 * (A + np.swapaxes(A, 1, 2))
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    M = Linv @ A @ np.swapaxes(Linv, 1, 2)
    w, Y = np.linalg.eigh(0.5 * (M + np.swapaxes(M, 1, 2)))
    X = np.swapaxes(Linv, 1, 2) @ Y
    lam = w[:, -1]
    E = X[:, :, -1]
    # sign: largest component positive
    lead = np.take_along_axis(E, np.abs(E).argmax(axis=1)[:, None], axis=1)
    E = E * np.where(lead < 0, -1.0, 1.0)
    return EigenFrame(lambda_h=lam, E=E, phiE=apply(phi, E), defined=lam > H_ZERO)


def _eigenvector_derivative(g, dg, dh, deta, xi, lam, E) -> np.ndarray:
    # W = (h + lambda)(V - eta(V) xi) with V = E(p) frozen; W(p) = 2 lambda E(p)
    dlam = np.einsum("na,nab,nbci,nc->ni", E, g, dh, E)
    eta_e = np.einsum("nmi,nm->ni", deta, E)
    dW = (
        np.einsum("nabi,nb->nai", dh, E)
        + dlam[:, None, :] * E[:, :, None]
        - lam[:, None, None] * xi[:, :, None] * eta_e[:, None, :]
    )
    W = 2.0 * lam[:, None] * E
    norm = 2.0 * lam
    dnorm = (
        2.0 * np.einsum("nab,na,nbi->ni", g, W, dW)
        + np.einsum("nabi,na,nb->ni", dg, W, W)
    ) / (2.0 * norm[:, None])
    return dW / norm[:, None, None] - W[:, :, None] * dnorm[:, None, :] / (
        norm**2
    )[:, None, None]


def _horizontal_unit(g: np.ndarray, eta: np.ndarray, xi: np.ndarray) -> np.ndarray:
    candidates = np.eye(3)[None, :, :] - eta[:, :, None] * xi[:, None, :]
    norms = np.einsum("nkab,nka,nkb->nk", g[:, None, :, :], candidates, candidates)
    best = norms.argmax(axis=1)
    V = candidates[np.arange(len(best)), best]
    return V / np.sqrt(norms[np.arange(len(best)), best])[:, None]


def h_eigenframe(S: ContactStructure, points: np.ndarray | None = None) -> EigenFrame:
    """lambda_h, E, phiE with hE = lambda_h E; `defined` is False where h = 0."""
    return S.at(points).eigen


# Report helpers


def _provenance(S: ContactStructure, seed: int | None = None) -> dict[str, object]:
    out: dict[str, object] = {k: v for k, v in S.provenance.items() if k in ("variant", "convention")}
    if seed is not None:
        out["seed"] = seed
    return out


def _report(
    name: str,
    S: ContactStructure,
    sample: StructureSample,
    residuals: Mapping[str, np.ndarray],
    tol: float,
    *,
    trusted: np.ndarray | None = None,
    values: Mapping[str, np.ndarray] | None = None,
    notes: Mapping[str, str] | None = None,
    seed: int | None = None,
    verdict=None,
) -> CheckReport:
    return build_report(
        name,
        sample.points,
        residuals,
        tolerance=tol,
        trusted=trusted,
        values=values,
        notes=notes,
        provenance=_provenance(S, seed),
        verdict=verdict,
    )


def _field(v: ScalarField | float, sample: StructureSample) -> np.ndarray:
    return lift(v).evaluate(sample.points)


def _field_jet(v: ScalarField | float, sample: StructureSample) -> tuple[np.ndarray, np.ndarray]:
    f = lift(v)
    d = OneFormField.of(*(f.derivative(i) for i in range(3)))
    return f.evaluate(sample.points), d.evaluate(sample.points)


# Axioms and Reeb field


def axiom_residuals(sample: StructureSample) -> dict[str, np.ndarray]:
    eta, xi, phi, g = sample.eta, sample.xi, sample.phi, sample.g
    volume = np.einsum("nk,nk->n", eta, _axial(sample.d_eta))
    return {
        "eta_xi": np.abs(np.einsum("nk,nk->n", eta, xi) - 1.0),
        "phi_squared": max_abs(phi @ phi + np.eye(3) - np.einsum("na,nb->nab", xi, eta)),
        "phi_xi": max_abs(apply(phi, xi)),
        "d_eta": max_abs(sample.d_eta - 2.0 * np.einsum("nia,naj->nij", g, phi)),
        "contact_volume": np.maximum(0.0, VOLUME_FLOOR - np.abs(volume)),
    }


def _axial(two_form: np.ndarray) -> np.ndarray:
    return np.stack([two_form[:, 1, 2], two_form[:, 2, 0], two_form[:, 0, 1]], axis=-1)


def check_contact_axioms(
    S: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """eta(xi) = 1, phi^2 = -Id + eta (x) xi, phi xi = 0, d eta = 2 g(., phi .),
    eta ^ d eta nonvanishing."""
    sample = S.at(points)
    volume = np.einsum("nk,nk->n", sample.eta, _axial(sample.d_eta))
    return _report(
        "contact-axioms", S, sample, axiom_residuals(sample), tol, values={"volume": volume}
    )


def axioms_hold(S: ContactStructure, sample: StructureSample, tol: float) -> bool:
    return all(float(np.max(v)) < tol for v in axiom_residuals(sample).values())


def check_reeb_consistency(
    S: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """Stored xi against the derived Reeb field and its defining equations."""
    sample = S.at(points)
    derived = reeb_field(S.eta, S.g).evaluate(sample.points)
    residuals = {
        "reeb_mismatch": max_abs(sample.xi - derived),
        "eta_xi": np.abs(np.einsum("nk,nk->n", sample.eta, sample.xi) - 1.0),
        "d_eta_xi": max_abs(np.einsum("nij,ni->nj", sample.d_eta, sample.xi)),
    }
    return _report("reeb-consistency", S, sample, residuals, tol)


# Sasakian and K-contact


def check_sasakian(
    S: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """Covariant criterion (nabla_X phi)Y = g(X,Y)xi - eta(Y)X and curvature
    criterion R(X,Y)xi = eta(Y)X - eta(X)Y, on all coordinate pairs."""
    sample = S.at(points)
    B, g, xi, eta = sample.bundle, sample.g, sample.xi, sample.eta
    delta = np.eye(3)
    nabla_phi = nabla_endo(B, sample.phi, sample.dphi)  # [n, a, j, i]
    target = np.einsum("nij,na->naji", g, xi) - np.einsum("nj,ai->naji", eta, delta)
    r_xi = np.einsum("nlkij,nk->nlij", B.riemann_tensor, xi)
    r_target = np.einsum("nj,li->nlij", eta, delta) - np.einsum("ni,lj->nlij", eta, delta)
    residuals = {
        "nabla_phi": max_abs(nabla_phi - target),
        "curvature_xi": max_abs(r_xi - r_target),
    }
    return _report(
        "sasakian", S, sample, residuals, tol,
        trusted=sample.trusted, notes=_agreement(residuals, tol),
    )


def _agreement(residuals: Mapping[str, np.ndarray], tol: float) -> dict[str, str]:
    verdicts = {float(np.max(v)) < tol for v in residuals.values()}
    return {"criteria_agree": "true" if len(verdicts) == 1 else "false"}


def check_k_contact(
    S: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """L_xi g = 0 and R(X,xi)xi = X - eta(X)xi."""
    sample = S.at(points)
    lie = lie_derivative_metric(S.xi, S.g).evaluate(sample.points)
    residuals = {
        "lie_xi_g": max_abs(lie),
        "jacobi_xi": max_abs(sample.jacobi - sample.projector),
    }
    return _report(
        "k-contact", S, sample, residuals, tol,
        trusted=sample.trusted, notes=_agreement(residuals, tol),
    )


def is_k_contact(S: ContactStructure, sample: StructureSample, tol: float) -> bool:
    lie = lie_derivative_metric(S.xi, S.g).evaluate(sample.points)
    return float(np.max(max_abs(lie))) < tol


# (kappa, mu) conditions


def _frobenius(A: np.ndarray, Bm: np.ndarray, g: np.ndarray, G: np.ndarray) -> np.ndarray:
    """<A, B> = A^a_b B^c_d g_ac G^bd."""
    return np.einsum("nab,ncd,nac,nbd->n", A, Bm, g, G)


def fit_kappa_mu_jacobi(
    S: ContactStructure, points: np.ndarray | None = None
) -> KmuFit:
    """Least-squares (kappa, mu) with l = kappa P + mu h in the g-Frobenius norm.

    When |h| < H_ZERO, mu is set to 0 and flagged unidentifiable.
    """
    sample = S.at(points)
    g, G = sample.g, sample.bundle.ginv
    P, h, l = sample.projector, sample.h, sample.jacobi
    pp = _frobenius(P, P, g, G)
    ph = _frobenius(P, h, g, G)
    hh = _frobenius(h, h, g, G)
    lp = _frobenius(l, P, g, G)
    lh = _frobenius(l, h, g, G)
    identifiable = np.sqrt(np.maximum(hh, 0.0)) >= H_ZERO
    det = pp * hh - ph * ph
    safe = np.where(identifiable, det, 1.0)
    kappa = np.where(identifiable, (lp * hh - lh * ph) / safe, lp / pp)
    mu = np.where(identifiable, (pp * lh - ph * lp) / safe, 0.0)
    residual = max_abs(l - kappa[:, None, None] * P - mu[:, None, None] * h)
    return KmuFit(kappa=kappa, mu=mu, residual=residual, mu_identifiable=identifiable)


def check_kmu_jacobi(
    S: ContactStructure,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
    kappa: ScalarField | float | None = None,
    mu: ScalarField | float | None = None,
) -> CheckReport:
    """Fit residual, plus gaps to expected kappa / mu when they are given."""
    sample = S.at(points)
    fit = fit_kappa_mu_jacobi(S, sample.points)
    residuals = {"jacobi_fit": fit.residual}
    if kappa is not None:
        residuals["kappa_error"] = np.abs(fit.kappa - _field(kappa, sample))
    if mu is not None:
        gap = np.abs(fit.mu - _field(mu, sample))
        residuals["mu_error"] = np.where(fit.mu_identifiable, gap, 0.0)
    values = {
        "kappa": fit.kappa,
        "mu": fit.mu,
        "mu_identifiable": fit.mu_identifiable.astype(float),
    }
    return _report("kmu-jacobi-fit", S, sample, residuals, tol, trusted=sample.trusted, values=values)


def check_full_kmu(
    S: ContactStructure,
    kappa: ScalarField | float,
    mu: ScalarField | float,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
) -> CheckReport:
    """R(X,Y)xi = kappa (eta(Y)X - eta(X)Y) + mu (eta(Y)hX - eta(X)hY) over
    all pairs of the adapted frame {E, phiE, xi}."""
    sample = S.at(points)
    B, h, eta = sample.bundle, sample.h, sample.eta
    k, m = _field(kappa, sample), _field(mu, sample)
    frame = sample.adapted
    R_xi = np.einsum("nlkij,nk->nlij", B.riemann_tensor, sample.xi)
    worst = np.zeros(sample.size)
    for X in frame:
        for Y in frame:
            ex = np.einsum("nk,nk->n", eta, X)[:, None]
            ey = np.einsum("nk,nk->n", eta, Y)[:, None]
            lhs = np.einsum("nlij,ni,nj->nl", R_xi, X, Y)
            rhs = k[:, None] * (ey * X - ex * Y) + m[:, None] * (
                ey * apply(h, X) - ex * apply(h, Y)
            )
            worst = np.maximum(worst, max_abs(lhs - rhs))
    E, phiE, _ = frame
    horizontal = max_abs(np.einsum("nlij,ni,nj->nl", R_xi, E, phiE))
    residuals = {"kmu_frame": worst, "horizontal_xi": horizontal}
    return _report("full-kmu", S, sample, residuals, tol, trusted=sample.trusted)


def check_q_formula_3d(
    S: ContactStructure,
    kappa: ScalarField | float,
    mu: ScalarField | float,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
) -> CheckReport:
    """QX = (r/2 - kappa)X + (3 kappa - r/2) eta(X)xi + mu hX and Q xi = 2 kappa xi."""
    sample = S.at(points)
    B = sample.bundle
    k, m = _field(kappa, sample), _field(mu, sample)
    r = B.scalar
    xi_eta = np.einsum("na,nb->nab", sample.xi, sample.eta)
    expected = (
        (0.5 * r - k)[:, None, None] * np.eye(3)
        + (3.0 * k - 0.5 * r)[:, None, None] * xi_eta
        + m[:, None, None] * sample.h
    )
    Q = B.ricci_operator
    residuals = {
        "q_formula": max_abs(Q - expected),
        "q_xi": max_abs(apply(Q, sample.xi) - 2.0 * k[:, None] * sample.xi),
    }
    values = {"r": r, "r_minus_2kappa": r - 2.0 * k}
    return _report("q-formula", S, sample, residuals, tol, trusted=sample.trusted, values=values)


def check_kmu_structural(
    S: ContactStructure,
    kappa: ScalarField | float,
    mu: ScalarField | float,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
) -> CheckReport:
    """nabla_xi h = mu h phi and h^2 = (kappa - 1) phi^2.

    Runs on any structure; reported not-applicable when the contact metric
    axioms fail.
    """
    sample = S.at(points)
    k, m = _field(kappa, sample), _field(mu, sample)
    h, phi = sample.h, sample.phi
    nabla_h = nabla_endo(sample.bundle, h, sample.dh)
    nabla_xi_h = np.einsum("nabi,ni->nab", nabla_h, sample.xi)
    residuals = {
        "nabla_xi_h": max_abs(nabla_xi_h - m[:, None, None] * (h @ phi)),
        "h_squared": max_abs(h @ h - (k - 1.0)[:, None, None] * (phi @ phi)),
    }
    verdict = None if axioms_hold(S, sample, tol) else "not-applicable"
    notes = {} if verdict is None else {"hypothesis": "contact metric axioms fail"}
    return _report(
        "kmu-structural", S, sample, residuals, tol,
        trusted=sample.trusted, notes=notes, verdict=verdict,
    )


def check_kmu_frame_identities(
    S: ContactStructure,
    kappa: ScalarField | float,
    mu: ScalarField | float,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
) -> CheckReport:
    """Identities of a (kappa, mu)-space with lambda = sqrt(1 - kappa):

    d kappa(xi) = 0, dr(xi) = 0,
    nabla_E E = (d lambda(phiE) / 2 lambda) phiE,
    nabla_phiE phiE = (d lambda(E) / 2 lambda) E,
    d mu(E) = -2 d lambda(E), d mu(phiE) = 2 d lambda(phiE).

    Raises:
        DegenerateFrameError: h vanishes or kappa >= 1 at a sample.
    """
    sample = S.at(points)
    B, xi = sample.bundle, sample.xi
    k, dk = _field_jet(kappa, sample)
    _, dm = _field_jet(mu, sample)
    if np.any(1.0 - k < LAMBDA_FLOOR):
        raise DegenerateFrameError("kappa must stay below 1 for lambda = sqrt(1 - kappa)")
    ef = sample.eigen
    dE = sample.eigen_derivative
    E, phiE = ef.E, ef.phiE
    lam = np.sqrt(1.0 - k)
    dlam = -dk / (2.0 * lam[:, None])
    dphiE = np.einsum("nabi,nb->nai", sample.dphi, E) + np.einsum(
        "nab,nbi->nai", sample.phi, dE
    )
    nabla_EE = covariant_derivative_sampled(B, E, E, dE)
    nabla_phiE = covariant_derivative_sampled(B, phiE, phiE, dphiE)
    dlam_E = np.einsum("na,na->n", dlam, E)
    dlam_phiE = np.einsum("na,na->n", dlam, phiE)
    residuals = {
        "kappa_xi": np.abs(np.einsum("na,na->n", dk, xi)),
        "r_xi": np.abs(np.einsum("na,na->n", B.dscalar, xi)),
        "nabla_E_E": max_abs(nabla_EE - (dlam_phiE / (2.0 * lam))[:, None] * phiE),
        "nabla_phiE_phiE": max_abs(nabla_phiE - (dlam_E / (2.0 * lam))[:, None] * E),
        "mu_E": np.abs(np.einsum("na,na->n", dm, E) + 2.0 * dlam_E),
        "mu_phiE": np.abs(np.einsum("na,na->n", dm, phiE) - 2.0 * dlam_phiE),
    }
    values = {"lambda_h": ef.lambda_h, "lambda_gap": np.abs(ef.lambda_h - lam)}
    return _report("kmu-frame", S, sample, residuals, tol, trusted=sample.trusted, values=values)


def check_h_divergence(
    S: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """sum_i (nabla_Ei h)Ei = phi Q xi, traced with G in the chart."""
    sample = S.at(points)
    B = sample.bundle
    nabla_h = nabla_endo(B, sample.h, sample.dh)
    div_h = np.einsum("nij,naji->na", B.ginv, nabla_h)
    target = apply(sample.phi, apply(B.ricci_operator, sample.xi))
    return _report(
        "h-divergence", S, sample, {"h_divergence": max_abs(div_h - target)}, tol,
        trusted=sample.trusted,
    )


def check_jacobi_decomposition(
    S: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """R(X,xi)xi = Ric(xi,xi)X - Ric(xi,X)xi + QX - eta(X)Q xi - r/2 (X - eta(X)xi)."""
    sample = S.at(points)
    B, xi, eta = sample.bundle, sample.xi, sample.eta
    ric_xi = np.einsum("njb,nj->nb", B.ricci_tensor, xi)
    expected = (
        sample.ricci_xi_xi[:, None, None] * np.eye(3)
        - np.einsum("na,nb->nab", xi, ric_xi)
        + B.ricci_operator
        - np.einsum("na,nb->nab", apply(B.ricci_operator, xi), eta)
        - 0.5 * B.scalar[:, None, None] * sample.projector
    )
    return _report(
        "jacobi-decomposition", S, sample,
        {"jacobi_decomposition": max_abs(sample.jacobi - expected)}, tol,
        trusted=sample.trusted,
    )


# eta-Einstein


def fit_eta_einstein(
    S: ContactStructure, points: np.ndarray | None = None
) -> EtaEinsteinFit:
    """lambda_ric = (r - Ric(xi,xi))/2, gamma = (3 Ric(xi,xi) - r)/2.

    These solve trace Q = 3 lambda + gamma and g(Q xi, xi) = lambda + gamma,
    so 3 lambda_ric + gamma = r holds exactly.
    """
    sample = S.at(points)
    B = sample.bundle
    r, rxx = B.scalar, sample.ricci_xi_xi
    lam = 0.5 * (r - rxx)
    gamma = 0.5 * (3.0 * rxx - r)
    model = lam[:, None, None] * np.eye(3) + gamma[:, None, None] * np.einsum(
        "na,nb->nab", sample.xi, sample.eta
    )
    return EtaEinsteinFit(
        lambda_ric=lam, gamma=gamma, residual=max_abs(B.ricci_operator - model)
    )


def _fit_differentials(sample: StructureSample) -> tuple[np.ndarray, np.ndarray]:
    dr, drxx = sample.bundle.dscalar, sample.d_ricci_xi_xi
    return 0.5 * (dr - drxx), 0.5 * (3.0 * drxx - dr)


def check_eta_einstein(
    S: ContactStructure,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
    lambda_ric: float | None = None,
    gamma: float | None = None,
) -> CheckReport:
    sample = S.at(points)
    fit = fit_eta_einstein(S, sample.points)
    residuals = {
        "eta_einstein": fit.residual,
        "trace_identity": np.abs(3.0 * fit.lambda_ric + fit.gamma - sample.bundle.scalar),
    }
    if lambda_ric is not None:
        residuals["lambda_error"] = np.abs(fit.lambda_ric - lambda_ric)
    if gamma is not None:
        residuals["gamma_error"] = np.abs(fit.gamma - gamma)
    values = {"lambda_ric": fit.lambda_ric, "gamma": fit.gamma}
    return _report("eta-einstein", S, sample, residuals, tol, trusted=sample.trusted, values=values)


def check_eta_einstein_differentials(
    S: ContactStructure,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
    n: int = 1,
) -> CheckReport:
    """(1 - 2n) d lambda = d gamma with d lambda(xi) = 0 = d gamma(xi) on the
    fitted coefficients; not-applicable unless the eta-Einstein fit holds."""
    sample = S.at(points)
    fit = fit_eta_einstein(S, sample.points)
    dlam, dgam = _fit_differentials(sample)
    xi = sample.xi
    residuals = {
        "differential_relation": max_abs((1.0 - 2.0 * n) * dlam - dgam),
        "lambda_xi": np.abs(np.einsum("na,na->n", dlam, xi)),
        "gamma_xi": np.abs(np.einsum("na,na->n", dgam, xi)),
    }
    holds = float(np.max(fit.residual)) < tol
    return _report(
        "eta-einstein-differentials", S, sample, residuals, tol,
        trusted=sample.trusted,
        notes={} if holds else {"hypothesis": "structure is not eta-Einstein"},
        verdict=None if holds else "not-applicable",
    )


def check_non_k_contact_eta_einstein(
    S: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """A non-K-contact eta-Einstein structure has lambda_ric = 0 and constant gamma."""
    sample = S.at(points)
    fit = fit_eta_einstein(S, sample.points)
    _, dgam = _fit_differentials(sample)
    residuals = {"lambda_ric": np.abs(fit.lambda_ric), "d_gamma": max_abs(dgam)}
    reasons = []
    if is_k_contact(S, sample, tol):
        reasons.append("structure is K-contact")
    if float(np.max(fit.residual)) >= tol:
        reasons.append("structure is not eta-Einstein")
    return _report(
        "non-k-contact-eta-einstein", S, sample, residuals, tol,
        trusted=sample.trusted,
        values={"gamma": fit.gamma},
        notes={"hypothesis": "; ".join(reasons)} if reasons else {},
        verdict="not-applicable" if reasons else None,
    )


def check_eta_einstein_kappa(
    S: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """An eta-Einstein structure is a kappa-space with kappa = 2 lambda + gamma - r/2:
    R(X,Y)xi = kappa (eta(Y)X - eta(X)Y)."""
    sample = S.at(points)
    B, eta = sample.bundle, sample.eta
    fit = fit_eta_einstein(S, sample.points)
    kappa = 2.0 * fit.lambda_ric + fit.gamma - 0.5 * B.scalar
    delta = np.eye(3)
    r_xi = np.einsum("nlkij,nk->nlij", B.riemann_tensor, sample.xi)
    target = kappa[:, None, None, None] * (
        np.einsum("nj,li->nlij", eta, delta) - np.einsum("ni,lj->nlij", eta, delta)
    )
    holds = float(np.max(fit.residual)) < tol
    return _report(
        "eta-einstein-kappa", S, sample, {"kappa_space": max_abs(r_xi - target)}, tol,
        trusted=sample.trusted,
        values={"kappa": kappa},
        notes={} if holds else {"hypothesis": "structure is not eta-Einstein"},
        verdict=None if holds else "not-applicable",
    )


# Killing fields and automorphisms


def automorphism_hypothesis(kappa: float, r: float, tol: float = DEFAULT_TOLERANCE) -> bool:
    """Isometries of a kappa-space are automorphisms when kappa is neither 0
    nor 1, or when kappa = 1 and r != 6."""
    if abs(kappa) < tol:
        return False
    if abs(kappa - 1.0) < tol:
        return abs(r - 6.0) >= tol
    return True


def killing_and_automorphism(
    S: ContactStructure,
    Z: VectorField,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
) -> CheckReport:
    """(a) L_Z g = 0, (b) eta([Z,xi]) = 0, (c) [Z,xi] = 0, (d) L_Z eta = 0,
    (e) Z(lambda_ric) = 0 = Z(gamma).

    (a) and (b) always count. (c)-(e) count only when gamma != 0 at every
    sample; otherwise they are reported as values with the hypothesis status.
    """
    sample = S.at(points)
    pts = sample.points
    z = Z.evaluate(pts)
    bracket = lie_bracket(Z, S.xi).evaluate(pts)
    fit = fit_eta_einstein(S, pts)
    dlam, dgam = _fit_differentials(sample)
    core = {
        "killing": max_abs(lie_derivative_metric(Z, S.g).evaluate(pts)),
        "eta_bracket": np.abs(np.einsum("nk,nk->n", sample.eta, bracket)),
    }
    automorphism = {
        "bracket_xi": max_abs(bracket),
        "lie_eta": max_abs(lie_derivative_form(Z, S.eta).evaluate(pts)),
        "z_lambda": np.abs(np.einsum("na,na->n", dlam, z)),
        "z_gamma": np.abs(np.einsum("na,na->n", dgam, z)),
    }
    gamma_nonzero = bool(np.all(np.abs(fit.gamma) > tol))
    values = {
        "lie_phi": max_abs(lie_derivative_endo(Z, S.phi).evaluate(pts)),
        "gamma": fit.gamma,
    }
    if gamma_nonzero:
        residuals = {**core, **automorphism}
    else:
        residuals = core
        values.update(automorphism)
    notes = {"gamma_nonzero": str(gamma_nonzero).lower()}
    kmu = fit_kappa_mu_jacobi(S, pts)
    if not np.any(kmu.mu_identifiable & (np.abs(kmu.mu) >= tol)):
        kappa = float(np.mean(kmu.kappa))
        if float(np.ptp(kmu.kappa)) < tol:
            r = float(np.mean(sample.bundle.scalar))
            notes["kappa_space_automorphism"] = str(automorphism_hypothesis(kappa, r, tol)).lower()
    return _report(
        "killing-automorphism", S, sample, residuals, tol,
        trusted=sample.trusted, values=values, notes=notes,
    )


# Universal identities


def check_universal_identities(
    S: ContactStructure,
    points: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
    seed: int = DEFAULT_SEED,
) -> CheckReport:
    """Torsion, metric compatibility, curvature symmetries, contracted Bianchi
    and the dimension-3 Ricci decomposition of R, on seeded random vectors."""
    sample = S.at(points)
    B = sample.bundle
    X, Y, Z, W = probe_vectors(sample.points, seed, 4)
    residuals = {
        "torsion": torsion_residual(B),
        "metric_compatibility": metric_compatibility_residual(B),
        **curvature_symmetry_residuals(B, X, Y, Z, W),
        "contracted_bianchi": contracted_bianchi_residual(B),
        "petersen": petersen_residual(B, X, Y, Z),
        "ricci_symmetry": max_abs(B.ricci_tensor - np.swapaxes(B.ricci_tensor, 1, 2)),
    }
    return _report(
        "universal-identities", S, sample, residuals, tol, trusted=sample.trusted, seed=seed
    )


def check_christoffel_oracle(
    S: ContactStructure, points: np.ndarray | None = None, tol: float = DEFAULT_TOLERANCE
) -> CheckReport:
    """Symbolic Gamma against Gamma rebuilt from central differences of g."""
    sample = S.at(points)
    gap = christoffel_oracle_residual(S.g, sample.bundle)
    return _report("christoffel-oracle", S, sample, {"christoffel_oracle": gap}, tol)
