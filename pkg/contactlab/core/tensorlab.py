"""
tensorlab.py

Coordinate-chart Riemannian calculus in dimension 3.

Tensor fields are 3 or 3x3 arrays of ScalarFields. Anything that does not
need the inverse metric (Lie brackets, Lie derivatives, exterior derivative)
is built symbolically. Connection-dependent quantities are sampled: a
CurvatureBundle evaluates the metric jet at a fixed point set once and lifts
the inverse metric through the jet with d(G) = -G (dg) G.

Sampled arrays carry the point index first. Derivative indices come last,
so `dg[n, i, j, a]` is the a-th partial of g_ij at point n, and
`riemann_tensor[n, l, k, i, j]` is R^l_kij with R(X, Y)Z = R^l_kij Z^k X^i Y^j.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from contactlab.core.jetcalc import (
    ScalarField,
    as_points,
    evaluate_fields,
    jet_arrays,
    lift,
)

SINGULAR_EIGENVALUE = 1e-10
UNTRUSTED_CONDITION = 1e8
ORACLE_STEP = 1e-5

FieldLike = ScalarField | float


class SingularMetricError(ValueError):
    def __init__(self, message: str, point: Sequence[float] | None = None):
        super().__init__(message)
        self.point = None if point is None else tuple(float(c) for c in point)


def _tensor_jets(
    fields: Sequence[ScalarField], shape: tuple[int, ...], points: np.ndarray, order: int
) -> list[np.ndarray]:
    """Jets of a tensor field laid out as [value, d, dd, ...] arrays."""
    jets = jet_arrays(fields, points, order)
    n = points.shape[0]
    out = []
    for k in range(order + 1):
        arr = np.empty((n, len(fields)) + (3,) * k)
        for idx in itertools.product(range(3), repeat=k):
            key = tuple(sorted(idx))
            for c, jet in enumerate(jets):
                arr[(slice(None), c, *idx)] = jet[key]
        out.append(arr.reshape((n, *shape) + (3,) * k))
    return out


@dataclass(frozen=True, eq=False)
class VectorField:
    """Components are the coefficients of d/dx, d/dy, d/dz."""

    components: tuple[ScalarField, ScalarField, ScalarField]

    @classmethod
    def of(cls, *components: FieldLike) -> VectorField:
        if len(components) != 3:
            raise ValueError("A vector field needs exactly 3 components")
        c = tuple(lift(v) for v in components)
        return cls((c[0], c[1], c[2]))

    @classmethod
    def coordinate(cls, axis: int) -> VectorField:
        return cls.of(*(1.0 if i == axis else 0.0 for i in range(3)))

    def __getitem__(self, i: int) -> ScalarField:
        return self.components[i]

    def evaluate(self, points) -> np.ndarray:
        return np.stack(evaluate_fields(self.components, points), axis=-1)

    def jets(self, points, order: int = 1) -> list[np.ndarray]:
        return _tensor_jets(self.components, (3,), as_points(points), order)

    def __add__(self, other: VectorField) -> VectorField:
        return VectorField.of(*(a + b for a, b in zip(self.components, other.components, strict=True)))

    def __sub__(self, other: VectorField) -> VectorField:
        return VectorField.of(*(a - b for a, b in zip(self.components, other.components, strict=True)))

    def __neg__(self) -> VectorField:
        return VectorField.of(*(-a for a in self.components))

    def scale(self, f: FieldLike) -> VectorField:
        return VectorField.of(*(lift(f) * a for a in self.components))


@dataclass(frozen=True, eq=False)
class OneFormField:
    """Components are the coefficients of dx, dy, dz."""

    components: tuple[ScalarField, ScalarField, ScalarField]

    @classmethod
    def of(cls, *components: FieldLike) -> OneFormField:
        if len(components) != 3:
            raise ValueError("A one-form needs exactly 3 components")
        c = tuple(lift(v) for v in components)
        return cls((c[0], c[1], c[2]))

    def __getitem__(self, i: int) -> ScalarField:
        return self.components[i]

    def __call__(self, X: VectorField) -> ScalarField:
        out = self.components[0] * X[0]
        for i in (1, 2):
            out = out + self.components[i] * X[i]
        return out

    def evaluate(self, points) -> np.ndarray:
        return np.stack(evaluate_fields(self.components, points), axis=-1)

    def jets(self, points, order: int = 1) -> list[np.ndarray]:
        return _tensor_jets(self.components, (3,), as_points(points), order)

    def scale(self, f: FieldLike) -> OneFormField:
        return OneFormField.of(*(lift(f) * a for a in self.components))


Rows = Sequence[Sequence[FieldLike]]


def _square(rows: Rows) -> tuple[tuple[ScalarField, ...], ...]:
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise ValueError("Expected a 3x3 array of components")
    return tuple(tuple(lift(v) for v in r) for r in rows)


@dataclass(frozen=True, eq=False)
class BilinearField:
    """Covariant 2-tensor B(X, Y) = B_ij X^i Y^j."""

    components: tuple[tuple[ScalarField, ...], ...]

    @classmethod
    def of(cls, rows: Rows) -> BilinearField:
        return cls(_square(rows))

    def __call__(self, X: VectorField, Y: VectorField) -> ScalarField:
        out = lift(0.0)
        for i, j in itertools.product(range(3), repeat=2):
            out = out + self.components[i][j] * X[i] * Y[j]
        return out

    def flat(self) -> list[ScalarField]:
        return [self.components[i][j] for i in range(3) for j in range(3)]

    def evaluate(self, points) -> np.ndarray:
        values = evaluate_fields(self.flat(), points)
        return np.stack(values, axis=-1).reshape(-1, 3, 3)

    def jets(self, points, order: int = 1) -> list[np.ndarray]:
        return _tensor_jets(self.flat(), (3, 3), as_points(points), order)


class MetricField(BilinearField):
    """Symmetric by construction: the lower triangle mirrors the upper one."""

    @classmethod
    def of(cls, rows: Rows) -> MetricField:
        sq = _square(rows)
        return cls(tuple(tuple(sq[min(i, j)][max(i, j)] for j in range(3)) for i in range(3)))


@dataclass(frozen=True, eq=False)
class EndoField:
    """(1,1)-tensor; components[a][b] = T^a_b so (TX)^a = T^a_b X^b."""

    components: tuple[tuple[ScalarField, ...], ...]

    @classmethod
    def of(cls, rows: Rows) -> EndoField:
        return cls(_square(rows))

    @classmethod
    def identity(cls) -> EndoField:
        return cls.of([[1.0 if a == b else 0.0 for b in range(3)] for a in range(3)])

    @classmethod
    def outer(cls, X: VectorField, eta: OneFormField) -> EndoField:
        """The endomorphism Y -> eta(Y) X."""
        return cls.of([[X[a] * eta[b] for b in range(3)] for a in range(3)])

    def apply(self, X: VectorField) -> VectorField:
        return VectorField.of(
            *(
                self.components[a][0] * X[0]
                + self.components[a][1] * X[1]
                + self.components[a][2] * X[2]
                for a in range(3)
            )
        )

    def compose(self, other: EndoField) -> EndoField:
        rows = []
        for a in range(3):
            row = []
            for b in range(3):
                acc = lift(0.0)
                for c in range(3):
                    acc = acc + self.components[a][c] * other.components[c][b]
                row.append(acc)
            rows.append(row)
        return EndoField.of(rows)

    def __add__(self, other: EndoField) -> EndoField:
        return EndoField.of(
            [[self.components[a][b] + other.components[a][b] for b in range(3)] for a in range(3)]
        )

    def __sub__(self, other: EndoField) -> EndoField:
        return EndoField.of(
            [[self.components[a][b] - other.components[a][b] for b in range(3)] for a in range(3)]
        )

    def scale(self, f: FieldLike) -> EndoField:
        return EndoField.of([[lift(f) * v for v in row] for row in self.components])

    def flat(self) -> list[ScalarField]:
        return [self.components[a][b] for a in range(3) for b in range(3)]

    def evaluate(self, points) -> np.ndarray:
        values = evaluate_fields(self.flat(), points)
        return np.stack(values, axis=-1).reshape(-1, 3, 3)

    def jets(self, points, order: int = 1) -> list[np.ndarray]:
        return _tensor_jets(self.flat(), (3, 3), as_points(points), order)


# Symbolic operations


def differential(F: ScalarField) -> OneFormField:
    return OneFormField.of(*(F.derivative(i) for i in range(3)))


def directional(F: ScalarField, X: VectorField) -> ScalarField:
    """X(F) = dF(X)."""
    return differential(F)(X)


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """[X,Y]^k = X^i d_i Y^k - Y^i d_i X^k."""
    return VectorField.of(*(directional(Y[k], X) - directional(X[k], Y) for k in range(3)))


def exterior_derivative(eta: OneFormField) -> BilinearField:
    """(d eta)_ij = d_i eta_j - d_j eta_i, so d eta(X,Y) = X eta(Y) - Y eta(X) - eta([X,Y])."""
    return BilinearField.of(
        [
            [eta[j].derivative(i) - eta[i].derivative(j) for j in range(3)]
            for i in range(3)
        ]
    )


def lie_derivative_form(Z: VectorField, eta: OneFormField) -> OneFormField:
    """(L_Z eta)_i = Z^k d_k eta_i + eta_k d_i Z^k."""
    return OneFormField.of(
        *(
            directional(eta[i], Z)
            + eta[0] * Z[0].derivative(i)
            + eta[1] * Z[1].derivative(i)
            + eta[2] * Z[2].derivative(i)
            for i in range(3)
        )
    )


def lie_derivative_metric(Z: VectorField, g: BilinearField) -> BilinearField:
    """(L_Z g)_ij = Z^k d_k g_ij + g_kj d_i Z^k + g_ik d_j Z^k."""
    rows = []
    for i in range(3):
        row = []
        for j in range(3):
            acc = directional(g.components[i][j], Z)
            for k in range(3):
                acc = acc + g.components[k][j] * Z[k].derivative(i)
                acc = acc + g.components[i][k] * Z[k].derivative(j)
            row.append(acc)
        rows.append(row)
    return BilinearField.of(rows)


def lie_derivative_endo(Z: VectorField, T: EndoField) -> EndoField:
    """(L_Z T)Y = [Z, TY] - T[Z, Y], componentwise
    (L_Z T)^a_b = Z(T^a_b) - T^k_b d_k Z^a + T^a_k d_b Z^k."""
    rows = []
    for a in range(3):
        row = []
        for b in range(3):
            acc = directional(T.components[a][b], Z)
            for k in range(3):
                acc = acc - T.components[k][b] * Z[a].derivative(k)
                acc = acc + T.components[a][k] * Z[k].derivative(b)
            row.append(acc)
        rows.append(row)
    return EndoField.of(rows)


# Sampled geometry


def sampled(v: VectorField | np.ndarray, points: np.ndarray) -> np.ndarray:
    """Vector values at `points`; arrays broadcast to (N, 3)."""
    if isinstance(v, VectorField):
        return v.evaluate(points)
    return np.broadcast_to(np.asarray(v, dtype=np.float64), (points.shape[0], 3))


def inner(g: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.einsum("nij,ni,nj->n", g, X, Y)


def apply(T: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.einsum("nab,nb->na", T, X)


def max_abs(arr: np.ndarray) -> np.ndarray:
    """Chart max-abs over all non-point axes."""
    return np.abs(arr.reshape(arr.shape[0], -1)).max(axis=1)


class CurvatureBundle:
    """Levi-Civita connection and curvature of `metric` sampled at `points`.

    Construction checks positive definiteness; points whose condition
    number exceeds UNTRUSTED_CONDITION are flagged in `trusted`.
    """

    def __init__(self, metric: MetricField, points):
        self.metric = metric
        self.points = as_points(points)
        self._jets: list[np.ndarray] = []
        g = self.g
        eigenvalues = np.linalg.eigvalsh(g)
        low = eigenvalues[:, 0]
        if np.any(low <= SINGULAR_EIGENVALUE):
            i = int(np.argmin(low))
            point = self.points[i]
            raise SingularMetricError(
                f"Metric is not positive definite at {point.tolist()} "
                f"(smallest eigenvalue {low[i]:.3e})",
                point,
            )
        self.condition = eigenvalues[:, -1] / low
        self.trusted = self.condition <= UNTRUSTED_CONDITION

    def metric_jets(self, order: int) -> list[np.ndarray]:
        if len(self._jets) <= order:
            depth = max(order, 2)
            self._jets = _tensor_jets(self.metric.flat(), (3, 3), self.points, depth)
        return self._jets

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @cached_property
    def g(self) -> np.ndarray:
        return self.metric_jets(0)[0]

    @cached_property
    def dg(self) -> np.ndarray:
        return self.metric_jets(1)[1]

    @cached_property
    def ddg(self) -> np.ndarray:
        return self.metric_jets(2)[2]

    @cached_property
    def dddg(self) -> np.ndarray:
        return self.metric_jets(3)[3]

    @cached_property
    def ginv(self) -> np.ndarray:
        return np.linalg.inv(self.g)

    @cached_property
    def dginv(self) -> np.ndarray:
        G = self.ginv
        return -np.einsum("nik,nkla,nlj->nija", G, self.dg, G)

    @cached_property
    def ddginv(self) -> np.ndarray:
        G, dG, dg = self.ginv, self.dginv, self.dg
        t1 = np.einsum("nikb,nkla,nlj->nijab", dG, dg, G)
        t2 = np.einsum("nik,nklab,nlj->nijab", G, self.ddg, G)
        t3 = np.einsum("nik,nkla,nljb->nijab", G, dg, dG)
        return -(t1 + t2 + t3)

    @staticmethod
    def _first_kind(d: np.ndarray, extra: str) -> np.ndarray:
        # C_lij = 1/2 (d_i g_jl + d_j g_il - d_l g_ij), extra derivative axes trail
        return 0.5 * (
            np.einsum(f"njli{extra}->nlij{extra}", d)
            + np.einsum(f"nilj{extra}->nlij{extra}", d)
            - np.einsum(f"nijl{extra}->nlij{extra}", d)
        )

    @cached_property
    def first_kind(self) -> np.ndarray:
        return self._first_kind(self.dg, "")

    @cached_property
    def dfirst_kind(self) -> np.ndarray:
        return self._first_kind(self.ddg, "a")

    @cached_property
    def ddfirst_kind(self) -> np.ndarray:
        return self._first_kind(self.dddg, "ab")

    @cached_property
    def gamma(self) -> np.ndarray:
        """Gamma[n, k, i, j] = Gamma^k_ij."""
        return np.einsum("nkl,nlij->nkij", self.ginv, self.first_kind)

    @cached_property
    def dgamma(self) -> np.ndarray:
        C, dC = self.first_kind, self.dfirst_kind
        return np.einsum("nkla,nlij->nkija", self.dginv, C) + np.einsum(
            "nkl,nlija->nkija", self.ginv, dC
        )

    @cached_property
    def ddgamma(self) -> np.ndarray:
        C, dC = self.first_kind, self.dfirst_kind
        dG = self.dginv
        return (
            np.einsum("nklab,nlij->nkijab", self.ddginv, C)
            + np.einsum("nkla,nlijb->nkijab", dG, dC)
            + np.einsum("nklb,nlija->nkijab", dG, dC)
            + np.einsum("nkl,nlijab->nkijab", self.ginv, self.ddfirst_kind)
        )

    @cached_property
    def riemann_tensor(self) -> np.ndarray:
        """R[n, l, k, i, j] = d_i Gamma^l_jk - d_j Gamma^l_ik
        + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik."""
        Gm, dGm = self.gamma, self.dgamma
        return (
            np.einsum("nljki->nlkij", dGm)
            - np.einsum("nlikj->nlkij", dGm)
            + np.einsum("nlim,nmjk->nlkij", Gm, Gm)
            - np.einsum("nljm,nmik->nlkij", Gm, Gm)
        )

    @cached_property
    def driemann(self) -> np.ndarray:
        Gm, dGm, ddGm = self.gamma, self.dgamma, self.ddgamma
        return (
            np.einsum("nljkia->nlkija", ddGm)
            - np.einsum("nlikja->nlkija", ddGm)
            + np.einsum("nlima,nmjk->nlkija", dGm, Gm)
            + np.einsum("nlim,nmjka->nlkija", Gm, dGm)
            - np.einsum("nljma,nmik->nlkija", dGm, Gm)
            - np.einsum("nljm,nmika->nlkija", Gm, dGm)
        )

    @cached_property
    def ricci_tensor(self) -> np.ndarray:
        """Ric_jk = R^l_klj, i.e. the trace of V -> R(V, X)Y."""
        return np.einsum("nakaj->njk", self.riemann_tensor)

    @cached_property
    def dricci(self) -> np.ndarray:
        return np.einsum("nakajb->njkb", self.driemann)

    @cached_property
    def ricci_operator(self) -> np.ndarray:
        return np.einsum("nac,ncb->nab", self.ginv, self.ricci_tensor)

    @cached_property
    def scalar(self) -> np.ndarray:
        return np.einsum("njk,njk->n", self.ginv, self.ricci_tensor)

    @cached_property
    def dscalar(self) -> np.ndarray:
        return np.einsum("njka,njk->na", self.dginv, self.ricci_tensor) + np.einsum(
            "njk,njka->na", self.ginv, self.dricci
        )

    @cached_property
    def nabla_ricci(self) -> np.ndarray:
        """(nabla_i Ric)_jk stored as [n, j, k, i]."""
        Gm, Ric = self.gamma, self.ricci_tensor
        return (
            self.dricci
            - np.einsum("nmij,nmk->njki", Gm, Ric)
            - np.einsum("nmik,njm->njki", Gm, Ric)
        )


def christoffel(g: MetricField, points) -> CurvatureBundle:
    """Levi-Civita data of `g` at `points`; raises SingularMetricError."""
    return CurvatureBundle(g, points)


def covariant_derivative_sampled(
    B: CurvatureBundle, X: np.ndarray, Y: np.ndarray, dY: np.ndarray
) -> np.ndarray:
    """(nabla_X Y)^k = X^i (d_i Y^k + Gamma^k_ij Y^j) from sampled Y and dY[n, k, i]."""
    return np.einsum("ni,nki->nk", X, dY) + np.einsum("nkij,ni,nj->nk", B.gamma, X, Y)


def covariant_derivative_vector(
    B: CurvatureBundle, X: VectorField | np.ndarray, Y: VectorField
) -> np.ndarray:
    Yv, dY = Y.jets(B.points, 1)
    return covariant_derivative_sampled(B, sampled(X, B.points), Yv, dY)


def nabla_endo(B: CurvatureBundle, T: np.ndarray, dT: np.ndarray) -> np.ndarray:
    """(nabla_i T)^a_b = d_i T^a_b + Gamma^a_ic T^c_b - Gamma^c_ib T^a_c as [n, a, b, i]."""
    Gm = B.gamma
    return (
        dT
        + np.einsum("naic,ncb->nabi", Gm, T)
        - np.einsum("ncib,nac->nabi", Gm, T)
    )


def covariant_derivative_endo_sampled(
    B: CurvatureBundle, X: np.ndarray, T: np.ndarray, dT: np.ndarray
) -> np.ndarray:
    return np.einsum("nabi,ni->nab", nabla_endo(B, T, dT), X)


def covariant_derivative_endo(
    B: CurvatureBundle, X: VectorField | np.ndarray, T: EndoField
) -> np.ndarray:
    Tv, dT = T.jets(B.points, 1)
    return covariant_derivative_endo_sampled(B, sampled(X, B.points), Tv, dT)


def riemann(
    B: CurvatureBundle,
    X: VectorField | np.ndarray,
    Y: VectorField | np.ndarray,
    Z: VectorField | np.ndarray,
) -> np.ndarray:
    """R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z at each point."""
    p = B.points
    return np.einsum(
        "nlkij,nk,ni,nj->nl", B.riemann_tensor, sampled(Z, p), sampled(X, p), sampled(Y, p)
    )


def ricci(B: CurvatureBundle) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Q, Ric, r) at the bundle's points."""
    return B.ricci_operator, B.ricci_tensor, B.scalar


def gradient(B: CurvatureBundle, F: ScalarField) -> np.ndarray:
    dF = differential(F).evaluate(B.points)
    return np.einsum("nki,ni->nk", B.ginv, dF)


def contracted_bianchi_residual(B: CurvatureBundle) -> np.ndarray:
    """max_k |(div Ric)_k - 1/2 d_k r| per point."""
    div_ric = np.einsum("nij,njki->nk", B.ginv, B.nabla_ricci)
    return np.abs(div_ric - 0.5 * B.dscalar).max(axis=1)


def petersen_residual(
    B: CurvatureBundle,
    X: VectorField | np.ndarray,
    Y: VectorField | np.ndarray,
    Z: VectorField | np.ndarray,
) -> np.ndarray:
    """Dimension-3 decomposition of R in terms of Ric, Q and r:

    R(X,Y)Z = Ric(Z,Y)X - Ric(Z,X)Y + g(Z,Y)QX - g(Z,X)QY
              - r/2 (g(Z,Y)X - g(Z,X)Y)
    """
    p = B.points
    x, y, z = sampled(X, p), sampled(Y, p), sampled(Z, p)
    Q, Ric, r = ricci(B)
    g = B.g
    ric_zy = inner(Ric, z, y)[:, None]
    ric_zx = inner(Ric, z, x)[:, None]
    g_zy = inner(g, z, y)[:, None]
    g_zx = inner(g, z, x)[:, None]
    rhs = (
        ric_zy * x
        - ric_zx * y
        + g_zy * apply(Q, x)
        - g_zx * apply(Q, y)
        - 0.5 * r[:, None] * (g_zy * x - g_zx * y)
    )
    return max_abs(riemann(B, x, y, z) - rhs)


def metric_compatibility_residual(B: CurvatureBundle) -> np.ndarray:
    """Chart max-abs of (nabla_i g)_jk = d_i g_jk - Gamma^m_ij g_mk - Gamma^m_ik g_jm."""
    Gm, g = B.gamma, B.g
    nabla_g = (
        np.einsum("njki->nijk", B.dg)
        - np.einsum("nmij,nmk->nijk", Gm, g)
        - np.einsum("nmik,njm->nijk", Gm, g)
    )
    return max_abs(nabla_g)


def torsion_residual(B: CurvatureBundle) -> np.ndarray:
    return max_abs(B.gamma - np.swapaxes(B.gamma, 2, 3))


def curvature_symmetry_residuals(
    B: CurvatureBundle,
    X: np.ndarray,
    Y: np.ndarray,
    Z: np.ndarray,
    W: np.ndarray,
) -> dict[str, np.ndarray]:
    """Antisymmetry, first Bianchi and pair symmetry of R on the given vectors."""
    g = B.g
    rxy_z = riemann(B, X, Y, Z)
    return {
        "antisymmetry": max_abs(rxy_z + riemann(B, Y, X, Z)),
        "first_bianchi": max_abs(rxy_z + riemann(B, Y, Z, X) + riemann(B, Z, X, Y)),
        "pair_symmetry": np.abs(
            inner(g, rxy_z, W) - inner(g, riemann(B, Z, W, X), Y)
        ),
    }


def christoffel_oracle_residual(
    g: MetricField, B: CurvatureBundle, step: float = ORACLE_STEP
) -> np.ndarray:
    """Chart max-abs gap between Gamma and a central-difference rebuild of it."""
    pts = B.points
    dg = np.empty_like(B.dg)
    for a in range(3):
        shift = np.zeros(3)
        shift[a] = step
        plus = g.evaluate(pts + shift)
        minus = g.evaluate(pts - shift)
        dg[..., a] = (plus - minus) / (2.0 * step)
    C = CurvatureBundle._first_kind(dg, "")
    gamma_fd = np.einsum("nkl,nlij->nkij", B.ginv, C)
    return max_abs(gamma_fd - B.gamma)
