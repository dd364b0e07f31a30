import numpy as np
import pytest

from contactlab.core.contactcore import (
    StructureError,
    check_contact_axioms,
    check_eta_einstein,
    check_k_contact,
    contact_structure,
)
from contactlab.core.deformlab import (
    DeformParams,
    GfVariant,
    check_flat_frame,
    check_gf_defining_relation,
    check_gf_flat_limit,
    check_gf_h,
    check_gf_proposition,
    check_gf_zero_gap,
    check_remark_condition,
    check_ricci_transform_law,
    check_ricci_z_identity,
    d_homothety,
    gf_closed_forms,
    gf_coefficients,
    gf_parameter,
    gf_structure,
    model_flat_torus,
    model_heisenberg_sasakian,
    ricci_transform_law,
)
from contactlab.core.jetcalc import coordinate, parse_expression
from contactlab.core.sampling import SampleDomain, sample_points
from contactlab.core.tensorlab import EndoField, MetricField, OneFormField, VectorField, inner

SIN_F = "0.1*sin(2*z)"


@pytest.fixture(scope="module")
def heisenberg():
    return model_heisenberg_sasakian()


@pytest.fixture(scope="module")
def h_points(heisenberg):
    return sample_points(heisenberg.domain, (3, 3, 3))


@pytest.fixture(scope="module")
def t_points():
    return sample_points(model_flat_torus().domain, (2, 2, 8))


class TestDHomothety:
    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 3.0])
    @pytest.mark.parametrize("model", [model_flat_torus, model_heisenberg_sasakian])
    def test_axioms_survive(self, model, a):
        S = d_homothety(model(), a)
        points = sample_points(S.domain, (2, 2, 4))
        assert check_contact_axioms(S, points).verdict == "pass"
        sample = S.at(points)
        np.testing.assert_allclose(inner(sample.g, sample.xi, sample.xi), 1.0, atol=1e-12)

    def test_provenance_and_frame(self, heisenberg, h_points):
        S = d_homothety(heisenberg, 4.0)
        assert S.provenance["convention"] == "standard"
        assert S.provenance["a"] == "4.0"
        np.testing.assert_allclose(S.frame["phiE"].evaluate(h_points), [[0.0, -1.0, 0.0]] * len(h_points))

    def test_heisenberg_stays_k_contact(self, heisenberg, h_points):
        S = d_homothety(heisenberg, 2.0)
        assert check_k_contact(S, h_points, 1e-7).verdict == "pass"
        report = check_eta_einstein(S, h_points, 1e-7, lambda_ric=-2.0, gamma=4.0)
        assert report.verdict == "pass"

    def test_inverse_convention_breaks_eta_xi(self, heisenberg, h_points):
        S = d_homothety(heisenberg, 2.0, convention="inverse")
        report = check_contact_axioms(S, h_points)
        assert report.verdict == "fail"
        np.testing.assert_allclose(report.residual("eta_xi"), 0.75)
        assert report.provenance.convention == "inverse"

    @pytest.mark.parametrize("a", [0.0, -1.0])
    def test_non_positive_constant(self, heisenberg, a):
        with pytest.raises(StructureError):
            d_homothety(heisenberg, a)

    def test_unknown_convention(self, heisenberg):
        with pytest.raises(StructureError):
            d_homothety(heisenberg, 2.0, convention="other")

    def test_requires_contact_metric_structure(self):
        y = coordinate(1)
        bad = contact_structure(
            "bad-phi",
            eta=OneFormField.of(-0.5 * y, 0.0, 0.5),
            g=MetricField.of([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
            domain=SampleDomain(bounds=[(-1.0, 1.0)] * 3),
            phi=EndoField.identity(),
        )
        with pytest.raises(StructureError) as exc:
            d_homothety(bad, 2.0)
        assert "not a contact metric structure" in str(exc.value)


class TestTransformLaw:
    @pytest.mark.parametrize("a", [0.5, 2.0, 3.0])
    def test_sasakian_lambda_is_fixed(self, a):
        lam, gamma = ricci_transform_law(-2.0, a)
        assert lam == pytest.approx(-2.0)
        assert gamma == pytest.approx(4.0)

    def test_identity_at_one(self):
        assert ricci_transform_law(0.7, 1.0) == pytest.approx((0.7, 1.3))

    def test_general_value(self):
        assert ricci_transform_law(0.0, 2.0) == pytest.approx((-1.0, 3.0))

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            ricci_transform_law(-2.0, 0.0)

    @pytest.mark.parametrize("a", [0.5, 2.0])
    def test_fitted_coefficients(self, heisenberg, h_points, a):
        report = check_ricci_transform_law(heisenberg, a, h_points, 1e-7)
        assert report.verdict == "pass"
        np.testing.assert_allclose(report.value("lambda_bar"), -2.0, atol=1e-7)

    def test_not_applicable_off_k_contact(self, t_points):
        report = check_ricci_transform_law(model_flat_torus(), 2.0, t_points)
        assert report.verdict == "not-applicable"
        assert "not K-contact" in report.notes["hypothesis"]


class TestRicciZ:
    def test_killing_x(self, heisenberg, h_points):
        report = check_ricci_z_identity(heisenberg, VectorField.coordinate(0), 2.0, h_points, 1e-7)
        assert report.verdict == "pass"
        assert "ricci_z_bound" in report.records[0].residuals

    def test_reeb_field(self, heisenberg, h_points):
        report = check_ricci_z_identity(heisenberg, heisenberg.xi, 0.5, h_points, 1e-7)
        assert report.verdict == "pass"
        np.testing.assert_allclose(report.value("ricci_z_bar"), 0.5, atol=1e-7)

    def test_zero_field(self, heisenberg, h_points):
        report = check_ricci_z_identity(heisenberg, VectorField.of(0.0, 0.0, 0.0), 2.0, h_points, 1e-7)
        assert report.verdict == "pass"
        assert report.summary.max == 0.0

    def test_non_killing_field(self, heisenberg, h_points):
        report = check_ricci_z_identity(heisenberg, VectorField.coordinate(1), 2.0, h_points, 1e-7)
        assert report.verdict == "not-applicable"
        assert "Z is not Killing" in report.notes["hypothesis"]


class TestGf:
    @pytest.mark.parametrize("variant", list(GfVariant))
    def test_flat_limit(self, variant, t_points):
        report = check_gf_flat_limit(variant, t_points)
        assert report.verdict == "pass"
        assert report.summary.max < 1e-12

    def test_metric_on_e(self, t_points):
        S = gf_structure(0.1, GfVariant.PAPER_LITERAL, "0.1")
        g = S.at(t_points).g
        np.testing.assert_allclose(g[:, 2, 2], 1.105, atol=1e-15)

    def test_closed_forms(self):
        kappa, mu = gf_closed_forms(0.1)
        p = [0.0, 0.0, 0.0]
        assert kappa.evaluate(p)[0] == pytest.approx(0.1809750, abs=1e-12)
        assert mu.evaluate(p)[0] == pytest.approx(0.19, abs=1e-12)

    def test_half_offdiag_closed_forms_match_c(self):
        f = parse_expression(SIN_F)
        _, _, C = gf_coefficients(f, GfVariant.HALF_OFFDIAG)
        kappa, mu = gf_closed_forms(f)
        p = np.array([[0.0, 0.0, t] for t in np.linspace(0.0, 3.0, 7)])
        c = C.evaluate(p)
        np.testing.assert_allclose(kappa.evaluate(p), 1.0 - c * c, atol=1e-14)
        np.testing.assert_allclose(mu.evaluate(p), 2.0 * (1.0 - c), atol=1e-14)

    def test_proposition_reports_closed_forms(self, t_points):
        S = gf_structure(0.1, GfVariant.DERIVED, "0.1")
        report = check_gf_proposition(S, t_points)
        np.testing.assert_allclose(report.value("kappa"), 0.180975, atol=1e-12)
        np.testing.assert_allclose(report.value("mu"), 0.19, atol=1e-12)
        assert report.provenance.variant == "derived"
        assert {"jacobi_E", "jacobi_phiE", "jacobi_xi"} <= set(report.records[0].residuals)

    def test_derived_defining_relation(self, t_points):
        S = gf_structure(parse_expression(SIN_F), GfVariant.DERIVED, SIN_F)
        assert check_gf_defining_relation(S, t_points, 1e-10).verdict == "pass"
        # phi^2 = -Id / (1 - 3/4 f^4) on the horizontal plane
        report = check_contact_axioms(S, t_points)
        assert report.verdict == "fail"
        assert report.residual("d_eta").max() < 1e-12
        assert report.residual("phi_squared").max() == pytest.approx(0.75e-4, rel=1e-3)

    @pytest.mark.parametrize("f", ["0.1", SIN_F])
    def test_half_offdiag_is_contact_metric(self, f, t_points):
        S = gf_structure(parse_expression(f), GfVariant.HALF_OFFDIAG, f)
        assert check_contact_axioms(S, t_points).verdict == "pass"

    def test_h_report_shape(self, t_points):
        S = gf_structure(0.1, GfVariant.HALF_OFFDIAG, "0.1")
        report = check_gf_h(S, t_points)
        assert report.scenario == "gf-h"
        assert report.summary.count == len(t_points)
        np.testing.assert_allclose(report.value("f"), 0.1)
        assert np.all(np.isfinite(report.residual("h_phiE")))

    def test_literal_variant_phi_squared_gap(self, t_points):
        # phi^2 E = -(AC - B^2) E = -(1 - 3/4 f^4) E
        S = gf_structure(parse_expression(SIN_F), GfVariant.PAPER_LITERAL, SIN_F)
        report = check_contact_axioms(S, t_points)
        assert report.verdict == "fail"
        assert report.residual("phi_squared").max() == pytest.approx(0.75e-4, rel=1e-6)

    @pytest.mark.parametrize("variant", list(GfVariant))
    def test_refit_meets_closed_forms_at_zeros_of_f(self, variant, t_points):
        S = gf_structure(parse_expression(SIN_F), variant, SIN_F)
        report = check_gf_zero_gap(S, t_points)
        assert report.verdict == "pass"
        assert report.value("zero_of_f_samples")[0] > 0
        assert report.summary.max < 1e-8

    def test_zero_gap_is_empty_without_zeros(self, t_points):
        S = gf_structure(0.1, GfVariant.DERIVED, "0.1")
        report = check_gf_zero_gap(S, t_points)
        assert report.verdict == "pass"
        assert report.value("zero_of_f_samples")[0] == 0

    @pytest.mark.parametrize("variant", list(GfVariant))
    def test_remark_condition_every_variant(self, variant, t_points):
        const = gf_structure(0.1, variant, "0.1")
        assert check_remark_condition(const, t_points).summary.max < 1e-8
        varying = gf_structure(parse_expression(SIN_F), variant, SIN_F)
        assert check_remark_condition(varying, t_points).summary.max > 1e-2

    def test_remark_condition(self, t_points):
        const = gf_structure(0.1, GfVariant.DERIVED, "0.1")
        assert check_remark_condition(const, t_points).verdict == "pass"
        varying = gf_structure(parse_expression(SIN_F), GfVariant.DERIVED, SIN_F)
        report = check_remark_condition(varying, t_points)
        assert report.summary.max > 1e-2

    def test_fiber_invariance(self, t_points):
        f = parse_expression(SIN_F)
        S = gf_structure(f, GfVariant.DERIVED, SIN_F)
        report = check_flat_frame(S, t_points, f=gf_parameter(S))
        assert report.residual("fiber_xi").max() < 1e-14
        assert report.residual("fiber_phiE").max() < 1e-14

    def test_provenance(self):
        S = gf_structure(parse_expression(SIN_F), "half-offdiag", SIN_F)
        assert S.name == "gf-half-offdiag"
        assert S.provenance == {"model": "gf", "variant": "half-offdiag", "f": SIN_F}


class TestGfAdmissibility:
    def test_depends_on_x(self):
        with pytest.raises(StructureError) as exc:
            gf_structure(parse_expression("0.1*x"))
        assert "z only" in str(exc.value)

    def test_not_periodic(self):
        with pytest.raises(StructureError) as exc:
            gf_structure(parse_expression("0.1*sin(z)"))
        assert "periodic" in str(exc.value)

    @pytest.mark.parametrize("variant", [GfVariant.PAPER_LITERAL, GfVariant.DERIVED])
    def test_too_large(self, variant):
        with pytest.raises(StructureError):
            gf_structure(2.0, variant)

    def test_half_offdiag_has_no_bound(self):
        S = gf_structure(2.0, GfVariant.HALF_OFFDIAG)
        assert S.name == "gf-half-offdiag"

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            gf_structure(0.1, "quarter")


def test_flat_torus_frame(t_points):
    report = check_flat_frame(model_flat_torus(), t_points, 1e-9)
    assert report.verdict == "pass"


def test_gf_parameter_missing():
    with pytest.raises(StructureError):
        gf_parameter(model_flat_torus())


class TestDeformParams:
    def test_exactly_one(self):
        with pytest.raises(ValueError):
            DeformParams()
        with pytest.raises(ValueError):
            DeformParams(a=2.0, f=parse_expression("0"))

    def test_positive_a(self):
        with pytest.raises(ValueError):
            DeformParams(a=0.0)

    def test_apply(self, heisenberg):
        S = DeformParams(a=2.0).apply(heisenberg)
        assert S.name == "heisenberg-dhomothety"
        deform = DeformParams(f=parse_expression("0.1"), f_text="0.1", variant=GfVariant.DERIVED)
        gf = deform.apply(model_flat_torus())
        assert gf.provenance["f"] == "0.1"
        assert gf.provenance["variant"] == "derived"

    def test_gf_needs_flat_torus(self, heisenberg):
        deform = DeformParams(f=parse_expression("0.1"), f_text="0.1")
        with pytest.raises(StructureError) as exc:
            deform.apply(heisenberg)
        assert "flat torus" in str(exc.value)
