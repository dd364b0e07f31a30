import numpy as np
import pytest

from contactlab.core import contactcore
from contactlab.core.contactcore import (
    SAMPLE_CACHE_SIZE,
    DegenerateFrameError,
    StructureError,
    automorphism_hypothesis,
    check_christoffel_oracle,
    check_contact_axioms,
    check_eta_einstein,
    check_eta_einstein_differentials,
    check_eta_einstein_kappa,
    check_full_kmu,
    check_h_divergence,
    check_jacobi_decomposition,
    check_k_contact,
    check_kmu_frame_identities,
    check_kmu_jacobi,
    check_kmu_structural,
    check_non_k_contact_eta_einstein,
    check_q_formula_3d,
    check_reeb_consistency,
    check_sasakian,
    check_universal_identities,
    contact_structure,
    fit_eta_einstein,
    fit_kappa_mu_jacobi,
    h_eigenframe,
    killing_and_automorphism,
    reeb_field,
)
from contactlab.core.deformlab import model_flat_torus, model_heisenberg_sasakian
from contactlab.core.jetcalc import coordinate
from contactlab.core.sampling import SampleDomain, sample_points
from contactlab.core.tensorlab import EndoField, MetricField, OneFormField, VectorField


@pytest.fixture(scope="module")
def heisenberg():
    return model_heisenberg_sasakian()


@pytest.fixture(scope="module")
def torus():
    return model_flat_torus()


@pytest.fixture(scope="module")
def h_points(heisenberg):
    return sample_points(heisenberg.domain, (3, 3, 4))


@pytest.fixture(scope="module")
def t_points(torus):
    return sample_points(torus.domain, (3, 3, 8))


class TestHeisenberg:
    def test_reeb_field(self, heisenberg, h_points):
        np.testing.assert_allclose(heisenberg.xi.evaluate(h_points), [[0.0, 0.0, 2.0]] * len(h_points))

    def test_derived_phi(self, heisenberg, h_points):
        phi = heisenberg.phi.evaluate(h_points)
        y = h_points[:, 1]
        expected = np.zeros_like(phi)
        expected[:, 0, 1] = 1.0
        expected[:, 1, 0] = -1.0
        expected[:, 2, 1] = y
        np.testing.assert_allclose(phi, expected, atol=1e-14)

    def test_axioms(self, heisenberg, h_points):
        report = check_contact_axioms(heisenberg, h_points)
        assert report.verdict == "pass"
        assert report.summary.count == len(h_points)

    def test_sasakian_and_k_contact(self, heisenberg, h_points):
        sasakian = check_sasakian(heisenberg, h_points)
        assert sasakian.verdict == "pass"
        assert sasakian.notes["criteria_agree"] == "true"
        k_contact = check_k_contact(heisenberg, h_points)
        assert k_contact.verdict == "pass"
        assert k_contact.notes["criteria_agree"] == "true"

    def test_eta_einstein_coefficients(self, heisenberg, h_points):
        fit = fit_eta_einstein(heisenberg, h_points)
        np.testing.assert_allclose(fit.lambda_ric, -2.0, atol=1e-7)
        np.testing.assert_allclose(fit.gamma, 4.0, atol=1e-7)
        report = check_eta_einstein(heisenberg, h_points, 1e-7, lambda_ric=-2.0, gamma=4.0)
        assert report.verdict == "pass"

    def test_scalar_curvature_and_q_xi(self, heisenberg, h_points):
        sample = heisenberg.at(h_points)
        np.testing.assert_allclose(sample.bundle.scalar, -2.0, atol=1e-10)
        report = check_q_formula_3d(heisenberg, 1.0, 0.0, h_points)
        assert report.verdict == "pass"
        np.testing.assert_allclose(report.value("r"), -2.0, atol=1e-10)

    def test_kappa_fit_without_h(self, heisenberg, h_points):
        fit = fit_kappa_mu_jacobi(heisenberg, h_points)
        np.testing.assert_allclose(fit.kappa, 1.0, atol=1e-9)
        assert not fit.mu_identifiable.any()
        assert np.all(fit.mu == 0.0)

    def test_differentials_and_kappa_space(self, heisenberg, h_points):
        assert check_eta_einstein_differentials(heisenberg, h_points, 1e-7).verdict == "pass"
        report = check_eta_einstein_kappa(heisenberg, h_points, 1e-7)
        assert report.verdict == "pass"
        np.testing.assert_allclose(report.value("kappa"), 1.0, atol=1e-9)

    def test_non_k_contact_statement_not_applicable(self, heisenberg, h_points):
        report = check_non_k_contact_eta_einstein(heisenberg, h_points)
        assert report.verdict == "not-applicable"
        assert "K-contact" in report.notes["hypothesis"]

    def test_killing_x_is_automorphism(self, heisenberg, h_points):
        report = killing_and_automorphism(heisenberg, VectorField.coordinate(0), h_points)
        assert report.verdict == "pass"
        assert report.notes["gamma_nonzero"] == "true"
        assert "bracket_xi" in report.records[0].residuals
        assert report.notes["kappa_space_automorphism"] == "true"

    def test_frame_identities_need_eigenframe(self, heisenberg, h_points):
        with pytest.raises(DegenerateFrameError):
            check_kmu_frame_identities(heisenberg, 0.5, 0.0, h_points)

    def test_jacobi_decomposition(self, heisenberg, h_points):
        assert check_jacobi_decomposition(heisenberg, h_points, 1e-7).verdict == "pass"


class TestFlatTorus:
    def test_axioms_and_reeb(self, torus, t_points):
        assert check_contact_axioms(torus, t_points).verdict == "pass"
        assert check_reeb_consistency(torus, t_points).verdict == "pass"

    def test_eigenframe(self, torus, t_points):
        ef = h_eigenframe(torus, t_points)
        np.testing.assert_allclose(ef.lambda_h, 1.0, atol=1e-12)
        np.testing.assert_allclose(ef.E, [[0.0, 0.0, 1.0]] * len(t_points), atol=1e-12)
        assert ef.defined.all()

    def test_kmu_zero(self, torus, t_points):
        report = check_kmu_jacobi(torus, t_points, kappa=0.0, mu=0.0)
        assert report.verdict == "pass"
        assert check_full_kmu(torus, 0.0, 0.0, t_points).verdict == "pass"
        assert check_kmu_structural(torus, 0.0, 0.0, t_points).verdict == "pass"
        assert check_kmu_frame_identities(torus, 0.0, 0.0, t_points).verdict == "pass"
        assert check_h_divergence(torus, t_points).verdict == "pass"

    def test_not_k_contact(self, torus, t_points):
        report = check_k_contact(torus, t_points)
        assert report.verdict == "fail"
        assert report.residual("lie_xi_g").max() > 1.0

    def test_non_k_contact_eta_einstein(self, torus, t_points):
        report = check_non_k_contact_eta_einstein(torus, t_points)
        assert report.verdict == "pass"
        assert np.max(np.abs(report.value("gamma"))) < 1e-8

    def test_killing_z_is_not_automorphism(self, torus, t_points):
        report = killing_and_automorphism(torus, VectorField.coordinate(2), t_points)
        assert report.verdict == "pass"
        assert report.notes["gamma_nonzero"] == "false"
        assert "bracket_xi" not in report.records[0].residuals
        assert report.value("bracket_xi").max() > 1.0
        assert report.notes["kappa_space_automorphism"] == "false"

    def test_killing_x_commutes_with_xi(self, torus, t_points):
        report = killing_and_automorphism(torus, VectorField.coordinate(0), t_points)
        assert report.verdict == "pass"
        assert report.notes["gamma_nonzero"] == "false"
        assert report.value("bracket_xi").max() == 0.0
        assert report.value("lie_eta").max() == 0.0


@pytest.mark.parametrize("model", [model_flat_torus, model_heisenberg_sasakian])
def test_universal_identities_and_oracle(model):
    S = model()
    points = sample_points(S.domain, (3, 3, 4))
    assert check_universal_identities(S, points, tol=1e-7).verdict == "pass"
    assert check_christoffel_oracle(S, points, tol=1e-6).verdict == "pass"


def test_structural_check_not_applicable_when_axioms_fail(h_points):
    y = coordinate(1)
    S = contact_structure(
        "bad-phi",
        eta=OneFormField.of(-0.5 * y, 0.0, 0.5),
        g=MetricField.of([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        domain=SampleDomain(bounds=[(-1.0, 1.0)] * 3),
        phi=EndoField.identity(),
    )
    assert check_contact_axioms(S, h_points).verdict == "fail"
    report = check_kmu_structural(S, 0.0, 0.0, h_points)
    assert report.verdict == "not-applicable"


def test_mismatched_xi_raises():
    y = coordinate(1)
    with pytest.raises(StructureError) as exc:
        contact_structure(
            "wrong-xi",
            eta=OneFormField.of(-0.5 * y, 0.0, 0.5),
            g=MetricField.of([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
            domain=SampleDomain(bounds=[(-1.0, 1.0)] * 3),
            xi=VectorField.of(0.0, 0.0, 1.0),
        )
    assert "differs from the Reeb field" in str(exc.value)


def test_non_contact_form_raises():
    with pytest.raises(StructureError):
        reeb_field(OneFormField.of(1.0, 0.0, 0.0), points=[[0.0, 0.0, 0.0]])


@pytest.mark.parametrize(
    "kappa, r, expected",
    [(0.5, 0.0, True), (0.0, 3.0, False), (1.0, 6.0, False), (1.0, -2.0, True)],
)
def test_automorphism_hypothesis(kappa, r, expected):
    assert automorphism_hypothesis(kappa, r) is expected


def test_sample_cache_is_bounded(torus, t_points):
    first = torus.at(t_points)
    assert torus.at(t_points.copy()) is first
    for k in range(SAMPLE_CACHE_SIZE + 5):
        torus.at([[0.01 * k, 0.5, 0.5]])
    assert contactcore._sample_at.cache_info().currsize <= SAMPLE_CACHE_SIZE
