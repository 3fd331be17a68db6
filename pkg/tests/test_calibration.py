import json
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from weakreal.calibration import (
    SIGMA,
    BlochVector,
    CalibrationError,
    POVMElement,
    ProbMatrices,
    anticommutation_residual,
    calibrate,
    load_fixture,
    magnitude_bounds,
    prob_matrices,
    random_instance,
    tetrahedron_povm,
    validate_povm,
)
from weakreal.instrument import classify_measurement

S3 = math.sqrt(3)
FIXTURE = resources.files("weakreal") / "data" / "tetrahedron.json"


@pytest.fixture(scope="module")
def tetra():
    preps, povm, q, lam = load_fixture(FIXTURE)
    pm = prob_matrices(preps, povm, q, lam)
    return preps, povm, q, lam, pm, calibrate(pm)


def parallel(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return abs(abs(x @ y) - np.linalg.norm(x) * np.linalg.norm(y)) < 1e-12 * np.linalg.norm(x) * np.linalg.norm(y)


def bloch_of(op):
    return np.array([np.trace(op @ s).real / 2 for s in SIGMA])


class TestDevices:
    def test_tetrahedron_angles(self):
        mu = np.array([m.mu.array() for m in tetrahedron_povm()])
        u = mu / np.linalg.norm(mu, axis=1)[:, None]
        g = u @ u.T
        off = g[~np.eye(4, dtype=bool)]
        assert np.allclose(off, -1 / 3)

    def test_tetrahedron_psd_and_complete(self):
        povm = tetrahedron_povm()
        mats = [m.matrix() for m in povm]
        assert np.allclose(sum(mats), np.eye(2))
        assert all(np.linalg.eigvalsh(m).min() >= -1e-15 for m in mats)

    @pytest.mark.parametrize(
        "povm",
        [
            [POVMElement(0.5, BlochVector(0, 0, 0.5))] * 2 + [POVMElement(0.0, BlochVector(0, 0, 0))] * 2,
            [POVMElement(0.2, BlochVector(0, 0, 0))] * 4,
        ],
    )
    def test_invalid_povm(self, povm):
        with pytest.raises(ValueError):
            validate_povm(povm)

    def test_element_not_psd(self):
        with pytest.raises(ValueError):
            POVMElement(0.1, BlochVector(0.2, 0, 0))

    def test_bloch_norm(self):
        with pytest.raises(ValueError):
            BlochVector(1, 1, 0).density()


class TestProbMatrices:
    def test_tetrahedron_values(self, tetra):
        pm, lam = tetra[4], tetra[3]
        # rows: outcomes; columns: x, y, z preparations
        sgn = np.array([(1, -1, -1), (-1, 1, -1), (-1, -1, 1), (1, 1, 1)])
        assert np.allclose(pm.w, 0.25 + sgn / (4 * S3))
        v_expected = 2 * lam * np.array([[s[1], -s[0], 0] for s in sgn]) / (4 * S3)
        assert np.allclose(pm.v, v_expected)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**31))
    def test_against_unitary_kick(self, seed):
        # v is the first-order response of Tr(E_k U rho_j U^dag) with U = exp(-i lam q.sigma)
        preps, povm, q, _ = random_instance(np.random.default_rng(seed))
        pm = prob_matrices(preps, povm, q, 1.0)
        h = 1e-5
        n = np.einsum("a,aij->ij", q.array(), SIGMA)
        for j, p in enumerate(preps):
            rho = p.density()
            up, dn = expm(-1j * h * n), expm(1j * h * n)
            for k, m in enumerate(povm):
                E = m.matrix()
                assert np.trace(E @ rho).real == pytest.approx(pm.w[k, j], abs=1e-12)
                d = (np.trace(E @ up @ rho @ up.conj().T) - np.trace(E @ dn @ rho @ dn.conj().T)).real / (2 * h)
                assert d == pytest.approx(pm.v[k, j], abs=1e-8)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            ProbMatrices(np.zeros((3, 3)), np.zeros((4, 3)))


class TestTetrahedron:
    def test_contrast_weights(self, tetra):
        res, lam = tetra[5], tetra[3]
        assert np.allclose(res.pbar, np.array([1, 1, -2]) * lam / (24 * S3))
        unit = lam**4 / (2**6 * 3**4)
        assert np.allclose(res.mbar / unit, [1, -1, 0, 0], atol=1e-10)

    def test_intermediates_follow_printed_directions(self, tetra):
        res = tetra[5]
        printed = json.loads(FIXTURE.read_text())["printed"]
        for key in ("m_parallel", "p_parallel", "m_perp", "p_perp"):
            assert parallel(res.intermediates[key], printed[key]["direction"]), key
        assert parallel(res.pbar, printed["pbar"]["direction"])
        assert parallel(res.mbar, printed["mbar"]["direction"])

    def test_intermediate_scales(self, tetra):
        res, lam = tetra[5], tetra[3]
        inter = res.intermediates
        assert np.allclose(inter["m_parallel"], np.array([1, 1, 0, 0]) * lam**2 / 6)
        assert np.allclose(inter["p_parallel"], np.array([0, 0, -1]) * lam**2 / 6)
        assert inter["rho_parallel0"] == pytest.approx(-(lam**2) / 6)
        assert np.allclose(inter["m_perp"], np.array([1, 1, 1, 0]) / 12)

    def test_mubar_direction(self, tetra):
        preps, povm, _, lam, _, res = tetra
        M, _ = res.contrast_operators(preps, povm)
        mubar = bloch_of(M)
        unit = lam**4 / (2**7 * 3**4 * S3)
        assert np.allclose(mubar / unit, [1, -1, 0], atol=1e-10)
        assert abs(np.trace(M)) < 1e-18

    def test_anticommute(self, tetra):
        preps, povm, *_, res = tetra
        M, P = res.contrast_operators(preps, povm)
        assert anticommutation_residual(M, P) < 1e-12
        assert classify_measurement(M / np.linalg.norm(M), P / np.linalg.norm(P)) == "informative"

    def test_rho_bound_interval(self, tetra):
        preps, povm, _, lam, pm, res = tetra
        lo, hi = res.bounds["rho"]
        unit = math.sqrt(6) * lam / (24 * S3)
        _, P = res.contrast_operators(preps, povm)
        true = np.linalg.norm(bloch_of(2 * P))
        assert true / unit == pytest.approx(1.0)
        assert lo <= true <= hi
        printed_lo, printed_hi = json.loads(FIXTURE.read_text())["rho_bound_interval"]
        assert printed_lo <= true / unit <= printed_hi

    def test_mu_bound_interval(self, tetra):
        res, lam = tetra[5], tetra[3]
        lo, hi = res.bounds["mu"]
        unit = lam**4 / (2**6 * 3**4)
        assert lo / unit == pytest.approx(1 / (2 * S3))
        assert hi / unit == pytest.approx(2.0)


class TestDegenerate:
    def test_zero_system_vector(self):
        preps, povm, _, lam = load_fixture(FIXTURE)
        pm = prob_matrices(preps, povm, BlochVector(0, 0, 0), lam)
        assert np.array_equal(pm.v, np.zeros((4, 3)))
        with pytest.raises(CalibrationError, match="degenerate"):
            calibrate(pm)

    def test_full_rank_rejected(self):
        rng = np.random.default_rng(0)
        pm = ProbMatrices(rng.random((4, 3)), rng.standard_normal((4, 3)))
        with pytest.raises(CalibrationError, match="full rank"):
            calibrate(pm)

    def test_aux_redraw(self, tetra):
        # a bad first choice (a parallel to b) triggers a redraw, and the result is still valid
        preps, povm, *_, pm, _ = tetra
        e = np.eye(3)
        res = calibrate(pm, aux=(e[0], e[0], e[0], e[2]))
        M, P = res.contrast_operators(preps, povm)
        assert anticommutation_residual(M, P) < 1e-10


class TestRandomInstances:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31))
    def test_informative(self, seed):
        preps, povm, q, lam = random_instance(np.random.default_rng(seed))
        res = calibrate(prob_matrices(preps, povm, q, lam))
        M, P = res.contrast_operators(preps, povm)
        assert anticommutation_residual(M, P) < 1e-8
        assert classify_measurement(M / np.linalg.norm(M), P / np.linalg.norm(P)) == "informative"

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31))
    def test_bounds_contain_truth(self, seed):
        preps, povm, q, lam = random_instance(np.random.default_rng(seed))
        pm = prob_matrices(preps, povm, q, lam)
        res = calibrate(pm)
        M, P = res.contrast_operators(preps, povm)
        mu, rho = np.linalg.norm(bloch_of(M)), np.linalg.norm(bloch_of(2 * P))
        b = magnitude_bounds(res, pm.w)
        assert b["mu"][0] * (1 - 1e-9) <= mu <= b["mu"][1] * (1 + 1e-9)
        assert b["rho"][0] * (1 - 1e-9) <= rho <= b["rho"][1] * (1 + 1e-9)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31), st.permutations(range(3)))
    def test_preparation_permutation(self, seed, perm):
        preps, povm, q, lam = random_instance(np.random.default_rng(seed))
        a = calibrate(prob_matrices(preps, povm, q, lam))
        b = calibrate(prob_matrices([preps[i] for i in perm], povm, q, lam))
        # same operators up to an overall scale
        Pa = a.contrast_operators(preps, povm)[1]
        Pb = b.contrast_operators([preps[i] for i in perm], povm)[1]
        assert parallel(Pa.ravel().view(float), Pb.ravel().view(float))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.1, 10))
    def test_scale_gauge(self, seed, s):
        # rescaling the shift matrix only rescales the weights
        preps, povm, q, lam = random_instance(np.random.default_rng(seed))
        pm = prob_matrices(preps, povm, q, lam)
        a = calibrate(pm)
        b = calibrate(ProbMatrices(pm.w, s * pm.v))
        assert parallel(a.pbar, b.pbar) and parallel(a.mbar, b.mbar)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31))
    def test_geometry(self, seed):
        preps, povm, q, lam = random_instance(np.random.default_rng(seed))
        res = calibrate(prob_matrices(preps, povm, q, lam))
        rho = np.sum([c * p.array() for c, p in zip(res.pbar, preps)], axis=0)
        # rhobar is orthogonal to q (first order response is transverse)
        m_perp = res.intermediates["m_perp"]
        mu_perp = np.sum([c * m.mu.array() for c, m in zip(m_perp, povm)], axis=0)
        assert abs(rho @ mu_perp) < 1e-9 * np.linalg.norm(rho) * np.linalg.norm(mu_perp)
        assert abs(np.linalg.det(np.array([rho, q.array(), mu_perp]))) < 1e-9 * np.linalg.norm(rho) * q.norm * np.linalg.norm(mu_perp)
