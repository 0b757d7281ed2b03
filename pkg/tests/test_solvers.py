import math
import warnings

import numpy as np
import pytest

from _synth import exact_distances, random_scene_points
from rssiloc.exceptions import (CollinearAnchors, DegenerateWeightsWarning,
                                NoIntersection, NonPositiveDistance,
                                NotPositiveDefinite, RankDeficient,
                                TooFewAnchors)
from rssiloc.solvers import (BiasTerms, SOLVER_NAMES, WeightModel,
                             bias_compensated_solve, build_bias_terms,
                             build_weights, estimate_position,
                             hyperbolic_solve, linearize, lls_solve,
                             trilaterate, wls_solve)

TRIANGLE = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]])
TRIANGLE_D = np.array([math.sqrt(2), math.sqrt(10), math.sqrt(5)])  # target (1,1)


def centering_projector(m):
    return np.eye(m) - np.full((m, m), 1.0 / m)


class TestTrilaterate:
    def test_forward_inverse_hand_case(self):
        anchors = np.array([[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [1.0, 3.0, 0.0]])
        radii = exact_distances(anchors, [1.0, 1.0, 0.0])
        np.testing.assert_allclose(radii, [math.sqrt(2), math.sqrt(10), 2.0])
        candidates = trilaterate(anchors, radii)
        np.testing.assert_allclose(candidates[0], [1.0, 1.0, 0.0], atol=1e-7)
        np.testing.assert_allclose(candidates[1], [1.0, 1.0, 0.0], atol=1e-7)

    def test_target_at_first_anchor(self):
        anchors = np.array([[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [1.0, 3.0, 0.0]])
        candidates = trilaterate(anchors, [0.0, 4.0, math.sqrt(10)])
        np.testing.assert_allclose(candidates[0], [0.0, 0.0, 0.0], atol=1e-9)

    def test_random_3d_targets_recovered(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            anchors = np.hstack([random_scene_points(rng, 3),
                                 rng.uniform(0, 50, (3, 1))])
            z_sign = rng.choice([-1.0, 1.0])
            target = np.array([rng.uniform(50, 350), rng.uniform(50, 350),
                               z_sign * rng.uniform(80, 300)])
            radii = np.sqrt(((anchors - target) ** 2).sum(axis=1))
            candidates = trilaterate(anchors, radii)
            err = min(np.linalg.norm(c - target) for c in candidates)
            assert err < 1e-9

    def test_mirror_candidates(self):
        anchors = np.array([[0.0, 0.0, 0.0], [400.0, 0.0, 0.0],
                            [100.0, 300.0, 0.0]])
        target = np.array([150.0, 100.0, 120.0])
        radii = np.sqrt(((anchors - target) ** 2).sum(axis=1))
        c_plus, c_minus = trilaterate(anchors, radii)
        np.testing.assert_allclose(c_plus[:2], c_minus[:2], atol=1e-9)
        assert c_plus[2] == pytest.approx(-c_minus[2], abs=1e-9)

    def test_collinear_anchors(self):
        anchors = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        with pytest.raises(CollinearAnchors):
            trilaterate(anchors, [1.0, 1.0, 1.0])

    def test_no_intersection(self):
        anchors = np.array([[0.0, 0.0, 0.0], [400.0, 0.0, 0.0],
                            [100.0, 300.0, 0.0]])
        with pytest.raises(NoIntersection):
            trilaterate(anchors, [10.0, 10.0, 10.0])

    def test_rigid_motion_equivariance(self):
        rng = np.random.default_rng(23)
        anchors = np.array([[0.0, 0.0, 0.0], [400.0, 0.0, 0.0],
                            [100.0, 300.0, 0.0]])
        target = np.array([150.0, 100.0, 0.0])
        radii = np.sqrt(((anchors - target) ** 2).sum(axis=1))
        base = trilaterate(anchors, radii)[0]
        theta = rng.uniform(0, 2 * math.pi)
        rot = np.array([[math.cos(theta), -math.sin(theta), 0.0],
                        [math.sin(theta), math.cos(theta), 0.0],
                        [0.0, 0.0, 1.0]])
        shift = rng.uniform(-500, 500, 3)
        moved = trilaterate(anchors @ rot.T + shift, radii)[0]
        np.testing.assert_allclose(moved, rot @ base + shift, atol=1e-9)


class TestLinearize:
    def test_hand_example(self):
        system = linearize(TRIANGLE, TRIANGLE_D)
        np.testing.assert_allclose(
            system.design,
            [[-4.0 / 3.0, -1.0], [8.0 / 3.0, -1.0], [-4.0 / 3.0, 2.0]])
        np.testing.assert_allclose(system.rhs,
                                   [-14.0 / 3.0, 10.0 / 3.0, 4.0 / 3.0])
        # the linearization identity 2 A s = b holds at the true target
        np.testing.assert_allclose(2.0 * system.design @ [1.0, 1.0],
                                   system.rhs)

    def test_design_is_translation_invariant(self):
        shift = np.array([57.0, -31.0])
        base = linearize(TRIANGLE, TRIANGLE_D)
        moved = linearize(TRIANGLE + shift, TRIANGLE_D)
        np.testing.assert_allclose(moved.design, base.design, atol=1e-12)

    def test_design_columns_sum_to_zero(self):
        rng = np.random.default_rng(31)
        pts = random_scene_points(rng, 5)
        d = rng.uniform(50, 500, 5)
        system = linearize(pts, d)
        np.testing.assert_allclose(system.design.sum(axis=0), 0.0, atol=1e-9)

    def test_too_few_anchors(self):
        with pytest.raises(TooFewAnchors):
            linearize(TRIANGLE[:2], TRIANGLE_D[:2])


class TestLls:
    def test_hand_example(self):
        assert lls_solve(linearize(TRIANGLE, TRIANGLE_D)) == pytest.approx(
            [1.0, 1.0])

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            pts = random_scene_points(rng, int(rng.integers(3, 6)))
            target = rng.uniform(20, 380, 2)
            est = lls_solve(linearize(pts, exact_distances(pts, target)))
            assert np.linalg.norm(est - target) < 1e-9

    def test_collinear_rank_deficient(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(RankDeficient):
            lls_solve(linearize(pts, [1.0, 1.0, 1.0]))

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(43)
        pts = random_scene_points(rng, 4)
        target = rng.uniform(50, 350, 2)
        d = exact_distances(pts, target)
        base = lls_solve(linearize(pts, d))
        theta = rng.uniform(0, 2 * math.pi)
        rot = np.array([[math.cos(theta), -math.sin(theta)],
                        [math.sin(theta), math.cos(theta)]])
        moved = lls_solve(linearize(pts @ rot.T, d))
        np.testing.assert_allclose(moved, rot @ base, atol=1e-9)


class TestWeights:
    def test_zero_noise_gives_zero_matrix(self):
        w = build_weights(TRIANGLE, TRIANGLE_D, 0.0, 0.0, 2.0)
        np.testing.assert_array_equal(w.w, 0.0)

    def test_equal_variances_give_scaled_projector(self):
        # equal per-anchor variance v: W = P diag(v) P = v P
        pts = np.array([[100.0, 0.0], [0.0, 100.0], [-100.0, -100.0]])
        k = (pts ** 2).sum(axis=1)
        assert len(set(k)) < 3 or True
        # equal distances and equal coordinates norms make variances equal
        pts = np.array([[100.0, 0.0], [-50.0, 86.602540378443865],
                        [-50.0, -86.602540378443865]])
        d = np.full(3, 200.0)
        w = build_weights(pts, d, 3.0, 2.0, 2.0)
        sb2 = (2.0 * math.log(10.0) / 20.0) ** 2
        v = (4.0 * 9.0 * (9.0 + 100.0 ** 2)
             + 200.0 ** 4 * (math.exp(8 * sb2) - math.exp(4 * sb2)))
        np.testing.assert_allclose(w.w, v * centering_projector(3), rtol=1e-12)

    def test_symmetric_zero_row_sums(self):
        rng = np.random.default_rng(53)
        pts = random_scene_points(rng, 5)
        d = rng.uniform(50, 500, 5)
        w = build_weights(pts, d, rng.uniform(0, 5, 5), rng.uniform(0, 4, 5), 2.0)
        np.testing.assert_allclose(w.w, w.w.T, atol=1e-18)
        scale = np.abs(w.w).max()
        np.testing.assert_allclose(w.w.sum(axis=1) / scale, 0.0, atol=1e-12)

    def test_non_positive_distance(self):
        with pytest.raises(NonPositiveDistance):
            build_weights(TRIANGLE, [1.0, 0.0, 1.0], 1.0, 1.0, 2.0)

    def test_weight_model_validates(self):
        with pytest.raises(ValueError):
            WeightModel(w=np.array([[0.0, 1.0], [0.0, 0.0]]))
        with pytest.raises(ValueError):
            WeightModel(w=np.array([[-1.0, 0.0], [0.0, 1.0]]))


class TestWls:
    def test_identity_weights_match_lls(self):
        system = linearize(TRIANGLE, TRIANGLE_D)
        est = wls_solve(system, WeightModel(w=np.eye(3)))
        np.testing.assert_allclose(est, lls_solve(system), atol=1e-12)

    def test_exact_distances_any_valid_weights(self):
        rng = np.random.default_rng(61)
        for _ in range(50):
            pts = random_scene_points(rng, int(rng.integers(3, 6)))
            target = rng.uniform(20, 380, 2)
            d = exact_distances(pts, target)
            w = build_weights(pts, d, rng.uniform(0.5, 3), rng.uniform(0.5, 3),
                              2.0)
            est = wls_solve(linearize(pts, d), w)
            assert np.linalg.norm(est - target) < 1e-9

    def test_zero_weights_fall_back_with_warning(self):
        system = linearize(TRIANGLE, TRIANGLE_D)
        w = build_weights(TRIANGLE, TRIANGLE_D, 0.0, 0.0, 2.0)
        with pytest.warns(DegenerateWeightsWarning):
            est = wls_solve(system, w)
        np.testing.assert_allclose(est, lls_solve(system), atol=1e-12)

    def test_weight_scale_cancels(self):
        rng = np.random.default_rng(67)
        pts = random_scene_points(rng, 4)
        d = rng.uniform(100, 500, 4)
        system = linearize(pts, d)
        proj = centering_projector(4)
        base = wls_solve(system, WeightModel(w=proj))
        for c in (1e-6, 3.0, 1e8):
            scaled = wls_solve(system, WeightModel(w=c * proj))
            np.testing.assert_allclose(scaled, base, rtol=1e-9)

    def test_rank_deficient(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(RankDeficient):
            wls_solve(linearize(pts, [1.0, 1.0, 1.0]), WeightModel(w=np.eye(3)))


class TestBiasTerms:
    def test_all_zero_without_noise(self):
        w = build_weights(TRIANGLE, TRIANGLE_D, 0.0, 0.0, 2.0)
        bias = build_bias_terms(TRIANGLE, TRIANGLE_D, 0.0, 0.0, 2.0, w)
        np.testing.assert_array_equal(bias.L, 0.0)
        np.testing.assert_array_equal(bias.t, 0.0)
        np.testing.assert_array_equal(bias.g, 0.0)

    def test_u_constant(self):
        w = build_weights(TRIANGLE, TRIANGLE_D, 0.0, 1.0, 2.5)
        bias = build_bias_terms(TRIANGLE, TRIANGLE_D, 0.0, 1.0, 2.5, w)
        assert bias.u == pytest.approx(math.log(10) / (5 * math.sqrt(2) * 2.5))

    def test_homoscedastic_t_reduces_to_distance_centering(self):
        # equal shadowing, no anchor noise: t_i = c * (mean(d^2) - d_i^2)
        rng = np.random.default_rng(71)
        pts = random_scene_points(rng, 5)
        d = rng.uniform(100, 500, 5)
        sigma_p, eta = 2.0, 2.0
        w = build_weights(pts, d, 0.0, sigma_p, eta)
        bias = build_bias_terms(pts, d, 0.0, sigma_p, eta, w)
        u = math.log(10) / (5 * math.sqrt(2) * eta)
        c = u ** 2 * sigma_p ** 2 + 0.5 * u ** 4 * sigma_p ** 4
        expected = c * ((d ** 2).mean() - d ** 2)
        np.testing.assert_allclose(bias.t, expected, rtol=1e-12)

    def test_four_term_expansion_matches_consolidated(self):
        # homoscedastic anchor noise: the four expectation terms of
        # E[(N1 - N2)' W+ (N1 - N2)] collapse to the consolidated diagonal
        # because the pseudo-inverse annihilates the ones vector
        rng = np.random.default_rng(73)
        m = 5
        pts = random_scene_points(rng, m)
        d = rng.uniform(100, 500, m)
        sigma_a = 3.0
        w = build_weights(pts, d, sigma_a, 2.0, 2.0)
        bias = build_bias_terms(pts, d, sigma_a, 2.0, 2.0, w)
        w_inv = np.linalg.pinv(w.w, rcond=1e-10, hermitian=True)
        var = sigma_a ** 2
        ones = np.ones(m)
        t1 = var * np.trace(w_inv)                     # E[N1' W+ N1]
        t2 = (var / m) * ones @ w_inv @ ones           # E[N2' W+ N2]
        t3 = (var / m) * w_inv.sum()                   # E[N2' W+ N1]
        t4 = t3                                        # E[N1' W+ N2]
        np.testing.assert_allclose(bias.L[0, 0], t1 + t2 - t3 - t4, rtol=1e-12)
        np.testing.assert_allclose(bias.L[1, 1], t1 + t2 - t3 - t4, rtol=1e-12)

    def test_l_matches_monte_carlo_expectation(self):
        rng = np.random.default_rng(79)
        m = 5
        pts = random_scene_points(rng, m)
        d = rng.uniform(100, 500, m)
        sigma_a = 3.0
        w = build_weights(pts, d, sigma_a, 2.0, 2.0)
        bias = build_bias_terms(pts, d, sigma_a, 2.0, 2.0, w)
        w_inv = np.linalg.pinv(w.w, rcond=1e-10, hermitian=True)
        proj = centering_projector(m)
        q = proj @ w_inv @ proj
        trials = 200_000
        noise = rng.normal(0.0, sigma_a, (trials, m))
        vals = np.einsum("ti,ij,tj->t", noise, q, noise)
        se = vals.std() / math.sqrt(trials)
        assert abs(vals.mean() - bias.L[0, 0]) < 4.0 * se

    def test_l_is_psd_diagonal(self):
        rng = np.random.default_rng(83)
        pts = random_scene_points(rng, 4)
        d = rng.uniform(100, 500, 4)
        w = build_weights(pts, d, 2.0, 1.0, 2.0)
        bias = build_bias_terms(pts, d, 2.0, 1.0, 2.0, w)
        assert bias.L[0, 1] == 0.0 and bias.L[1, 0] == 0.0
        assert bias.L[0, 0] >= 0.0 and bias.L[1, 1] >= 0.0


class TestBiasCompensatedSolve:
    def test_zero_bias_equals_wls_exactly(self):
        rng = np.random.default_rng(89)
        pts = random_scene_points(rng, 5)
        d = rng.uniform(100, 500, 5)
        system = linearize(pts, d)
        w = build_weights(pts, d, 1.0, 2.0, 2.0)
        zero = BiasTerms(L=np.zeros((2, 2)), t=np.zeros(5), g=np.zeros(2),
                         u=0.1)
        est = bias_compensated_solve(system, w, zero)
        np.testing.assert_array_equal(est, wls_solve(system, w))

    def test_noiseless_degeneration(self):
        system = linearize(TRIANGLE, TRIANGLE_D)
        w = build_weights(TRIANGLE, TRIANGLE_D, 0.0, 0.0, 2.0)
        bias = build_bias_terms(TRIANGLE, TRIANGLE_D, 0.0, 0.0, 2.0, w)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateWeightsWarning)
            est = bias_compensated_solve(system, w, bias)
            ref = wls_solve(system, w)
        np.testing.assert_array_equal(est, ref)
        np.testing.assert_allclose(est, [1.0, 1.0], atol=1e-12)

    def test_cross_term_changes_estimate_with_anchor_noise(self):
        rng = np.random.default_rng(97)
        pts = random_scene_points(rng, 5)
        target = rng.uniform(100, 300, 2)
        d = exact_distances(pts, target) * rng.uniform(0.9, 1.1, 5)
        w = build_weights(pts, d, 4.0, 2.0, 2.0)
        system = linearize(pts, d)
        bias = build_bias_terms(pts, d, 4.0, 2.0, 2.0, w)
        plain = bias_compensated_solve(system, w, bias)
        crossed = bias_compensated_solve(system, w, bias,
                                         include_cross_term=True)
        assert np.linalg.norm(plain - crossed) > 0.0

    def test_not_positive_definite_detected(self):
        system = linearize(TRIANGLE, TRIANGLE_D)
        w = WeightModel(w=np.eye(3))
        huge = BiasTerms(L=np.eye(2) * 1e9, t=np.zeros(3), g=np.zeros(2),
                         u=0.1)
        with pytest.raises(NotPositiveDefinite):
            bias_compensated_solve(system, w, huge)

    def test_monte_carlo_bias_reduction(self):
        # shortened version of the acceptance run: compensated estimates
        # average closer to the truth than plain LLS
        import rssiloc as rl
        anchors = np.array([[0.0, 0.0], [400.0, 0.0], [400.0, 400.0],
                            [0.0, 400.0], [200.0, 200.0]])
        target = np.array([120.0, 260.0])
        params = rl.PathLossParams(p0=-40.0, d0=100.0, eta=2.0,
                                   sigma_shadow=2.0)
        scene = rl.Scene([rl.Anchor(id=f"A{i}", position=rl.Position(*a))
                          for i, a in enumerate(anchors)])
        noise = rl.NoiseSpec(sigma_a=0.0, sigma_p=2.0, seed=321)
        est_lls, est_bc = [], []
        for t in range(500):
            perturbed, meas = rl.measure_once(scene, rl.Position(*target),
                                              params, noise, t)
            d = rl.distance_from_rssi(meas.values(), params)
            system = linearize(perturbed, d)
            est_lls.append(lls_solve(system))
            w = build_weights(perturbed, d, 0.0, 2.0, 2.0)
            bias = build_bias_terms(perturbed, d, 0.0, 2.0, 2.0, w)
            est_bc.append(bias_compensated_solve(system, w, bias))
        bias_lls = np.linalg.norm(np.mean(est_lls, axis=0) - target)
        bias_bc = np.linalg.norm(np.mean(est_bc, axis=0) - target)
        assert bias_bc < bias_lls


class TestHyperbolic:
    def test_hand_example(self):
        est = hyperbolic_solve(TRIANGLE, TRIANGLE_D)
        np.testing.assert_allclose(est, [1.0, 1.0], atol=1e-12)

    def test_hand_example_internal_system(self):
        # frame anchored at the first beacon: rows [2 a_n, 2 b_n], rhs
        # a_n^2 + b_n^2 - d_n^2 + d_1^2
        rel = TRIANGLE[1:] - TRIANGLE[0]
        mat = 2.0 * rel
        rhs = (rel ** 2).sum(axis=1) - TRIANGLE_D[1:] ** 2 + TRIANGLE_D[0] ** 2
        np.testing.assert_allclose(mat, [[8.0, 0.0], [0.0, 6.0]])
        np.testing.assert_allclose(rhs, [8.0, 6.0])

    def test_translation_equivariance(self):
        shift = np.array([7.0, -2.0])
        est = hyperbolic_solve(TRIANGLE + shift, TRIANGLE_D)
        np.testing.assert_allclose(est, [8.0, -1.0], atol=1e-9)

    def test_zero_sigma_weighted_equals_unweighted(self):
        rng = np.random.default_rng(101)
        pts = random_scene_points(rng, 5)
        d = rng.uniform(100, 500, 5)
        plain = hyperbolic_solve(pts, d)
        floored = hyperbolic_solve(pts, d, sigma=0.0, eta=2.0, weighted=True)
        np.testing.assert_allclose(floored, plain, atol=1e-9)

    def test_weighted_differs_on_noisy_data(self):
        rng = np.random.default_rng(103)
        pts = random_scene_points(rng, 5)
        target = rng.uniform(100, 300, 2)
        d = exact_distances(pts, target) * rng.uniform(0.8, 1.2, 5)
        plain = hyperbolic_solve(pts, d)
        weighted = hyperbolic_solve(pts, d, sigma=2.0, eta=2.0, weighted=True)
        assert np.linalg.norm(plain - weighted) > 1e-9

    def test_noiseless_recovery_both_variants(self):
        rng = np.random.default_rng(107)
        for _ in range(50):
            pts = random_scene_points(rng, int(rng.integers(3, 6)))
            target = rng.uniform(20, 380, 2)
            d = exact_distances(pts, target)
            for weighted in (False, True):
                est = hyperbolic_solve(pts, d, sigma=2.0, eta=2.0,
                                       weighted=weighted)
                assert np.linalg.norm(est - target) < 1e-9

    def test_collinear_rank_deficient(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(RankDeficient):
            hyperbolic_solve(pts, [1.0, 1.0, 1.0])

    def test_too_few_anchors(self):
        with pytest.raises(TooFewAnchors):
            hyperbolic_solve(TRIANGLE[:2], TRIANGLE_D[:2])


class TestEstimatePosition:
    def test_unknown_solver(self):
        with pytest.raises(ValueError):
            estimate_position("bogus", TRIANGLE, TRIANGLE_D)

    def test_all_solvers_recover_noiseless(self):
        rng = np.random.default_rng(109)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateWeightsWarning)
            for _ in range(20):
                pts = random_scene_points(rng, int(rng.integers(3, 6)))
                target = rng.uniform(20, 380, 2)
                d = exact_distances(pts, target)
                for name in SOLVER_NAMES:
                    est = estimate_position(name, pts, d)
                    assert np.linalg.norm(est - target) < 1e-9, name

    def test_translation_equivariance_all_solvers(self):
        # noisy ranges for the least-squares family; exact ones for
        # trilateration, whose spheres must still intersect
        rng = np.random.default_rng(113)
        pts = random_scene_points(rng, 5)
        target = rng.uniform(100, 300, 2)
        exact = exact_distances(pts, target)
        noisy = exact * rng.uniform(0.95, 1.05, 5)
        shift = np.array([123.0, -456.0])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateWeightsWarning)
            for name in SOLVER_NAMES:
                d = exact if name == "trilateration" else noisy
                base = estimate_position(name, pts, d, sigmas_p=2.0)
                moved = estimate_position(name, pts + shift, d, sigmas_p=2.0)
                np.testing.assert_allclose(moved, base + shift, atol=1e-6,
                                           err_msg=name)
