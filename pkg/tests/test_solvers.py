import numpy as np
import pytest

from oracles import box_affine_vi_by_enumeration
from payoffnash.errors import ContractViolation
from payoffnash.games import AffineGameSpec, make_affine_game, make_canonical_quadratic, make_cournot
from payoffnash.geometry import Box, ProductSet
from payoffnash.solvers import (
    fixed_point_residual,
    reference_gap_probe,
    solve_ne,
    solve_regularized_ne,
    solve_vi_fixed_point,
)

GAME = make_canonical_quadratic()
B = np.array([[2.0, 1.0], [1.0, 2.0]])
b = np.array([-1.0, -1.0])


def canonical_on(lower, upper, anchor=None):
    sets = ProductSet.repeat(Box([lower], [upper], None if anchor is None else [anchor]), 2)
    return make_affine_game(AffineGameSpec(B, b), sets)


def contraction_factor(game, theta):
    # ||x - theta (Bx)|| <= q ||x|| with q the spectral norm of I - theta B.
    return float(np.linalg.norm(np.eye(game.joint_dim) - theta * game.spec.B, 2))


def test_canonical_ne():
    res = solve_ne(GAME)
    assert res.converged
    np.testing.assert_allclose(res.point, [1 / 3, 1 / 3], atol=1e-8)


def test_isotropic_origin():
    sets = ProductSet.repeat(Box([-1.0], [1.0]), 2)
    g = make_affine_game(AffineGameSpec(2 * np.eye(2), np.zeros(2)), sets)
    res = solve_ne(g, tol=1e-10)
    assert np.linalg.norm(res.point) <= 1e-10


def test_boundary_solution_matches_enumeration():
    g = canonical_on(0.5, 1.0)
    res = solve_ne(g, tol=1e-12)
    oracle = box_affine_vi_by_enumeration(B, b, [0.5, 0.5], [1.0, 1.0])
    np.testing.assert_allclose(oracle, [0.5, 0.5])
    np.testing.assert_allclose(res.point, oracle, atol=1e-10)


def test_cournot_ne():
    g = make_cournot(2, 3.0, 1.0, [1.0, 1.0], 2.0)
    np.testing.assert_allclose(solve_ne(g, tol=1e-12).point, [2 / 3, 2 / 3], atol=1e-9)


def test_cournot_three_firms_matches_enumeration():
    g = make_cournot(3, 10.0, 0.7, [1.0, 2.0, 3.0], 5.0)
    oracle = box_affine_vi_by_enumeration(g.spec.B, g.spec.b, [0.0] * 3, [5.0] * 3)
    np.testing.assert_allclose(solve_ne(g, tol=1e-12).point, oracle, atol=1e-9)


def test_vi_inequality_spot_check():
    a_star = solve_ne(GAME).point
    y = GAME.action_sets.sample_uniform(np.random.default_rng(0), 10 ** 4)
    assert np.all((y - a_star) @ GAME.pseudo_gradient(a_star) >= -1e-8)


def test_reported_residual_is_recomputable():
    for g in (GAME, canonical_on(0.5, 1.0), make_cournot(3, 10.0, 0.7, [1.0, 2.0, 3.0], 5.0)):
        res = solve_ne(g)
        again = fixed_point_residual(g.pseudo_gradient, g.action_sets, res.theta, res.point)
        assert abs(again - res.residual) <= 1e-12
        assert res.residual <= 1e-10


def test_displacements_non_increasing():
    for g in (GAME, canonical_on(0.5, 1.0), make_cournot(3, 10.0, 0.7, [1.0, 2.0, 3.0], 5.0)):
        d = np.array(solve_ne(g).displacements)
        assert np.all(np.diff(d[1:]) <= 1e-15)


def test_theta_consistency_canonical():
    L, nu = GAME.lipschitz, GAME.nu
    for tol in (1e-8, 1e-10, 1e-12):
        x1 = solve_vi_fixed_point(GAME.pseudo_gradient, GAME.action_sets, L, nu, tol=tol).point
        x2 = solve_vi_fixed_point(GAME.pseudo_gradient, GAME.action_sets, L, nu, tol=tol,
                                  theta=nu / (4 * L ** 2)).point
        assert np.linalg.norm(x1 - x2) <= 10 * tol


def test_theta_consistency_error_bound():
    # With contraction factor q, stopping at displacement tol leaves an error
    # of at most tol / (1 - q); two solves differ by at most the sum.
    g = make_cournot(3, 10.0, 0.7, [1.0, 2.0, 3.0], 5.0)
    L, nu, tol = g.lipschitz, g.nu, 1e-10
    t1, t2 = nu / (2 * L ** 2), nu / (4 * L ** 2)
    x1 = solve_vi_fixed_point(g.pseudo_gradient, g.action_sets, L, nu, tol=tol, theta=t1).point
    x2 = solve_vi_fixed_point(g.pseudo_gradient, g.action_sets, L, nu, tol=tol, theta=t2).point
    bound = tol / (1 - contraction_factor(g, t1)) + tol / (1 - contraction_factor(g, t2))
    assert np.linalg.norm(x1 - x2) <= bound


def test_max_iter_is_not_an_exception():
    res = solve_ne(GAME, tol=1e-14, max_iter=3)
    assert not res.converged and res.iterations == 3


@pytest.mark.parametrize("kwargs", [{"tol": 0.0}, {"tol": -1.0}])
def test_solver_preconditions(kwargs):
    with pytest.raises(ContractViolation):
        solve_vi_fixed_point(GAME.pseudo_gradient, GAME.action_sets, 3.0, 1.0, **kwargs)
    with pytest.raises(ContractViolation):
        solve_vi_fixed_point(GAME.pseudo_gradient, GAME.action_sets, 0.5, 1.0)


def test_regularized_rho_zero_is_ne():
    np.testing.assert_array_equal(solve_regularized_ne(GAME, 0.0).point, solve_ne(GAME).point)


def test_regularized_matches_enumeration():
    # Shrinking [0, 1]^2 by 0.2 about its centre gives [0.1, 0.9]^2.
    res = solve_regularized_ne(GAME, 0.2, tol=1e-12)
    np.testing.assert_allclose(res.point, box_affine_vi_by_enumeration(B, b, [0.1] * 2, [0.9] * 2), atol=1e-10)
    # [0, 3]^2 about anchor 2 shrinks to [0.4, 2.8]^2, which excludes 1/3.
    g = canonical_on(0.0, 3.0, anchor=2.0)
    res = solve_regularized_ne(g, 0.2, tol=1e-12)
    oracle = box_affine_vi_by_enumeration(B, b, [0.4] * 2, [2.8] * 2)
    np.testing.assert_allclose(oracle, [0.4, 0.4])
    np.testing.assert_allclose(res.point, oracle, atol=1e-10)


def test_regularized_smoothing_is_identity_for_affine():
    plain = solve_regularized_ne(GAME, 0.2).point
    np.testing.assert_array_equal(solve_regularized_ne(GAME, 0.2, sigma=0.1).point, plain)
    mc = solve_regularized_ne(GAME, 0.2, sigma=0.1, exact_affine=False, mc_samples=20000, tol=1e-12).point
    # The MC map is B(x + mean draw) + b, so its solution differs by the draw mean.
    np.testing.assert_allclose(mc, plain, atol=5 * 0.1 / np.sqrt(20000))


def test_regularized_preconditions():
    with pytest.raises(ContractViolation):
        solve_regularized_ne(GAME, 1.0)
    with pytest.raises(ContractViolation):
        solve_regularized_ne(GAME, 0.1, sigma=-0.1)


def test_reference_gap_affine_smoothing_is_zero():
    rows = reference_gap_probe(GAME, [0.4, 0.2, 0.1, 0.05], [None, 0.1, 0.3])
    for row in rows:
        assert row["distance"] <= 1e-10
    # The canonical equilibrium is interior, so shrinkage never moves it either.
    assert all(r["distance_to_ne"] <= 1e-9 for r in rows if r["kind"] == "shrinkage")


def test_reference_gap_degenerate_row():
    rows = reference_gap_probe(GAME, [0.0], [0.0])
    assert all(r["distance"] <= 1e-10 for r in rows)


def test_reference_gap_ratio_bounded_on_boundary_variant():
    # On [0.5, 1]^2 with anchor 0.75 the equilibrium is the lower corner and the
    # shrunk solution is (0.5 + rho/4) in both coordinates.
    g = canonical_on(0.5, 1.0, anchor=0.75)
    rhos = [0.4, 0.2, 0.1, 0.05]
    rows = [r for r in reference_gap_probe(g, rhos, [None], tol=1e-12) if r["kind"] == "shrinkage"]
    ratios = np.array([r["ratio_to_ne"] for r in rows])
    np.testing.assert_allclose(ratios, 0.25 * np.sqrt(2), rtol=1e-9)
    assert ratios.max() / ratios.min() < 4


def test_reference_gap_requires_lists():
    with pytest.raises(ContractViolation):
        reference_gap_probe(GAME, [], [None])
