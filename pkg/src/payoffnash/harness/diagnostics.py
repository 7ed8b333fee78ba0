"""Statistical probes of the estimators on a given game.

Each probe returns a :class:`ProbeResult` carrying its measured values and a
pass/fail verdict against fixed thresholds:

* ``gradient_consistency`` and ``strong_monotonicity`` validate the game;
* ``unbiasedness`` compares the mean estimate (payoffs at the sample) with
  the smoothed pseudo-gradient, within 4 combined standard errors;
* ``variance_scaling`` halves ``sigma`` and checks the growth factor of the
  second moment of the sampling noise: one-point in [2.5, 6], two-point in [0.5, 2];
* ``escape_probability`` checks that samples rarely leave ``A`` when the
  shrinkage margin is at least 5 sigma, and that escapes drop as rho/sigma grows
  (rho/sigma is measured against the set width, see :func:`grid_rho`);
* ``projection_bias`` checks that the payoff-at-action bias drops as rho/sigma grows.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Union

import numpy as np

from ..errors import ContractViolation
from ..estimators import (
    ESTIMATOR_KINDS,
    escape_probability_probe,
    projection_bias_probe,
    sampled_estimate_moments,
    smoothed_pseudo_gradient_mc,
    variance_probe,
)
from ..games import GameDefinition, check_gradient_consistency, check_strong_monotonicity, game_from_config
from ..geometry import Ball, Box, ProductSet

DEFAULT_GRID = {
    "seed": 0,
    "gradient": {"n_points": 100, "h": 1e-4},
    "monotonicity": {"n_pairs": 1000},
    "unbiasedness": {"mu": None, "sigmas": [0.05, 0.2], "n_samples": 10 ** 6, "max_z": 4.0},
    "variance": {"mu": None, "sigmas": [0.2, 0.1], "n_samples": 10 ** 6,
                 "reference_samples": 10 ** 6,
                 "bands": {"one_point": [2.5, 6.0], "two_point": [0.5, 2.0]}},
    "escape": {"sigma": 0.05, "ratios": [2.0, 5.0], "n_samples": 10 ** 5, "max_fraction": 1e-4},
}


@dataclass
class ProbeResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _merge(base: dict, override: Optional[dict]) -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def inradius_about_anchor(sets: ProductSet) -> float:
    """Smallest distance from a factor's anchor to that factor's boundary.

    Shrinking by ``rho`` leaves a margin of at least ``rho`` times this value
    between the shrunk set and the boundary of ``A``.
    """
    margins = []
    for f in sets.factors:
        if isinstance(f, Box):
            margins.append(float(np.min(np.minimum(f.anchor - f.lower, f.upper - f.anchor))))
        elif isinstance(f, Ball):
            margins.append(f.radius - float(np.linalg.norm(f.anchor - f.center)))
    return min(margins)


def far_point(sets: ProductSet, rho: float = 0.0) -> np.ndarray:
    """Point of ``A`` shrunk by ``rho`` reached by heading from the anchor along
    the all-ones direction: the upper corner for boxes."""
    direction = np.ones(sets.dim) / np.sqrt(sets.dim)
    return sets.shrink(rho).project(sets.anchor + 10.0 * sets.diameter * direction)


def _z_scores(diff, se):
    # Zero deviation with zero spread (e.g. a zero game) counts as z = 0.
    diff = np.abs(diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(diff == 0, 0.0, diff / se)


def probe_unbiasedness(game: GameDefinition, mu, sigmas, n_samples, seed, max_z=4.0) -> ProbeResult:
    mu = np.asarray(mu, dtype=float)
    rows, ok = [], True
    for s_idx, sigma in enumerate(sigmas):
        ref, ref_se = smoothed_pseudo_gradient_mc(game, mu, sigma, n_samples, (seed, 10, s_idx))
        for k_idx, kind in enumerate(ESTIMATOR_KINDS):
            mean, se = sampled_estimate_moments(game, mu, sigma, kind, n_samples, (seed, 11, s_idx, k_idx))
            z = _z_scores(mean - ref, np.sqrt(se ** 2 + ref_se ** 2))
            row = {"sigma": sigma, "kind": kind, "mean": mean.tolist(), "reference": ref.tolist(),
                   "max_z": float(np.max(z))}
            if game.is_affine:
                exact = game.pseudo_gradient(mu)
                row["max_z_exact"] = float(np.max(_z_scores(mean - exact, se)))
                ok &= row["max_z_exact"] <= max_z
            ok &= row["max_z"] <= max_z
            rows.append(row)
    return ProbeResult("unbiasedness", bool(ok), {"mu": mu.tolist(), "rows": rows})


def probe_variance_scaling(game: GameDefinition, mu, sigmas, n_samples, reference_samples, bands, seed) -> ProbeResult:
    mu = np.asarray(mu, dtype=float)
    hi, lo = sigmas
    measured, ok = {"mu": mu.tolist(), "sigmas": [hi, lo]}, True
    for k_idx, kind in enumerate(ESTIMATOR_KINDS):
        m_hi = variance_probe(game, mu, hi, kind, n_samples, (seed, 20, k_idx, 0), reference_samples)
        m_lo = variance_probe(game, mu, lo, kind, n_samples, (seed, 20, k_idx, 1), reference_samples)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = m_lo / m_hi
        band = bands[kind]
        kind_ok = bool(np.all(np.isfinite(ratio)) and np.all((ratio >= band[0]) & (ratio <= band[1])))
        measured[kind] = {"second_moment": [m_hi.tolist(), m_lo.tolist()], "ratio": ratio.tolist(),
                          "band": list(band), "passed": kind_ok}
        ok &= kind_ok
    return ProbeResult("variance_scaling", bool(ok), measured)


def grid_rho(sets: ProductSet, sigma: float, ratio: float) -> float:
    """Shrinkage for a grid entry ``ratio = rho * width / sigma``.

    ``width`` is twice the inradius about the anchor, so on a unit box the
    ratio is plain ``rho / sigma`` and other sets see the same geometry.
    """
    rho = ratio * sigma / (2.0 * inradius_about_anchor(sets))
    if not rho < 1:
        raise ContractViolation(f"rho/sigma ratio {ratio} with sigma={sigma} gives rho >= 1")
    return rho


def probe_escape(game: GameDefinition, sigma, ratios, n_samples, max_fraction, seed) -> ProbeResult:
    sets = game.action_sets
    margin = inradius_about_anchor(sets)
    rows = []
    for idx, ratio in enumerate(sorted(ratios)):
        rho = grid_rho(sets, sigma, ratio)
        mu = far_point(sets, rho)
        frac = escape_probability_probe(sets, mu, sigma, rho, n_samples, (seed, 30, idx))
        rows.append({"rho_over_sigma": ratio, "rho": rho, "fraction": frac})
    decreasing = all(a["fraction"] > b["fraction"] for a, b in zip(rows, rows[1:]))
    # Tail check: rho * margin >= 5 sigma with mu on the shrunk boundary.
    rho_tail = 5.0 * sigma / margin
    tail = None
    if rho_tail < 1:
        tail = escape_probability_probe(sets, far_point(sets, rho_tail), sigma, rho_tail, n_samples, (seed, 31))
    tail_ok = tail is not None and tail <= max_fraction
    return ProbeResult("escape_probability", bool(decreasing and tail_ok),
                       {"sigma": sigma, "margin": margin, "rows": rows, "decreasing": decreasing,
                        "tail_rho": rho_tail, "tail_fraction": tail, "max_fraction": max_fraction})


def probe_projection_bias(game: GameDefinition, sigma, ratios, n_samples, seed) -> ProbeResult:
    sets = game.action_sets
    rows = []
    for idx, ratio in enumerate(sorted(ratios)):
        rho = grid_rho(sets, sigma, ratio)
        bias = projection_bias_probe(game, far_point(sets, rho), sigma, n_samples, (seed, 40, idx))
        rows.append({"rho_over_sigma": ratio, "mean_norm": bias.tolist()})
    means = [np.asarray(r["mean_norm"]) for r in rows]
    decreasing = all(np.all(a > b) for a, b in zip(means, means[1:]))
    return ProbeResult("projection_bias", bool(decreasing), {"sigma": sigma, "rows": rows})


def run_diagnostics(game: Union[GameDefinition, dict], grid: Optional[dict] = None) -> List[ProbeResult]:
    """Run every probe on ``game`` with ``grid`` overriding :data:`DEFAULT_GRID`."""
    if isinstance(game, dict):
        game = game_from_config(game)
    g = _merge(DEFAULT_GRID, grid)
    seed = int(g["seed"])
    rng = np.random.default_rng(seed)
    points = game.action_sets.sample_uniform(rng, g["gradient"]["n_points"])
    grad = check_gradient_consistency(game, points, g["gradient"]["h"])
    results = [ProbeResult("gradient_consistency", grad.passed,
                           {"max_deviation": grad.max_deviation, "threshold": grad.threshold})]
    mono = check_strong_monotonicity(game, g["monotonicity"]["n_pairs"], seed)
    results.append(ProbeResult("strong_monotonicity", mono.passed, {"min_ratio": mono.min_ratio, "nu": mono.nu}))

    ub = g["unbiasedness"]
    mu_ub = game.action_sets.anchor if ub["mu"] is None else ub["mu"]
    results.append(probe_unbiasedness(game, mu_ub, ub["sigmas"], ub["n_samples"], seed, ub["max_z"]))

    var = g["variance"]
    # Away from the anchor so that payoffs are not near zero at the probe point.
    mu_var = far_point(game.action_sets) if var["mu"] is None else var["mu"]
    results.append(probe_variance_scaling(game, mu_var, var["sigmas"], var["n_samples"],
                                          var["reference_samples"], var["bands"], seed))

    esc = g["escape"]
    results.append(probe_escape(game, esc["sigma"], esc["ratios"], esc["n_samples"], esc["max_fraction"], seed))
    results.append(probe_projection_bias(game, esc["sigma"], esc["ratios"], esc["n_samples"], seed))
    return results
