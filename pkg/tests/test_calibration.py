import math
import unittest

import numpy as np
import pytest

from migraflow.calibration import (
    RESIDUAL_COLUMNS,
    coulomb_design_matrix,
    distance_cost_factor,
    distance_cost_matrix,
    fit_coulomb_coupling,
    fit_gravity_params,
    model_correlation,
)
from migraflow.classical_models import GravityParams, gravity_flow_matrix
from migraflow.core_model import FlowMatrix, ScenarioConfig, economic_distance_matrix
from migraflow.coulomb import ChargeAssignment, coulomb_flow_matrix, derive_charges
from migraflow.exceptions import DegenerateFitError, InvalidInputError
from tests._scenarios import make_distances, make_region

PLANTED_GRAVITY = GravityParams(G=0.02, alpha=0.8, beta=1.1, gamma=1.6, theta=0.4, eta=2.5)


def _coulomb_inputs(rng, n=20):
    ids = [f"r{i}" for i in range(n)]
    regions = [
        make_region(i, population=float(rng.uniform(1e3, 1e5)), gdp=float(rng.uniform(1e2, 1e4))) for i in ids
    ]
    points = rng.uniform(0, 1000, size=(n, 2))
    values = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1))
    return regions, make_distances(ids, values), derive_charges(regions)


def _gravity_inputs(rng, n=20, c0=5.0, c1=1.0):
    ids = [f"g{i}" for i in range(n)]
    regions = [
        make_region(
            i,
            population=float(rng.uniform(1e3, 1e5)),
            wage_rate=float(rng.uniform(1.0, 4.0)),
            unemployment_rate=float(rng.uniform(0.02, 0.25)),
        )
        for i in ids
    ]
    points = rng.uniform(0, 800, size=(n, 2))
    values = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1))
    return regions, economic_distance_matrix(make_distances(ids, values), c0, c1)


@pytest.mark.parametrize("k, epsilon, R, expected", [(2 * math.pi, 1.0, 1.0, 1.0), (0.0, 3.0, 7.0, 0.0)])
def test_distance_cost_factor(k, epsilon, R, expected):
    assert distance_cost_factor(k, epsilon, R) == pytest.approx(expected, rel=1e-15)


def test_distance_cost_factor_rejects_distance():
    with pytest.raises(InvalidInputError):
        distance_cost_factor(1.0, 1.0, 0.0)


def test_distance_cost_factor_inverse_square():
    rng = np.random.default_rng(14)
    for _ in range(1000):
        k, epsilon, R = rng.uniform(1e-3, 1e3), rng.uniform(1e-2, 1e2), rng.uniform(1e-2, 1e4)
        near, far = distance_cost_factor(k, epsilon, R), distance_cost_factor(k, epsilon, 2 * R)
        assert far == pytest.approx(near / 4, rel=1e-12)


def test_distance_cost_matrix():
    D = make_distances(["a", "b"], [[0, 2], [2, 0]])
    frame = distance_cost_matrix(D, k=8 * math.pi, epsilon=1.0)
    assert frame.loc["a", "b"] == pytest.approx(1.0, rel=1e-15)
    assert frame.loc["a", "a"] == 0.0


class TestCoulombFit(unittest.TestCase):
    """Tests the closed-form fit of the Coulomb coupling."""

    def setUp(self):
        self.rng = np.random.default_rng(42)

    def test_planted_coupling_is_recovered(self):
        regions, distances, charges = _coulomb_inputs(self.rng)
        epsilon = 1.3
        k = 0.7 * 2 * math.pi * epsilon
        observed = coulomb_flow_matrix(regions, distances, charges, ScenarioConfig(k=k, epsilon=epsilon))

        result = fit_coulomb_coupling(observed, charges, distances, epsilon=epsilon)
        self.assertAlmostEqual(result.parameters["lambda"] / 0.7, 1.0, delta=1e-9)
        self.assertAlmostEqual(result.parameters["k"] / k, 1.0, delta=1e-9)
        self.assertFalse(result.diagnostics["clamped"])
        self.assertEqual(list(result.residuals.columns), RESIDUAL_COLUMNS)
        self.assertEqual(len(result.residuals), result.diagnostics["pair_count"])

        # Grid search over [0, 1.4] agrees on the minimiser
        x, mask = coulomb_design_matrix(charges, distances)
        xs, ms = x[mask], observed.values[mask]
        grid = np.arange(0, 14001) * 1e-4
        rss = [np.sum((ms - lam * xs) ** 2) for lam in grid]
        self.assertAlmostEqual(grid[int(np.argmin(rss))], result.parameters["lambda"], delta=1e-4)

    def test_zero_observed_flows(self):
        regions, distances, charges = _coulomb_inputs(self.rng, n=6)
        result = fit_coulomb_coupling(FlowMatrix.zeros(distances.ids), charges, distances)
        self.assertEqual(result.parameters, {"lambda": 0.0})
        self.assertEqual(result.rss, 0.0)
        self.assertNotIn("k", result.parameters)

    def test_no_opposite_sign_pairs(self):
        ids = ("a", "b", "c")
        distances = make_distances(ids, [[0, 1, 1], [1, 0, 1], [1, 1, 0]])
        charges = ChargeAssignment(ids, [1.0, 2.0, 3.0])
        with self.assertRaises(DegenerateFitError):
            fit_coulomb_coupling(FlowMatrix.zeros(ids), charges, distances)

    def test_unexplained_flow_is_reported(self):
        ids = ("p", "r")
        distances = make_distances(ids, [[0, 2], [2, 0]])
        charges = ChargeAssignment(ids, [-2.0, 4.0])
        observed = FlowMatrix(ids, [[0.0, 2.0], [3.0, 0.0]])
        result = fit_coulomb_coupling(observed, charges, distances)
        self.assertEqual(result.parameters["lambda"], 1.0)
        self.assertEqual(result.diagnostics["unexplained_flow"], 3.0)
        self.assertEqual(result.diagnostics["degenerate_pair_count"], 1)
        self.assertIn("lambda = 1\n", result.to_text())

    def test_refit_on_predictions_is_stable(self):
        regions, distances, charges = _coulomb_inputs(self.rng)
        clean = coulomb_flow_matrix(regions, distances, charges, ScenarioConfig(k=0.4))
        noise = self.rng.uniform(0.8, 1.2, size=clean.values.shape)
        first = fit_coulomb_coupling(FlowMatrix(clean.ids, clean.values * noise), charges, distances)
        again = fit_coulomb_coupling(first.predicted, charges, distances)
        self.assertAlmostEqual(again.parameters["lambda"] / first.parameters["lambda"], 1.0, delta=1e-9)
        self.assertAlmostEqual(again.rss, 0.0, delta=1e-9 * first.rss)

    def test_coupling_is_linear_in_observed_flows(self):
        regions, distances, charges = _coulomb_inputs(self.rng, n=10)
        observed = coulomb_flow_matrix(regions, distances, charges, ScenarioConfig(k=2.0))
        noisy = FlowMatrix(observed.ids, observed.values * self.rng.uniform(0.5, 1.5, size=observed.values.shape))
        base = fit_coulomb_coupling(noisy, charges, distances).parameters["lambda"]
        for c in (0.25, 3.0, 1e4):
            scaled = fit_coulomb_coupling(FlowMatrix(noisy.ids, c * noisy.values), charges, distances)
            self.assertAlmostEqual(scaled.parameters["lambda"] / (c * base), 1.0, delta=1e-12)


class TestGravityFit(unittest.TestCase):
    """Tests the log-linear fit of the gravity model."""

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(7)
        regions, D = _gravity_inputs(rng)
        observed = gravity_flow_matrix(regions, D, PLANTED_GRAVITY)
        result = fit_gravity_params(observed, regions, D)
        for name, planted in PLANTED_GRAVITY.as_dict().items():
            self.assertAlmostEqual(result.parameters[name] / planted, 1.0, delta=1e-6, msg=name)
        self.assertEqual(result.diagnostics["pair_count"], 380)
        self.assertEqual(result.gravity_params.gamma, result.parameters["gamma"])

    def test_noisy_recovery(self):
        rng = np.random.default_rng(8)
        regions, D = _gravity_inputs(rng)
        clean = gravity_flow_matrix(regions, D, PLANTED_GRAVITY)
        noise = np.exp(rng.normal(0.0, 0.01, size=clean.values.shape))
        observed = FlowMatrix(clean.ids, clean.values * noise)
        result = fit_gravity_params(observed, regions, D)
        for name, planted in PLANTED_GRAVITY.as_dict().items():
            self.assertAlmostEqual(result.parameters[name] / planted, 1.0, delta=0.05, msg=name)

    def test_refit_on_predictions_is_stable(self):
        rng = np.random.default_rng(13)
        regions, D = _gravity_inputs(rng)
        clean = gravity_flow_matrix(regions, D, PLANTED_GRAVITY)
        noise = np.exp(rng.normal(0.0, 0.1, size=clean.values.shape))
        first = fit_gravity_params(FlowMatrix(clean.ids, clean.values * noise), regions, D)
        again = fit_gravity_params(first.predicted, regions, D)
        for name, value in first.parameters.items():
            self.assertAlmostEqual(again.parameters[name] / value, 1.0, delta=1e-9, msg=name)

    def test_zero_flows_are_excluded(self):
        rng = np.random.default_rng(9)
        regions, D = _gravity_inputs(rng, n=6)
        values = np.array(gravity_flow_matrix(regions, D, PLANTED_GRAVITY).values)
        values[0, 1] = values[2, 3] = 0.0
        result = fit_gravity_params(FlowMatrix(D.ids, values), regions, D)
        self.assertEqual(result.diagnostics["zero_flow_pairs"], 2)
        self.assertEqual(result.diagnostics["pair_count"], 28)
        self.assertAlmostEqual(result.parameters["gamma"], PLANTED_GRAVITY.gamma, places=6)

    def test_two_identical_regions(self):
        regions = [make_region("a"), make_region("b")]
        D = make_distances(["a", "b"], [[0, 5], [5, 0]])
        observed = FlowMatrix(("a", "b"), [[0, 1], [1, 0]])
        with self.assertRaises(DegenerateFitError):
            fit_gravity_params(observed, regions, D)

    def test_collinear_columns_are_named(self):
        rng = np.random.default_rng(10)
        regions = [make_region(f"c{i}", population=float(rng.uniform(1e2, 1e4))) for i in range(5)]
        points = rng.uniform(0, 100, size=5)
        values = np.abs(points[:, None] - points[None, :]) + 1.0
        np.fill_diagonal(values, 0.0)
        D = make_distances([r.id for r in regions], values)
        observed = gravity_flow_matrix(regions, D, GravityParams())
        with self.assertRaises(DegenerateFitError) as ctx:
            fit_gravity_params(observed, regions, D)
        self.assertIn("theta", str(ctx.exception))
        self.assertIn("eta", str(ctx.exception))

    def test_proportional_wage_and_unemployment_gaps(self):
        rng = np.random.default_rng(11)
        wages = rng.uniform(1.0, 20.0, size=6)
        regions = [
            make_region(
                f"w{i}",
                population=float(rng.uniform(1e2, 1e4)),
                wage_rate=float(w),
                unemployment_rate=float(0.01 * w),
            )
            for i, w in enumerate(wages)
        ]
        points = rng.uniform(0, 100, size=6)
        values = np.abs(points[:, None] - points[None, :]) + 1.0
        np.fill_diagonal(values, 0.0)
        D = make_distances([r.id for r in regions], values)
        observed = gravity_flow_matrix(regions, D, GravityParams(theta=0.2))
        with self.assertRaises(DegenerateFitError) as ctx:
            fit_gravity_params(observed, regions, D)
        self.assertIn("collinear columns: eta", str(ctx.exception))

    def test_unknown_regions(self):
        regions, D = _gravity_inputs(np.random.default_rng(3), n=4)
        observed = FlowMatrix.zeros(("x", "y"))
        with self.assertRaises(InvalidInputError):
            fit_gravity_params(observed, regions, D)


def test_model_correlation():
    rng = np.random.default_rng(12)
    regions, D = _gravity_inputs(rng, n=8)
    flows = gravity_flow_matrix(regions, D, PLANTED_GRAVITY)
    scaled = FlowMatrix(flows.ids, 3.0 * flows.values)
    report = model_correlation(flows, scaled)
    assert report.pearson == pytest.approx(1.0, abs=1e-12)
    assert report.spearman == pytest.approx(1.0, abs=1e-12)
    assert report.pair_count == 56

    flat = model_correlation(flows, FlowMatrix.zeros(flows.ids))
    assert math.isnan(flat.pearson)
