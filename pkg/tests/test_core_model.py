import dataclasses
import inspect
import typing
import unittest

import numpy as np
import pytest

from migraflow import calibration, classical_models, core_model, coulomb, default_settings, dynamics, io_ingest
from migraflow.core_model import (
    DistanceMatrix,
    FlowMatrix,
    GravityParams,
    ScenarioConfig,
    economic_distance,
    economic_distance_matrix,
    validate_scenario,
)
from migraflow.exceptions import ConfigurationError, InvalidInputError, ScenarioValidationError
from migraflow.helper_functions import build_meta_dict
from tests._scenarios import make_distances, make_region


def _three_regions():
    regions = [make_region("a"), make_region("b", gdp=300.0), make_region("c", gdp=10.0)]
    distances = make_distances(["a", "b", "c"], [[0, 5, 7], [5, 0, 3], [7, 3, 0]])
    return regions, distances


def _random_valid_inputs(rng):
    n = int(rng.integers(2, 7))
    regions = [
        make_region(
            f"r{i}",
            population=float(rng.uniform(0.0, 1e6)),
            gdp=float(rng.uniform(0.0, 1e8)),
            wage_rate=float(rng.uniform(0.0, 50.0)),
            unemployment_rate=float(rng.uniform(0.0, 1.0)),
            lat=float(rng.uniform(-90.0, 90.0)),
            lon=float(rng.uniform(-180.0, 180.0)),
        )
        for i in range(n)
    ]
    positions = rng.uniform(0.0, 1e3, size=n)
    values = np.abs(positions[:, None] - positions[None, :]) + rng.uniform(0.5, 5.0)
    values = (values + values.T) / 2.0
    np.fill_diagonal(values, 0.0)
    config = {
        "epsilon": float(rng.uniform(0.1, 10.0)),
        "k": float(rng.uniform(0.0, 10.0)),
        "mobility_cap": float(rng.uniform(0.0, 1.0)),
        "steps": int(rng.integers(0, 100)),
    }
    return config, regions, values


def _pick_pair(rng, n):
    i, j = rng.choice(n, size=2, replace=False)
    return int(i), int(j)


def _non_positive_epsilon(rng, config, regions, values):
    config["epsilon"] = -float(rng.uniform(0.0, 10.0))
    return "epsilon must be positive"


def _negative_k(rng, config, regions, values):
    config["k"] = -float(rng.uniform(0.01, 10.0))
    return "k must be non-negative"


def _mobility_cap_above_one(rng, config, regions, values):
    config["mobility_cap"] = float(rng.uniform(1.01, 5.0))
    return "mobility_cap must lie in [0, 1]"


def _negative_steps(rng, config, regions, values):
    config["steps"] = -int(rng.integers(1, 10))
    return "steps must be non-negative"


def _negative_population(rng, config, regions, values):
    i = int(rng.integers(len(regions)))
    regions[i] = regions[i].with_profile(population=-float(rng.uniform(1.0, 100.0)))
    return "population must be non-negative"


def _unemployment_above_one(rng, config, regions, values):
    i = int(rng.integers(len(regions)))
    regions[i] = regions[i].with_profile(unemployment_rate=float(rng.uniform(1.01, 2.0)))
    return "out of [0,1]"


def _latitude_out_of_range(rng, config, regions, values):
    i = int(rng.integers(len(regions)))
    regions[i] = make_region(regions[i].id, lat=float(rng.uniform(90.5, 180.0)), lon=0.0)
    return "out of [-90,90]"


def _duplicate_id(rng, config, regions, values):
    i, j = _pick_pair(rng, len(regions))
    regions[j] = make_region(regions[i].id)
    return f"duplicate region id '{regions[i].id}'"


def _asymmetric_distance(rng, config, regions, values):
    i, j = _pick_pair(rng, len(values))
    values[i, j] *= float(rng.uniform(1.01, 3.0))
    return "asymmetric distance matrix"


def _zero_distance(rng, config, regions, values):
    i, j = _pick_pair(rng, len(values))
    values[i, j] = values[j, i] = 0.0
    return "distance between distinct regions must be positive"


def _nonzero_diagonal(rng, config, regions, values):
    i = int(rng.integers(len(values)))
    values[i, i] = float(rng.uniform(0.1, 10.0))
    return "distance diagonal must be 0"


def _missing_distance(rng, config, regions, values):
    i, j = _pick_pair(rng, len(values))
    values[i, j] = np.nan
    return "missing distance entry"


_INJECTIONS = [
    _non_positive_epsilon,
    _negative_k,
    _mobility_cap_above_one,
    _negative_steps,
    _negative_population,
    _unemployment_above_one,
    _latitude_out_of_range,
    _duplicate_id,
    _asymmetric_distance,
    _zero_distance,
    _nonzero_diagonal,
    _missing_distance,
]


@pytest.mark.parametrize(
    "R, c0, c1, expected",
    [
        (100.0, 50.0, 2.0, 250.0),
        (0.0, 12.5, 3.0, 12.5),
        (80.0, 0.0, 1.0, 80.0),
    ],
)
def test_economic_distance(R, c0, c1, expected):
    assert economic_distance(R, c0, c1) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("R, c0, c1", [(-1.0, 0.0, 1.0), (10.0, -5.0, 1.0), (10.0, 0.0, -0.1), (np.inf, 0.0, 1.0)])
def test_economic_distance_rejects_invalid(R, c0, c1):
    with pytest.raises(InvalidInputError):
        economic_distance(R, c0, c1)


def test_economic_distance_is_monotone_in_physical_distance():
    rng = np.random.default_rng(21)
    for _ in range(1000):
        near, far = np.sort(rng.uniform(0.0, 1e4, size=2))
        c0, c1 = rng.uniform(0.0, 100.0), rng.uniform(0.0, 10.0)
        assert economic_distance(near, c0, c1) <= economic_distance(far, c0, c1)


def test_economic_distance_matrix_keeps_zero_diagonal():
    _, distances = _three_regions()
    D = economic_distance_matrix(distances, c0=10.0, c1=2.0)
    np.testing.assert_array_equal(np.diag(D.values), 0.0)
    assert D["a", "c"] == 24.0
    assert D["c", "a"] == 24.0


class TestValidateScenario(unittest.TestCase):
    """Tests ``validate_scenario`` and the violation reports of the domain types."""

    def test_valid_scenario(self):
        regions, distances = _three_regions()
        scenario = validate_scenario(ScenarioConfig(), regions, distances)
        self.assertEqual(scenario.ids, ("a", "b", "c"))
        self.assertEqual(scenario.distances["b", "c"], 3.0)
        self.assertEqual(scenario.economic_distances["a", "b"], 5.0)

    def test_distances_follow_region_order(self):
        regions, _ = _three_regions()
        shuffled = make_distances(["c", "a", "b"], [[0, 7, 3], [7, 0, 5], [3, 5, 0]])
        scenario = validate_scenario(ScenarioConfig(), regions, shuffled)
        self.assertEqual(scenario.distances.ids, ("a", "b", "c"))
        self.assertEqual(scenario.distances["a", "c"], 7.0)

    def test_zero_epsilon_names_epsilon(self):
        regions, distances = _three_regions()
        with self.assertRaises(ScenarioValidationError) as ctx:
            validate_scenario(ScenarioConfig(epsilon=0.0), regions, distances)
        self.assertIn("epsilon must be positive", ctx.exception.violations)

    def test_asymmetry_names_pair_and_values(self):
        regions, _ = _three_regions()
        distances = make_distances(["a", "b", "c"], [[0, 5, 7], [6, 0, 3], [7, 3, 0]])
        with self.assertRaises(ScenarioValidationError) as ctx:
            validate_scenario(ScenarioConfig(), regions, distances)
        message = str(ctx.exception)
        self.assertIn("asymmetric", message)
        self.assertIn("(a, b) = 5.0", message)
        self.assertIn("(b, a) = 6.0", message)

    def test_all_violations_are_collected(self):
        regions, _ = _three_regions()
        regions.append(make_region("a"))
        regions.append(make_region("d", unemployment_rate=1.5, lat=95.0, lon=0.0))
        distances = make_distances(["a", "b", "c"], [[0.1, 5, 7], [5, 0, 3], [7, 3, 0]])
        config = ScenarioConfig(epsilon=-1.0, mobility_cap=1.5, steps=-2, k=-1.0)
        with self.assertRaises(ScenarioValidationError) as ctx:
            validate_scenario(config, regions, distances)
        message = str(ctx.exception)
        for fragment in (
            "epsilon must be positive",
            "mobility_cap must lie in [0, 1]",
            "steps must be non-negative",
            "k must be non-negative",
            "duplicate region id 'a'",
            "out of [0,1]",
            "latitude 95.0 out of [-90,90]",
            "distance matrix has no entries for regions: d",
            "distance diagonal must be 0",
        ):
            self.assertIn(fragment, message)
        self.assertGreaterEqual(len(ctx.exception.violations), 9)

    def test_missing_and_non_positive_entries(self):
        regions, _ = _three_regions()
        distances = make_distances(["a", "b", "c"], [[0, np.nan, 7], [np.nan, 0, 0], [7, 0, 0]])
        with self.assertRaises(ScenarioValidationError) as ctx:
            validate_scenario(ScenarioConfig(), regions, distances)
        message = str(ctx.exception)
        self.assertIn("missing distance entry for pair (a, b)", message)
        self.assertIn("must be positive: (b, c) = 0.0", message)

    def test_unknown_distance_ids(self):
        regions, distances = _three_regions()
        with self.assertRaises(ScenarioValidationError) as ctx:
            validate_scenario(ScenarioConfig(), regions[:2], distances)
        self.assertIn("distance matrix contains unknown region ids: c", str(ctx.exception))

    def test_npv_gated_model_needs_table(self):
        regions, distances = _three_regions()
        with self.assertRaises(ScenarioValidationError) as ctx:
            validate_scenario(ScenarioConfig(model="npv-gated-coulomb"), regions, distances)
        self.assertIn("requires an NPV table", str(ctx.exception))

    def test_gravity_needs_positive_economic_distance(self):
        regions, distances = _three_regions()
        with self.assertRaises(ScenarioValidationError) as ctx:
            validate_scenario(ScenarioConfig(model="gravity", c0=0.0, c1=0.0), regions, distances)
        self.assertIn("positive economic distance", str(ctx.exception))

    def test_gravity_parameters_are_checked(self):
        regions, distances = _three_regions()
        config = ScenarioConfig(model="gravity", gravity=GravityParams(G=-1.0, theta=-0.5))
        with self.assertRaises(ScenarioValidationError) as ctx:
            validate_scenario(config, regions, distances)
        self.assertIn("gravity.G must be non-negative, got -1.0", ctx.exception.violations)
        self.assertIn("gravity.theta must be non-negative, got -0.5", ctx.exception.violations)

    def test_charge_override_for_unknown_region(self):
        regions, distances = _three_regions()
        with self.assertRaises(ScenarioValidationError) as ctx:
            validate_scenario(ScenarioConfig(), regions, distances, charge_overrides={"z": 1.0})
        self.assertIn("charge override for unknown region 'z'", ctx.exception.violations)

    def test_empty_region_list(self):
        with self.assertRaises(ScenarioValidationError) as ctx:
            validate_scenario(ScenarioConfig(), [], DistanceMatrix.zeros(()))
        self.assertIn("scenario needs at least one region", ctx.exception.violations)

    def test_single_injected_violation_is_rejected(self):
        rng = np.random.default_rng(23)
        for _ in range(300):
            config, regions, values = _random_valid_inputs(rng)
            validate_scenario(ScenarioConfig(**config), regions, make_distances([r.id for r in regions], values))

            inject = _INJECTIONS[rng.integers(len(_INJECTIONS))]
            fragment = inject(rng, config, regions, values)
            distances = make_distances([f"r{i}" for i in range(len(values))], values)
            with self.assertRaises(ScenarioValidationError) as ctx:
                validate_scenario(ScenarioConfig(**config), regions, distances)
            self.assertIn(fragment, str(ctx.exception))


class TestMatrices(unittest.TestCase):
    """Tests the region-indexed matrix types."""

    def test_values_are_read_only(self):
        flows = FlowMatrix(("a", "b"), [[0.0, 1.0], [2.0, 0.0]])
        with self.assertRaises(ValueError):
            flows.values[0, 1] = 5.0

    def test_shape_mismatch(self):
        with self.assertRaises(InvalidInputError):
            DistanceMatrix(("a", "b", "c"), np.zeros((2, 2)))

    def test_totals(self):
        flows = FlowMatrix(("a", "b", "c"), [[0, 1, 2], [3, 0, 4], [0, 0, 0]])
        self.assertEqual(flows.total(), 10.0)
        np.testing.assert_array_equal(flows.outflows(), [3, 7, 0])
        np.testing.assert_array_equal(flows.inflows(), [3, 1, 6])
        np.testing.assert_array_equal(flows.net_inflows(), [0, -6, 6])
        self.assertEqual(flows.violations(), [])

    def test_top_corridors(self):
        flows = FlowMatrix(("a", "b", "c"), [[0, 1, 2], [3, 0, 4], [0, 0, 0]])
        self.assertEqual(flows.top_corridors(2), [("b", "c", 4.0), ("b", "a", 3.0)])
        self.assertEqual(len(flows.top_corridors()), 4)

    def test_flow_violations(self):
        flows = FlowMatrix(("a", "b"), [[1.0, -1.0], [0.0, 0.0]])
        problems = flows.violations()
        self.assertIn("flow matrix contains negative entries", problems)
        self.assertIn("flow matrix diagonal must be 0", problems)

    def test_reindex_and_frame(self):
        flows = FlowMatrix(("a", "b"), [[0.0, 1.0], [2.0, 0.0]])
        swapped = flows.reindex(("b", "a"))
        self.assertEqual(swapped["a", "b"], 1.0)
        frame = swapped.to_frame(default_settings.FLOW_MATRIX_CORNER)
        self.assertEqual(frame.index.name, "origin")
        self.assertEqual(frame.loc["b", "a"], 2.0)
        with self.assertRaises(InvalidInputError):
            flows.reindex(("a", "z"))


class TestScenarioConfig(unittest.TestCase):
    """Tests building configurations from merged documents."""

    def test_defaults(self):
        tree = build_meta_dict({}, default_settings.DEFAULT_SETTING_SCENARIO)
        config = ScenarioConfig.from_dict(tree)
        self.assertEqual(config, ScenarioConfig())
        self.assertEqual(config.mobility_cap, 0.05)
        self.assertEqual(config.steps, 10)
        self.assertEqual(config.charge_threshold, "weighted-mean")

    def test_dotted_and_nested_keys(self):
        tree = build_meta_dict(
            {"model": "npv-gated-gravity", "gravity.gamma": 1.5, "gravity": {"G": 3}, "distance.c0": 20},
            default_settings.DEFAULT_SETTING_SCENARIO,
        )
        config = ScenarioConfig.from_dict(tree)
        self.assertEqual(config.gravity, GravityParams(G=3.0, gamma=1.5))
        self.assertEqual(config.c0, 20.0)
        self.assertTrue(config.is_npv_gated)
        self.assertEqual(config.base_model, "gravity")

    def test_round_trip_through_dict(self):
        config = ScenarioConfig(model="gravity", k=2.0, charge_threshold=150.0, steps=3, c0=1.0)
        tree = build_meta_dict(config.to_dict(), default_settings.DEFAULT_SETTING_SCENARIO)
        self.assertEqual(ScenarioConfig.from_dict(tree), config)

    def test_unknown_key(self):
        with self.assertRaises(ConfigurationError) as ctx:
            build_meta_dict({"epsilom": 1.0, "gravity.delta": 2}, default_settings.DEFAULT_SETTING_SCENARIO)
        self.assertIn("epsilom", str(ctx.exception))
        self.assertIn("gravity.delta", str(ctx.exception))

    def test_bad_values(self):
        for document in ({"model": "newton"}, {"epsilon": "wide"}, {"steps": 2.5}, {"symmetry": "cubic"}):
            tree = build_meta_dict(document, default_settings.DEFAULT_SETTING_SCENARIO)
            with self.assertRaises(ConfigurationError):
                ScenarioConfig.from_dict(tree)


@pytest.mark.parametrize("module", [core_model, coulomb, classical_models, calibration, dynamics, io_ingest])
def test_none_defaults_are_annotated_optional(module):
    for name, obj in vars(module).items():
        if getattr(obj, "__module__", None) != module.__name__:
            continue
        if dataclasses.is_dataclass(obj):
            hints = typing.get_type_hints(obj)
            defaults = {f.name: f.default for f in dataclasses.fields(obj)}
        elif inspect.isfunction(obj):
            hints = typing.get_type_hints(obj)
            defaults = {p.name: p.default for p in inspect.signature(obj).parameters.values()}
        else:
            continue
        for field, default in defaults.items():
            if default is None and field in hints:
                assert type(None) in typing.get_args(hints[field]), f"{name}.{field}"
