# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

"""Domain types shared by all migration models and the semantics of physical and economic distance.

All types are immutable values. Constructors only check structure (shapes, id counts); the
semantic invariants are reported by ``violations()`` so that ``validate_scenario`` can list
every problem of a scenario at once.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from migraflow import default_settings
from migraflow.exceptions import ConfigurationError, InvalidInputError, ScenarioValidationError
from migraflow.helper_functions import require_finite


@dataclass(frozen=True)
class EconomicProfile:
    """Population, GDP, wage rate and unemployment rate of one region."""

    population: float
    gdp: float
    wage_rate: float
    unemployment_rate: float

    def violations(self, label="profile"):
        out = []
        for name in ("population", "gdp", "wage_rate", "unemployment_rate"):
            value = getattr(self, name)
            if not math.isfinite(value):
                out.append(f"{label}: {name} must be finite, got {value}")
            elif value < 0:
                out.append(f"{label}: {name} must be non-negative, got {value}")
        if math.isfinite(self.unemployment_rate) and self.unemployment_rate > 1:
            out.append(f"{label}: unemployment_rate {self.unemployment_rate} out of [0,1]")
        return out

    def indicator(self, source):
        """Returns the economic indicator a charge is derived from (``gdp`` or ``population``)."""

        if source == "gdp":
            return self.gdp
        if source == "population":
            return self.population
        choices = default_settings.AVAILABLE_CHARGE_SOURCES
        raise InvalidInputError(f"Unknown charge source '{source}', use one of {choices}")


@dataclass(frozen=True)
class Region:
    """A node of the migration network. ``lat``/``lon`` are ``None`` for abstract regions whose
    distances are supplied externally.
    """

    id: str
    name: str
    profile: EconomicProfile
    lat: float | None = None
    lon: float | None = None

    @property
    def position(self):
        if self.lat is None or self.lon is None:
            return None
        return self.lat, self.lon

    def with_profile(self, **changes):
        return replace(self, profile=replace(self.profile, **changes))

    def violations(self):
        label = f"region '{self.id}'"
        out = []
        if not isinstance(self.id, str) or not self.id.strip():
            out.append("region id must be a non-empty string")
        if (self.lat is None) != (self.lon is None):
            out.append(f"{label}: lat and lon must be given together")
        if self.lat is not None and not (math.isfinite(self.lat) and -90 <= self.lat <= 90):
            out.append(f"{label}: latitude {self.lat} out of [-90,90]")
        if self.lon is not None and not (math.isfinite(self.lon) and -180 <= self.lon <= 180):
            out.append(f"{label}: longitude {self.lon} out of [-180,180]")
        out.extend(self.profile.violations(label))
        return out


@dataclass(frozen=True, eq=False)
class _RegionMatrix:
    """Square table indexed by region ids in both dimensions. The array is stored read-only."""

    ids: tuple
    values: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise InvalidInputError(f"{type(self).__name__} must be square, got shape {values.shape}")
        if values.shape[0] != len(ids):
            raise InvalidInputError(
                f"{type(self).__name__} has {values.shape[0]} rows but {len(ids)} region ids were given"
            )
        values.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, ids):
        return cls(tuple(ids), np.zeros((len(ids), len(ids))))

    def __len__(self):
        return len(self.ids)

    def index(self, region_id):
        try:
            return self.ids.index(region_id)
        except ValueError:
            raise InvalidInputError(f"Unknown region id '{region_id}'") from None

    def __getitem__(self, pair):
        origin, destination = pair
        return float(self.values[self.index(origin), self.index(destination)])

    def reindex(self, ids):
        """Returns a copy whose rows and columns follow ``ids``."""

        missing = [i for i in ids if i not in self.ids]
        if missing:
            raise InvalidInputError(f"{type(self).__name__} has no entries for ids: {', '.join(missing)}")
        order = [self.ids.index(i) for i in ids]
        return type(self)(tuple(ids), self.values[np.ix_(order, order)])

    def to_frame(self, corner=None):
        frame = pd.DataFrame(np.array(self.values), index=list(self.ids), columns=list(self.ids))
        frame.index.name = corner
        return frame

    def off_diagonal_pairs(self):
        """Iterates over ``(i, j)`` index pairs with ``i != j`` in row-major order."""

        n = len(self.ids)
        return ((i, j) for i in range(n) for j in range(n) if i != j)


class DistanceMatrix(_RegionMatrix):
    """Symmetric table of physical distances R in kilometers with a zero diagonal."""

    def violations(self):
        out = []
        values = self.values
        ids = self.ids
        for i in range(len(ids)):
            d = values[i, i]
            if not math.isfinite(d):
                out.append(f"missing distance entry for pair ({ids[i]}, {ids[i]})")
            elif d != 0:
                out.append(f"distance diagonal must be 0, got {d} for '{ids[i]}'")
        for i, j in self.off_diagonal_pairs():
            d_ij, d_ji = values[i, j], values[j, i]
            if not math.isfinite(d_ij):
                out.append(f"missing distance entry for pair ({ids[i]}, {ids[j]})")
                continue
            if d_ij <= 0:
                out.append(f"distance between distinct regions must be positive: ({ids[i]}, {ids[j]}) = {d_ij}")
            if i < j and math.isfinite(d_ji) and not _close(d_ij, d_ji):
                out.append(
                    f"asymmetric distance matrix: ({ids[i]}, {ids[j]}) = {d_ij} but ({ids[j]}, {ids[i]}) = {d_ji}"
                )
        return out


class FlowMatrix(_RegionMatrix):
    """Migrant mass M_ij moving from origin i (row) to destination j (column) during one step."""

    def violations(self):
        out = []
        if not np.all(np.isfinite(self.values)):
            out.append("flow matrix contains non-finite entries")
        if np.any(self.values < 0):
            out.append("flow matrix contains negative entries")
        if np.any(np.diag(self.values) != 0):
            out.append("flow matrix diagonal must be 0")
        return out

    def total(self):
        return float(self.values.sum())

    def outflows(self):
        return self.values.sum(axis=1)

    def inflows(self):
        return self.values.sum(axis=0)

    def net_inflows(self):
        return self.inflows() - self.outflows()

    def plus(self, other):
        if other.ids != self.ids:
            other = other.reindex(self.ids)
        return FlowMatrix(self.ids, self.values + other.values)

    def top_corridors(self, n=default_settings.TOP_CORRIDORS):
        """Largest nonzero flows as ``(origin, destination, flow)``, ties broken by matrix position."""

        pairs = [(self.ids[i], self.ids[j], float(self.values[i, j])) for i, j in self.off_diagonal_pairs()]
        pairs = [p for p in pairs if p[2] > 0]
        pairs.sort(key=lambda p: -p[2])
        return pairs[:n]


@dataclass(frozen=True)
class GravityParams:
    """Parameters of the power-law gravity model: scale ``G``, population exponents ``alpha``
    (origin) and ``beta`` (destination), distance decay ``gamma``, wage-difference sensitivity
    ``theta`` and unemployment-difference sensitivity ``eta``.
    """

    G: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 2.0
    theta: float = 0.0
    eta: float = 0.0

    def violations(self):
        out = [f"gravity.{k} must be finite" for k, v in self.as_dict().items() if not math.isfinite(v)]
        if math.isfinite(self.G) and self.G < 0:
            out.append(f"gravity.G must be non-negative, got {self.G}")
        if math.isfinite(self.theta) and self.theta < 0:
            out.append(f"gravity.theta must be non-negative, got {self.theta}")
        if math.isfinite(self.eta) and self.eta < 0:
            out.append(f"gravity.eta must be non-negative, got {self.eta}")
        return out

    def as_dict(self):
        return {name: getattr(self, name) for name in ("G", "alpha", "beta", "gamma", "theta", "eta")}


@dataclass(frozen=True)
class NPVSettings:
    table: str | None = None
    benefits_column: str = "benefits"
    costs_column: str = "costs"


@dataclass(frozen=True)
class ScenarioConfig:
    """Model choice, physical constants, gravity exponents and dynamics settings of a scenario."""

    model: str = "coulomb"
    k: float = 1.0
    epsilon: float = 1.0
    symmetry: str = "circular"
    flow_form: str = "eq9"
    region_radius: float = 1.0
    gravity: GravityParams = field(default_factory=GravityParams)
    charge_source: str = "gdp"
    charge_threshold: object = default_settings.WEIGHTED_MEAN_THRESHOLD
    mobility_cap: float = 0.05
    steps: int = 10
    c0: float = 0.0
    c1: float = 1.0
    npv: NPVSettings = field(default_factory=NPVSettings)

    @property
    def is_npv_gated(self):
        return self.model.startswith("npv-gated-")

    @property
    def base_model(self):
        return self.model.replace("npv-gated-", "")

    @classmethod
    def from_dict(cls, tree: dict):
        """Builds a config from a merged configuration tree (see ``DEFAULT_SETTING_SCENARIO``).

        Raises
        ------
        ConfigurationError
            If an enumerated field has an unsupported value or a numeric field is not a number.
        """

        _check_choice(tree, "model", default_settings.AVAILABLE_MODELS)
        _check_choice(tree, "symmetry", default_settings.AVAILABLE_SYMMETRIES)
        _check_choice(tree, "flow_form", default_settings.AVAILABLE_FLOW_FORMS)
        _check_choice(tree, "charge_source", default_settings.AVAILABLE_CHARGE_SOURCES)

        threshold = tree["charge_threshold"]
        if threshold != default_settings.WEIGHTED_MEAN_THRESHOLD:
            threshold = _as_float(threshold, "charge_threshold")

        steps = tree["steps"]
        if isinstance(steps, bool) or not isinstance(steps, (int, float)) or int(steps) != steps:
            raise ConfigurationError(f"steps must be an integer, got {steps!r}")

        gravity = {name: _as_float(v, f"gravity.{name}") for name, v in tree["gravity"].items()}
        npv = tree["npv"]
        return cls(
            model=tree["model"],
            k=_as_float(tree["k"], "k"),
            epsilon=_as_float(tree["epsilon"], "epsilon"),
            symmetry=tree["symmetry"],
            flow_form=tree["flow_form"],
            region_radius=_as_float(tree["region_radius"], "region_radius"),
            gravity=GravityParams(**gravity),
            charge_source=tree["charge_source"],
            charge_threshold=threshold,
            mobility_cap=_as_float(tree["mobility_cap"], "mobility_cap"),
            steps=int(steps),
            c0=_as_float(tree["distance"]["c0"], "distance.c0"),
            c1=_as_float(tree["distance"]["c1"], "distance.c1"),
            npv=NPVSettings(
                table=None if npv["table"] is None else str(npv["table"]),
                benefits_column=str(npv["benefits_column"]),
                costs_column=str(npv["costs_column"]),
            ),
        )

    def to_dict(self):
        return {
            "model": self.model,
            "k": self.k,
            "epsilon": self.epsilon,
            "symmetry": self.symmetry,
            "flow_form": self.flow_form,
            "region_radius": self.region_radius,
            "gravity": self.gravity.as_dict(),
            "charge_source": self.charge_source,
            "charge_threshold": self.charge_threshold,
            "mobility_cap": self.mobility_cap,
            "steps": self.steps,
            "distance": {"c0": self.c0, "c1": self.c1},
            "npv": {
                "table": self.npv.table,
                "benefits_column": self.npv.benefits_column,
                "costs_column": self.npv.costs_column,
            },
        }

    def violations(self):
        out = []
        if self.model not in default_settings.AVAILABLE_MODELS:
            out.append(f"model must be exactly one of {default_settings.AVAILABLE_MODELS}, got '{self.model}'")
        if self.symmetry not in default_settings.AVAILABLE_SYMMETRIES:
            out.append(f"symmetry must be one of {default_settings.AVAILABLE_SYMMETRIES}, got '{self.symmetry}'")
        if self.flow_form not in default_settings.AVAILABLE_FLOW_FORMS:
            out.append(f"flow_form must be one of {default_settings.AVAILABLE_FLOW_FORMS}, got '{self.flow_form}'")
        if self.charge_source not in default_settings.AVAILABLE_CHARGE_SOURCES:
            out.append(f"charge_source must be one of {default_settings.AVAILABLE_CHARGE_SOURCES}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            out.append("epsilon must be positive")
        if not (math.isfinite(self.k) and self.k >= 0):
            out.append("k must be non-negative")
        if not (math.isfinite(self.region_radius) and self.region_radius > 0):
            out.append("region_radius must be positive")
        if not (math.isfinite(self.mobility_cap) and 0 <= self.mobility_cap <= 1):
            out.append(f"mobility_cap must lie in [0, 1], got {self.mobility_cap}")
        if self.steps < 0:
            out.append(f"steps must be non-negative, got {self.steps}")
        if not (math.isfinite(self.c0) and self.c0 >= 0):
            out.append("distance.c0 must be non-negative")
        if not (math.isfinite(self.c1) and self.c1 >= 0):
            out.append("distance.c1 must be non-negative")
        if self.base_model == "gravity" and self.c0 == 0 and self.c1 == 0:
            out.append("gravity models need a positive economic distance: distance.c0 or distance.c1 must be > 0")
        if self.charge_threshold != default_settings.WEIGHTED_MEAN_THRESHOLD and not math.isfinite(
            self.charge_threshold
        ):
            out.append("charge_threshold must be finite or 'weighted-mean'")
        out.extend(self.gravity.violations())
        return out


@dataclass(frozen=True, eq=False)
class Scenario:
    """A scenario that passed ``validate_scenario``. Distances follow the order of ``regions``."""

    config: ScenarioConfig
    regions: tuple
    distances: DistanceMatrix
    economic_distances: DistanceMatrix
    charge_overrides: dict = field(default_factory=dict)
    npv_table: pd.DataFrame | None = None

    @property
    def ids(self):
        return tuple(r.id for r in self.regions)


def economic_distance(physical_distance, c0, c1):
    """Monetised cost of moving across a physical distance: ``D = c0 + c1 * R``.

    Parameters
    ----------
    physical_distance : float or np.ndarray
        Distance R in km, non-negative.
    c0                : float
        Fixed cost (documents, papers), non-negative.
    c1                : float
        Cost per km (transport), non-negative.

    Returns
    -------
    D : float or np.ndarray
        The economic distance, same shape as ``physical_distance``.
    """

    require_finite(physical_distance=physical_distance, c0=c0, c1=c1)
    if np.any(np.asarray(physical_distance) < 0) or c0 < 0 or c1 < 0:
        raise InvalidInputError("physical_distance, c0 and c1 must be non-negative")
    return c0 + c1 * physical_distance


def economic_distance_matrix(distances: DistanceMatrix, c0, c1):
    """Applies ``economic_distance`` to all off-diagonal pairs; the diagonal stays 0."""

    values = np.array(economic_distance(distances.values, c0, c1), dtype=float)
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(distances.ids, values)


def validate_scenario(
    config: ScenarioConfig, regions, distances: DistanceMatrix, charge_overrides=None, npv_table=None
):
    """Checks every invariant of a scenario and bundles it for the models.

    Parameters
    ----------
    config           : ScenarioConfig
        The scenario settings.
    regions          : list of Region
        The regions of the scenario.
    distances        : DistanceMatrix
        Physical distances; must cover exactly the region ids.
    charge_overrides : dict or None, optional, default: None
        Charges pinned per region id, e.g. from the ``charge`` column of a region table.
    npv_table        : pd.DataFrame or None, optional, default: None
        Per-pair benefits and costs with columns ``origin, destination, benefits, costs``.

    Returns
    -------
    scenario : Scenario

    Raises
    ------
    ScenarioValidationError
        Listing all violations found, not just the first one.
    """

    regions = tuple(regions)
    charge_overrides = dict(charge_overrides or {})
    violations = list(config.violations())
    if not regions:
        violations.append("scenario needs at least one region")

    ids = [r.id for r in regions]
    seen = set()
    for region_id in ids:
        if region_id in seen:
            violations.append(f"duplicate region id '{region_id}'")
        seen.add(region_id)
    for region in regions:
        violations.extend(region.violations())

    missing = [i for i in ids if i not in distances.ids]
    unknown = [i for i in distances.ids if i not in seen]
    if missing:
        violations.append(f"distance matrix has no entries for regions: {', '.join(missing)}")
    if unknown:
        violations.append(f"distance matrix contains unknown region ids: {', '.join(unknown)}")
    violations.extend(distances.violations())

    for region_id, charge in charge_overrides.items():
        if region_id not in seen:
            violations.append(f"charge override for unknown region '{region_id}'")
        elif not math.isfinite(charge):
            violations.append(f"charge override for region '{region_id}' must be finite")

    if config.is_npv_gated and npv_table is None:
        violations.append(f"model '{config.model}' requires an NPV table (npv.table)")
    if npv_table is not None:
        known = set(npv_table["origin"]) | set(npv_table["destination"])
        stray = sorted(str(i) for i in known - seen)
        if stray:
            violations.append(f"NPV table contains unknown region ids: {', '.join(stray)}")

    if violations:
        raise ScenarioValidationError(violations)

    ordered = distances.reindex(tuple(ids))
    return Scenario(
        config=config,
        regions=regions,
        distances=ordered,
        economic_distances=economic_distance_matrix(ordered, config.c0, config.c1),
        charge_overrides=charge_overrides,
        npv_table=npv_table,
    )


def _close(a, b):
    return abs(a - b) <= default_settings.SYMMETRY_RTOL * max(abs(a), abs(b))


def _check_choice(tree, key, choices):
    if tree[key] not in choices:
        raise ConfigurationError(f"{key} must be one of {choices}, got {tree[key]!r}")


def _as_float(value, name):
    if isinstance(value, bool):
        raise ConfigurationError(f"{name} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be a number, got {value!r}") from None
