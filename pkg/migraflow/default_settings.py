# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

from abc import ABC, abstractmethod


class Setting(ABC):
    """Abstract base class for settings."""

    @abstractmethod
    def __init__(self):
        """"""
        pass


class MetaDictSetting(Setting):
    """Implements an interface for a default meta_dict with optional mandatory fields."""

    def __init__(self, meta_dict: dict, mandatory_fields: list = []):
        """

        Parameters
        ----------
        meta_dict        : dict
            Default dictionary.
        mandatory_fields : list, default: []
            List of keys in `meta_dict` that need to be provided by the user.
        """

        self.meta_dict = meta_dict
        self.mandatory_fields = mandatory_fields


DEFAULT_SETTING_SCENARIO = MetaDictSetting(
    meta_dict={
        "model": "coulomb",
        "k": 1.0,
        "epsilon": 1.0,
        "symmetry": "circular",
        "flow_form": "eq9",
        "region_radius": 1.0,
        "gravity": {"G": 1.0, "alpha": 1.0, "beta": 1.0, "gamma": 2.0, "theta": 0.0, "eta": 0.0},
        "charge_source": "gdp",
        "charge_threshold": "weighted-mean",
        "mobility_cap": 0.05,
        "steps": 10,
        "distance": {"c0": 0.0, "c1": 1.0},
        "npv": {"table": None, "benefits_column": "benefits", "costs_column": "costs"},
    },
    mandatory_fields=[],
)


AVAILABLE_MODELS = ("coulomb", "gravity", "npv-gated-coulomb", "npv-gated-gravity")
AVAILABLE_SYMMETRIES = ("spherical", "circular")
AVAILABLE_FLOW_FORMS = ("eq8", "eq9")
AVAILABLE_CHARGE_SOURCES = ("gdp", "population")
WEIGHTED_MEAN_THRESHOLD = "weighted-mean"


REGION_COLUMNS = ["id", "name", "lat", "lon", "population", "gdp", "wage_rate", "unemployment_rate"]
CHARGE_COLUMN = "charge"
TIMESERIES_COLUMNS = ["step", "region_id", "population", "charge", "net_inflow"]
FLOW_MATRIX_CORNER = "origin"
DISTANCE_MATRIX_CORNER = "id"

# Files written by the command line interface
OUTPUT_FILES = {
    "flows": "flows.csv",
    "summary": "summary.txt",
    "timeseries": "timeseries.csv",
    "final_state": "final_state.csv",
    "flows_cumulative": "flows_cumulative.csv",
    "fit": "fit.txt",
    "residuals": "residuals.csv",
}

EARTH_RADIUS_KM = 6371.0
SIGNIFICANT_DIGITS = 12
NUMBER_FORMAT = f"%.{SIGNIFICANT_DIGITS}g"

# Tolerance for the symmetry check of distance matrices (relative)
SYMMETRY_RTOL = 1e-12

# Number of corridors listed in the flow summary
TOP_CORRIDORS = 5

# Minimum time interval between tqdm status updates to reduce
# load. Only respected when refresh=False in set_postfix
# and set_postfix_str
TQDM_MININTERVAL = 0.1  # in seconds
