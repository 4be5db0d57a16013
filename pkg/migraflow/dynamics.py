# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

"""Time-stepped population dynamics driven by the migration models.

Every step is synchronous: charges and flows are computed from the state at step t and applied
at once. Migrants carry their origin's GDP per capita; wage and unemployment rates stay fixed.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from tqdm.autonotebook import tqdm

from migraflow.classical_models import gravity_flow_matrix, npv_gate_matrix, npv_matrix
from migraflow.core_model import FlowMatrix, Scenario
from migraflow.coulomb import ChargeAssignment, coulomb_flow_matrix, derive_charges
from migraflow.default_settings import TIMESERIES_COLUMNS, TQDM_MININTERVAL
from migraflow.exceptions import InvalidInputError, SimulationError
from migraflow.helper_functions import relative_difference


@dataclass(frozen=True, eq=False)
class SimulationState:
    """Regions, their charges and the flows accumulated so far after ``step`` steps."""

    step: int
    regions: tuple
    charges: ChargeAssignment
    cumulative: FlowMatrix
    net_inflow: np.ndarray

    @property
    def ids(self):
        return tuple(r.id for r in self.regions)

    def populations(self):
        return np.array([r.profile.population for r in self.regions])

    def total_population(self):
        return float(self.populations().sum())

    def records(self):
        return [
            (self.step, r.id, r.profile.population, float(q), float(net))
            for r, q, net in zip(self.regions, self.charges.values, self.net_inflow)
        ]


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Long-form records ``step, region_id, population, charge, net_inflow``, one per region per step."""

    frame: pd.DataFrame

    @classmethod
    def from_states(cls, states):
        records = [record for state in states for record in state.records()]
        return cls(pd.DataFrame.from_records(records, columns=TIMESERIES_COLUMNS))

    def to_frame(self):
        return self.frame.copy()

    @property
    def steps(self):
        return sorted(self.frame["step"].unique().tolist())

    def total_population(self, step):
        return float(self.frame.loc[self.frame["step"] == step, "population"].sum())

    def conservation_drift(self):
        """Largest relative deviation of the total population from its step-0 value."""

        initial = self.total_population(0)
        return max(relative_difference(self.total_population(s), initial) for s in self.steps)


def compute_charges(scenario: Scenario, regions):
    config = scenario.config
    return derive_charges(regions, config.charge_source, config.charge_threshold, scenario.charge_overrides)


def compute_flow_matrix(scenario: Scenario, regions=None, charges=None):
    """Flows of the configured model for the given regions (default: the scenario's regions).

    The NPV gate is applied for the ``npv-gated-*`` models; the mobility cap is not.
    """

    config = scenario.config
    regions = tuple(scenario.regions if regions is None else regions)
    if config.base_model == "gravity":
        flows = gravity_flow_matrix(regions, scenario.economic_distances, config.gravity)
    else:
        charges = compute_charges(scenario, regions) if charges is None else charges
        flows = coulomb_flow_matrix(regions, scenario.distances, charges, config)
    if config.is_npv_gated:
        flows = npv_gate_matrix(npv_matrix(scenario.npv_table, flows.ids), flows)
    return flows


def apply_mobility_cap(outflows, population, mobility_cap):
    """Scales ``outflows`` proportionally so that their sum does not exceed ``mobility_cap * population``.

    Parameters
    ----------
    outflows     : np.ndarray
        Non-negative migrant masses leaving one origin, per destination.
    population   : float
        Current population of the origin.
    mobility_cap : float in [0, 1]
        Largest share of the population allowed to leave in one step.

    Returns
    -------
    capped : np.ndarray
        The unchanged outflows when the cap is slack, otherwise the rationed outflows.
    """

    outflows = np.array(outflows, dtype=float)
    if not 0 <= mobility_cap <= 1:
        raise InvalidInputError(f"mobility_cap must lie in [0, 1], got {mobility_cap}")
    if np.any(outflows < 0):
        raise InvalidInputError("outflows must be non-negative")
    total = outflows.sum()
    allowed = mobility_cap * population
    if total <= allowed:
        return outflows
    return outflows * (allowed / total)


def initial_state(scenario: Scenario):
    regions = tuple(scenario.regions)
    ids = tuple(r.id for r in regions)
    return SimulationState(
        step=0,
        regions=regions,
        charges=_charges_at(scenario, regions, 0),
        cumulative=FlowMatrix.zeros(ids),
        net_inflow=np.zeros(len(regions)),
    )


def step(state: SimulationState, scenario: Scenario):
    """Advances the simulation by one synchronous step.

    #. Derive charges from the current profiles.
    #. Compute the flow matrix of the configured model (NPV-gated if configured).
    #. Cap the outflows of every origin at ``mobility_cap`` times its population.
    #. Move population: ``P_i <- P_i - sum_j M_ij + sum_j M_ji``.
    #. Move GDP with the migrants at their origin's GDP per capita.

    Raises
    ------
    SimulationError
        If the model fails; the message carries the step index.
    """

    config = scenario.config
    regions = state.regions
    charges = _charges_at(scenario, regions, state.step)
    try:
        flows = compute_flow_matrix(scenario, regions, charges)
    except InvalidInputError as err:
        raise SimulationError(f"step {state.step}: {err}") from err

    populations = state.populations()
    gdp = np.array([r.profile.gdp for r in regions])
    moved = np.array(
        [apply_mobility_cap(flows.values[i], populations[i], config.mobility_cap) for i in range(len(regions))]
    ).reshape(len(regions), len(regions))

    outflow, inflow = moved.sum(axis=1), moved.sum(axis=0)
    per_capita = np.divide(gdp, populations, out=np.zeros_like(gdp), where=populations > 0)
    gdp_out = outflow * per_capita
    gdp_in = moved.T @ per_capita

    new_populations = np.maximum(populations - outflow + inflow, 0.0)
    new_gdp = np.maximum(gdp - gdp_out + gdp_in, 0.0)
    new_regions = tuple(
        r.with_profile(population=float(p), gdp=float(g)) for r, p, g in zip(regions, new_populations, new_gdp)
    )

    moved = FlowMatrix(flows.ids, moved)
    return SimulationState(
        step=state.step + 1,
        regions=new_regions,
        charges=_charges_at(scenario, new_regions, state.step + 1),
        cumulative=state.cumulative.plus(moved),
        net_inflow=inflow - outflow,
    )


def run(scenario: Scenario, steps=None, progress=False):
    """Applies ``step`` exactly ``steps`` times (default: ``scenario.config.steps``).

    Parameters
    ----------
    scenario : Scenario
        A validated scenario.
    steps    : int or None, optional, default: None
        Number of steps; overrides the configured value.
    progress : bool, optional, default: False
        Show a progress bar.

    Returns
    -------
    series : TimeSeries
        One record per region for every step ``0..steps``.
    final  : SimulationState
    """

    steps = scenario.config.steps if steps is None else steps
    if steps < 0:
        raise InvalidInputError(f"steps must be non-negative, got {steps}")

    logger = logging.getLogger()
    state = initial_state(scenario)
    states = [state]
    with tqdm(total=steps, desc="Simulating", mininterval=TQDM_MININTERVAL, disable=not progress) as p_bar:
        for _ in range(steps):
            state = step(state, scenario)
            states.append(state)
            p_bar.update(1)

    series = TimeSeries.from_states(states)
    logger.info(f"Simulated {steps} steps for {len(scenario.regions)} regions, drift {series.conservation_drift():.3e}")
    return series, state


def _charges_at(scenario, regions, step_index):
    try:
        return compute_charges(scenario, regions)
    except InvalidInputError as err:
        raise SimulationError(f"step {step_index}: {err}") from err
