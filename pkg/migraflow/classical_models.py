# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

"""Baseline migration models: the human-capital net present value (NPV) model and the
empirical gravity model.

The gravity model uses the form

    M_ij = G * P_i**alpha * P_j**beta * D_ij**(-gamma) * exp(theta * (W_j - W_i) - eta * (U_j - U_i))

so that higher destination wages attract and higher destination unemployment repels.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from migraflow.core_model import DistanceMatrix, FlowMatrix, GravityParams
from migraflow.exceptions import InvalidInputError
from migraflow.helper_functions import check_array_sanity, require_finite

__all__ = [
    "GravityParams",
    "NPVInputs",
    "npv",
    "npv_gate",
    "npv_matrix",
    "npv_gate_matrix",
    "gravity_flow",
    "gravity_flow_matrix",
]


@dataclass(frozen=True)
class NPVInputs:
    """Expected benefits ``R_ij`` and costs ``C_ij`` of moving from i to j, both monetised."""

    benefits: float
    costs: float

    def __post_init__(self):
        require_finite(benefits=self.benefits, costs=self.costs)
        if self.costs < 0:
            raise InvalidInputError(f"costs must be non-negative, got {self.costs}")

    @property
    def value(self):
        return npv(self.benefits, self.costs)


def npv(benefits, costs):
    """Net present value of the migration potential, ``V_ij = R_ij - C_ij``."""

    require_finite(benefits=benefits, costs=costs)
    return benefits - costs


def npv_gate(value, flow):
    """Lets ``flow`` pass when the net present value is strictly positive, otherwise returns 0."""

    if flow < 0:
        raise InvalidInputError(f"flow must be non-negative, got {flow}")
    return flow if value > 0 else 0.0


def npv_matrix(table: pd.DataFrame, ids):
    """Net present values ``V_ij`` aligned with ``ids`` from a per-pair table.

    Parameters
    ----------
    table : pd.DataFrame
        Columns ``origin, destination, benefits, costs``.
    ids   : tuple of str
        Region order of the result.

    Returns
    -------
    V : np.ndarray of shape (n, n)
        Pairs missing from the table hold ``-inf``: without a known positive value the gate stays shut.
    """

    index = {region_id: pos for pos, region_id in enumerate(ids)}
    values = np.full((len(ids), len(ids)), -np.inf)
    for row in table.itertuples(index=False):
        origin, destination = str(row.origin), str(row.destination)
        if origin not in index or destination not in index:
            raise InvalidInputError(f"NPV table refers to unknown pair ({origin}, {destination})")
        NPVInputs(float(row.benefits), float(row.costs))
        values[index[origin], index[destination]] = npv(float(row.benefits), float(row.costs))
    return values


def npv_gate_matrix(values, flows: FlowMatrix):
    """Elementwise ``npv_gate`` of a flow matrix by a matrix of net present values."""

    values = np.asarray(values, dtype=float)
    if values.shape != flows.values.shape:
        raise InvalidInputError(f"NPV matrix shape {values.shape} does not match flows {flows.values.shape}")
    return FlowMatrix(flows.ids, np.where(values > 0, flows.values, 0.0))


def gravity_flow(P_i, P_j, D_ij, U_i, U_j, W_i, W_j, params: GravityParams = GravityParams()):
    """Gravity-model migrant mass from origin i to destination j.

    Parameters
    ----------
    P_i, P_j : float or np.ndarray
        Origin and destination populations, non-negative.
    D_ij     : float or np.ndarray
        Economic distance, strictly positive.
    U_i, U_j : float or np.ndarray
        Origin and destination unemployment rates.
    W_i, W_j : float or np.ndarray
        Origin and destination wage rates.
    params   : GravityParams
        Scale and exponents of the model.

    Returns
    -------
    M_ij : float or np.ndarray
        Non-negative migrant mass.

    Raises
    ------
    InvalidInputError
        If ``D_ij <= 0``, a population is negative, or a zero population meets a negative exponent.
    """

    require_finite(P_i=P_i, P_j=P_j, D_ij=D_ij, U_i=U_i, U_j=U_j, W_i=W_i, W_j=W_j)
    if np.any(np.asarray(D_ij) <= 0):
        raise InvalidInputError(f"D_ij must be positive, got {D_ij}")
    if np.any(np.asarray(P_i) < 0) or np.any(np.asarray(P_j) < 0):
        raise InvalidInputError("populations must be non-negative")
    if (params.alpha < 0 and np.any(np.asarray(P_i) == 0)) or (params.beta < 0 and np.any(np.asarray(P_j) == 0)):
        raise InvalidInputError("a zero population cannot be raised to a negative exponent")

    response = np.exp(params.theta * (W_j - W_i) - params.eta * (U_j - U_i))
    masses = np.power(P_i, params.alpha) * np.power(P_j, params.beta)
    flow = params.G * masses * np.power(D_ij, -params.gamma) * response
    if np.ndim(flow) == 0:
        return float(flow)
    return flow


def gravity_flow_matrix(regions, economic_distances: DistanceMatrix, params: GravityParams = GravityParams()):
    """Applies ``gravity_flow`` to every ordered pair of distinct regions; the diagonal is 0."""

    ids = tuple(r.id for r in regions)
    if economic_distances.ids != ids:
        economic_distances = economic_distances.reindex(ids)
    values = np.zeros((len(ids), len(ids)))
    for i, j in economic_distances.off_diagonal_pairs():
        origin, destination = regions[i].profile, regions[j].profile
        try:
            values[i, j] = gravity_flow(
                origin.population,
                destination.population,
                economic_distances.values[i, j],
                origin.unemployment_rate,
                destination.unemployment_rate,
                origin.wage_rate,
                destination.wage_rate,
                params,
            )
        except InvalidInputError as err:
            raise InvalidInputError(f"pair ({ids[i]}, {ids[j]}): {err}") from err

    check_array_sanity(values, logging.getLogger(), name="gravity flow matrix")
    return FlowMatrix(ids, values)
