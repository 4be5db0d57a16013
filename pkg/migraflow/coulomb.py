# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

"""Electrostatic machinery of the migration model: coupling constants, Coulomb forces,
fields and their superposition, signed economic charges and the two migration-flow formulas.

Sign convention: poor regions carry negative charge, rich regions positive charge. A positive
force means repulsion (like signs), a negative force attraction (opposite signs). Repulsion is
modelled as the absence of flow, never as a negative flow.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from migraflow import default_settings
from migraflow.core_model import DistanceMatrix, FlowMatrix, Region, ScenarioConfig
from migraflow.exceptions import InvalidInputError
from migraflow.helper_functions import check_array_sanity, require_finite, require_positive


@dataclass(frozen=True, eq=False)
class ChargeAssignment:
    """One signed charge per region plus the threshold that determined the signs.

    ``threshold`` is ``None`` when every charge was supplied explicitly.
    """

    ids: tuple
    values: np.ndarray
    threshold: float | None = None

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if len(ids) != values.shape[0]:
            raise InvalidInputError(f"Got {len(ids)} region ids but {values.shape[0]} charges")
        if len(set(ids)) != len(ids):
            raise InvalidInputError("Every region must have exactly one charge")
        require_finite(charges=values)
        values.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, charges: dict, threshold=None):
        return cls(tuple(charges), np.array(list(charges.values()), dtype=float), threshold)

    def __getitem__(self, region_id):
        try:
            return float(self.values[self.ids.index(region_id)])
        except ValueError:
            raise InvalidInputError(f"No charge assigned to region '{region_id}'") from None

    def __len__(self):
        return len(self.ids)

    def as_dict(self):
        return {i: float(q) for i, q in zip(self.ids, self.values)}

    def aligned(self, ids):
        """Charges in the order of ``ids``."""

        return np.array([self[i] for i in ids])


@dataclass(frozen=True)
class AttractorDescription:
    """An attracting (or repelling) centre seen from a probe at distance ``distance`` km.

    Exactly one of the total-charge form (``total_charge``) or the density form (``density``
    together with ``radius``) has to be given.
    """

    distance: float
    total_charge: float | None = None
    density: float | None = None
    radius: float | None = None
    region_id: str | None = None

    def __post_init__(self):
        has_total = self.total_charge is not None
        has_density = self.density is not None or self.radius is not None
        if has_total == has_density:
            raise InvalidInputError("Exactly one of total_charge or (density, radius) must be given")
        if has_density:
            if self.density is None or self.radius is None:
                raise InvalidInputError("The density form needs both density and radius")
            require_finite(density=self.density)
            require_positive(radius=self.radius)
        else:
            require_finite(total_charge=self.total_charge)

    @property
    def label(self):
        return self.region_id if self.region_id is not None else f"attractor@{self.distance:g}km"


@dataclass(frozen=True)
class FieldSample:
    """Net signed field at a probe and the per-attractor contributions it is the sum of."""

    net: float
    contributions: tuple = ()

    def as_dict(self):
        return dict(self.contributions)


def coupling_constant(symmetry, epsilon):
    """Returns K = 1/(4πϵ) for spherical and K = 1/(2πϵ) for circular symmetry.

    Raises
    ------
    InvalidInputError
        If ``epsilon`` is not positive or the symmetry is unknown.
    """

    require_positive(epsilon=epsilon)
    if symmetry == "spherical":
        return 1.0 / (4.0 * math.pi * epsilon)
    if symmetry == "circular":
        return 1.0 / (2.0 * math.pi * epsilon)
    raise InvalidInputError(f"symmetry must be one of {default_settings.AVAILABLE_SYMMETRIES}, got '{symmetry}'")


def coulomb_force(q1, q2, r, K):
    """Coulomb force ``K * q1 * q2 / r**2`` between two charges ``r`` km apart.

    A positive result is repulsion (like signs), a negative one attraction.
    """

    require_finite(q1=q1, q2=q2, K=K)
    require_positive(r=r)
    return K * (q1 * q2) / (r * r)


def total_charge_from_density(density, radius):
    """Total charge equivalent of the density form: ``Q = (2π/3) * ρ * a**2``."""

    require_finite(density=density)
    require_positive(radius=radius)
    return 2.0 * math.pi * density * radius * radius / 3.0


def density_from_total_charge(total_charge, radius):
    """Inverse of ``total_charge_from_density``: ``ρ = 3 Q / (2π a**2)``."""

    require_finite(total_charge=total_charge)
    require_positive(radius=radius)
    return 3.0 * total_charge / (2.0 * math.pi * radius * radius)


def field_at(attractor: AttractorDescription, R=None, epsilon=1.0, symmetry="circular"):
    """Field of one attractor acting on a unit probe charge.

    Parameters
    ----------
    attractor : AttractorDescription
        The attracting centre.
    R         : float or None, optional, default: None
        Distance to the probe in km; ``attractor.distance`` is used when ``None``.
    epsilon   : float, optional, default: 1.0
        Permissiveness of the environment between the regions.
    symmetry  : str, optional, default: 'circular'
        Symmetry fixing the coupling constant of the total-charge form.

    Returns
    -------
    E : float
        ``K(symmetry, ϵ) * Q / R**2`` for the total-charge form and ``ρ * a**2 / (3 ϵ R**2)``
        for the density form.
    """

    R = attractor.distance if R is None else R
    require_positive(R=R, epsilon=epsilon)
    if attractor.total_charge is not None:
        return coupling_constant(symmetry, epsilon) * attractor.total_charge / (R * R)
    return attractor.density * attractor.radius**2 / (3.0 * epsilon * R * R)


def attraction_force(q_i, E):
    """Force ``q_i * E`` on a probe charge; negative when the probe is attracted."""

    require_finite(q_i=q_i, E=E)
    return q_i * E


def superposed_field(probe_region, attractors, epsilon=1.0, symmetry="circular"):
    """Superposes the fields of several attractor centres at a probe region.

    Parameters
    ----------
    probe_region : Region or str
        The region (or its id) the field is evaluated at.
    attractors   : list of AttractorDescription
        The attractor centres, each carrying its distance to the probe.
    epsilon      : float, optional, default: 1.0
        Permissiveness of the environment.
    symmetry     : str, optional, default: 'circular'
        Symmetry used for total-charge attractors.

    Returns
    -------
    sample : FieldSample
        Net field (algebraic sum in the given order) and the per-attractor breakdown.

    Raises
    ------
    InvalidInputError
        If an attractor is co-located with the probe.
    """

    probe_id = probe_region.id if isinstance(probe_region, Region) else probe_region
    contributions = []
    net = 0.0
    for attractor in attractors:
        if attractor.distance <= 0 or (attractor.region_id is not None and attractor.region_id == probe_id):
            raise InvalidInputError(f"Attractor {attractor.label} is co-located with probe '{probe_id}'")
        value = field_at(attractor, epsilon=epsilon, symmetry=symmetry)
        contributions.append((attractor.label, value))
        net += value
    return FieldSample(net=net, contributions=tuple(contributions))


def weighted_mean_threshold(regions, source="gdp"):
    """Population-weighted mean of the charge indicator over ``regions``."""

    populations = np.array([r.profile.population for r in regions], dtype=float)
    if not np.any(populations > 0):
        raise InvalidInputError("The weighted-mean threshold needs at least one region with positive population")
    indicators = np.array([r.profile.indicator(source) for r in regions], dtype=float)
    return float(np.dot(populations, indicators) / populations.sum())


def derive_charge(profile, source="gdp", threshold=default_settings.WEIGHTED_MEAN_THRESHOLD, regions=None):
    """Signed charge of a region: the magnitude is the indicator itself, the sign that of
    ``indicator - threshold``.

    Parameters
    ----------
    profile   : EconomicProfile
        Profile of the region.
    source    : str, optional, default: 'gdp'
        Indicator the charge is derived from, ``'gdp'`` or ``'population'``.
    threshold : float or str, optional, default: 'weighted-mean'
        Reference value for the sign; ``'weighted-mean'`` takes the population-weighted mean
        over ``regions``.
    regions   : list of Region or None
        All regions of the scenario, required by the weighted-mean rule.

    Returns
    -------
    q : float
        0 when the indicator equals the threshold.
    """

    if threshold == default_settings.WEIGHTED_MEAN_THRESHOLD:
        if not regions:
            raise InvalidInputError("The weighted-mean threshold needs the scenario regions")
        threshold = weighted_mean_threshold(regions, source)
    require_finite(threshold=threshold)
    indicator = profile.indicator(source)
    require_finite(indicator=indicator)
    difference = indicator - threshold
    if difference == 0:
        return 0.0
    return math.copysign(indicator, difference) + 0.0


def derive_charges(regions, source="gdp", threshold=default_settings.WEIGHTED_MEAN_THRESHOLD, overrides=None):
    """Applies ``derive_charge`` to all ``regions``; ``overrides`` pin charges per region id."""

    regions = list(regions)
    overrides = overrides or {}
    if len(overrides) < len(regions) and threshold == default_settings.WEIGHTED_MEAN_THRESHOLD:
        threshold = weighted_mean_threshold(regions, source)
    values = []
    for region in regions:
        if region.id in overrides:
            values.append(float(overrides[region.id]))
        else:
            values.append(derive_charge(region.profile, source, threshold))
    threshold = None if threshold == default_settings.WEIGHTED_MEAN_THRESHOLD else float(threshold)
    return ChargeAssignment(tuple(r.id for r in regions), np.array(values), threshold)


def flow_eq8(k, q_i, rho_j, a, epsilon, R):
    """Migrant mass from the density form: ``k |q_i| |ρ_j| a**2 / (3 ϵ R**2)``.

    Flow is only emitted when the charges have opposite signs; like signs give 0.
    """

    require_finite(k=k, q_i=q_i, rho_j=rho_j)
    require_positive(a=a, epsilon=epsilon, R=R)
    if k < 0:
        raise InvalidInputError(f"k must be non-negative, got {k}")
    if not _opposite_signs(q_i, rho_j):
        return 0.0
    return k * abs(q_i) * abs(rho_j) * a * a / (3.0 * epsilon * R * R)


def flow_eq9(k, q_i, Q_j, epsilon, R):
    """Migrant mass from the total-charge form: ``k |q_i| |Q_j| / (2π ϵ R**2)``.

    Flow is only emitted when the charges have opposite signs; like signs give 0.
    """

    require_finite(k=k, q_i=q_i, Q_j=Q_j)
    require_positive(epsilon=epsilon, R=R)
    if k < 0:
        raise InvalidInputError(f"k must be non-negative, got {k}")
    if not _opposite_signs(q_i, Q_j):
        return 0.0
    return k * abs(q_i) * abs(Q_j) / (2.0 * math.pi * epsilon * R * R)


def coulomb_flow_matrix(regions, distances: DistanceMatrix, charges: ChargeAssignment, config: ScenarioConfig):
    """Pairwise Coulomb flows from every negative (poor) to every positive (rich) region.

    Parameters
    ----------
    regions   : list of Region
        Regions of a validated scenario; fixes the row/column order.
    distances : DistanceMatrix
        Physical distances R.
    charges   : ChargeAssignment
        Signed charges of all regions.
    config    : ScenarioConfig
        Supplies ``k``, ``epsilon``, ``flow_form`` and ``region_radius``.

    Returns
    -------
    flows : FlowMatrix
        Non-negative, zero diagonal, nonzero only for negative-origin / positive-destination pairs.
    """

    ids = tuple(r.id for r in regions)
    if distances.ids != ids:
        distances = distances.reindex(ids)
    q = charges.aligned(ids)
    values = np.zeros((len(ids), len(ids)))
    for i, j in distances.off_diagonal_pairs():
        if not (q[i] < 0 < q[j]):
            continue
        try:
            if config.flow_form == "eq8":
                rho_j = density_from_total_charge(q[j], config.region_radius)
                a, R = config.region_radius, distances.values[i, j]
                values[i, j] = flow_eq8(config.k, q[i], rho_j, a, config.epsilon, R)
            else:
                values[i, j] = flow_eq9(config.k, q[i], q[j], config.epsilon, distances.values[i, j])
        except InvalidInputError as err:
            raise InvalidInputError(f"pair ({ids[i]}, {ids[j]}): {err}") from err

    check_array_sanity(values, logging.getLogger(), name="Coulomb flow matrix")
    return FlowMatrix(ids, values)


def field_map(regions, distances: DistanceMatrix, charges: ChargeAssignment, epsilon=1.0, symmetry="circular"):
    """Net superposed field at every region produced by the charges of all other regions."""

    ids = tuple(r.id for r in regions)
    if distances.ids != ids:
        distances = distances.reindex(ids)
    q = charges.aligned(ids)
    out = {}
    for i, probe in enumerate(ids):
        attractors = [
            AttractorDescription(distance=distances.values[i, j], total_charge=q[j], region_id=ids[j])
            for j in range(len(ids))
            if j != i
        ]
        out[probe] = superposed_field(probe, attractors, epsilon=epsilon, symmetry=symmetry)
    return out


def coulomb_force_matrix(regions, distances: DistanceMatrix, charges: ChargeAssignment, K):
    """Signed pairwise Coulomb forces as a frame (positive = repulsion); the diagonal is 0."""

    ids = tuple(r.id for r in regions)
    if distances.ids != ids:
        distances = distances.reindex(ids)
    q = charges.aligned(ids)
    values = np.zeros((len(ids), len(ids)))
    for i, j in distances.off_diagonal_pairs():
        values[i, j] = coulomb_force(q[i], q[j], distances.values[i, j], K)
    return pd.DataFrame(values, index=list(ids), columns=list(ids))


def _opposite_signs(a, b):
    return (a < 0 < b) or (b < 0 < a)
