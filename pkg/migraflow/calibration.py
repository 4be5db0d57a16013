# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

"""Estimation of model constants from observed flow matrices.

The Coulomb member of the model only identifies the combined coupling λ = k / (2πϵ), since k and
ϵ enter the flows as a ratio. The gravity member is estimated by log-linear least squares.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg, stats

from migraflow.classical_models import GravityParams, gravity_flow
from migraflow.coulomb import ChargeAssignment
from migraflow.core_model import DistanceMatrix, FlowMatrix
from migraflow.exceptions import DegenerateFitError, InvalidInputError
from migraflow.helper_functions import format_number, require_finite, require_positive

GRAVITY_COLUMNS = ["ln_G", "alpha", "beta", "gamma", "theta", "eta"]
RESIDUAL_COLUMNS = ["origin", "destination", "observed", "predicted", "residual"]


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    """Outcome of a fit.

    Attributes
    ----------
    model       : str
        ``'coulomb'`` or ``'gravity'``.
    parameters  : dict
        Fitted constants, e.g. ``{'lambda': ...}`` or the six gravity parameters.
    rss         : float
        Residual sum of squares of the minimised objective.
    residuals   : pd.DataFrame
        One row per fitted pair with columns ``origin, destination, observed, predicted, residual``.
    predicted   : FlowMatrix
        Model flows with the fitted constants for all pairs.
    diagnostics : dict
        Pair counts and flags such as ``clamped``.
    """

    model: str
    parameters: dict
    rss: float
    residuals: pd.DataFrame
    predicted: FlowMatrix
    diagnostics: dict = field(default_factory=dict)

    @property
    def gravity_params(self):
        if self.model != "gravity":
            raise InvalidInputError("Only gravity fits carry gravity parameters")
        return GravityParams(**{k: self.parameters[k] for k in ("G", "alpha", "beta", "gamma", "theta", "eta")})

    def to_text(self):
        """Plain-text report with one ``key = value`` line per parameter and diagnostic."""

        lines = [f"model = {self.model}"]
        lines += [f"{name} = {format_number(value)}" for name, value in self.parameters.items()]
        lines.append(f"rss = {format_number(self.rss)}")
        for name, value in self.diagnostics.items():
            value = format_number(value) if isinstance(value, float) else value
            lines.append(f"{name} = {value}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CorrelationReport:
    pearson: float
    spearman: float
    pair_count: int


def distance_cost_factor(k, epsilon, R):
    """Factor ``k / (2π ϵ R**2)`` that plays the part of the economic distance cost in the Coulomb model."""

    require_finite(k=k)
    require_positive(epsilon=epsilon, R=R)
    return k / (2.0 * math.pi * epsilon * R * R)


def distance_cost_matrix(distances: DistanceMatrix, k, epsilon):
    """``distance_cost_factor`` for all pairs of distinct regions as a frame; the diagonal is 0."""

    values = np.zeros((len(distances), len(distances)))
    for i, j in distances.off_diagonal_pairs():
        values[i, j] = distance_cost_factor(k, epsilon, distances.values[i, j])
    return pd.DataFrame(values, index=list(distances.ids), columns=list(distances.ids))


def coulomb_design_matrix(charges: ChargeAssignment, distances: DistanceMatrix):
    """Regressor ``x_ij = |q_i| |Q_j| / R**2`` on poor-to-rich pairs, 0 elsewhere.

    Returns
    -------
    x    : np.ndarray of shape (n, n)
    mask : np.ndarray of bool, True on the usable (negative origin, positive destination) pairs.
    """

    q = charges.aligned(distances.ids)
    x = np.zeros((len(distances), len(distances)))
    mask = np.zeros_like(x, dtype=bool)
    for i, j in distances.off_diagonal_pairs():
        if q[i] < 0 < q[j]:
            R = distances.values[i, j]
            require_positive(R=R)
            x[i, j] = abs(q[i]) * abs(q[j]) / (R * R)
            mask[i, j] = True
    return x, mask


def fit_coulomb_coupling(observed: FlowMatrix, charges: ChargeAssignment, distances: DistanceMatrix, epsilon=None):
    """Least-squares estimate of the Coulomb coupling λ = k / (2πϵ).

    The closed form ``λ* = Σ x_ij m_ij / Σ x_ij**2`` is taken over poor-to-rich pairs, where
    ``m_ij`` is the observed flow. Negative estimates are clamped to 0.

    Parameters
    ----------
    observed  : FlowMatrix
        Observed flows.
    charges   : ChargeAssignment
        Signed charges of the observed regions.
    distances : DistanceMatrix
        Physical distances.
    epsilon   : float or None, optional, default: None
        If given, ``k = 2πϵλ*`` is reported as well.

    Returns
    -------
    result : CalibrationResult

    Raises
    ------
    DegenerateFitError
        If no poor-to-rich pair exists or all regressors vanish.
    """

    logger = logging.getLogger()
    _check_observed(observed)
    if distances.ids != observed.ids:
        distances = distances.reindex(observed.ids)

    x, mask = coulomb_design_matrix(charges, distances)
    if not mask.any():
        raise DegenerateFitError("No pair with a negative origin charge and a positive destination charge to fit")
    xs, ms = x[mask], observed.values[mask]
    sxx = float(np.dot(xs, xs))
    if sxx == 0:
        raise DegenerateFitError("All regressors x_ij are zero; the coupling is not identifiable")

    coupling = float(np.dot(xs, ms)) / sxx
    clamped = coupling < 0
    if clamped:
        logger.warning(f"Fitted coupling {coupling:.6g} is negative and was clamped to 0.")
        coupling = 0.0

    predicted = FlowMatrix(observed.ids, coupling * x)
    residuals = _residual_frame(observed, predicted, mask)
    rss = float(np.sum(residuals["residual"].to_numpy() ** 2))

    parameters = {"lambda": coupling}
    if epsilon is not None:
        require_positive(epsilon=epsilon)
        parameters["epsilon"] = float(epsilon)
        parameters["k"] = 2.0 * math.pi * epsilon * coupling

    off_diagonal = len(observed) * (len(observed) - 1)
    diagnostics = {
        "pair_count": int(mask.sum()),
        "degenerate_pair_count": int(off_diagonal - mask.sum()),
        "unexplained_flow": float(observed.values[~mask].sum()),
        "clamped": bool(clamped),
    }
    logger.info(f"Coulomb fit on {diagnostics['pair_count']} pairs: lambda = {coupling:.6g}, RSS = {rss:.6g}")
    return CalibrationResult("coulomb", parameters, rss, residuals, predicted, diagnostics)


def fit_gravity_params(observed: FlowMatrix, regions, economic_distances: DistanceMatrix):
    """Log-linear least-squares fit of the gravity model.

    Solves the normal equations of

        ln M_ij = ln G + alpha ln P_i + beta ln P_j - gamma ln D_ij + theta (W_j - W_i) - eta (U_j - U_i)

    on a standardised design. Pairs with zero observed flow are excluded and counted.

    Parameters
    ----------
    observed           : FlowMatrix
        Observed flows.
    regions            : list of Region
        Regions carrying populations, wages and unemployment rates.
    economic_distances : DistanceMatrix
        Economic distances D_ij, strictly positive off the diagonal.

    Returns
    -------
    result : CalibrationResult

    Raises
    ------
    DegenerateFitError
        If fewer than six positive flows are available or the design is rank deficient; the
        message names the collinear columns.
    """

    logger = logging.getLogger()
    _check_observed(observed)
    by_id = {r.id: r for r in regions}
    missing = [i for i in observed.ids if i not in by_id]
    if missing:
        raise InvalidInputError(f"Observed flows refer to unknown regions: {', '.join(missing)}")
    regions = [by_id[i] for i in observed.ids]
    if economic_distances.ids != observed.ids:
        economic_distances = economic_distances.reindex(observed.ids)

    rows, targets, used = [], [], []
    excluded_zero, excluded_empty = 0, 0
    for i, j in observed.off_diagonal_pairs():
        m = observed.values[i, j]
        if m == 0:
            excluded_zero += 1
            continue
        origin, destination = regions[i].profile, regions[j].profile
        if origin.population <= 0 or destination.population <= 0:
            excluded_empty += 1
            continue
        D = economic_distances.values[i, j]
        if not D > 0:
            raise InvalidInputError(f"pair ({observed.ids[i]}, {observed.ids[j]}): D_ij must be positive, got {D}")
        rows.append(
            [
                1.0,
                math.log(origin.population),
                math.log(destination.population),
                -math.log(D),
                destination.wage_rate - origin.wage_rate,
                -(destination.unemployment_rate - origin.unemployment_rate),
            ]
        )
        targets.append(math.log(m))
        used.append((i, j))

    if excluded_zero:
        logger.warning(f"Excluded {excluded_zero} pairs with zero observed flow from the gravity fit.")
    if len(rows) < len(GRAVITY_COLUMNS):
        raise DegenerateFitError(
            f"Need at least {len(GRAVITY_COLUMNS)} pairs with positive observed flow, got {len(rows)}"
        )

    X, y = np.array(rows), np.array(targets)
    Z, mean, scale = _standardize(X)
    _check_rank(Z, scale)
    coefficients = _solve_standardized(Z, y, mean, scale)
    rss = float(np.sum((y - X @ coefficients) ** 2))

    parameters = {
        "G": math.exp(coefficients[0]),
        "alpha": float(coefficients[1]),
        "beta": float(coefficients[2]),
        "gamma": float(coefficients[3]),
        "theta": float(coefficients[4]),
        "eta": float(coefficients[5]),
    }
    params = GravityParams(**parameters)

    predicted = np.zeros((len(regions), len(regions)))
    for i, j in observed.off_diagonal_pairs():
        origin, destination = regions[i].profile, regions[j].profile
        predicted[i, j] = gravity_flow(
            origin.population,
            destination.population,
            economic_distances.values[i, j],
            origin.unemployment_rate,
            destination.unemployment_rate,
            origin.wage_rate,
            destination.wage_rate,
            params,
        )
    predicted = FlowMatrix(observed.ids, predicted)
    mask = np.zeros(observed.values.shape, dtype=bool)
    for i, j in used:
        mask[i, j] = True
    residuals = _residual_frame(observed, predicted, mask)

    diagnostics = {
        "pair_count": len(used),
        "degenerate_pair_count": excluded_zero + excluded_empty,
        "zero_flow_pairs": excluded_zero,
        "rss_flow": float(np.sum(residuals["residual"].to_numpy() ** 2)),
    }
    logger.info(f"Gravity fit on {len(used)} pairs, log-space RSS = {rss:.6g}")
    return CalibrationResult("gravity", parameters, rss, residuals, predicted, diagnostics)


def model_correlation(left: FlowMatrix, right: FlowMatrix):
    """Pearson and Spearman correlation of two models' flows over all pairs of distinct regions."""

    if right.ids != left.ids:
        right = right.reindex(left.ids)
    pairs = list(left.off_diagonal_pairs())
    a = np.array([left.values[i, j] for i, j in pairs])
    b = np.array([right.values[i, j] for i, j in pairs])
    if len(pairs) < 2 or np.std(a) == 0 or np.std(b) == 0:
        return CorrelationReport(math.nan, math.nan, len(pairs))
    return CorrelationReport(float(stats.pearsonr(a, b)[0]), float(stats.spearmanr(a, b)[0]), len(pairs))


def _check_observed(observed: FlowMatrix):
    problems = observed.violations()
    if problems:
        raise InvalidInputError(f"Observed flows are invalid: {'; '.join(problems)}")


def _standardize(X):
    """Centres and scales the regressors; constant columns keep a scale of 0 and become all zeros."""

    mean = X[:, 1:].mean(axis=0)
    scale = X[:, 1:].std(axis=0)
    scale[scale <= 1e-12 * np.maximum(1.0, np.abs(mean))] = 0.0
    safe = np.where(scale > 0, scale, 1.0)
    Z = np.column_stack([np.ones(X.shape[0]), (X[:, 1:] - mean) / safe])
    return Z, mean, scale


def _check_rank(Z, scale):
    """Raises a ``DegenerateFitError`` naming every column of the standardized design that adds no rank
    to the columns before it. Constant regressors are collinear with the intercept.
    """

    constant = [GRAVITY_COLUMNS[c + 1] for c in np.flatnonzero(scale == 0)]
    if not constant and np.linalg.matrix_rank(Z) == Z.shape[1]:
        return
    collinear, kept = [], []
    for c in range(Z.shape[1]):
        candidate = kept + [c]
        if GRAVITY_COLUMNS[c] not in constant and np.linalg.matrix_rank(Z[:, candidate]) == len(candidate):
            kept = candidate
        else:
            collinear.append(GRAVITY_COLUMNS[c])
    raise DegenerateFitError(f"Rank-deficient gravity design; collinear columns: {', '.join(collinear)}")


def _solve_standardized(Z, y, mean, scale):
    """Normal equations on the standardized design, mapped back to the original columns."""

    solution = linalg.solve(Z.T @ Z, Z.T @ y, assume_a="pos")
    slopes = solution[1:] / scale
    intercept = solution[0] - float(np.dot(slopes, mean))
    return np.concatenate([[intercept], slopes])


def _residual_frame(observed: FlowMatrix, predicted: FlowMatrix, mask):
    records = []
    for i, j in observed.off_diagonal_pairs():
        if mask[i, j]:
            m, p = float(observed.values[i, j]), float(predicted.values[i, j])
            records.append((observed.ids[i], observed.ids[j], m, p, m - p))
    return pd.DataFrame.from_records(records, columns=RESIDUAL_COLUMNS)
