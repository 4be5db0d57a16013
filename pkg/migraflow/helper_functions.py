# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

import copy
import math

import numpy as np

from migraflow import default_settings
from migraflow.exceptions import ConfigurationError, InvalidInputError


def check_array_sanity(array, logger, name="array"):
    """Tests for the presence of NaNs and Infs in an array and reports them through ``logger``."""

    array = np.asarray(array, dtype=float)
    num_na = int(np.sum(np.isnan(array)))
    if num_na:
        logger.warning(f"Warning! Computed {name} contains {num_na} nan values!")
    num_inf = int(np.sum(np.isinf(array)))
    if num_inf:
        logger.warning(f"Warning! Computed {name} contains {num_inf} inf values!")
    return num_na == 0 and num_inf == 0


def require_finite(**values):
    """Raises an ``InvalidInputError`` naming the first argument that is not a finite number."""

    for name, value in values.items():
        if not np.all(np.isfinite(np.asarray(value, dtype=float))):
            raise InvalidInputError(f"{name} must be finite, got {value!r}")


def require_positive(**values):
    """Raises an ``InvalidInputError`` for the first argument that is not strictly positive."""

    require_finite(**values)
    for name, value in values.items():
        if np.any(np.asarray(value, dtype=float) <= 0):
            raise InvalidInputError(f"{name} must be positive, got {value!r}")


def merge_left_into_right(left_dict, right_dict):
    """Function to merge nested dict `left_dict` into nested dict `right_dict`."""
    for k, v in left_dict.items():
        if isinstance(v, dict):
            if right_dict.get(k) is not None:
                right_dict[k] = merge_left_into_right(v, right_dict.get(k))
            else:
                right_dict[k] = v
        else:
            right_dict[k] = v
    return right_dict


def nest_dotted_keys(user_dict: dict) -> dict:
    """Turns ``{"gravity.G": 1}`` into ``{"gravity": {"G": 1}}``. Already nested entries are kept."""

    nested = {}
    for key, value in user_dict.items():
        if not isinstance(key, str):
            raise ConfigurationError(f"Configuration keys must be strings, got {key!r}")
        if isinstance(value, dict):
            value = nest_dotted_keys(value)
        head, _, tail = key.partition(".")
        if tail:
            value = nest_dotted_keys({tail: value})
        if head in nested and isinstance(nested[head], dict) and isinstance(value, dict):
            nested[head] = merge_left_into_right(value, nested[head])
        elif head in nested:
            raise ConfigurationError(f"Configuration key '{head}' given more than once")
        else:
            nested[head] = value
    return nested


def find_unknown_keys(user_dict: dict, default_dict: dict, prefix: str = "") -> list:
    """Returns the dotted paths of all keys in ``user_dict`` that have no counterpart in ``default_dict``."""

    unknown = []
    for key, value in user_dict.items():
        path = f"{prefix}{key}"
        if key not in default_dict:
            unknown.append(path)
        elif isinstance(default_dict[key], dict):
            if not isinstance(value, dict):
                unknown.append(path)
            else:
                unknown.extend(find_unknown_keys(value, default_dict[key], prefix=f"{path}."))
    return unknown


def build_meta_dict(user_dict: dict, default_setting: default_settings.MetaDictSetting) -> dict:
    """Integrates a user-defined dictionary into a default dictionary.

    Takes a user-defined dictionary and a default dictionary.

    #. Normalize dotted keys (``"gravity.G"``) into the nested form.
    #. Reject keys the default dictionary does not know.
    #. Scan the `user_dict` for violations by unspecified mandatory fields.
    #. Merge `user_dict` entries into the `default_dict`. Considers nested dict structure.

    Parameters
    ----------
    user_dict       : dict
        The user's dictionary
    default_setting : MetaDictSetting
        The specified default setting with attributes:

        -  `meta_dict`: dictionary with default values.
        -  `mandatory_fields`: list(str) keys that need to be specified by the `user_dict`

    Returns
    -------
    merged_dict: dict
        Merged dictionary.

    Raises
    ------
    ConfigurationError
        If unknown keys are present or mandatory fields are missing.
    """

    default_dict = copy.deepcopy(default_setting.meta_dict)
    mandatory_fields = copy.deepcopy(default_setting.mandatory_fields)
    user_dict = nest_dotted_keys(user_dict)

    unknown = find_unknown_keys(user_dict, default_dict)
    if unknown:
        raise ConfigurationError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")

    # Check if all mandatory fields are provided by the user
    if not all([field in user_dict.keys() for field in mandatory_fields]):
        raise ConfigurationError(f"Not all mandatory fields provided! Need at least the following: {mandatory_fields}")

    # Merge the user dict into the default dict
    merged_dict = merge_left_into_right(user_dict, default_dict)
    return merged_dict


def format_number(value):
    """Formats a float with up to ``SIGNIFICANT_DIGITS`` significant digits; negative zero prints as 0."""

    if value == 0:
        return "0"
    return default_settings.NUMBER_FORMAT % value


def relative_difference(a, b):
    """Symmetric relative difference, 0 when both values are zero."""

    scale = max(abs(a), abs(b))
    if scale == 0 or math.isnan(scale):
        return 0.0 if scale == 0 else math.nan
    return abs(a - b) / scale
