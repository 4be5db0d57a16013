# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.


class InvalidInputError(Exception):
    """Class for an error that occurs when an operation is called with an argument outside its domain,
    e.g., a non-positive distance or permissiveness, or a non-finite value.
    """

    pass


class ConfigurationError(Exception):
    """Class for error in the scenario configuration, e.g. an unknown key or an unsupported model name."""

    pass


class ScenarioValidationError(Exception):
    """Class for a scenario that violates one or more invariants. All violations found are kept
    in the ``violations`` attribute, not only the first one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class IngestError(Exception):
    """Class for error in reading an input file. The message names the file and the offending row."""

    pass


class DegenerateFitError(Exception):
    """Class for error in calibration when the data cannot identify the model parameters."""

    pass


class SimulationError(Exception):
    """Class for an error in a dynamics step."""

    pass
