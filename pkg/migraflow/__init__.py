# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

import logging

# Add easy access imports
try:
    from migraflow import (
        calibration,
        classical_models,
        core_model,
        coulomb,
        default_settings,
        dynamics,
        io_ingest,
    )
    from migraflow.version import __version__
except ImportError as err:
    logger = logging.getLogger()
    logger.setLevel(logging.WARNING)
    logger.warning("Some dependencies failed to load. migraflow modules may not work properly!")
    logger.warning(str(err))
