# Copyright (c) 2024 The migraflow Developers
# Released under the MIT License; see the LICENSE file at the repository root.

import sys

from migraflow.cli import main

sys.exit(main())
