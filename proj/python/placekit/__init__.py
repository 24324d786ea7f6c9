# Copyright (C) 2026 placekit contributors
# SPDX-License-Identifier: Apache-2.0
"""Tabletop placement planning toolkit.

Python surface over the C++ core: scene-graph abstraction and augmentation,
analytic placement affordance fields, guided diffusion pose sampling,
synthetic benchmark generation, and PA/PP/SR evaluation.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
