"""Numerical check of a curvature pinching estimate along Ricci flow.

Modules:

* ``curvature_algebra``  tensor decomposition ``Rm = U + V + W`` and norms
* ``geometry_catalog``   scenario families (space forms, product spheres,
  3D unimodular groups, rotationally symmetric spheres)
* ``flow_engine``        RK4 time stepping with blowup detection
* ``pinching_monitor``   the ratio ``|F| / (R + c)`` and its barrier
* ``cli_runner``         configs, CSV traces and exit codes
"""

from . import cli_runner, curvature_algebra, flow_engine, geometry_catalog, pinching_monitor
from .errors import (
    DegenerateMetric,
    DegenerateState,
    InvalidArgument,
    InvalidConfig,
    InvalidLocation,
    InvalidSample,
    InvalidState,
    UnsupportedCheck,
    UnsupportedDimension,
)

__version__ = "0.1.0"
