"""Differentiable mesh reconstruction toolkit.

Triplane SDF/texture fields, simplified differentiable isosurface
extraction, a software rasterizer with PBR light maps, the disentangled
geometry/texture loss suite with analytic gradients, per-object fitting,
and the full mesh/normal evaluation protocol.
"""

from meshfit._core import *  # noqa: F401,F403
from meshfit._core import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
