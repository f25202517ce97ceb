"""EnerGS geometric energy field: tri-state voxel fields, energies and relaxation."""

from ._energs import *  # noqa: F401,F403
from ._energs import __version__  # noqa: F401
