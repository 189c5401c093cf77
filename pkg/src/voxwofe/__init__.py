"""Voxel-based 3D weights-of-evidence mineral prospectivity modeling."""

from .errors import (BoreholeDataError, ConfigurationError, DegenerateInputError, DegenerateTrainingError,
                     EmptyModelError, NoIntersectionError, PipelineError, SchemaVersionError, VoxWofeError,
                     ZeroCellError)
from .grid import GridSpec, Polygon2D, SurfacePair, VolumeMask, build_model_space, convex_hull

__version__ = "0.1.0"
