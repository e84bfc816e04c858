"""HypoKernel - hypoelliptic Kolmogorov operators: kernels, semigroups, fractional powers."""

from .funcspace import GaussPolyFunction, ModelSpec, SpaceTimeGaussPoly
from .quadrature import QuadratureConfig
from .utils import APP_VERSION as __version__

__all__ = ["GaussPolyFunction", "ModelSpec", "QuadratureConfig", "SpaceTimeGaussPoly", "__version__"]
