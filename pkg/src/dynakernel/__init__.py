"""Heat and Laplace kernels on the half space and the unit ball, with
dynamical (time-derivative) boundary conditions."""

from .ball_heat import Truncation, dirichlet_eigenbasis
from .dyn_eigen import wentzell_eigenpairs
from .errors import DynakernelError
from .numerics import KernelValue, QuadratureSpec

__all__ = ["Truncation", "dirichlet_eigenbasis", "wentzell_eigenpairs", "DynakernelError",
           "KernelValue", "QuadratureSpec"]
__version__ = "0.1.0"
