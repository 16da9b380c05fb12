"""Hawking surfaces on asymptotically flat initial data sets."""
from .errors import *  # noqa: F401,F403
from .models import (Euclidean, HarmonicAsymptotics, InitialDataModel, PerturbedSchwarzschild,
                     SchwarzschildIsotropic, YorkModel, eval_k_jet, eval_metric_jet, pi_k_convert)
from .surface import GraphSurface, build_surface_geometry
from .functionals import hawking_energy, hawking_functional, el_residual, monotonicity_pack
from .reduction import build_foliation, ls_solve, minimize_G

__version__ = "0.1.0"
