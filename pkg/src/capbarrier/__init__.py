"""Layered degenerate-diffusion simulator with capillary-barrier interfaces."""

from .config import ScenarioConfig, load_preset, load_scenario, parse_scenario
from .domain import DomainLayout, InitialData, Mesh, State, build_mesh, project_initial
from .errors import (CapBarrierError, ComparisonError, ConfigError, ConstructionError, DataError,
                     NoOverlapError, ParameterError, PreconditionError, StepFailure)
from .graphs import (KirchhoffTransform, MonotoneGraph, PsiFunction, build_kirchhoff, build_psi,
                     check_equivalence, graph_inverse, graphs_intersect, truncate_pair)
from .media import CapillaryPressureCurve, HermiteCurve, Medium, MobilityCurve
from .regularization import (BlendedMedium, RegularizedFamily, approximate_initial, blend_media,
                             build_psi_n, layered_initial, regularize_media, smallest_valid_n)
from .solver import InterfaceTrace, Simulator, Trajectory, inner_flux, interface_connect

__version__ = "0.1.0"
