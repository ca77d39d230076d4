"""Finite-model laboratory for coarse geometry.

Weighted finite coarse spaces and their entourage calculus, geometry
certificates and nets, blocking decompositions, mu-weighted kernel operators
and entourage Laplacians with spectral reports, Folner-type slack search,
and warped metric systems driven by quantized group actions.

The cli, suite, and plotting submodules stay out of this namespace so that
importing the library does not pull in matplotlib; reach them as
coarselab.cli, coarselab.suite, coarselab.plotting.
"""

from .amenability import (FamilyVerdict, FolnerCertificate, FolnerOutcome,
                          family_verdict, folner_ratio, folner_search,
                          thread_count, verdict_from_gaps)
from .blocking import (BlockingCollection, EntourageDecomposition,
                       complete_blocking, decompose_entourage,
                       decompose_operator)
from .entourages import Entourage, connected_components
from .errors import (EXIT_INPUT, EXIT_NONCONVERGENCE, EXIT_OK, EXIT_PROPERTY,
                     ConsistencyError, ConvergenceError, InputError,
                     PropertyFailure)
from .geometry import (GeometryCertificate, certify_geometry, certify_gordo,
                       certify_uniformly_bounded, coarse_net, covering_bound)
from .operators import (PositivityReport, SupportedOperator,
                        block_domination_certificate, block_squares_entourage,
                        build_laplacian, mu_inner, mu_norm,
                        multiplication_operator, quadratic_form,
                        verify_positivity_bounds)
from .spaces import FiniteCoarseSpace, space_from_file, space_from_json
from .spectral import (HeatEstimate, SpectralReport, deflated_constants_gap,
                       heat_estimate_check, heat_operator,
                       manifold_laplacian_standin, spectral_gap)
from .warped import (DecompositionReport, Generator, GroupPresentation,
                     WarpedLevel, WarpedProfile, WarpedSystem, action_maps,
                     action_report, build_warped_system, discretize_level,
                     expander_profile, group_laplacian, load_system, quantize,
                     save_system, verify_entourage_decomposition,
                     warped_ball_entourage, warped_distance, warped_graph)

__version__ = "0.1.0"

__all__ = [
    "FiniteCoarseSpace", "space_from_json", "space_from_file",
    "Entourage", "connected_components",
    "GeometryCertificate", "certify_geometry", "certify_gordo",
    "certify_uniformly_bounded", "coarse_net", "covering_bound",
    "BlockingCollection", "EntourageDecomposition", "complete_blocking",
    "decompose_entourage", "decompose_operator",
    "SupportedOperator", "PositivityReport", "build_laplacian",
    "multiplication_operator", "quadratic_form", "verify_positivity_bounds",
    "block_squares_entourage", "block_domination_certificate",
    "mu_inner", "mu_norm",
    "SpectralReport", "HeatEstimate", "spectral_gap", "deflated_constants_gap",
    "heat_operator", "heat_estimate_check", "manifold_laplacian_standin",
    "FolnerCertificate", "FolnerOutcome", "FamilyVerdict", "folner_ratio",
    "folner_search", "family_verdict", "verdict_from_gaps", "thread_count",
    "Generator", "GroupPresentation", "WarpedLevel", "WarpedSystem",
    "WarpedProfile", "DecompositionReport", "discretize_level", "quantize",
    "action_maps", "action_report", "warped_graph", "warped_distance",
    "warped_ball_entourage", "group_laplacian", "build_warped_system",
    "expander_profile", "verify_entourage_decomposition", "save_system",
    "load_system",
    "InputError", "PropertyFailure", "ConsistencyError", "ConvergenceError",
    "EXIT_OK", "EXIT_PROPERTY", "EXIT_INPUT", "EXIT_NONCONVERGENCE",
]
