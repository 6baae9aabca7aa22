"""Gain synthesis and closed-loop simulation for linear ADRC.

The package covers single-input single-output plants whose order equals
their relative degree.  It synthesizes controller and observer gains
that place the closed-loop spectrum exactly, simulates the resulting
loop under constant or generated disturbances with optional sampling
and measurement noise, and exposes the whole workflow through a
scenario-driven command line.
"""

from .closedloop import (ClosedLoopSystem, RationalTF, UnsupportedOrder,
                         adrc_transfer, build_closed_loop, coeff_match,
                         match_model_based, model_based_transfer,
                         pid_closed_loop, pid_necessary_condition)
from .plant import (CanonicalPlant, DisturbanceComposition, NoRelativeDegree,
                    RelativeDegreeMismatch, StateSpacePlant, Unobservable,
                    relative_degree, to_canonical)
from .poly import (ConjugateViolation, Degenerate, InfeasibleSplit,
                   FASTEST_TO_CONTROLLER, SLOWEST_TO_CONTROLLER, RealPoly,
                   char_poly, eig, poly_from_roots, real_split, roots_of)
from .sim import (CONTINUOUS, BLOWUP_LIMIT, CostBreakdown, DisturbanceModel,
                  SimConfig, SummaryMetrics, Trajectory, UnstableBlowup,
                  cost, default_backend, simulate, summarize)
from .synthesis import (AdrcGains, ConjectureReport, DesiredSpectrum,
                        NotHurwitz, SingularMap, SynthesisReport,
                        bandwidth_gains, gains_from_nominal, high_gain_gains,
                        nominal_coeffs, synthesize, transform_desired,
                        verify_conjecture)

__version__ = "0.1.0"

__all__ = [
    "AdrcGains", "BLOWUP_LIMIT", "CONTINUOUS", "CanonicalPlant",
    "ClosedLoopSystem", "ConjectureReport", "ConjugateViolation",
    "CostBreakdown", "Degenerate", "DesiredSpectrum",
    "DisturbanceComposition", "DisturbanceModel", "FASTEST_TO_CONTROLLER",
    "InfeasibleSplit", "NoRelativeDegree", "NotHurwitz", "RationalTF",
    "RealPoly", "RelativeDegreeMismatch", "SLOWEST_TO_CONTROLLER",
    "SimConfig", "SingularMap", "StateSpacePlant", "SummaryMetrics",
    "SynthesisReport", "Trajectory", "Unobservable", "UnstableBlowup",
    "UnsupportedOrder", "adrc_transfer", "bandwidth_gains",
    "build_closed_loop", "char_poly", "coeff_match", "cost",
    "default_backend", "eig", "gains_from_nominal",
    "high_gain_gains", "match_model_based",
    "model_based_transfer", "nominal_coeffs", "pid_closed_loop",
    "pid_necessary_condition", "poly_from_roots", "real_split",
    "relative_degree", "roots_of", "simulate", "summarize", "synthesize",
    "to_canonical", "transform_desired", "verify_conjecture",
]
