"""Exact-enumeration checks of gauge-glass identities, Nishimori-line
derivative formulas and Gibbs-Bogoliubov bounds on small Z_q models."""

__version__ = "0.1.0"

from .errors import CapacityError, ConfigurationError, ConsistencyError, GaugeGlassError, NumericalError
from .model import (
    BondGraph,
    CanonicalCoupling,
    DisorderSample,
    ModelSpec,
    NishimoriParams,
    Slot,
    SpinSpace,
    evaluate_potential,
    exact_gibbs,
    gauge_transform,
    params_from_canonical,
)
from .replicas import ReplicaPattern, replica_correlator
from .quench import MonteCarlo, Quadrature, QuenchedEstimate, quenched_average, quenched_pressure
from .identities import IdentityCase, check_identity, off_line_control, run_identities
from .theorems import DerivativeReport, HessianReport, hessian_psd, thm1_check, thm2_check
from .variational import TrialField, GBReport, gb_bound, check_interpolation, interpolation_curve, rs_meanfield_bound
from .documents import load_model, parse_model

__all__ = [
    "__version__",
    "GaugeGlassError",
    "ConfigurationError",
    "CapacityError",
    "NumericalError",
    "ConsistencyError",
    "SpinSpace",
    "BondGraph",
    "Slot",
    "ModelSpec",
    "NishimoriParams",
    "CanonicalCoupling",
    "DisorderSample",
    "params_from_canonical",
    "evaluate_potential",
    "exact_gibbs",
    "gauge_transform",
    "ReplicaPattern",
    "replica_correlator",
    "Quadrature",
    "MonteCarlo",
    "QuenchedEstimate",
    "quenched_average",
    "quenched_pressure",
    "IdentityCase",
    "check_identity",
    "off_line_control",
    "run_identities",
    "DerivativeReport",
    "HessianReport",
    "thm1_check",
    "thm2_check",
    "hessian_psd",
    "TrialField",
    "GBReport",
    "gb_bound",
    "interpolation_curve",
    "check_interpolation",
    "rs_meanfield_bound",
    "load_model",
    "parse_model",
]
