"""Steady states of damped nonlinear mechanical systems under sampled
aperiodic forcing: amplitude expansions with exponential-kernel
propagation, rational resummation, and independent reference solvers."""

from . import errors
from .bench import (
    FrcResult,
    build_duffing,
    build_gyroscopic_2dof,
    build_oscillator_chain,
    frc_sweep,
    generate_forcing,
    nmte,
)
from .composition import (
    CoefficientTensor,
    CompositionCache,
    assemble_H,
    assemble_phi,
    compose_field,
)
from .gss import (
    GssExpansion,
    PadeGss,
    compute_taylor_gss,
    evaluate_at_amplitude,
    evaluate_pade,
    fit_harmonics,
    harmonic_indices,
    pade_resum,
    reduced_gss,
)
from .kernel import (
    KernelWeights,
    build_kernel_weights,
    propagate_order,
    propagate_order_newmark,
    qmat_structural,
    quasiperiodic_step,
    qvec_general,
)
from .model import (
    DampingClass,
    ForcingSignal,
    MechanicalSystem,
    PolynomialField,
    ReducedModel,
    build_system,
    evaluate_field,
    field_jacobian,
    first_order_blocks,
    load_forcing,
    polynomial_field,
    reduced_model,
)
from .oracle import (
    PicardResult,
    faadibruno_phi,
    newmark_full,
    picard_gss,
    quadrature_weight_reference,
)
from .spectral import (
    ContractionReport,
    SpectralData,
    check_contraction,
    decompose_general,
    decompose_structural,
    select_modes,
    with_retained,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "build_duffing",
    "build_gyroscopic_2dof",
    "build_oscillator_chain",
    "frc_sweep",
    "FrcResult",
    "generate_forcing",
    "nmte",
    "CoefficientTensor",
    "CompositionCache",
    "assemble_H",
    "assemble_phi",
    "compose_field",
    "GssExpansion",
    "PadeGss",
    "compute_taylor_gss",
    "evaluate_at_amplitude",
    "evaluate_pade",
    "fit_harmonics",
    "harmonic_indices",
    "pade_resum",
    "reduced_gss",
    "KernelWeights",
    "build_kernel_weights",
    "propagate_order",
    "propagate_order_newmark",
    "qmat_structural",
    "quasiperiodic_step",
    "qvec_general",
    "DampingClass",
    "ForcingSignal",
    "MechanicalSystem",
    "PolynomialField",
    "ReducedModel",
    "build_system",
    "evaluate_field",
    "field_jacobian",
    "first_order_blocks",
    "load_forcing",
    "polynomial_field",
    "reduced_model",
    "PicardResult",
    "faadibruno_phi",
    "newmark_full",
    "picard_gss",
    "quadrature_weight_reference",
    "ContractionReport",
    "SpectralData",
    "check_contraction",
    "decompose_general",
    "decompose_structural",
    "select_modes",
    "with_retained",
]
