"""Numerical pseudohermitian geometry: Webster calculus, pseudoconformal
transformation checks and the CR Yamabe problem on model CR manifolds."""

import jax

jax.config.update("jax_enable_x64", True)

from .errors import (  # noqa: E402
    CRGeometryError,
    CapExclusion,
    DegenerateContact,
    IncompatibleLattice,
    IndefiniteOperator,
    MapOutOfDomain,
    NonConvergence,
    NonFiniteField,
    NonPositiveDensity,
    NonPositiveDilation,
    NotPositiveDefinite,
    OrderTooHigh,
    PositivityLoss,
    PseudoconvexityLost,
    SingularFrame,
    StencilNotAssembled,
    StencilOutOfDomain,
    UnderdeterminedSystem,
    UnsupportedManifold,
)
from .core import (  # noqa: E402
    Chart,
    ComplexFrame,
    ContactForm,
    CRManifold,
    Derivative,
    Grid,
    ScalarField,
    admissible_coframe,
    integrability_residual,
    integrate,
    levi_form,
    levi_pairing,
    reeb_field,
)

__version__ = "0.1.0"
