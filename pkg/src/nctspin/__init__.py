"""Theta-deformations of tori with arbitrary spin structure."""

from .nc_torus import (
    ThetaMatrix,
    TorusElement,
    generator,
    grade_decompose,
    identity,
    involution,
    monomial,
    sign_action,
    star_product,
)
from .spin_cover import (
    CoveringAlgebra,
    SpinStructure,
    classify_covering,
    deformed_cover,
    embed_cover,
    group_GX,
    is_fixed_monomial,
    kernel_action,
    lift_phases,
    z2prime_fixed_check,
)

__version__ = "0.1.0"
