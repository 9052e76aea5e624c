"""Cascade: exact series, coefficient ODE systems, singular L^p quadrature,
and an independent spectral solver for Hilbert-transform transport equations.
"""

from .grid import (
    GridFunction,
    SignConvention,
    PLUS,
    MINUS,
    hilbert_transform,
    hilbert_indicator,
    indicator,
    mollified_indicator,
    tricomi_residual,
    commutator,
)
from .algebra import (
    CoeffTable,
    CascadeElement,
    build_coeff_table,
    apply_H,
    apply_H_mult_a,
    expand_H_power,
    mult_by_indicator,
    evaluate,
    evaluate_on_grid,
    verify_coeff_properties,
)

__version__ = "0.1.0"
