"""Single-patch isogeometric Galerkin solver with guaranteed functional
error bounds, percentile marking and tensor-product adaptive refinement."""

from .splines import (
    KnotVector,
    SplineSpace2D,
    TensorWeight,
    DiscreteFunction,
    DiscreteVectorField,
    VectorSpaceLayout,
    make_open_knot_vector,
    find_span,
    eval_basis,
    eval_rational_basis_2d,
    dof_count,
    refine_uniform,
    refine_marked,
    coarsen_by_factor,
    elevate_degree,
    greville_abscissae,
)

__version__ = "0.1.0"
