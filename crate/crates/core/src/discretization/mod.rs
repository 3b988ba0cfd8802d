//! Grids, nodal fields, quadrature, operator assembly and cutoffs.

mod cutoff;
mod field;
mod grid;
mod operator;
mod variation;

pub use cutoff::{build_cutoff, smoothstep, CutoffRegion, Interval, Region};
pub use field::{gradient, inner_product, rect_inner, Field, InnerProduct, SpaceTimeField, VectorField};
pub(crate) use field::{gradient_values, space_inner};
pub use grid::{build_grid, SpatialGrid, TimeGrid};
pub use operator::{
    assemble_divergence_operator, assemble_first_order, assemble_parabolic_operator,
    assemble_reaction, DriftForm, StencilOperator, Tensor2,
};
pub use variation::coefficient_variation;
