use super::field::gradient_values;
use super::grid::SpatialGrid;
use super::operator::{assemble_divergence_operator, StencilOperator, Tensor2};

/// Reach of a coefficient variation: a node coefficient touches rows one node away and
/// depends on the field up to one node away (two for the one-sided boundary gradient).
const VARIATION_RADIUS: usize = 2;

/// The linear map `r ↦ −div_h((α r + Σ_l β_l ∂_l r) ∇_h z)`, where the nodal tensor field
/// inside the divergence is differentiated through the same discrete gradient as the
/// coefficients. This is the part of the Jacobian of `y ↦ −div_h(a(y, ∇_h y)∇_h y)` that
/// comes from the dependence of `a` on the state.
///
/// Columns are extracted by probing: nodes of one colour are five apart along each axis, so
/// every row sees at most one probed column of each colour.
pub fn coefficient_variation(grid: SpatialGrid, z: &[f64], alpha: &[Tensor2], beta: &[[Tensor2; 2]]) -> StencilOperator {
    let dim = grid.dim();
    let n = grid.node_count();
    let period = 2 * VARIATION_RADIUS + 1;
    let reach = VARIATION_RADIUS as isize;
    let colours = if dim == 1 { period } else { period * period };
    let mut op = StencilOperator::zeros_with_radius(grid, VARIATION_RADIUS);
    for colour in 0..colours {
        let (cx, cy) = (colour % period, colour / period);
        let in_colour = |k: usize| {
            let (i, j) = grid.ij(k);
            !grid.is_boundary(k) && i % period == cx && (dim == 1 || j % period == cy)
        };
        let probe: Vec<f64> = (0..n).map(|k| if in_colour(k) { 1.0 } else { 0.0 }).collect();
        if probe.iter().all(|&v| v == 0.0) {
            continue;
        }
        let grad = gradient_values(grid, &probe);
        let coef: Vec<Tensor2> = (0..n)
            .map(|k| {
                let mut t = alpha[k].scale(probe[k]);
                for l in 0..dim {
                    t = t.add(&beta[k][l].scale(grad[k][l]));
                }
                t
            })
            .collect();
        let response = assemble_divergence_operator(grid, &coef, f64::NEG_INFINITY)
            .expect("no ellipticity requirement")
            .apply(z);
        for row in grid.interior_nodes() {
            let v = response[row];
            if v == 0.0 {
                continue;
            }
            let (ri, rj) = grid.ij(row);
            let pick = |r: usize, c: usize| -> Option<isize> {
                (-reach..=reach).find(|d| {
                    let t = r as isize + d;
                    t >= 0 && t as usize % period == c
                })
            };
            let di = pick(ri, cx);
            let dj = if dim == 1 { Some(0) } else { pick(rj, cy) };
            let col = match (di, dj) {
                (Some(di), Some(dj)) => grid.neighbour(row, di, dj).filter(|&c| in_colour(c)),
                _ => None,
            };
            match col {
                Some(c) => op.add_entry(row, c, v),
                None => debug_assert!(false, "variation response outside the stencil at row {row}"),
            }
        }
    }
    op
}
