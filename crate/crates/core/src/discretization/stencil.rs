use rayon::prelude::*;

use super::PeriodicField;
use crate::{Error, Result};

/// Central-difference `∂/∂x_axis` with periodic wrap, applied to every component.
///
/// `order` selects the second-order `(f₊₁ − f₋₁)/2h` or the fourth-order
/// `(−f₊₂ + 8f₊₁ − 8f₋₁ + f₋₂)/12h` stencil.
pub fn spatial_derivative<T: PeriodicField + Sync>(f: &T, axis: usize, order: usize) -> Result<T> {
    let grid = f.spatial();
    if axis >= grid.dim() {
        return Err(Error::InvalidAxis {
            axis,
            dim: grid.dim(),
        });
    }
    let taps: &[(isize, f64)] = match order {
        2 => &[(1, 0.5), (-1, -0.5)],
        4 => &[
            (2, -1.0 / 12.0),
            (1, 8.0 / 12.0),
            (-1, -8.0 / 12.0),
            (-2, 1.0 / 12.0),
        ],
        other => return Err(Error::InvalidStencilOrder(other)),
    };
    let inv_h = 1.0 / grid.spacing()[axis];
    let nc = f.components();
    let src = f.data();
    let mut out = f.clone();
    out.data_mut()
        .par_chunks_mut(nc)
        .enumerate()
        .for_each(|(cell, chunk)| {
            let mut nbrs = [0usize; 4];
            for (slot, &(off, _)) in nbrs.iter_mut().zip(taps) {
                *slot = grid.neighbor(cell, axis, off) * nc;
            }
            for (c, o) in chunk.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (base, &(_, w)) in nbrs.iter().zip(taps) {
                    acc += w * src[base + c];
                }
                *o = acc * inv_h;
            }
        });
    Ok(out)
}

/// Spatial multi-index `α = (α₁, …, α_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }
}

/// All multi-indices of dimension `dim` with `|α| ≤ max_order`, grouped by
/// ascending order and lexicographically descending within an order.
pub fn multi_indices(dim: usize, max_order: usize) -> Vec<MultiIndex> {
    fn fill(prefix: &mut Vec<usize>, dim: usize, remaining: usize, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == dim {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k);
            fill(prefix, dim, remaining - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for order in 0..=max_order {
        fill(&mut Vec::with_capacity(dim), dim, order, &mut out);
    }
    out
}

/// `∂^α f`, composed axis by axis in ascending axis order.
pub fn multi_index_derivative<T: PeriodicField + Sync>(
    f: &T,
    alpha: &MultiIndex,
    max_order: usize,
    stencil_order: usize,
) -> Result<T> {
    let dim = f.spatial().dim();
    if alpha.0.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "multi-index of length {} on a {dim}-dimensional grid",
            alpha.0.len()
        )));
    }
    if alpha.order() > max_order {
        return Err(Error::MultiIndexTooLarge {
            order: alpha.order(),
            max: max_order,
        });
    }
    let mut out = f.clone();
    for (axis, &k) in alpha.0.iter().enumerate() {
        for _ in 0..k {
            out = spatial_derivative(&out, axis, stencil_order)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::discretization::{MacroField, SpatialGrid};

    fn sine_field(cells: usize) -> MacroField {
        let g = Arc::new(SpatialGrid::uniform(1, cells).unwrap());
        MacroField::from_fn(g, |x| x[0].sin())
    }

    fn max_err(f: &MacroField, exact: impl Fn(f64) -> f64) -> f64 {
        let g = f.spatial();
        (0..g.len())
            .map(|c| (f.data()[c] - exact(g.center(c)[0])).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = Arc::new(SpatialGrid::new(&[8, 6], &[1.0, 2.0]).unwrap());
        let f = MacroField::from_fn(g, |_| 3.5);
        for axis in 0..2 {
            for order in [2, 4] {
                let d = spatial_derivative(&f, axis, order).unwrap();
                assert!(d.data().iter().all(|&x| x.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn sine_converges_at_stencil_order() {
        for (order, expected) in [(2usize, 2.0), (4, 4.0)] {
            let e1 = max_err(
                &spatial_derivative(&sine_field(32), 0, order).unwrap(),
                f64::cos,
            );
            let e2 = max_err(
                &spatial_derivative(&sine_field(64), 0, order).unwrap(),
                f64::cos,
            );
            let rate = (e1 / e2).log2();
            assert!((rate - expected).abs() < 0.1, "order {order}: rate {rate}");
        }
        // Second-order truncation constant: h²/6.
        let h = 2.0 * PI / 64.0;
        let e = max_err(
            &spatial_derivative(&sine_field(64), 0, 2).unwrap(),
            f64::cos,
        );
        assert!(e <= h * h / 6.0 * 1.01);
    }

    #[test]
    fn rejects_bad_axis_and_order() {
        let f = sine_field(8);
        assert!(matches!(
            spatial_derivative(&f, 1, 2),
            Err(Error::InvalidAxis { .. })
        ));
        assert!(matches!(
            spatial_derivative(&f, 0, 3),
            Err(Error::InvalidStencilOrder(3))
        ));
        let alpha = MultiIndex(vec![3]);
        assert!(matches!(
            multi_index_derivative(&f, &alpha, 2, 2),
            Err(Error::MultiIndexTooLarge { .. })
        ));
    }

    #[test]
    fn multi_index_enumeration() {
        let idx = multi_indices(2, 2);
        let raw: Vec<Vec<usize>> = idx.into_iter().map(|m| m.0).collect();
        assert_eq!(
            raw,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        assert_eq!(multi_indices(1, 3).len(), 4);
        assert_eq!(multi_indices(3, 2).len(), 10);
    }

    #[test]
    fn zero_multi_index_is_identity_and_double_is_repeat() {
        let f = sine_field(16);
        let id = multi_index_derivative(&f, &MultiIndex(vec![0]), 2, 2).unwrap();
        assert_eq!(id, f);
        let twice = multi_index_derivative(&f, &MultiIndex(vec![2]), 2, 2).unwrap();
        let manual = spatial_derivative(&spatial_derivative(&f, 0, 2).unwrap(), 0, 2).unwrap();
        assert_eq!(twice, manual);
    }

    #[test]
    fn mixed_derivatives_commute() {
        let g = Arc::new(SpatialGrid::new(&[24, 20], &[2.0 * PI, 2.0 * PI]).unwrap());
        let f = MacroField::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin() * (x[1]).cos().exp());
        let xy = spatial_derivative(&spatial_derivative(&f, 0, 4).unwrap(), 1, 4).unwrap();
        let yx = spatial_derivative(&spatial_derivative(&f, 1, 4).unwrap(), 0, 4).unwrap();
        let diff = xy
            .data()
            .iter()
            .zip(yx.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn full_period_shift_is_bitwise_identity() {
        let f = sine_field(20);
        let g = f.spatial().clone();
        let shifted: Vec<f64> = (0..g.len())
            .map(|c| f.data()[g.neighbor(c, 0, g.cells()[0] as isize)])
            .collect();
        let shifted = MacroField::from_data(Arc::new(g), 1, shifted).unwrap();
        assert_eq!(
            spatial_derivative(&shifted, 0, 4).unwrap().data(),
            spatial_derivative(&f, 0, 4).unwrap().data()
        );
    }

    proptest! {
        #[test]
        fn derivative_is_linear_and_sums_to_zero(
            a in proptest::collection::vec(-1.0f64..1.0, 12),
            b in proptest::collection::vec(-1.0f64..1.0, 12),
            order in prop_oneof![Just(2usize), Just(4usize)],
        ) {
            let g = Arc::new(SpatialGrid::uniform(1, 12).unwrap());
            let fa = MacroField::from_data(g.clone(), 1, a.clone()).unwrap();
            let fb = MacroField::from_data(g.clone(), 1, b.clone()).unwrap();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let fs = MacroField::from_data(g, 1, sum).unwrap();
            let da = spatial_derivative(&fa, 0, order).unwrap();
            let db = spatial_derivative(&fb, 0, order).unwrap();
            let ds = spatial_derivative(&fs, 0, order).unwrap();
            for i in 0..12 {
                prop_assert!((ds.data()[i] - da.data()[i] - db.data()[i]).abs() < 1e-13);
            }
            // Summation by parts on the torus.
            prop_assert!(da.integral(0).abs() <= 1e-12);
        }
    }
}
