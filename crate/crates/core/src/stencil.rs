//! Fourth-order centered finite-difference kernels.
//!
//! Coefficients are small integers over a common divisor, accumulated left to
//! right, so constant fields are annihilated exactly in floating point.

use crate::grid::ChartGrid;
use crate::linalg::MAX_DIM;

/// First derivative, offsets -2..=2, to be divided by 12 h.
pub const D1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
/// Second derivative, offsets -2..=2, to be divided by 12 h^2.
pub const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

/// Half-width of the centered stencils above.
pub const STENCIL_REACH: usize = 2;

#[inline]
pub fn shift_iv(grid: &ChartGrid, iv: &[usize; MAX_DIM], axis: usize, off: isize) -> [usize; MAX_DIM] {
    let n = grid.len[axis] as isize;
    let mut i = iv[axis] as isize + off;
    if grid.periodic {
        i = i.rem_euclid(n);
    }
    debug_assert!(i >= 0 && i < n, "stencil leaves the chart box");
    let mut out = *iv;
    out[axis] = i as usize;
    out
}

/// d/dx_axis at a node, from flat-indexed samples.
#[inline]
pub fn d1(grid: &ChartGrid, iv: &[usize; MAX_DIM], axis: usize, get: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for (k, c) in D1.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        acc += c * get(grid.shifted_flat(iv, axis, k as isize - 2));
    }
    acc / (12.0 * grid.h)
}

/// d^2/dx_axis^2 at a node.
#[inline]
pub fn d2(grid: &ChartGrid, iv: &[usize; MAX_DIM], axis: usize, get: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for (k, c) in D2.iter().enumerate() {
        acc += c * get(grid.shifted_flat(iv, axis, k as isize - 2));
    }
    acc / (12.0 * grid.h * grid.h)
}

/// Composed second partial d^2/(dx_a dx_b): the 1-d first-derivative stencil
/// applied twice, axis b innermost. Allowed for a == b, where it differs from
/// the compact [`D2`] stencil by another fourth-order term but keeps repeated
/// differentiation exactly symmetric under axis-order swaps, which the
/// derivative-commutation checks rely on.
#[inline]
pub fn d1d1(
    grid: &ChartGrid,
    iv: &[usize; MAX_DIM],
    a: usize,
    b: usize,
    get: impl Fn(usize) -> f64,
) -> f64 {
    let mut acc = 0.0;
    for (p, cp) in D1.iter().enumerate() {
        if *cp == 0.0 {
            continue;
        }
        let iva = shift_iv(grid, iv, a, p as isize - 2);
        let mut inner = 0.0;
        for (q, cq) in D1.iter().enumerate() {
            if *cq == 0.0 {
                continue;
            }
            inner += cq * get(grid.shifted_flat(&iva, b, q as isize - 2));
        }
        acc += cp * inner;
    }
    acc / (144.0 * grid.h * grid.h)
}

/// Raw second partial along any axis pair, using the compact diagonal
/// stencil for a == b. Reach stays 2 per axis, which the evolution kernels
/// near a bounded-chart rim require.
#[inline]
pub fn raw_second(
    grid: &ChartGrid,
    iv: &[usize; MAX_DIM],
    a: usize,
    b: usize,
    get: impl Fn(usize) -> f64 + Copy,
) -> f64 {
    if a == b {
        d2(grid, iv, a, get)
    } else {
        d1d1(grid, iv, a, b, get)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_line(len: usize) -> ChartGrid {
        ChartGrid {
            chart_id: 0,
            dim: 1,
            len: [len, 1, 1],
            h: 2.0 * std::f64::consts::PI / len as f64,
            origin: [0.0, 0.0, 0.0],
            periodic: true,
            active_radius: f64::INFINITY,
            halo_width: 4,
        }
    }

    #[test]
    fn constants_are_annihilated_exactly() {
        let g = periodic_line(32);
        let get = |_: usize| 7.25;
        let iv = [5usize, 0, 0];
        assert_eq!(d1(&g, &iv, 0, get), 0.0);
        assert_eq!(d2(&g, &iv, 0, get), 0.0);
    }

    #[test]
    fn sine_derivatives_are_fourth_order() {
        let mut errs = Vec::new();
        for &len in &[32usize, 64] {
            let g = periodic_line(len);
            let u: Vec<f64> = (0..len).map(|i| (g.coord(0, i)).sin()).collect();
            let get = |f: usize| u[f];
            let mut worst = 0.0f64;
            for i in 0..len {
                let iv = [i, 0, 0];
                let x = g.coord(0, i);
                worst = worst.max((d1(&g, &iv, 0, get) - x.cos()).abs());
                worst = worst.max((d2(&g, &iv, 0, get) + x.sin()).abs());
            }
            errs.push(worst);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.7, "measured order {order}");
    }

    #[test]
    fn mixed_partial_matches_product_field() {
        // u = sin(x) sin(y) on a periodic square: u_xy = cos(x) cos(y).
        let len = 48;
        let h = 2.0 * std::f64::consts::PI / len as f64;
        let g = ChartGrid {
            chart_id: 0,
            dim: 2,
            len: [len, len, 1],
            h,
            origin: [0.0, 0.0, 0.0],
            periodic: true,
            active_radius: f64::INFINITY,
            halo_width: 4,
        };
        let u: Vec<f64> = (0..len * len)
            .map(|f| {
                let i = f / len;
                let j = f % len;
                (g.coord(0, i)).sin() * (g.coord(1, j)).sin()
            })
            .collect();
        let get = |f: usize| u[f];
        let mut worst = 0.0f64;
        g.for_each_interior(0, |_, iv| {
            let want = g.coord(0, iv[0]).cos() * g.coord(1, iv[1]).cos();
            worst = worst.max((d1d1(&g, iv, 0, 1, get) - want).abs());
        });
        assert!(worst < 2e-5, "mixed-partial error {worst}");
    }
}
