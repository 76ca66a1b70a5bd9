//! Uniform chart grids: node layout, coordinates, and stencil-safe iteration.

use crate::linalg::MAX_DIM;

/// One uniform coordinate patch. Nodes sit at `origin + index * h` along each
/// axis with endpoints included; unused axes have length 1.
#[derive(Clone, Debug)]
pub struct ChartGrid {
    pub chart_id: usize,
    pub dim: usize,
    pub len: [usize; MAX_DIM],
    pub h: f64,
    pub origin: [f64; MAX_DIM],
    /// Periodic charts wrap stencils around; bounded charts stop at the box.
    pub periodic: bool,
    /// Nodes with |x| <= active_radius evolve under the flow. Everything
    /// outside is halo rim, filled by inter-chart transfer. Periodic charts
    /// are fully active (radius = infinity).
    pub active_radius: f64,
    /// Rim thickness in nodes on a bounded chart; bookkeeping only on
    /// periodic charts where wraparound supplies unlimited stencil depth.
    pub halo_width: usize,
}

impl ChartGrid {
    pub fn node_count(&self) -> usize {
        self.len[..self.dim].iter().product()
    }

    /// Row-major strides; unused axes get stride 0.
    pub fn strides(&self) -> [usize; MAX_DIM] {
        let mut s = [0usize; MAX_DIM];
        let mut acc = 1;
        for axis in (0..self.dim).rev() {
            s[axis] = acc;
            acc *= self.len[axis];
        }
        s
    }

    #[inline]
    pub fn flat(&self, iv: &[usize; MAX_DIM]) -> usize {
        let s = self.strides();
        let mut f = 0;
        for axis in 0..self.dim {
            f += iv[axis] * s[axis];
        }
        f
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.h
    }

    #[inline]
    pub fn coords(&self, iv: &[usize; MAX_DIM]) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = self.coord(axis, iv[axis]);
        }
        x
    }

    #[inline]
    pub fn radius2(&self, iv: &[usize; MAX_DIM]) -> f64 {
        let x = self.coords(iv);
        x[..self.dim].iter().map(|v| v * v).sum()
    }

    #[inline]
    pub fn is_active(&self, iv: &[usize; MAX_DIM]) -> bool {
        self.periodic || self.radius2(iv) <= self.active_radius * self.active_radius
    }

    /// Flat index of the node shifted `off` steps along `axis`, wrapping on
    /// periodic charts. Bounded callers must stay inside the box.
    #[inline]
    pub fn shifted_flat(&self, iv: &[usize; MAX_DIM], axis: usize, off: isize) -> usize {
        let n = self.len[axis] as isize;
        let mut i = iv[axis] as isize + off;
        if self.periodic {
            i = i.rem_euclid(n);
        }
        debug_assert!(i >= 0 && i < n, "stencil leaves the chart box");
        let s = self.strides();
        let base = self.flat(iv);
        base - iv[axis] * s[axis] + i as usize * s[axis]
    }

    /// Visit every node whose stencil of half-width `margin` stays in the
    /// box. Periodic charts ignore the margin.
    pub fn for_each_interior(&self, margin: usize, mut f: impl FnMut(usize, &[usize; MAX_DIM])) {
        let m = if self.periodic { 0 } else { margin };
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [1usize; MAX_DIM];
        for axis in 0..self.dim {
            if self.len[axis] < 2 * m + 1 {
                return;
            }
            lo[axis] = m;
            hi[axis] = self.len[axis] - m;
        }
        let mut iv = lo;
        loop {
            f(self.flat(&iv), &iv);
            // Odometer increment over the interior box.
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                iv[axis] += 1;
                if iv[axis] < hi[axis] {
                    break;
                }
                iv[axis] = lo[axis];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(len: usize, periodic: bool) -> ChartGrid {
        ChartGrid {
            chart_id: 0,
            dim: 2,
            len: [len, len, 1],
            h: 0.5,
            origin: [-1.0, -1.0, 0.0],
            periodic,
            active_radius: f64::INFINITY,
            halo_width: 0,
        }
    }

    #[test]
    fn flat_and_coords_round_trip() {
        let g = grid2(5, false);
        let iv = [2usize, 3, 0];
        assert_eq!(g.flat(&iv), 2 * 5 + 3);
        let x = g.coords(&iv);
        assert_eq!(x[0], 0.0);
        assert_eq!(x[1], 0.5);
    }

    #[test]
    fn periodic_shift_wraps() {
        let g = grid2(5, true);
        let iv = [0usize, 4, 0];
        assert_eq!(g.shifted_flat(&iv, 0, -1), 4 * 5 + 4);
        assert_eq!(g.shifted_flat(&iv, 1, 2), 0 * 5 + 1);
    }

    #[test]
    fn interior_iteration_respects_margin() {
        let g = grid2(6, false);
        let mut count = 0;
        g.for_each_interior(2, |_, iv| {
            assert!(iv[0] >= 2 && iv[0] < 4);
            assert!(iv[1] >= 2 && iv[1] < 4);
            count += 1;
        });
        assert_eq!(count, 4);

        let gp = grid2(6, true);
        let mut count = 0;
        gp.for_each_interior(2, |_, _| count += 1);
        assert_eq!(count, 36);
    }
}
