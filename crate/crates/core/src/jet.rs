//! Staged covariant derivatives of the potential, through fifth order.
//!
//! Every stage differentiates the stored previous stage with the five-point
//! first-derivative stencil and subtracts one Christoffel correction per
//! existing index. The second stage composes that stencil twice even on the
//! diagonal, so the raw part of every stored derivative is a composition of
//! 1-d first-derivative operators: exchanging the order of differentiation
//! then costs only floating-point noise, and the commutation checks below
//! measure curvature against a clean floor instead of against a competing
//! discretization.
//!
//! The price is reach: values are trustworthy only at index margin 2 from a
//! bounded chart edge for order 1, margin 4 for order 2, then 6, 8, 10.
//! Periodic charts wrap and have no margin. Consumers filter nodes through
//! [`margin_ok`].
//!
//! The first two tensor indices are mirrored when stored, so the symmetry
//! u_;ij.. = u_;ji.. is exact in the data; symmetry in later index positions
//! holds only up to curvature, which is what [`commutation_residuals`]
//! measures.

use crate::atlas::{MetricAtlas, ScalarField};
use crate::error::{Error, Result};
use crate::grid::ChartGrid;
use crate::linalg::{Mat, Vec3, MAX_DIM};
use crate::stencil::{d1, d1d1};

pub const MAX_JET_ORDER: usize = 5;

/// Index margin from a bounded chart edge at which a derivative order is
/// valid.
pub fn stage_margin(order: usize) -> usize {
    match order {
        1 => 2,
        2 => 4,
        3 => 6,
        4 => 8,
        5 => 10,
        _ => panic!("derivative order {order} out of range"),
    }
}

/// Whether a node keeps `margin` nodes between itself and every bounded
/// chart edge.
#[inline]
pub fn margin_ok(grid: &ChartGrid, iv: &[usize; MAX_DIM], margin: usize) -> bool {
    grid.periodic
        || (0..grid.dim).all(|a| iv[a] >= margin && iv[a] + margin < grid.len[a])
}

/// Covariant derivative tensors of one scalar field, node-major per chart.
/// Index layout puts the first derivative innermost: `u_;ijk` lives at
/// `(i*n + j)*n + k`, and so on upward.
pub struct CovariantJet {
    pub dim: usize,
    pub max_order: usize,
    grad: Vec<Vec<f64>>,
    hess: Vec<Vec<f64>>,
    third: Vec<Vec<f64>>,
    fourth: Vec<Vec<f64>>,
    fifth: Vec<Vec<f64>>,
}

impl CovariantJet {
    pub fn require(&self, order: usize) -> Result<()> {
        if order > self.max_order {
            return Err(Error::MissingJetOrder {
                need: order,
                have: self.max_order,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn grad(&self, chart: usize, flat: usize) -> &[f64] {
        let n = self.dim;
        &self.grad[chart][flat * n..(flat + 1) * n]
    }

    #[inline]
    pub fn hess(&self, chart: usize, flat: usize) -> &[f64] {
        let n = self.dim * self.dim;
        &self.hess[chart][flat * n..(flat + 1) * n]
    }

    #[inline]
    pub fn third(&self, chart: usize, flat: usize) -> &[f64] {
        assert!(self.max_order >= 3, "third derivatives were not built");
        let n = self.dim * self.dim * self.dim;
        &self.third[chart][flat * n..(flat + 1) * n]
    }

    #[inline]
    pub fn fourth(&self, chart: usize, flat: usize) -> &[f64] {
        assert!(self.max_order >= 4, "fourth derivatives were not built");
        let n = self.dim * self.dim * self.dim * self.dim;
        &self.fourth[chart][flat * n..(flat + 1) * n]
    }

    #[inline]
    pub fn fifth(&self, chart: usize, flat: usize) -> &[f64] {
        assert!(self.max_order >= 5, "fifth derivatives were not built");
        let n = self.dim * self.dim * self.dim * self.dim * self.dim;
        &self.fifth[chart][flat * n..(flat + 1) * n]
    }
}

pub fn covariant_jet(atlas: &MetricAtlas, field: &ScalarField, order: usize) -> Result<CovariantJet> {
    if order == 0 || order > MAX_JET_ORDER {
        return Err(Error::JetOrder(order));
    }
    if !field.halo_clean {
        return Err(Error::StaleHalo);
    }
    let n = atlas.dim;
    let (n2, n3) = (n * n, n * n * n);
    let (n4, n5) = (n3 * n, n3 * n * n);
    let mut jet = CovariantJet {
        dim: n,
        max_order: order,
        grad: Vec::new(),
        hess: Vec::new(),
        third: Vec::new(),
        fourth: Vec::new(),
        fifth: Vec::new(),
    };

    for (c, grid) in atlas.charts.iter().enumerate() {
        let nodes = grid.node_count();
        let u = &field.charts[c];

        let mut grad = vec![0.0; nodes * n];
        grid.for_each_interior(stage_margin(1), |flat, iv| {
            for a in 0..n {
                grad[flat * n + a] = d1(grid, iv, a, |f| u[f]);
            }
        });

        let mut hess = vec![0.0; nodes * n2];
        grid.for_each_interior(stage_margin(2), |flat, iv| {
            for i in 0..n {
                for j in i..n {
                    let mut v = d1d1(grid, iv, i, j, |f| u[f]);
                    for l in 0..n {
                        v -= atlas.christoffel(c, flat, l, i, j) * grad[flat * n + l];
                    }
                    hess[flat * n2 + i * n + j] = v;
                    hess[flat * n2 + j * n + i] = v;
                }
            }
        });

        let mut third = vec![0.0; if order >= 3 { nodes * n3 } else { 0 }];
        if order >= 3 {
            grid.for_each_interior(stage_margin(3), |flat, iv| {
                for i in 0..n {
                    for j in i..n {
                        for k in 0..n {
                            let mut v = d1(grid, iv, k, |f| hess[f * n2 + i * n + j]);
                            for l in 0..n {
                                v -= atlas.christoffel(c, flat, l, k, i)
                                    * hess[flat * n2 + l * n + j];
                                v -= atlas.christoffel(c, flat, l, k, j)
                                    * hess[flat * n2 + i * n + l];
                            }
                            third[flat * n3 + (i * n + j) * n + k] = v;
                            third[flat * n3 + (j * n + i) * n + k] = v;
                        }
                    }
                }
            });
        }

        let mut fourth = vec![0.0; if order >= 4 { nodes * n4 } else { 0 }];
        if order >= 4 {
            grid.for_each_interior(stage_margin(4), |flat, iv| {
                for i in 0..n {
                    for j in i..n {
                        for k in 0..n {
                            for m in 0..n {
                                let mut v =
                                    d1(grid, iv, m, |f| third[f * n3 + (i * n + j) * n + k]);
                                for l in 0..n {
                                    v -= atlas.christoffel(c, flat, l, m, i)
                                        * third[flat * n3 + (l * n + j) * n + k];
                                    v -= atlas.christoffel(c, flat, l, m, j)
                                        * third[flat * n3 + (i * n + l) * n + k];
                                    v -= atlas.christoffel(c, flat, l, m, k)
                                        * third[flat * n3 + (i * n + j) * n + l];
                                }
                                fourth[flat * n4 + ((i * n + j) * n + k) * n + m] = v;
                                fourth[flat * n4 + ((j * n + i) * n + k) * n + m] = v;
                            }
                        }
                    }
                }
            });
        }

        let mut fifth = vec![0.0; if order >= 5 { nodes * n5 } else { 0 }];
        if order >= 5 {
            grid.for_each_interior(stage_margin(5), |flat, iv| {
                for i in 0..n {
                    for j in i..n {
                        for k in 0..n {
                            for m in 0..n {
                                for p in 0..n {
                                    let mut v = d1(grid, iv, p, |f| {
                                        fourth[f * n4 + ((i * n + j) * n + k) * n + m]
                                    });
                                    for l in 0..n {
                                        v -= atlas.christoffel(c, flat, l, p, i)
                                            * fourth[flat * n4 + ((l * n + j) * n + k) * n + m];
                                        v -= atlas.christoffel(c, flat, l, p, j)
                                            * fourth[flat * n4 + ((i * n + l) * n + k) * n + m];
                                        v -= atlas.christoffel(c, flat, l, p, k)
                                            * fourth[flat * n4 + ((i * n + j) * n + l) * n + m];
                                        v -= atlas.christoffel(c, flat, l, p, m)
                                            * fourth[flat * n4 + ((i * n + j) * n + k) * n + l];
                                    }
                                    fifth[flat * n5 + (((i * n + j) * n + k) * n + m) * n + p] = v;
                                    fifth[flat * n5 + (((j * n + i) * n + k) * n + m) * n + p] = v;
                                }
                            }
                        }
                    }
                }
            });
        }

        jet.grad.push(grad);
        jet.hess.push(hess);
        jet.third.push(third);
        jet.fourth.push(fourth);
        jet.fifth.push(fifth);
    }
    Ok(jet)
}

// ---------------------------------------------------------------------------
// Ricci commutation residuals
// ---------------------------------------------------------------------------

/// Max-norm defects of the derivative-swap identities over owned nodes.
///
/// Swapping the two outermost derivatives must cost exactly one curvature
/// contraction per passive index; whatever is left is discretization error
/// plus, if the curvature convention were wrong, twice the curvature term.
/// `curvature_scale` records the largest curvature contraction seen so the
/// caller can tell those two situations apart.
pub struct CommutationReport {
    pub order3: f64,
    pub order4: f64,
    pub order5: Option<f64>,
    pub curvature_scale: f64,
}

pub fn commutation_residuals(
    atlas: &MetricAtlas,
    jet: &CovariantJet,
    include_order5: bool,
) -> Result<CommutationReport> {
    jet.require(if include_order5 { 5 } else { 4 })?;
    let n = atlas.dim;
    let (mut r3, mut r4, mut r5) = (0.0f64, 0.0f64, 0.0f64);
    let mut curvature_scale = 0.0f64;
    let mut visited = 0usize;

    for (c, grid) in atlas.charts.iter().enumerate() {
        for (flat, iv) in atlas.owned_nodes(c) {
            let flat = *flat;
            if margin_ok(grid, iv, stage_margin(3)) {
                visited += 1;
                let g = jet.grad(c, flat);
                let t3 = jet.third(c, flat);
                for p in 0..n {
                    for q in 0..n {
                        for k in (q + 1)..n {
                            let mut corr = 0.0;
                            for l in 0..n {
                                corr += g[l] * atlas.curvature(c, flat, l, p, q, k);
                            }
                            curvature_scale = curvature_scale.max(corr.abs());
                            let r = t3[(p * n + q) * n + k] - t3[(p * n + k) * n + q] - corr;
                            r3 = r3.max(r.abs());
                        }
                    }
                }
            }
            if margin_ok(grid, iv, stage_margin(4)) {
                let h = jet.hess(c, flat);
                let t4 = jet.fourth(c, flat);
                for k in 0..n {
                    for p in 0..n {
                        for q in 0..n {
                            for i in (q + 1)..n {
                                let mut corr = 0.0;
                                for l in 0..n {
                                    corr += h[l * n + p] * atlas.curvature(c, flat, l, k, q, i);
                                    corr += h[k * n + l] * atlas.curvature(c, flat, l, p, q, i);
                                }
                                let r = t4[((k * n + p) * n + q) * n + i]
                                    - t4[((k * n + p) * n + i) * n + q]
                                    - corr;
                                r4 = r4.max(r.abs());
                            }
                        }
                    }
                }
            }
            if include_order5 && margin_ok(grid, iv, stage_margin(5)) {
                let t3 = jet.third(c, flat);
                let t5 = jet.fifth(c, flat);
                for m in 0..n {
                    for k in 0..n {
                        for p in 0..n {
                            for q in 0..n {
                                for i in (q + 1)..n {
                                    let mut corr = 0.0;
                                    for l in 0..n {
                                        corr += t3[(l * n + k) * n + p]
                                            * atlas.curvature(c, flat, l, m, q, i);
                                        corr += t3[(m * n + l) * n + p]
                                            * atlas.curvature(c, flat, l, k, q, i);
                                        corr += t3[(m * n + k) * n + l]
                                            * atlas.curvature(c, flat, l, p, q, i);
                                    }
                                    let r = t5[(((m * n + k) * n + p) * n + q) * n + i]
                                        - t5[(((m * n + k) * n + p) * n + i) * n + q]
                                        - corr;
                                    r5 = r5.max(r.abs());
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if visited == 0 {
        return Err(Error::Resolution {
            kind: "commutation interior",
            got: atlas.resolution,
            min: 2 * stage_margin(3) + 2,
        });
    }
    Ok(CommutationReport {
        order3: r3,
        order4: r4,
        order5: include_order5.then_some(r5),
        curvature_scale,
    })
}

// ---------------------------------------------------------------------------
// One-off derivatives of arbitrary per-node scalars
// ---------------------------------------------------------------------------

/// Gradient of an arbitrary per-node scalar (covariant = partial for
/// scalars). The caller guarantees `values` within stencil reach of `iv`.
pub fn scalar_gradient(grid: &ChartGrid, values: &[f64], iv: &[usize; MAX_DIM]) -> Vec3 {
    let mut g = [0.0; MAX_DIM];
    for a in 0..grid.dim {
        g[a] = d1(grid, iv, a, |f| values[f]);
    }
    g
}

/// Covariant Hessian of an arbitrary per-node scalar at one node, with the
/// same composed stencils as the jet stages (reach 4 along each axis).
pub fn scalar_covariant_hessian(
    atlas: &MetricAtlas,
    chart: usize,
    values: &[f64],
    iv: &[usize; MAX_DIM],
    flat: usize,
) -> Mat {
    let grid = &atlas.charts[chart];
    let n = atlas.dim;
    let g = scalar_gradient(grid, values, iv);
    let mut out = [0.0; 9];
    for i in 0..n {
        for j in i..n {
            let mut v = d1d1(grid, iv, i, j, |f| values[f]);
            for l in 0..n {
                v -= atlas.christoffel(chart, flat, l, i, j) * g[l];
            }
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{build_sphere, build_torus};

    /// sin(x) cos(2y) and its partials; on the flat torus covariant
    /// derivatives are plain partials.
    #[test]
    fn torus_jet_matches_closed_form_partials() {
        let atlas = build_torus(2, 64).unwrap();
        let field = atlas.sample(|_, x| x[0].sin() * (2.0 * x[1]).cos());
        let jet = covariant_jet(&atlas, &field, 5).unwrap();
        let grid = &atlas.charts[0];
        let n = 2;
        let mut worst = [0.0f64; 5];
        grid.for_each_interior(0, |flat, iv| {
            let x = grid.coords(iv);
            let (sx, cx) = x[0].sin_cos();
            let (s2y, c2y) = (2.0 * x[1]).sin_cos();
            let g = jet.grad(0, flat);
            worst[0] = worst[0]
                .max((g[0] - cx * c2y).abs())
                .max((g[1] + 2.0 * sx * s2y).abs());
            let h = jet.hess(0, flat);
            worst[1] = worst[1]
                .max((h[0] + sx * c2y).abs())
                .max((h[1] + 2.0 * cx * s2y).abs())
                .max((h[3] + 4.0 * sx * c2y).abs());
            // u_xyy, u_xyyx, u_xyyxy picked to exercise every stage.
            let t3 = jet.third(0, flat);
            worst[2] = worst[2].max((t3[(0 * n + 1) * n + 1] + 4.0 * cx * c2y).abs());
            let t4 = jet.fourth(0, flat);
            worst[3] = worst[3].max((t4[((0 * n + 1) * n + 1) * n + 0] - 4.0 * sx * c2y).abs());
            let t5 = jet.fifth(0, flat);
            worst[4] =
                worst[4].max((t5[(((0 * n + 1) * n + 1) * n + 0) * n + 1] + 8.0 * sx * s2y).abs());
        });
        assert!(worst[0] < 2e-4, "grad error {}", worst[0]);
        assert!(worst[1] < 5e-4, "hess error {}", worst[1]);
        assert!(worst[2] < 2e-3, "third error {}", worst[2]);
        assert!(worst[3] < 5e-3, "fourth error {}", worst[3]);
        assert!(worst[4] < 2e-2, "fifth error {}", worst[4]);
    }

    /// The first-harmonic potential has covariant Hessian -kappa u sigma on
    /// the sphere; both charts and a non-unit curvature are exercised, and
    /// halving h must shrink the defect at fourth order.
    #[test]
    fn sphere_hessian_reproduces_first_harmonic_identity() {
        let kappa = 1.3;
        let height = |chart: usize, x: &[f64; MAX_DIM]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let w = (1.0 - r2) / (1.0 + r2);
            if chart == 0 {
                w
            } else {
                -w
            }
        };
        let mut defects = Vec::new();
        for &res in &[48usize, 96] {
            let atlas = build_sphere(res, kappa).unwrap();
            let field = atlas.sample(height);
            let jet = covariant_jet(&atlas, &field, 2).unwrap();
            let mut worst = 0.0f64;
            for c in 0..2 {
                let grid = &atlas.charts[c];
                for (flat, iv) in atlas.owned_nodes(c) {
                    assert!(margin_ok(grid, iv, stage_margin(2)));
                    let u = field.charts[c][*flat];
                    let h = jet.hess(c, *flat);
                    let sig = atlas.sigma(c, *flat);
                    for idx in 0..4 {
                        worst = worst.max((h[idx] + kappa * u * sig[idx]).abs());
                    }
                }
            }
            defects.push(worst);
        }
        assert!(defects[0] < 5e-3, "harmonic defect {}", defects[0]);
        let ratio = defects[0] / defects[1];
        assert!(ratio > 11.0, "harmonic defect refinement ratio {ratio}");
    }

    /// With zero curvature and wraparound stencils, swapped derivative
    /// orders differ only by floating-point noise, far below 1e-10.
    #[test]
    fn torus_commutation_sits_at_rounding_floor() {
        for (dim, res) in [(2usize, 24usize), (3, 16)] {
            let atlas = build_torus(dim, res).unwrap();
            let field = atlas.sample(|_, x| {
                let mut v = x[0].sin() * x[1].cos();
                if dim == 3 {
                    v += 0.5 * (x[1] + 2.0 * x[2]).sin();
                }
                v + 0.3 * (2.0 * x[0]).cos()
            });
            let jet = covariant_jet(&atlas, &field, 5).unwrap();
            let report = commutation_residuals(&atlas, &jet, true).unwrap();
            assert!(report.order3 < 1e-10, "order-3 floor {}", report.order3);
            assert!(report.order4 < 1e-10, "order-4 floor {}", report.order4);
            let r5 = report.order5.unwrap();
            assert!(r5 < 1e-10, "order-5 floor {r5}");
            assert_eq!(report.curvature_scale, 0.0);
        }
    }

    /// On the sphere the swap defect must converge to zero at fourth order
    /// AND sit far below the curvature contraction it is balanced against --
    /// a wrong curvature sign would leave twice the contraction behind.
    #[test]
    fn sphere_commutation_converges_and_confirms_curvature_sign() {
        let f = |chart: usize, x: &[f64; MAX_DIM]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let q = 1.0 + r2;
            let m1 = 2.0 * x[0] / q;
            let m2 = 2.0 * x[1] / q;
            let m3 = if chart == 0 { (1.0 - r2) / q } else { (r2 - 1.0) / q };
            m1 * m2 + 0.4 * m3 + 0.2 * m1
        };
        let mut reports = Vec::new();
        for &res in &[48usize, 96] {
            let atlas = build_sphere(res, 1.0).unwrap();
            let field = atlas.sample(f);
            let jet = covariant_jet(&atlas, &field, 5).unwrap();
            reports.push(commutation_residuals(&atlas, &jet, true).unwrap());
        }
        let fourth_order = 2f64.powf(3.5);
        assert!(
            reports[0].order3 / reports[1].order3 > fourth_order,
            "order-3 ratio {}",
            reports[0].order3 / reports[1].order3
        );
        assert!(
            reports[0].order4 / reports[1].order4 > fourth_order,
            "order-4 ratio {}",
            reports[0].order4 / reports[1].order4
        );
        let r5 = [reports[0].order5.unwrap(), reports[1].order5.unwrap()];
        assert!(r5[0] / r5[1] > 8.0, "order-5 ratio {}", r5[0] / r5[1]);
        assert!(
            reports[0].order3 < 0.02 * reports[0].curvature_scale,
            "defect {} vs curvature scale {}",
            reports[0].order3,
            reports[0].curvature_scale
        );
    }

    #[test]
    fn one_off_hessian_agrees_with_jet_hessian() {
        let atlas = build_sphere(48, 1.0).unwrap();
        let field = atlas.sample(|chart, x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let q = 1.0 + r2;
            let sign = if chart == 0 { 1.0 } else { -1.0 };
            (2.0 * x[0] / q) * (2.0 * x[1] / q) + sign * 0.3 * (1.0 - r2) / q
        });
        let jet = covariant_jet(&atlas, &field, 2).unwrap();
        let (flat, iv) = atlas.owned_nodes(0)[17];
        let one_off = scalar_covariant_hessian(&atlas, 0, &field.charts[0], &iv, flat);
        let h = jet.hess(0, flat);
        for idx in 0..4 {
            assert!((one_off[idx] - h[idx]).abs() < 1e-14);
        }
    }

    #[test]
    fn jet_rejects_bad_inputs() {
        let atlas = build_torus(2, 16).unwrap();
        let mut field = atlas.sample(|_, x| x[0].cos());
        assert!(matches!(
            covariant_jet(&atlas, &field, 0),
            Err(Error::JetOrder(0))
        ));
        assert!(matches!(
            covariant_jet(&atlas, &field, 6),
            Err(Error::JetOrder(6))
        ));
        field.halo_clean = false;
        assert!(matches!(
            covariant_jet(&atlas, &field, 2),
            Err(Error::StaleHalo)
        ));
        field.halo_clean = true;
        let jet = covariant_jet(&atlas, &field, 2).unwrap();
        assert!(matches!(
            jet.require(3),
            Err(Error::MissingJetOrder { need: 3, have: 2 })
        ));
        assert!(jet.require(2).is_ok());
    }
}
