//! Pointwise Lagrangian-graph geometry and its global monitor reductions.
//!
//! At a node the pair (Hess u, sigma) has real generalized eigenvalues
//! lambda_i; the phase angle is theta = sum_i arctan(lambda_i), the graph
//! metric is G = sigma + H sigma^-1 H, and chi = det G / det sigma =
//! prod_i (1 + lambda_i^2) measures how far the graph tilts. All global
//! reductions run over owned nodes so overlap regions are counted once, and
//! derivative-bearing quantities additionally require the index margin of
//! their jet order.

use crate::atlas::{MetricAtlas, ScalarField};
use crate::error::{Error, Result};
use crate::jet::{
    covariant_jet, margin_ok, scalar_covariant_hessian, stage_margin, CovariantJet,
};
use crate::linalg::{
    complex_det, det, generalized_eigenpairs, generalized_eigenvalues, Mat, Vec3, MAX_DIM,
};
use crate::stencil::{d1, raw_second};

/// Eigenvalues at or beyond tan(pi/2 - this margin) leave the branch on
/// which the angle sum is well defined.
pub const BRANCH_MARGIN: f64 = 0.01;

pub fn branch_guard_limit() -> f64 {
    (std::f64::consts::FRAC_PI_2 - BRANCH_MARGIN).tan()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleMethod {
    /// Sum of arctangents of the generalized eigenvalues; the evolution uses
    /// this continuous lift.
    Eigen,
    /// Principal argument of det(sigma + i Hess); agrees with `Eigen` modulo
    /// 2 pi and shares no code with it.
    ComplexDet,
}

fn as_mat(s: &[f64]) -> Mat {
    let mut m = [0.0; 9];
    m[..s.len()].copy_from_slice(s);
    m
}

/// Graph metric G = sigma + H sigma^-1 H.
pub fn induced_metric(sigma: &[f64], sigma_inv: &[f64], hess: &[f64], n: usize) -> Mat {
    let mut g = [0.0; 9];
    for i in 0..n {
        for j in i..n {
            let mut v = sigma[i * n + j];
            for k in 0..n {
                for l in 0..n {
                    v += hess[i * n + k] * sigma_inv[k * n + l] * hess[l * n + j];
                }
            }
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}

/// Volume-ratio monitor chi = det G / det sigma >= 1.
pub fn chi_ratio(sigma: &[f64], sigma_inv: &[f64], hess: &[f64], n: usize) -> f64 {
    let g = induced_metric(sigma, sigma_inv, hess, n);
    det(&g, n) / det(&as_mat(sigma), n)
}

/// Gradient energy vartheta = sigma^ij u_;i u_;j.
pub fn vartheta_energy(sigma_inv: &[f64], grad: &[f64], n: usize) -> f64 {
    let mut v = 0.0;
    for i in 0..n {
        for j in 0..n {
            v += sigma_inv[i * n + j] * grad[i] * grad[j];
        }
    }
    v
}

pub fn lagrangian_angle(sigma: &[f64], hess: &[f64], n: usize, method: AngleMethod) -> Result<f64> {
    match method {
        AngleMethod::Eigen => {
            let lambda = generalized_eigenvalues(&as_mat(hess), &as_mat(sigma), n)?;
            let guard = branch_guard_limit();
            let mut theta = 0.0;
            for &l in &lambda[..n] {
                if l.abs() >= guard {
                    return Err(Error::BranchGuard(l));
                }
                theta += l.atan();
            }
            Ok(theta)
        }
        AngleMethod::ComplexDet => {
            let z = complex_det(&as_mat(sigma), &as_mat(hess), n);
            let theta = z.arg();
            if !theta.is_finite() || z.norm_sqr() == 0.0 {
                return Err(Error::NonFinite("angle argument"));
            }
            Ok(theta)
        }
    }
}

// ---------------------------------------------------------------------------
// Pointwise evolution kernel
// ---------------------------------------------------------------------------

/// Gradient and Hessian at one node from the compact stencils (reach 2), the
/// narrowest set that works at every active node next to a chart rim. The
/// evolution right-hand side and the per-step monitors use this; the wider
/// composed-stencil jets serve the diagnostics.
pub struct PointJet2 {
    pub grad: Vec3,
    pub hess: Mat,
}

pub fn pointwise_jet2(
    atlas: &MetricAtlas,
    chart: usize,
    values: &[f64],
    iv: &[usize; MAX_DIM],
    flat: usize,
) -> PointJet2 {
    let grid = &atlas.charts[chart];
    let n = atlas.dim;
    let mut grad = [0.0; MAX_DIM];
    for a in 0..n {
        grad[a] = d1(grid, iv, a, |f| values[f]);
    }
    let mut hess = [0.0; 9];
    for i in 0..n {
        for j in i..n {
            let mut v = raw_second(grid, iv, i, j, |f| values[f]);
            for l in 0..n {
                v -= atlas.christoffel(chart, flat, l, i, j) * grad[l];
            }
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    PointJet2 { grad, hess }
}

/// The angle at one node straight from the potential; this is the evolution
/// right-hand side.
pub fn pointwise_angle(
    atlas: &MetricAtlas,
    chart: usize,
    values: &[f64],
    iv: &[usize; MAX_DIM],
    flat: usize,
) -> Result<f64> {
    let pj = pointwise_jet2(atlas, chart, values, iv, flat);
    lagrangian_angle(atlas.sigma(chart, flat), &pj.hess[..atlas.dim * atlas.dim], atlas.dim, AngleMethod::Eigen)
}

// ---------------------------------------------------------------------------
// Global reductions
// ---------------------------------------------------------------------------

/// Cheap per-step maxima from the compact kernel.
#[derive(Clone, Copy, Debug)]
pub struct QuickSummary {
    /// Mean-free sup of the potential: u and u + const describe the same
    /// graph, so convergence to the zero section is measured after removing
    /// the volume-weighted mean.
    pub sup_u: f64,
    pub max_chi: f64,
    pub max_vartheta: f64,
}

fn owned_weighted_mean(atlas: &MetricAtlas, field: &ScalarField) -> f64 {
    let (mut wsum, mut usum) = (0.0, 0.0);
    for c in 0..atlas.charts.len() {
        for (flat, _) in atlas.owned_nodes(c) {
            let w = atlas.sqrt_det_sigma(c, *flat);
            wsum += w;
            usum += w * field.charts[c][*flat];
        }
    }
    usum / wsum
}

pub fn quick_summary(atlas: &MetricAtlas, field: &ScalarField) -> QuickSummary {
    let n = atlas.dim;
    let mean = owned_weighted_mean(atlas, field);
    let mut s = QuickSummary {
        sup_u: 0.0,
        max_chi: f64::NEG_INFINITY,
        max_vartheta: f64::NEG_INFINITY,
    };
    for c in 0..atlas.charts.len() {
        for (flat, iv) in atlas.owned_nodes(c) {
            let flat = *flat;
            s.sup_u = s.sup_u.max((field.charts[c][flat] - mean).abs());
            let pj = pointwise_jet2(atlas, c, &field.charts[c], iv, flat);
            s.max_chi = s.max_chi.max(chi_ratio(
                atlas.sigma(c, flat),
                atlas.sigma_inv(c, flat),
                &pj.hess[..n * n],
                n,
            ));
            s.max_vartheta = s
                .max_vartheta
                .max(vartheta_energy(atlas.sigma_inv(c, flat), &pj.grad[..n], n));
        }
    }
    s
}

/// Replace index `pos` of an order-`order` tensor by its g-inverse raise.
fn raise_index(ginv: &Mat, n: usize, order: usize, pos: usize, src: &[f64], dst: &mut [f64]) {
    let count = n.pow(order as u32);
    let stride = n.pow((order - 1 - pos) as u32);
    for f in 0..count {
        let digit = (f / stride) % n;
        let base = f - digit * stride;
        let mut acc = 0.0;
        for m in 0..n {
            acc += ginv[digit * n + m] * src[base + m * stride];
        }
        dst[f] = acc;
    }
}

/// Full contraction |T|^2_G of an order-`order` covariant tensor with every
/// index raised by ginv.
fn full_contraction(ginv: &Mat, n: usize, order: usize, t: &[f64]) -> f64 {
    let count = n.pow(order as u32);
    let mut a = [0.0; 243];
    let mut b = [0.0; 243];
    a[..count].copy_from_slice(t);
    for pos in 0..order {
        raise_index(ginv, n, order, pos, &a[..count], &mut b[..count]);
        a[..count].copy_from_slice(&b[..count]);
    }
    let mut acc = 0.0;
    for f in 0..count {
        acc += a[f] * t[f];
    }
    acc
}

/// Monitor maxima needing the full jet: third- and fourth-derivative energies
/// and the angle range.
pub struct GeometrySummary {
    pub sup_u: f64,
    pub max_chi: f64,
    pub max_vartheta: f64,
    pub max_theta2: f64,
    pub max_upsilon2: f64,
    pub max_chi_p_theta2: f64,
    pub min_theta: f64,
    pub max_theta: f64,
}

pub fn geometry_summary(
    atlas: &MetricAtlas,
    field: &ScalarField,
    jet: &CovariantJet,
    p_exponent: f64,
) -> Result<GeometrySummary> {
    jet.require(4)?;
    let n = atlas.dim;
    let mean = owned_weighted_mean(atlas, field);
    let mut s = GeometrySummary {
        sup_u: 0.0,
        max_chi: f64::NEG_INFINITY,
        max_vartheta: f64::NEG_INFINITY,
        max_theta2: f64::NEG_INFINITY,
        max_upsilon2: f64::NEG_INFINITY,
        max_chi_p_theta2: f64::NEG_INFINITY,
        min_theta: f64::INFINITY,
        max_theta: f64::NEG_INFINITY,
    };
    for c in 0..atlas.charts.len() {
        let grid = &atlas.charts[c];
        for (flat, iv) in atlas.owned_nodes(c) {
            let flat = *flat;
            s.sup_u = s.sup_u.max((field.charts[c][flat] - mean).abs());
            if !margin_ok(grid, iv, stage_margin(2)) {
                continue;
            }
            let sigma = atlas.sigma(c, flat);
            let sigma_inv = atlas.sigma_inv(c, flat);
            let hess = jet.hess(c, flat);
            let g = induced_metric(sigma, sigma_inv, hess, n);
            let chi = det(&g, n) / det(&as_mat(sigma), n);
            let ginv = crate::linalg::invert_spd(&g, n)?;
            s.max_chi = s.max_chi.max(chi);
            s.max_vartheta = s
                .max_vartheta
                .max(vartheta_energy(sigma_inv, jet.grad(c, flat), n));
            let theta = lagrangian_angle(sigma, hess, n, AngleMethod::Eigen)?;
            s.min_theta = s.min_theta.min(theta);
            s.max_theta = s.max_theta.max(theta);
            if margin_ok(grid, iv, stage_margin(3)) {
                let theta2 = full_contraction(&ginv, n, 3, jet.third(c, flat));
                s.max_theta2 = s.max_theta2.max(theta2);
                s.max_chi_p_theta2 = s.max_chi_p_theta2.max(chi.powf(p_exponent) * theta2);
            }
            if margin_ok(grid, iv, stage_margin(4)) {
                let upsilon2 = full_contraction(&ginv, n, 4, jet.fourth(c, flat));
                s.max_upsilon2 = s.max_upsilon2.max(upsilon2);
            }
        }
    }
    if !s.max_chi.is_finite() || !s.max_upsilon2.is_finite() {
        return Err(Error::Resolution {
            kind: "monitor interior",
            got: atlas.resolution,
            min: 2 * stage_margin(4) + 2,
        });
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Dual-route identity defects
// ---------------------------------------------------------------------------

/// Defect of "the angle differential equals the graph-metric trace of the
/// third derivative": compares the stencil gradient of the pointwise angle
/// field against (G^-1)^ij u_;ijk, two routes sharing no differentiation
/// code.
pub fn theta_gradient_defect(atlas: &MetricAtlas, field: &ScalarField) -> Result<f64> {
    let jet = covariant_jet(atlas, field, 3)?;
    let n = atlas.dim;
    let mut theta_fields: Vec<Vec<f64>> = Vec::new();
    for (c, grid) in atlas.charts.iter().enumerate() {
        let mut th = vec![0.0; grid.node_count()];
        let mut bad = None;
        grid.for_each_interior(stage_margin(2), |flat, _| {
            if bad.is_some() {
                return;
            }
            match lagrangian_angle(atlas.sigma(c, flat), jet.hess(c, flat), n, AngleMethod::Eigen)
            {
                Ok(v) => th[flat] = v,
                Err(e) => bad = Some(e),
            }
        });
        if let Some(e) = bad {
            return Err(e);
        }
        theta_fields.push(th);
    }
    let mut defect = 0.0f64;
    for (c, grid) in atlas.charts.iter().enumerate() {
        for (flat, iv) in atlas.owned_nodes(c) {
            let flat = *flat;
            if !margin_ok(grid, iv, stage_margin(3)) {
                continue;
            }
            let g = induced_metric(
                atlas.sigma(c, flat),
                atlas.sigma_inv(c, flat),
                jet.hess(c, flat),
                n,
            );
            let ginv = crate::linalg::invert_spd(&g, n)?;
            let t3 = jet.third(c, flat);
            for k in 0..n {
                let direct = d1(grid, iv, k, |f| theta_fields[c][f]);
                let mut traced = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        traced += ginv[i * n + j] * t3[(i * n + j) * n + k];
                    }
                }
                defect = defect.max((direct - traced).abs());
            }
        }
    }
    Ok(defect)
}

fn midpoint_field(u0: &ScalarField, u1: &ScalarField) -> ScalarField {
    ScalarField {
        charts: u0
            .charts
            .iter()
            .zip(&u1.charts)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
            .collect(),
        halo_clean: u0.halo_clean && u1.halo_clean,
    }
}

/// Defect of the gradient-energy evolution identity across one time step:
/// d/dt vartheta - (G^-1)^ij vartheta_;ij
///   = -2 sigma^ij (G^-1)^pq u_;ip u_;jq
///     + 2 sigma^ij (G^-1)^pq C^l_pqi u_;l u_;j.
/// The time slope is the step difference, the elliptic term and the
/// right-hand side are evaluated on the midpoint state, so the defect is
/// O(h^4) + O(dt^2) for states one evolution step apart.
pub fn vartheta_flow_defect(
    atlas: &MetricAtlas,
    u0: &ScalarField,
    u1: &ScalarField,
    dt: f64,
) -> Result<f64> {
    let n = atlas.dim;
    let jet0 = covariant_jet(atlas, u0, 1)?;
    let jet1 = covariant_jet(atlas, u1, 1)?;
    let mid = midpoint_field(u0, u1);
    let jet_mid = covariant_jet(atlas, &mid, 2)?;

    // vartheta fields on each state, valid at margin 2.
    let vt = |jet: &CovariantJet| -> Vec<Vec<f64>> {
        atlas
            .charts
            .iter()
            .enumerate()
            .map(|(c, grid)| {
                let mut v = vec![0.0; grid.node_count()];
                grid.for_each_interior(stage_margin(1), |flat, _| {
                    v[flat] = vartheta_energy(atlas.sigma_inv(c, flat), jet.grad(c, flat), n);
                });
                v
            })
            .collect()
    };
    let vt0 = vt(&jet0);
    let vt1 = vt(&jet1);
    let vt_mid = vt(&jet_mid);

    let mut defect = 0.0f64;
    // vartheta is valid at margin 2 and its composed Hessian reaches 4
    // further.
    let need = stage_margin(1) + 4;
    for (c, grid) in atlas.charts.iter().enumerate() {
        for (flat, iv) in atlas.owned_nodes(c) {
            let flat = *flat;
            if !margin_ok(grid, iv, need.max(stage_margin(2))) {
                continue;
            }
            let sigma_inv = atlas.sigma_inv(c, flat);
            let hess = jet_mid.hess(c, flat);
            let grad = jet_mid.grad(c, flat);
            let g = induced_metric(atlas.sigma(c, flat), sigma_inv, hess, n);
            let ginv = crate::linalg::invert_spd(&g, n)?;

            let slope = (vt1[c][flat] - vt0[c][flat]) / dt;
            let vt_hess = scalar_covariant_hessian(atlas, c, &vt_mid[c], iv, flat);
            let mut elliptic = 0.0;
            for i in 0..n {
                for j in 0..n {
                    elliptic += ginv[i * n + j] * vt_hess[i * n + j];
                }
            }

            let mut rhs = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for p in 0..n {
                        for q in 0..n {
                            rhs += -2.0
                                * sigma_inv[i * n + j]
                                * ginv[p * n + q]
                                * hess[i * n + p]
                                * hess[j * n + q];
                        }
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    for p in 0..n {
                        for q in 0..n {
                            for l in 0..n {
                                rhs += 2.0
                                    * sigma_inv[i * n + j]
                                    * ginv[p * n + q]
                                    * atlas.curvature(c, flat, l, p, q, i)
                                    * grad[l]
                                    * grad[j];
                            }
                        }
                    }
                }
            }
            defect = defect.max((slope - elliptic - rhs).abs());
        }
    }
    Ok(defect)
}

/// Defect report for the volume-ratio evolution identity; nodes whose
/// eigenvalue spectrum is too clustered for a stable eigenframe are skipped
/// and counted.
pub struct RhoDefectReport {
    pub max_abs: f64,
    pub skipped_fraction: f64,
}

/// Defect of the log-volume evolution identity across one time step, in the
/// per-node eigenframe of (Hess u, sigma):
/// d/dt rho - (G^-1)^ij rho_;ij
///   = sum_abc (-1 + la lb - lc(la + lb)) / ((1+la^2)(1+lb^2)(1+lc^2)) t_abc^2
///     - sum_{a<b} 2 kappa (la - lb)^2 / ((1+la^2)(1+lb^2))
/// where t_abc is the third derivative expressed in the sigma-orthonormal
/// eigenframe and rho = (1/2) ln(det G / det sigma).
pub fn rho_flow_defect(
    atlas: &MetricAtlas,
    u0: &ScalarField,
    u1: &ScalarField,
    dt: f64,
) -> Result<RhoDefectReport> {
    let n = atlas.dim;
    let jet0 = covariant_jet(atlas, u0, 2)?;
    let jet1 = covariant_jet(atlas, u1, 2)?;
    let mid = midpoint_field(u0, u1);
    let jet_mid = covariant_jet(atlas, &mid, 3)?;

    let rho = |jet: &CovariantJet| -> Vec<Vec<f64>> {
        atlas
            .charts
            .iter()
            .enumerate()
            .map(|(c, grid)| {
                let mut v = vec![0.0; grid.node_count()];
                grid.for_each_interior(stage_margin(2), |flat, _| {
                    let chi = chi_ratio(
                        atlas.sigma(c, flat),
                        atlas.sigma_inv(c, flat),
                        jet.hess(c, flat),
                        n,
                    );
                    v[flat] = 0.5 * chi.ln();
                });
                v
            })
            .collect()
    };
    let rho0 = rho(&jet0);
    let rho1 = rho(&jet1);
    let rho_mid = rho(&jet_mid);

    let mut defect = 0.0f64;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    // rho is valid at margin 4 and its composed Hessian reaches 4 further.
    let need = stage_margin(2) + 4;
    for (c, grid) in atlas.charts.iter().enumerate() {
        for (flat, iv) in atlas.owned_nodes(c) {
            let flat = *flat;
            if !margin_ok(grid, iv, need.max(stage_margin(3))) {
                continue;
            }
            let sigma = atlas.sigma(c, flat);
            let hess = jet_mid.hess(c, flat);
            let (lambda, w) = generalized_eigenpairs(&as_mat(hess), &as_mat(sigma), n)?;
            if n > 1 {
                let max_l = lambda[..n].iter().fold(0.0f64, |m, l| m.max(l.abs()));
                let mut min_gap = f64::INFINITY;
                for a in 0..n - 1 {
                    min_gap = min_gap.min(lambda[a + 1] - lambda[a]);
                }
                if min_gap < 1e-6 * (1.0 + max_l) {
                    skipped += 1;
                    continue;
                }
            }
            evaluated += 1;

            let g = induced_metric(sigma, atlas.sigma_inv(c, flat), hess, n);
            let ginv = crate::linalg::invert_spd(&g, n)?;
            let slope = (rho1[c][flat] - rho0[c][flat]) / dt;
            let rho_hess = scalar_covariant_hessian(atlas, c, &rho_mid[c], iv, flat);
            let mut elliptic = 0.0;
            for i in 0..n {
                for j in 0..n {
                    elliptic += ginv[i * n + j] * rho_hess[i * n + j];
                }
            }

            // Third derivative rotated into the sigma-orthonormal eigenframe.
            let t3 = jet_mid.third(c, flat);
            let mut t_frame = [0.0; 27];
            for a in 0..n {
                for b in 0..n {
                    for cc in 0..n {
                        let mut acc = 0.0;
                        for p in 0..n {
                            for q in 0..n {
                                for k in 0..n {
                                    acc += t3[(p * n + q) * n + k]
                                        * w[p * n + a]
                                        * w[q * n + b]
                                        * w[k * n + cc];
                                }
                            }
                        }
                        t_frame[(a * n + b) * n + cc] = acc;
                    }
                }
            }
            let mut rhs = 0.0;
            for a in 0..n {
                let la = lambda[a];
                for b in 0..n {
                    let lb = lambda[b];
                    for cc in 0..n {
                        let lc = lambda[cc];
                        let coeff = (-1.0 + la * lb - lc * (la + lb))
                            / ((1.0 + la * la) * (1.0 + lb * lb) * (1.0 + lc * lc));
                        let t = t_frame[(a * n + b) * n + cc];
                        rhs += coeff * t * t;
                    }
                }
            }
            for a in 0..n {
                for b in (a + 1)..n {
                    let (la, lb) = (lambda[a], lambda[b]);
                    rhs -= 2.0 * atlas.kappa * (la - lb) * (la - lb)
                        / ((1.0 + la * la) * (1.0 + lb * lb));
                }
            }
            defect = defect.max((slope - elliptic - rhs).abs());
        }
    }
    Ok(RhoDefectReport {
        max_abs: defect,
        skipped_fraction: if evaluated + skipped == 0 {
            0.0
        } else {
            skipped as f64 / (evaluated + skipped) as f64
        },
    })
}
