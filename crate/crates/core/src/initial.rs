//! Initial potentials for flow runs: the zero section, single eigenmodes of
//! the base Laplacian, and seeded band-limited random bumps that can be
//! rescaled until the peak volume ratio hits a prescribed target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atlas::{BaseKind, MetricAtlas, ScalarField};
use crate::error::{Error, Result};
use crate::lagrangian::quick_summary;
use crate::linalg::MAX_DIM;

/// Descriptor of an initial potential, independent of any grid.
#[derive(Clone, Debug)]
pub enum InitialData {
    /// The zero section; an exact fixed point of the flow.
    Zero,
    /// `amplitude * cos(wave . x)` on a torus base. Entries of `wave` beyond
    /// the base dimension must stay zero.
    TorusMode { amplitude: f64, wave: [i64; MAX_DIM] },
    /// A zonal sphere harmonic of degree 1 or 2, expressed through the
    /// ambient height function so both charts see one global function.
    SphereZonal { amplitude: f64, degree: u32 },
    /// Random superposition of low modes with coefficients drawn uniformly
    /// from [-1, 1) by a counter-seeded generator, normalized to unit sup and
    /// scaled by `amplitude` — or, when `target_max_chi` is set, rescaled by
    /// bisection until the largest nodal volume ratio matches the target
    /// (`amplitude` is then ignored).
    Bump {
        amplitude: f64,
        seed: u64,
        bandlimit: u32,
        target_max_chi: Option<f64>,
    },
}

impl InitialData {
    /// Decay rate `mu` of the linearized flow for single eigenmodes: the
    /// potential contracts like `exp(-mu t)` while amplitudes stay small.
    /// `None` for data that is not a single mode.
    pub fn linear_decay_rate(&self, atlas: &MetricAtlas) -> Option<f64> {
        match self {
            InitialData::TorusMode { wave, .. } => {
                let k2: i64 = wave.iter().map(|k| k * k).sum();
                Some(k2 as f64)
            }
            InitialData::SphereZonal { degree, .. } => {
                Some(f64::from(degree * (degree + 1)) * atlas.kappa)
            }
            _ => None,
        }
    }
}

/// Realize a descriptor as nodal data on the atlas, rim values included.
pub fn build_initial(atlas: &MetricAtlas, data: &InitialData) -> Result<ScalarField> {
    match data {
        InitialData::Zero => Ok(atlas.new_field()),
        InitialData::TorusMode { amplitude, wave } => torus_mode(atlas, *amplitude, wave),
        InitialData::SphereZonal { amplitude, degree } => {
            sphere_zonal(atlas, *amplitude, *degree)
        }
        InitialData::Bump {
            amplitude,
            seed,
            bandlimit,
            target_max_chi,
        } => bump(atlas, *amplitude, *seed, *bandlimit, *target_max_chi),
    }
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    if !amplitude.is_finite() {
        return Err(Error::FlowParameter(
            "initial amplitude must be finite".into(),
        ));
    }
    Ok(())
}

fn torus_mode(atlas: &MetricAtlas, amplitude: f64, wave: &[i64; MAX_DIM]) -> Result<ScalarField> {
    check_amplitude(amplitude)?;
    if atlas.kind != BaseKind::Torus {
        return Err(Error::NotAnEigenmode(
            "torus wave vector given for a sphere base".into(),
        ));
    }
    if wave[atlas.dim..].iter().any(|&k| k != 0) {
        return Err(Error::NotAnEigenmode(format!(
            "wave vector {wave:?} uses axes beyond the base dimension {}",
            atlas.dim
        )));
    }
    if wave.iter().all(|&k| k == 0) {
        return Err(Error::NotAnEigenmode("wave vector is zero".into()));
    }
    let wave = *wave;
    Ok(atlas.sample(|_, x| {
        let phase: f64 = (0..MAX_DIM).map(|a| wave[a] as f64 * x[a]).sum();
        amplitude * phase.cos()
    }))
}

/// Ambient coordinates of the unit-curvature sphere point over a chart node:
/// the stereographic images `(2x, 2y, ±(1 - r^2)) / (1 + r^2)`.
fn ambient(chart: usize, x: &[f64; MAX_DIM]) -> [f64; 3] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let q = 1.0 + r2;
    let sign = if chart == 0 { 1.0 } else { -1.0 };
    [2.0 * x[0] / q, 2.0 * x[1] / q, sign * (1.0 - r2) / q]
}

fn sphere_zonal(atlas: &MetricAtlas, amplitude: f64, degree: u32) -> Result<ScalarField> {
    check_amplitude(amplitude)?;
    if atlas.kind != BaseKind::Sphere {
        return Err(Error::NotAnEigenmode(
            "sphere harmonic given for a torus base".into(),
        ));
    }
    match degree {
        1 => Ok(atlas.sample(|chart, x| amplitude * ambient(chart, x)[2])),
        2 => Ok(atlas.sample(|chart, x| {
            let m3 = ambient(chart, x)[2];
            amplitude * (3.0 * m3 * m3 - 1.0) / 2.0
        })),
        _ => Err(Error::HarmonicDegree(degree)),
    }
}

/// Sphere harmonic basis functions by ambient degree: all of degrees 1 and 2
/// plus a degree-3 pair, enough to make bumps genuinely anisotropic.
fn sphere_basis(degree: u32, m: &[f64; 3]) -> Vec<f64> {
    match degree {
        1 => vec![m[0], m[1], m[2]],
        2 => vec![
            m[0] * m[1],
            m[0] * m[2],
            m[1] * m[2],
            m[0] * m[0] - m[1] * m[1],
            3.0 * m[2] * m[2] - 1.0,
        ],
        3 => vec![m[0] * m[1] * m[2], m[2] * (m[0] * m[0] - m[1] * m[1])],
        _ => Vec::new(),
    }
}

fn bump(
    atlas: &MetricAtlas,
    amplitude: f64,
    seed: u64,
    bandlimit: u32,
    target_max_chi: Option<f64>,
) -> Result<ScalarField> {
    check_amplitude(amplitude)?;
    if !(1..=3).contains(&bandlimit) {
        return Err(Error::FlowParameter(format!(
            "bump bandlimit {bandlimit} outside 1..=3"
        )));
    }
    if let Some(chi) = target_max_chi {
        if !chi.is_finite() || chi <= 1.0 {
            return Err(Error::FlowParameter(format!(
                "target volume ratio {chi} must be finite and exceed 1"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let raw = match atlas.kind {
        BaseKind::Torus => {
            // One (cos, sin) coefficient pair per wave vector from the
            // lexicographic half-space 0 < |k|_inf <= bandlimit, so every
            // mode appears once with a random phase.
            let b = bandlimit as i64;
            let mut modes = Vec::new();
            let span = 2 * b + 1;
            let count = i64::pow(span, atlas.dim as u32);
            for code in 0..count {
                let mut k = [0i64; MAX_DIM];
                let mut rest = code;
                for a in (0..atlas.dim).rev() {
                    k[a] = rest % span - b;
                    rest /= span;
                }
                let lead = k.iter().find(|&&v| v != 0);
                if let Some(&lead) = lead {
                    if lead > 0 {
                        let c = rng.gen_range(-1.0..1.0);
                        let s = rng.gen_range(-1.0..1.0);
                        modes.push((k, c, s));
                    }
                }
            }
            atlas.sample(|_, x| {
                modes
                    .iter()
                    .map(|(k, c, s)| {
                        let phase: f64 = (0..MAX_DIM).map(|a| k[a] as f64 * x[a]).sum();
                        c * phase.cos() + s * phase.sin()
                    })
                    .sum()
            })
        }
        BaseKind::Sphere => {
            let mut coeffs = Vec::new();
            for degree in 1..=bandlimit {
                let shape = sphere_basis(degree, &[0.0, 0.0, 1.0]).len();
                for _ in 0..shape {
                    coeffs.push(rng.gen_range(-1.0f64..1.0));
                }
            }
            let bandlimit = bandlimit;
            atlas.sample(move |chart, x| {
                let m = ambient(chart, x);
                let mut acc = 0.0;
                let mut idx = 0;
                for degree in 1..=bandlimit {
                    for value in sphere_basis(degree, &m) {
                        acc += coeffs[idx] * value;
                        idx += 1;
                    }
                }
                acc
            })
        }
    };

    // Normalize to unit sup over owned nodes so `amplitude` means what it
    // says regardless of seed.
    let mut sup = 0.0f64;
    for chart in 0..atlas.charts.len() {
        for &(flat, _) in atlas.owned_nodes(chart) {
            sup = sup.max(raw.charts[chart][flat].abs());
        }
    }
    if sup == 0.0 {
        return Err(Error::FlowParameter(
            "bump basis collapsed to zero for this seed".into(),
        ));
    }

    let scaled = |s: f64| -> ScalarField {
        let mut field = raw.clone();
        for chart in &mut field.charts {
            for v in chart.iter_mut() {
                *v *= s / sup;
            }
        }
        field
    };

    let Some(target) = target_max_chi else {
        return Ok(scaled(amplitude));
    };

    // The nodal volume ratio chi = prod(1 + lambda_i^2) grows monotonically
    // with the field scale, so a doubling bracket plus bisection pins the
    // scale that attains the target max.
    let chi_of = |s: f64| quick_summary(atlas, &scaled(s)).max_chi;
    let mut hi = 1e-3;
    let mut doublings = 0;
    while chi_of(hi) < target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 80 {
            return Err(Error::FlowParameter(format!(
                "target volume ratio {target} unreachable by rescaling"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if chi_of(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(scaled(hi))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{build_sphere, build_torus};

    #[test]
    fn zero_data_is_identically_zero() {
        for atlas in [build_torus(2, 16).unwrap(), build_sphere(32, 1.0).unwrap()] {
            let field = build_initial(&atlas, &InitialData::Zero).unwrap();
            for chart in &field.charts {
                assert!(chart.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn torus_mode_matches_closed_form_and_rate() {
        let atlas = build_torus(2, 32).unwrap();
        let data = InitialData::TorusMode {
            amplitude: 0.25,
            wave: [2, -1, 0],
        };
        let field = build_initial(&atlas, &data).unwrap();
        let grid = atlas.charts[0].clone();
        grid.for_each_interior(0, |flat, iv| {
            let x = grid.coords(iv);
            let expect = 0.25 * (2.0 * x[0] - x[1]).cos();
            assert!((field.charts[0][flat] - expect).abs() < 1e-15);
        });
        assert_eq!(data.linear_decay_rate(&atlas), Some(5.0));
    }

    #[test]
    fn sphere_zonal_agrees_with_height_function_across_charts() {
        // Odd resolution puts a node exactly at each pole.
        let atlas = build_sphere(49, 2.0).unwrap();
        let data = InitialData::SphereZonal {
            amplitude: 1.0,
            degree: 1,
        };
        let field = build_initial(&atlas, &data).unwrap();
        let g0 = atlas.charts[0].clone();
        let mid = [g0.len[0] / 2, g0.len[1] / 2, 0];
        assert!((field.charts[0][g0.flat(&mid)] - 1.0).abs() < 1e-12);
        assert!((field.charts[1][g0.flat(&mid)] + 1.0).abs() < 1e-12);
        // The sampled rim must agree with what the transfer reconstructs:
        // one global function seen through two charts.
        let mut moved = field.clone();
        for c in 0..2 {
            let grid = atlas.charts[c].clone();
            grid.for_each_interior(0, |flat, iv| {
                if !grid.is_active(iv) {
                    moved.charts[c][flat] = 9.0;
                }
            });
        }
        moved.halo_clean = false;
        atlas.transfer_scalar(&mut moved);
        let mut worst = 0.0f64;
        for c in 0..2 {
            for (a, b) in moved.charts[c].iter().zip(&field.charts[c]) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst < 1e-6, "rim reconstruction defect {worst}");
        assert_eq!(data.linear_decay_rate(&atlas), Some(4.0));
    }

    #[test]
    fn degree_two_zonal_uses_even_combination() {
        let atlas = build_sphere(33, 1.0).unwrap();
        let field = build_initial(
            &atlas,
            &InitialData::SphereZonal {
                amplitude: 2.0,
                degree: 2,
            },
        )
        .unwrap();
        // At the pole m3 = 1 so the harmonic evaluates to amplitude.
        let g0 = atlas.charts[0].clone();
        let mid = [g0.len[0] / 2, g0.len[1] / 2, 0];
        assert!((field.charts[0][g0.flat(&mid)] - 2.0).abs() < 1e-12);
        // Even in m3: both charts carry identical nodal data.
        for (a, b) in field.charts[0].iter().zip(&field.charts[1]) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bump_is_seed_deterministic_and_seed_sensitive() {
        let atlas = build_torus(2, 16).unwrap();
        let make = |seed| {
            build_initial(
                &atlas,
                &InitialData::Bump {
                    amplitude: 0.1,
                    seed,
                    bandlimit: 2,
                    target_max_chi: None,
                },
            )
            .unwrap()
        };
        let a = make(11);
        let b = make(11);
        let c = make(12);
        assert_eq!(a.charts, b.charts);
        assert_ne!(a.charts, c.charts);
        let sup = a.charts[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((sup - 0.1).abs() < 1e-14, "normalized sup {sup}");
    }

    #[test]
    fn bump_rescaling_hits_the_target_volume_ratio() {
        for (atlas, target) in [
            (build_sphere(48, 1.0).unwrap(), 1.05),
            (build_torus(2, 32).unwrap(), 1.02),
        ] {
            let field = build_initial(
                &atlas,
                &InitialData::Bump {
                    amplitude: 1.0,
                    seed: 7,
                    bandlimit: 3,
                    target_max_chi: Some(target),
                },
            )
            .unwrap();
            let chi = quick_summary(&atlas, &field).max_chi;
            assert!(
                (chi - target).abs() < 1e-9,
                "max volume ratio {chi} vs target {target}"
            );
        }
    }

    #[test]
    fn descriptor_validation_rejects_mismatches() {
        let torus = build_torus(2, 16).unwrap();
        let sphere = build_sphere(32, 1.0).unwrap();
        let mode = InitialData::TorusMode {
            amplitude: 0.1,
            wave: [1, 0, 0],
        };
        let zonal = InitialData::SphereZonal {
            amplitude: 0.1,
            degree: 1,
        };
        assert!(matches!(
            build_initial(&sphere, &mode),
            Err(Error::NotAnEigenmode(_))
        ));
        assert!(matches!(
            build_initial(&torus, &zonal),
            Err(Error::NotAnEigenmode(_))
        ));
        assert!(matches!(
            build_initial(
                &torus,
                &InitialData::TorusMode {
                    amplitude: 0.1,
                    wave: [0, 0, 0]
                }
            ),
            Err(Error::NotAnEigenmode(_))
        ));
        assert!(matches!(
            build_initial(
                &torus,
                &InitialData::TorusMode {
                    amplitude: 0.1,
                    wave: [1, 0, 2]
                }
            ),
            Err(Error::NotAnEigenmode(_))
        ));
        assert!(matches!(
            build_initial(
                &sphere,
                &InitialData::SphereZonal {
                    amplitude: 0.1,
                    degree: 3
                }
            ),
            Err(Error::HarmonicDegree(3))
        ));
        assert!(matches!(
            build_initial(
                &torus,
                &InitialData::Bump {
                    amplitude: 0.1,
                    seed: 1,
                    bandlimit: 0,
                    target_max_chi: None
                }
            ),
            Err(Error::FlowParameter(_))
        ));
        assert!(matches!(
            build_initial(
                &torus,
                &InitialData::Bump {
                    amplitude: 0.1,
                    seed: 1,
                    bandlimit: 2,
                    target_max_chi: Some(0.9)
                }
            ),
            Err(Error::FlowParameter(_))
        ));
    }
}
