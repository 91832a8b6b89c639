//! Empirical constants for the interpolation inequalities and the growth law.
//!
//! For each inequality the smallest constant that makes it hold over a seeded
//! corpus of random compatible curves is recorded; consumers use twice that.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gn::{gn_sides, u4_terms, u6_terms, GnExponent};
use crate::error::Result;
use crate::geometry::initial::sample_by_arclength;
use crate::geometry::{compute_geometry, make_initial_curve, DiscreteCurve, GeometryCache, InitialFamily, Point2};

pub const CALIBRATION_SEED: u64 = 0x00C0_FFEE;
pub const CALIBRATION_SIZE: usize = 200;
pub const CORPUS_NODES: usize = 128;
/// Curvature weights over which the growth-law constant is checked. The
/// ε-part of the rate is `−ε∫(2κ_ss + κ³)²`, so the supremum over `ε ∈ (0, 1]`
/// is the `ε = 0` value, which is included.
pub const EPSILON_GRID: [f64; 6] = [0.0, 0.0125, 0.05, 0.1, 0.5, 1.0];
/// Lower bound for a recorded constant; inequalities whose correction terms
/// are never needed on the corpus would otherwise calibrate to zero.
pub const CONSTANT_FLOOR: f64 = 1e-8;

/// `(n, j, p)` triples of the general inequality that get calibrated.
pub const GN_TRIPLES: [(usize, usize, GnExponent); 6] = [
    (0, 1, GnExponent::Finite(4.0)),
    (0, 1, GnExponent::Infinity),
    (0, 2, GnExponent::Finite(6.0)),
    (1, 2, GnExponent::Finite(4.0)),
    (1, 2, GnExponent::Infinity),
    (2, 3, GnExponent::Finite(2.0)),
];

/// How a corpus curve was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CorpusKind {
    /// `L·(x, Σ a_k sin(kπx))`, x ∈ [0, 1]
    SineSeries { length: f64, coeffs: Vec<f64> },
    Family(InitialFamily),
}

#[derive(Debug, Clone)]
pub struct CorpusCurve {
    pub kind: CorpusKind,
    pub curve: DiscreteCurve,
    pub cache: GeometryCache,
}

fn sine_series(length: f64, coeffs: &[f64], n: usize) -> Result<DiscreteCurve> {
    use std::f64::consts::PI;
    let y = |x: f64| -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * PI * x).sin())
            .sum()
    };
    let dy = |x: f64| -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * (k + 1) as f64 * PI * ((k + 1) as f64 * PI * x).cos())
            .sum()
    };
    let mut nodes = sample_by_arclength(
        |x| Point2::new(length * x, length * y(x)),
        |x| length * (1.0 + dy(x) * dy(x)).sqrt(),
        n,
    )?;
    nodes[n] = Point2::new(length, 0.0);
    DiscreteCurve::new(nodes)
}

fn random_kind(rng: &mut ChaCha8Rng) -> CorpusKind {
    use std::f64::consts::PI;
    match rng.gen_range(0..3) {
        0 => {
            let length = rng.gen_range(0.5..2.0);
            let coeffs = (1..=5).map(|k| rng.gen_range(-0.3..0.3) / k as f64).collect();
            CorpusKind::SineSeries { length, coeffs }
        }
        1 => CorpusKind::Family(InitialFamily::ArcWithFlatEnds {
            length: rng.gen_range(0.5..3.0),
            turning: rng.gen_range(-2.0 * PI..2.0 * PI),
        }),
        _ => {
            let support_start = rng.gen_range(0.0..0.4);
            let support_end = rng.gen_range(0.6..1.0);
            CorpusKind::Family(InitialFamily::BumpPerturbedSegment {
                amplitude: rng.gen_range(-0.3..0.3),
                support_start,
                support_end,
            })
        }
    }
}

impl CorpusCurve {
    pub fn build(kind: CorpusKind, n: usize) -> Result<Self> {
        let curve = match &kind {
            CorpusKind::SineSeries { length, coeffs } => sine_series(*length, coeffs, n)?,
            CorpusKind::Family(f) => make_initial_curve(f, n)?,
        };
        let cache = compute_geometry(&curve)?;
        Ok(Self { kind, curve, cache })
    }
}

/// `count` random curves drawn from `seed`.
pub fn corpus(seed: u64, count: usize) -> Result<Vec<CorpusCurve>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| CorpusCurve::build(random_kind(&mut rng), CORPUS_NODES))
        .collect()
}

/// `∂ₜ∫κ² ds` along the ε-flow, evaluated from the curve alone:
/// `∫(−2κ_s² + κ⁴) + ε∫(−4κ_ss² − κ⁶ − 4κ³κ_ss)`.
pub fn kappa_sq_rate(cache: &GeometryCache, epsilon: f64) -> f64 {
    let k = &cache.kappa;
    let ks = cache.kappa_derivative(1);
    let kss = cache.kappa_derivative(2);
    let f: Vec<f64> = (0..k.len())
        .map(|i| {
            let (a, b, c) = (k[i], ks[i], kss[i]);
            -2.0 * b * b + a.powi(4) + epsilon * (-4.0 * c * c - a.powi(6) - 4.0 * a.powi(3) * c)
        })
        .collect();
    cache.integrate(&f)
}

/// `p⁵ + p³ + p²`, the growth law with unit constant.
pub fn growth_weight(p: f64) -> f64 {
    p.powi(5) + p.powi(3) + p * p
}

/// Smallest constants observed on a corpus (not yet doubled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedConstants {
    pub u6: f64,
    pub u4: f64,
    /// Shared `C̃ = B` per triple of [`GN_TRIPLES`].
    pub general: Vec<f64>,
    pub growth: f64,
}

impl CalibratedConstants {
    pub fn doubled(&self) -> Self {
        Self {
            u6: 2.0 * self.u6,
            u4: 2.0 * self.u4,
            general: self.general.iter().map(|c| 2.0 * c).collect(),
            growth: 2.0 * self.growth,
        }
    }
}

fn ratio(lhs: f64, free: f64, weight: f64) -> f64 {
    if weight > 0.0 {
        (lhs - free) / weight
    } else {
        f64::NEG_INFINITY
    }
}

/// Per-curve requirement for every constant, in the layout of
/// [`CalibratedConstants`].
pub fn required_constants(c: &CorpusCurve) -> Result<CalibratedConstants> {
    let cache = &c.cache;
    let u = &cache.kappa;
    let (l6, f6, w6) = u6_terms(cache, u);
    let (l4, f4, w4) = u4_terms(cache, u);
    let mut general = Vec::with_capacity(GN_TRIPLES.len());
    for (n, j, p) in GN_TRIPLES {
        let s = gn_sides(cache, u, n, j, p)?;
        general.push(ratio(s.lhs, 0.0, s.interpolation_term + s.length_term));
    }
    let p = cache.integrate(&u.iter().map(|k| k * k).collect::<Vec<_>>());
    let growth = EPSILON_GRID
        .iter()
        .map(|&eps| ratio(kappa_sq_rate(cache, eps), 0.0, growth_weight(p)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CalibratedConstants {
        u6: ratio(l6, f6, w6),
        u4: ratio(l4, f4, w4),
        general,
        growth,
    })
}

/// Largest requirement over the corpus, floored at [`CONSTANT_FLOOR`].
pub fn calibrate(curves: &[CorpusCurve]) -> Result<CalibratedConstants> {
    let mut out = CalibratedConstants {
        u6: CONSTANT_FLOOR,
        u4: CONSTANT_FLOOR,
        general: vec![CONSTANT_FLOOR; GN_TRIPLES.len()],
        growth: CONSTANT_FLOOR,
    };
    for c in curves {
        let r = required_constants(c)?;
        out.u6 = out.u6.max(r.u6);
        out.u4 = out.u4.max(r.u4);
        for (o, v) in out.general.iter_mut().zip(&r.general) {
            *o = o.max(*v);
        }
        out.growth = out.growth.max(r.growth);
    }
    Ok(out)
}

/// Constants from the standard corpus, already doubled.
pub fn standard_constants() -> Result<CalibratedConstants> {
    Ok(calibrate(&corpus(CALIBRATION_SEED, CALIBRATION_SIZE)?)?.doubled())
}

/// Slack of every calibrated inequality on one curve; all entries are
/// nonnegative when the constants cover it.
pub fn slacks(c: &CorpusCurve, k: &CalibratedConstants) -> Result<Vec<(String, f64)>> {
    let cache = &c.cache;
    let u = &cache.kappa;
    let mut out = vec![
        ("u6".to_string(), super::gn::gn_specialized_u6(cache, u, k.u6)),
        ("u4".to_string(), super::gn::gn_specialized_u4(cache, u, k.u4)),
    ];
    for ((n, j, p), cst) in GN_TRIPLES.iter().zip(&k.general) {
        let slack = super::gn::gn_check(cache, u, *n, *j, *p, *cst, *cst)?;
        out.push((format!("gn({n},{j},{p:?})"), slack));
    }
    let p = cache.integrate(&u.iter().map(|v| v * v).collect::<Vec<_>>());
    for eps in EPSILON_GRID {
        out.push((
            format!("growth(eps={eps})"),
            k.growth * growth_weight(p) - kappa_sq_rate(cache, eps),
        ));
    }
    Ok(out)
}

