//! Potentials to inclusion probabilities, repair of invalid values,
//! smoothstep weighting and combination of sub-image weights.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const DEFAULT_K: u32 = 2;
/// Values above 1 but below this are counted as numerical noise.
pub const NOISE_LIMIT: f64 = 1.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbabilityKind {
    Raw,
    Weighted,
    Combined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    pub values: Grid<f64>,
    pub kind: ProbabilityKind,
}

/// `|V| / 2π` at every pixel; may exceed 1.
pub fn potential_to_probability(v: &Grid<f64>) -> ProbabilityField {
    ProbabilityField {
        values: v.map(|x| x.abs() / TAU),
        kind: ProbabilityKind::Raw,
    }
}

/// What [`sanitize`] found and changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SanitizeReport {
    pub above_one: usize,
    /// Values above [`NOISE_LIMIT`].
    pub above_noise_limit: usize,
    /// Replaced by their neighbourhood median.
    pub repaired: usize,
    /// Clamped into `[0, 1]` (above one or below zero).
    pub clamped: usize,
}

fn median3x3(g: &Grid<f64>, x: usize, y: usize) -> f64 {
    let mut v: Vec<f64> = Vec::with_capacity(9);
    for dy in -1isize..=1 {
        for dx in -1isize..=1 {
            if let Some(&val) = g.get_signed(x as isize + dx, y as isize + dy) {
                v.push(val);
            }
        }
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Replaces isolated values above 1 by their 3×3 median when that median is
/// at most 1, then clamps everything to `[0, 1]`.
pub fn sanitize(p: &ProbabilityField) -> (ProbabilityField, SanitizeReport) {
    let src = &p.values;
    let mut report = SanitizeReport::default();
    let values = Grid::from_fn(src.width(), src.height(), |x, y| {
        let v = *src.get(x, y);
        if v > 1.0 {
            report.above_one += 1;
            if v > NOISE_LIMIT {
                report.above_noise_limit += 1;
            }
            let m = median3x3(src, x, y);
            if m <= 1.0 {
                report.repaired += 1;
                return m.max(0.0);
            }
            report.clamped += 1;
            1.0
        } else if v < 0.0 {
            report.clamped += 1;
            0.0
        } else {
            v
        }
    });
    (
        ProbabilityField {
            values,
            kind: p.kind,
        },
        report,
    )
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients `c_0..=c_{2K+1}` of the order-`K` smoothstep polynomial.
pub fn smoothstep_coefficients(k: u32) -> Vec<f64> {
    let k = k as u64;
    let mut c = vec![0.0; 2 * k as usize + 2];
    for j in 0..=k {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        c[(k + 1 + j) as usize] = sign * binomial(k + j, j) * binomial(2 * k + 1, k - j);
    }
    c
}

/// `p^{K+1} Σ_k C(K+k, k) C(2K+1, K-k) (-p)^k`.
pub fn smoothstep_weight(p: f64, k: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    let kk = k as u64;
    let mut sum = 0.0;
    let mut pow = 1.0;
    for j in 0..=kk {
        sum += binomial(kk + j, j) * binomial(2 * kk + 1, kk - j) * pow;
        pow *= -p;
    }
    Ok(p.powi(k as i32 + 1) * sum)
}

pub fn weight_field(p: &ProbabilityField, k: u32) -> Result<ProbabilityField> {
    let mut out = Vec::with_capacity(p.values.len());
    for &v in p.values.data() {
        out.push(smoothstep_weight(v, k)?);
    }
    Ok(ProbabilityField {
        values: Grid::from_vec(p.values.width(), p.values.height(), out)?,
        kind: ProbabilityKind::Weighted,
    })
}

/// Pointwise maximum of the sub-image weights.
///
/// The result is no longer a probability in the sense of the single-field
/// properties; the individual weights stay available to the caller.
pub fn combine_subimages(weights: &[ProbabilityField]) -> Result<ProbabilityField> {
    let first = weights
        .first()
        .ok_or_else(|| Error::Config("no sub-image weights to combine".into()))?;
    let mut out = first.values.clone();
    for w in &weights[1..] {
        out.ensure_same_dims(&w.values)?;
        for (a, b) in out.data_mut().iter_mut().zip(w.values.data()) {
            *a = a.max(*b);
        }
    }
    Ok(ProbabilityField {
        values: out,
        kind: ProbabilityKind::Combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn field(w: usize, h: usize, f: impl FnMut(usize, usize) -> f64) -> ProbabilityField {
        ProbabilityField {
            values: Grid::from_fn(w, h, f),
            kind: ProbabilityKind::Raw,
        }
    }

    #[test]
    fn probability_from_potential() {
        let v = Grid::from_vec(4, 1, vec![0.0, TAU, -TAU, FRAC_PI_2]).unwrap();
        assert_eq!(potential_to_probability(&v).values.data(), &[0.0, 1.0, 1.0, 0.25]);
    }

    #[test]
    fn isolated_overshoot_is_repaired() {
        let p = field(5, 5, |x, y| if (x, y) == (2, 2) { 1.05 } else { 0.8 });
        let (s, r) = sanitize(&p);
        assert_eq!(*s.values.get(2, 2), 0.8);
        assert_eq!(r, SanitizeReport { above_one: 1, above_noise_limit: 0, repaired: 1, clamped: 0 });
    }

    #[test]
    fn coherent_patch_is_clamped() {
        let p = field(7, 7, |x, y| if (1..6).contains(&x) && (1..6).contains(&y) { 1.5 } else { 0.5 });
        let (s, r) = sanitize(&p);
        assert_eq!(*s.values.get(3, 3), 1.0);
        assert_eq!(*s.values.get(0, 0), 0.5);
        assert_eq!(r.above_one, 25);
        assert_eq!(r.above_noise_limit, 25);
        assert!(r.clamped > 0);
        assert!(s.values.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn smoothstep_k2_coefficients() {
        assert_eq!(smoothstep_coefficients(2), vec![0.0, 0.0, 0.0, 10.0, -15.0, 6.0]);
        assert_eq!(smoothstep_coefficients(0), vec![0.0, 1.0]);
        assert_eq!(smoothstep_coefficients(1), vec![0.0, 0.0, 3.0, -2.0]);
    }

    #[test]
    fn smoothstep_values() {
        for k in 0..4 {
            assert_eq!(smoothstep_weight(0.0, k).unwrap(), 0.0);
            assert_eq!(smoothstep_weight(1.0, k).unwrap(), 1.0);
        }
        assert!((smoothstep_weight(0.5, 2).unwrap() - 0.5).abs() < 1e-15);
        for p in [0.0, 0.13, 0.5, 0.77, 1.0] {
            assert_eq!(smoothstep_weight(p, 0).unwrap(), p);
            let p3 = p * p * p;
            let eq = 6.0 * p3 * p * p - 15.0 * p3 * p + 10.0 * p3;
            assert!((smoothstep_weight(p, 2).unwrap() - eq).abs() < 1e-14);
        }
        assert!(matches!(smoothstep_weight(1.2, 2), Err(Error::ProbabilityOutOfRange(_))));
        assert!(smoothstep_weight(-0.1, 2).is_err());
    }

    #[test]
    fn combine_takes_pointwise_max() {
        let a = field(2, 1, |x, _| [0.2, 0.0][x]);
        let b = field(2, 1, |x, _| [0.7, 0.4][x]);
        let c = combine_subimages(&[a.clone(), b]).unwrap();
        assert_eq!(c.values.data(), &[0.7, 0.4]);
        assert_eq!(combine_subimages(std::slice::from_ref(&a)).unwrap().values, a.values);
        assert!(combine_subimages(&[]).is_err());
        let wrong = field(3, 1, |_, _| 0.0);
        assert!(combine_subimages(&[a, wrong]).is_err());
    }

    #[test]
    fn plateau_probability() {
        let v = Grid::filled(3, 3, -PI);
        assert!(potential_to_probability(&v).values.data().iter().all(|&p| p == 0.5));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn smoothstep_is_antisymmetric(p in 0.0f64..=1.0, k in 0u32..6) {
                let s = smoothstep_weight(p, k).unwrap() + smoothstep_weight(1.0 - p, k).unwrap();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }

            #[test]
            fn smoothstep_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, k in 0u32..6) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(smoothstep_weight(lo, k).unwrap() <= smoothstep_weight(hi, k).unwrap() + 1e-15);
            }

            #[test]
            fn sanitized_values_are_probabilities(vals in proptest::collection::vec(-0.5f64..2.0, 16)) {
                let p = ProbabilityField { values: Grid::from_vec(4, 4, vals).unwrap(), kind: ProbabilityKind::Raw };
                let (s, _) = sanitize(&p);
                prop_assert!(s.values.data().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
