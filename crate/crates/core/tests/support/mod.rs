//! Shared test helpers: literal criterion transcriptions and random spectra.

#![allow(dead_code)]

use evpca_core::simulate::SimRng;
use evpca_core::{CriterionKind, Spectrum};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

// ---------------------------------------------------------------------------
// Literal transcriptions of the six criteria, written term by term with no
// shared helpers.

fn tail_mean(ell: &[f64], from: usize, to: usize) -> f64 {
    // (1/(to − from)) Σ_{j=from+1}^{to} ℓⱼ, 1-based
    let mut s = 0.0;
    for j in (from + 1)..=to {
        s += ell[j - 1];
    }
    s / (to - from) as f64
}

fn log_sum(ell: &[f64], p: usize) -> f64 {
    let mut s = 0.0;
    for i in 1..=p {
        s += ell[i - 1].ln();
    }
    s
}

pub fn literal(kind: CriterionKind, ell: &[f64], d: usize, k: usize, p: usize) -> f64 {
    let (df, kf, pf) = (d as f64, k as f64, p as f64);
    let two_pi = 2.0 * std::f64::consts::PI;
    match kind {
        CriterionKind::AicFixed => {
            kf * log_sum(ell, p)
                + kf * (df - 1.0 - pf) * tail_mean(ell, p, d - 1).ln()
                + kf * ((kf - 1.0) / kf).powi(d as i32 - 1).ln()
                + kf * (df - 1.0) * (two_pi.ln() + 1.0)
                + 2.0 * (pf + 1.0) * (df - pf / 2.0)
        }
        CriterionKind::BicFixed => {
            kf * log_sum(ell, p)
                + kf * (df - 1.0 - pf) * tail_mean(ell, p, d - 1).ln()
                + kf * ((kf - 1.0) / kf).powi(d as i32 - 1).ln()
                + kf * (df - 1.0) * (two_pi.ln() + 1.0)
                + kf.ln() * (pf + 1.0) * (df - pf / 2.0)
        }
        CriterionKind::AicCirc => {
            log_sum(ell, p)
                + (df - 1.0 - pf) * tail_mean(ell, p, d - 1).ln()
                + ((kf - 1.0) / kf).powi(d as i32 - 1).ln()
                + (df - 1.0) * (two_pi.ln() + 1.0)
                + (pf + 1.0) * (2.0 * df - pf) / kf
        }
        CriterionKind::BicCirc => {
            log_sum(ell, p)
                + (df - 1.0 - pf) * tail_mean(ell, p, d - 1).ln()
                + ((kf - 1.0) / kf).powi(d as i32 - 1).ln()
                + (df - 1.0) * (two_pi.ln() + 1.0)
                + kf.ln() * (pf + 1.0) * (df - pf / 2.0) / kf
        }
        CriterionKind::AicStar => {
            log_sum(ell, p)
                + (kf - 1.0 - pf) * tail_mean(ell, p, k - 1).ln()
                + ((df - 1.0) / df).powi(k as i32 - 1).ln()
                + (kf - 1.0) * (two_pi.ln() + 1.0)
                + (pf + 1.0) * (2.0 * kf - pf) / df
        }
        CriterionKind::BicStar => {
            log_sum(ell, p)
                + (kf - 1.0 - pf) * tail_mean(ell, p, k - 1).ln()
                + ((df - 1.0) / df).powi(k as i32 - 1).ln()
                + (kf - 1.0) * (two_pi.ln() + 1.0)
                + df.ln() * (pf + 1.0) * (kf - pf / 2.0) / df
        }
    }
}

/// Random spectrum compatible with `kind`'s regime: log-normal values with a
/// few inflated leading ones, zeros past rank `k − 1` when `d > k`.
pub fn random_spectrum(rng: &mut SimRng, regime_star: bool) -> Spectrum {
    let (d, k) = if regime_star {
        let k = rng.random_range(5..40);
        (rng.random_range(k + 1..k + 60), k)
    } else {
        let d = rng.random_range(4..40);
        (d, rng.random_range(d + 1..d + 2000))
    };
    let rank = if regime_star { k - 1 } else { d };
    let spikes = rng.random_range(0..rank.min(6));
    let mut values: Vec<f64> = (0..d)
        .map(|i| {
            if i >= rank {
                0.0
            } else {
                let z: f64 = StandardNormal.sample(rng);
                let boost = if i < spikes { 5.0 } else { 0.0 };
                (0.3 * z + boost).exp()
            }
        })
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Spectrum::new(values, k).unwrap()
}
