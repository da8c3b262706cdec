//! Operation-count model for the joint procedure.
//!
//! Six per-pixel terms, in order: 2D transforms over the search
//! neighbourhood, exhaustive 3D block matching, 1D stack transforms,
//! fusion, inverse 2D transforms of fused blocks, and aggregation.
//! Transform costs assume the direct matrix-product transforms this crate
//! uses: `2 b^3` multiply-adds for a separable `b x b` block, `k^2` for a
//! length-k vector.

use std::fmt;

use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

pub fn dct2_cost(b: usize) -> f64 {
    2.0 * (b as f64).powi(3)
}

pub fn dct1_cost(k: usize) -> f64 {
    (k as f64).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostTerm {
    pub label: &'static str,
    pub ops_per_pixel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub terms: Vec<CostTerm>,
    pub per_pixel: f64,
    pub pixels: usize,
    pub total: f64,
    pub step: usize,
    /// `total / step^2`: only one reference per `step x step` cell is processed.
    pub adjusted_total: f64,
}

pub fn estimate_cost(
    cfg: &PipelineConfig,
    dims: (usize, usize),
    exposures: usize,
) -> Result<CostReport> {
    cfg.validate()?;
    if exposures == 0 {
        return Err(Error::EmptySequence);
    }
    let k_img = exposures as f64;
    let b = cfg.fusion.block;
    let b2 = (b * b) as f64;
    let ns2 = (cfg.matching.search_window as f64).powi(2);
    let knn = cfg.matching.k_nn;
    let kf = knn as f64;
    let terms = vec![
        CostTerm {
            label: "2d-dct (search neighbourhood)",
            ops_per_pixel: k_img * ns2 * dct2_cost(b),
        },
        CostTerm {
            label: "block matching",
            ops_per_pixel: 2.0 * k_img * b2 * ns2,
        },
        CostTerm {
            label: "1d-dct (stack, forward+inverse)",
            ops_per_pixel: 2.0 * k_img * b2 * dct1_cost(knn),
        },
        CostTerm {
            label: "fusion",
            ops_per_pixel: 2.0 * k_img * kf * b2,
        },
        CostTerm {
            label: "inverse 2d-dct (fused blocks)",
            ops_per_pixel: kf * dct2_cost(b),
        },
        CostTerm {
            label: "aggregation",
            ops_per_pixel: kf * b2,
        },
    ];
    let per_pixel: f64 = terms.iter().map(|t| t.ops_per_pixel).sum();
    let pixels = dims.0 * dims.1;
    let total = per_pixel * pixels as f64;
    Ok(CostReport {
        terms,
        per_pixel,
        pixels,
        total,
        step: cfg.step,
        adjusted_total: total / (cfg.step * cfg.step) as f64,
    })
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{:<34} {:>16.0} ops/pixel", t.label, t.ops_per_pixel)?;
        }
        writeln!(f, "{:<34} {:>16.0} ops/pixel", "total", self.per_pixel)?;
        writeln!(f, "{:<34} {:>16}", "pixels", self.pixels)?;
        writeln!(f, "{:<34} {:>16.4e} ops", "total ops", self.total)?;
        write!(
            f,
            "{:<34} {:>16.4e} ops",
            format!("total ops (step {})", self.step),
            self.adjusted_total
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(step: usize) -> PipelineConfig {
        let mut c = PipelineConfig::joint(0.05);
        c.step = step;
        c
    }

    #[test]
    fn matching_term() {
        let r = estimate_cost(&cfg(2), (64, 64), 4).unwrap();
        assert_eq!(r.terms[1].ops_per_pixel, 778_752.0);
        assert_eq!(r.terms.len(), 6);
    }

    #[test]
    fn linear_in_area() {
        let a = estimate_cost(&cfg(2), (64, 64), 3).unwrap();
        let b = estimate_cost(&cfg(2), (128, 64), 3).unwrap();
        assert_eq!(b.total, 2.0 * a.total);
    }

    #[test]
    fn step_divides_by_square() {
        let a = estimate_cost(&cfg(1), (100, 80), 3).unwrap();
        let b = estimate_cost(&cfg(2), (100, 80), 3).unwrap();
        assert_eq!(a.adjusted_total, 4.0 * b.adjusted_total);
        assert_eq!(a.total, b.total);
    }

    #[test]
    fn report_has_labeled_lines() {
        let text = estimate_cost(&cfg(2), (64, 64), 4).unwrap().to_string();
        assert!(text.contains("block matching"));
        assert!(text.contains("778752"));
        assert_eq!(text.lines().count(), 10);
    }
}
