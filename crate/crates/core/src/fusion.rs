//! Per-patch fusion of K co-located DCT blocks.
//!
//! Detail (AC) coefficients are blended with weights proportional to
//! `|c|^p`, so the exposure with the most local contrast dominates each
//! frequency. The luma DC coefficient is blended by how close the patch
//! and its whole image sit to mid-gray. Chroma uses the magnitude rule for
//! every coefficient, DC included. With a noise level `sigma > 0`, AC
//! coefficients below `T * sigma` are zeroed before weighting and before
//! blending; a frequency where every exposure falls below the threshold
//! fuses to exactly zero.

use crate::color::LUMA_SCALE;
use crate::error::{Error, Result};
use crate::image::DctPatch;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    /// Exponent on coefficient magnitudes.
    pub p: f64,
    /// Threshold multiplier T; coefficients below `T * sigma` are dropped.
    pub threshold: f64,
    /// Noise standard deviation in `[0, 1]` units. Zero disables thresholding.
    pub sigma: f64,
    /// Width of the local (patch mean) exposure Gaussian.
    pub sigma_l: f64,
    /// Width of the global (image mean) exposure Gaussian.
    pub sigma_g: f64,
    /// Patch side in pixels.
    pub block: usize,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            p: 7.0,
            threshold: 2.7,
            sigma: 0.0,
            sigma_l: 0.2,
            sigma_g: 0.2,
            block: 8,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.p > 0.0 && self.p.is_finite()) {
            return bad("p must be positive");
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return bad("threshold multiplier must be >= 0");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be >= 0");
        }
        if !(self.sigma_l > 0.0 && self.sigma_g > 0.0) {
            return bad("sigma_l and sigma_g must be positive");
        }
        if self.block == 0 {
            return bad("block size must be positive");
        }
        Ok(())
    }

    /// Absolute coefficient threshold `T * sigma`.
    pub fn cutoff(&self) -> f64 {
        self.threshold * self.sigma
    }
}

/// Whole-image exposure statistics used by the luma DC rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureContext {
    /// Mean gray level of each exposure, in `[0, 1]`.
    pub image_means: Vec<f64>,
    /// Ratio between the luma channel's range and `[0, 1]`:
    /// `sqrt(3)` for the orthonormal color transform, 1 for grayscale.
    pub luma_scale: f64,
}

impl ExposureContext {
    pub fn new(image_means: Vec<f64>) -> Self {
        Self {
            image_means,
            luma_scale: LUMA_SCALE,
        }
    }

    pub fn len(&self) -> usize {
        self.image_means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image_means.is_empty()
    }
}

/// Zeroes every AC coefficient with magnitude below `threshold * sigma`.
/// The DC coefficient is never touched.
pub fn hard_threshold(coeffs: &DctPatch, sigma: f64, threshold: f64) -> DctPatch {
    let cutoff = sigma * threshold;
    let mut out = coeffs.clone();
    for c in &mut out.coeffs[1..] {
        if c.abs() < cutoff {
            *c = 0.0;
        }
    }
    out
}

#[inline]
fn powp(x: f64, p: f64) -> f64 {
    if p == 7.0 {
        let x2 = x * x;
        x2 * x2 * x2 * x
    } else if p.fract() == 0.0 && p <= 64.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

#[inline]
fn cut(c: f64, cutoff: f64) -> f64 {
    if c.abs() < cutoff {
        0.0
    } else {
        c
    }
}

/// Magnitude-power weights for one frequency.
///
/// Magnitudes below `threshold * sigma` count as zero. If nothing survives
/// the result is all zeros; otherwise the weights sum to one.
pub fn ac_weights(mags: &[f64], p: f64, sigma: f64, threshold: f64) -> Vec<f64> {
    let cutoff = sigma * threshold;
    let kept: Vec<f64> = mags.iter().map(|&m| cut(m.abs(), cutoff)).collect();
    let max = kept.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return vec![0.0; mags.len()];
    }
    let raw: Vec<f64> = kept.iter().map(|&m| powp(m / max, p)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// Weighted blend of signed coefficients at one frequency. Thresholded
/// values drive both the weights and the blend.
#[inline]
fn blend(values: impl Iterator<Item = f64> + Clone, p: f64, cutoff: f64) -> f64 {
    let max = values
        .clone()
        .map(|c| cut(c, cutoff).abs())
        .fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let inv = 1.0 / max;
    let (mut num, mut den) = (0.0, 0.0);
    for c in values {
        let c = cut(c, cutoff);
        let w = powp(c.abs() * inv, p);
        num += w * c;
        den += w;
    }
    num / den
}

/// Exposure weights for the luma DC coefficient.
///
/// Each exposure scores `exp(-(m - 0.5)^2 / sigma_l^2) * exp(-(mu - 0.5)^2 / sigma_g^2)`
/// where `m` is the patch mean and `mu` the image mean, both in `[0, 1]`.
pub fn dc_weights_luma(
    patch_means: &[f64],
    ctx: &ExposureContext,
    sigma_l: f64,
    sigma_g: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; patch_means.len()];
    dc_weights_into(
        patch_means.iter().cloned(),
        &ctx.image_means,
        sigma_l,
        sigma_g,
        &mut out,
    );
    out
}

fn dc_weights_into(
    patch_means: impl Iterator<Item = f64>,
    image_means: &[f64],
    sigma_l: f64,
    sigma_g: f64,
    out: &mut [f64],
) {
    let (il, ig) = (1.0 / (sigma_l * sigma_l), 1.0 / (sigma_g * sigma_g));
    let mut best = f64::NEG_INFINITY;
    for ((o, m), mu) in out.iter_mut().zip(patch_means).zip(image_means) {
        *o = -(m - 0.5).powi(2) * il - (mu - 0.5).powi(2) * ig;
        best = best.max(*o);
    }
    // Shift by the largest exponent so the normalization cannot underflow.
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - best).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn check_set(dcts: &[&DctPatch]) -> Result<(usize, (usize, usize))> {
    let first = dcts.first().ok_or(Error::EmptySequence)?;
    let (b, origin) = (first.size, first.origin);
    for d in dcts {
        if d.size != b || d.origin != origin || d.coeffs.len() != b * b {
            return Err(Error::PatchSetMismatch);
        }
    }
    Ok((b, origin))
}

/// Fuses K luma DCT blocks. `params.sigma` drives the AC threshold.
pub fn fuse_patch_luma(
    dcts: &[&DctPatch],
    ctx: &ExposureContext,
    params: &FusionParams,
) -> Result<DctPatch> {
    let (b, origin) = check_set(dcts)?;
    if ctx.len() != dcts.len() {
        return Err(Error::SizeMismatch {
            expected: ctx.len(),
            actual: dcts.len(),
        });
    }
    let mut out = DctPatch::zeros(origin, b);
    let mut scratch = vec![0.0; dcts.len()];
    fuse_luma_into(dcts, ctx, params, &mut out.coeffs, &mut scratch);
    Ok(out)
}

/// Fuses K chroma DCT blocks. DC uses raw magnitudes, AC thresholded ones.
pub fn fuse_patch_chroma(dcts: &[&DctPatch], params: &FusionParams) -> Result<DctPatch> {
    let (b, origin) = check_set(dcts)?;
    let mut out = DctPatch::zeros(origin, b);
    fuse_chroma_into(dcts, params, &mut out.coeffs);
    Ok(out)
}

pub(crate) fn fuse_luma_into(
    dcts: &[&DctPatch],
    ctx: &ExposureContext,
    params: &FusionParams,
    out: &mut [f64],
    scratch: &mut [f64],
) {
    let b = dcts[0].size;
    let cutoff = params.cutoff();
    let to_mean = 1.0 / (b as f64 * ctx.luma_scale);
    dc_weights_into(
        dcts.iter().map(|d| d.coeffs[0] * to_mean),
        &ctx.image_means,
        params.sigma_l,
        params.sigma_g,
        scratch,
    );
    out[0] = dcts
        .iter()
        .zip(scratch.iter())
        .map(|(d, w)| w * d.coeffs[0])
        .sum();
    for (i, o) in out.iter_mut().enumerate().take(b * b).skip(1) {
        *o = blend(dcts.iter().map(|d| d.coeffs[i]), params.p, cutoff);
    }
}

pub(crate) fn fuse_chroma_into(dcts: &[&DctPatch], params: &FusionParams, out: &mut [f64]) {
    let b = dcts[0].size;
    let cutoff = params.cutoff();
    out[0] = blend(dcts.iter().map(|d| d.coeffs[0]), params.p, 0.0);
    for (i, o) in out.iter_mut().enumerate().take(b * b).skip(1) {
        *o = blend(dcts.iter().map(|d| d.coeffs[i]), params.p, cutoff);
    }
}

/// Per-exposure weights applied by the luma rule at one patch: the DC
/// weight and the mean AC weight over frequencies where something survived.
pub fn luma_weight_summary(
    dcts: &[&DctPatch],
    ctx: &ExposureContext,
    params: &FusionParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (b, _) = check_set(dcts)?;
    let to_mean = 1.0 / (b as f64 * ctx.luma_scale);
    let means: Vec<f64> = dcts.iter().map(|d| d.dc() * to_mean).collect();
    let dc = dc_weights_luma(&means, ctx, params.sigma_l, params.sigma_g);
    let mut ac = vec![0.0; dcts.len()];
    let mut live = 0usize;
    for i in 1..b * b {
        let mags: Vec<f64> = dcts.iter().map(|d| d.coeffs[i].abs()).collect();
        let w = ac_weights(&mags, params.p, params.sigma, params.threshold);
        if w.iter().any(|&v| v > 0.0) {
            live += 1;
            for (a, v) in ac.iter_mut().zip(&w) {
                *a += v;
            }
        }
    }
    if live > 0 {
        for a in &mut ac {
            *a /= live as f64;
        }
    }
    Ok((dc, ac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn patch(coeffs: Vec<f64>) -> DctPatch {
        let b = (coeffs.len() as f64).sqrt() as usize;
        DctPatch {
            origin: (0, 0),
            size: b,
            coeffs,
        }
    }

    #[test]
    fn threshold_definition() {
        let sigma = 0.1;
        let mut c = vec![0.0; 4];
        c[0] = 0.01;
        c[1] = 2.6 * sigma;
        c[2] = -3.0 * sigma;
        c[3] = 2.7 * sigma;
        let p = patch(c.clone());
        assert_eq!(hard_threshold(&p, 0.0, 2.7), p);
        let t = hard_threshold(&p, sigma, 2.7);
        assert_eq!(t.coeffs[0], 0.01);
        assert_eq!(t.coeffs[1], 0.0);
        assert_eq!(t.coeffs[2], -3.0 * sigma);

        let dc_only = hard_threshold(&patch(vec![0.01, 0.0, 0.0, 0.0]), 1.0, 2.7);
        assert_eq!(dc_only.coeffs[0], 0.01);
    }

    #[test]
    fn ac_weight_values() {
        let w = ac_weights(&[2.0, 1.0], 1.0, 0.0, 2.7);
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-12 && (w[1] - 1.0 / 3.0).abs() < 1e-12);
        let w = ac_weights(&[2.0, 1.0], 7.0, 0.0, 2.7);
        assert!((w[0] - 128.0 / 129.0).abs() < 1e-12 && (w[1] - 1.0 / 129.0).abs() < 1e-12);
        let w = ac_weights(&[0.3; 5], 7.0, 0.0, 2.7);
        assert!(w.iter().all(|v| (v - 0.2).abs() < 1e-12));
        let w = ac_weights(&[0.1, 0.2], 7.0, 0.1, 2.7);
        assert_eq!(w, vec![0.0, 0.0]);
    }

    #[test]
    fn dc_weight_values() {
        let ctx = ExposureContext::new(vec![0.5; 3]);
        let w = dc_weights_luma(&[0.5; 3], &ctx, 0.2, 0.2);
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));

        let ctx = ExposureContext::new(vec![0.9]);
        assert_eq!(dc_weights_luma(&[0.1], &ctx, 0.2, 0.2), vec![1.0]);

        // exponent (0.4)^2 / 0.2^2 = 4
        let ctx = ExposureContext::new(vec![0.5, 0.5]);
        let w = dc_weights_luma(&[0.5, 0.9], &ctx, 0.2, 0.2);
        let expected = 1.0 / (1.0 + (-4.0f64).exp());
        assert!((w[0] - expected).abs() < 1e-12);
        assert!((w[0] - 0.98201).abs() < 1e-5);
    }

    #[test]
    fn dc_weights_survive_extreme_exponents() {
        let ctx = ExposureContext::new(vec![0.0, 1.0]);
        let w = dc_weights_luma(&[0.0, 1.0], &ctx, 0.01, 0.01);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn luma_identity_on_copies() {
        let p = patch(
            (0..64)
                .map(|i| ((i * 37) % 11) as f64 * 0.1 - 0.5)
                .collect(),
        );
        let ctx = ExposureContext::new(vec![0.3, 0.6, 0.8]);
        let f = fuse_patch_luma(&[&p, &p, &p], &ctx, &FusionParams::default()).unwrap();
        for (a, b) in f.coeffs.iter().zip(&p.coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
        let ctx1 = ExposureContext::new(vec![0.1]);
        let f = fuse_patch_luma(&[&p], &ctx1, &FusionParams::default()).unwrap();
        assert_eq!(f, p);
    }

    #[test]
    fn disjoint_ac_support_is_kept() {
        let mut a = vec![0.0; 64];
        let mut b = vec![0.0; 64];
        a[0] = 4.0;
        b[0] = 4.0;
        a[3] = 0.7;
        a[10] = -0.2;
        b[5] = -1.1;
        b[60] = 0.05;
        let (pa, pb) = (patch(a.clone()), patch(b.clone()));
        let ctx = ExposureContext::new(vec![0.5, 0.5]);
        let f = fuse_patch_luma(&[&pa, &pb], &ctx, &FusionParams::default()).unwrap();
        for i in 1..64 {
            assert_eq!(f.coeffs[i], a[i] + b[i]);
        }
    }

    #[test]
    fn chroma_dc_prefers_saturation() {
        let a = patch(vec![0.1, 0.0, 0.0, 0.0]);
        let b = patch(vec![-0.6, 0.0, 0.0, 0.0]);
        let f = fuse_patch_chroma(&[&a, &b], &FusionParams::default()).unwrap();
        let w = 0.1f64.powi(7) / (0.1f64.powi(7) + 0.6f64.powi(7));
        assert!((w - 3.57e-6).abs() < 1e-8);
        let expected = w * 0.1 + (1.0 - w) * -0.6;
        assert!((f.coeffs[0] - expected).abs() < 1e-12);
        assert!((f.coeffs[0] - -0.5999975).abs() < 1e-7);
    }

    #[test]
    fn chroma_zero_patch_is_ignored() {
        let z = DctPatch::zeros((0, 0), 4);
        let n = patch((0..16).map(|i| (i as f64 - 7.5) * 0.03).collect());
        let f = fuse_patch_chroma(&[&z, &n], &FusionParams::default()).unwrap();
        assert_eq!(f.coeffs, n.coeffs);
        let f = fuse_patch_chroma(&[&n, &n], &FusionParams::default()).unwrap();
        assert_eq!(f.coeffs, n.coeffs);
    }

    #[test]
    fn chroma_dc_not_thresholded() {
        let a = patch(vec![0.01, 0.01, 0.0, 0.0]);
        let params = FusionParams {
            sigma: 1.0,
            ..Default::default()
        };
        let f = fuse_patch_chroma(&[&a, &a], &params).unwrap();
        assert!((f.coeffs[0] - 0.01).abs() < 1e-15);
        assert_eq!(f.coeffs[1], 0.0);
    }

    #[test]
    fn mismatched_sets_rejected() {
        let a = DctPatch::zeros((0, 0), 8);
        let b = DctPatch::zeros((1, 0), 8);
        let c = DctPatch::zeros((0, 0), 4);
        let ctx = ExposureContext::new(vec![0.5, 0.5]);
        let params = FusionParams::default();
        assert!(fuse_patch_luma(&[&a, &b], &ctx, &params).is_err());
        assert!(fuse_patch_chroma(&[&a, &c], &params).is_err());
        assert!(fuse_patch_luma(&[&a], &ctx, &params).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(FusionParams::default().validate().is_ok());
        for bad in [
            FusionParams {
                p: 0.0,
                ..Default::default()
            },
            FusionParams {
                threshold: -1.0,
                ..Default::default()
            },
            FusionParams {
                sigma: -0.1,
                ..Default::default()
            },
            FusionParams {
                sigma_l: 0.0,
                ..Default::default()
            },
            FusionParams {
                block: 0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    proptest! {
        #[test]
        fn weights_normalized_and_equivariant(mags in proptest::collection::vec(0.0f64..2.0, 1..8),
                                              p in 0.5f64..9.0, rot in 0usize..8) {
            let w = ac_weights(&mags, p, 0.0, 2.7);
            let total: f64 = w.iter().sum();
            if mags.iter().any(|&m| m > 0.0) {
                prop_assert!((total - 1.0).abs() <= 1e-12);
            } else {
                prop_assert_eq!(total, 0.0);
            }
            prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let r = rot % mags.len();
            let mut rotated = mags.clone();
            rotated.rotate_left(r);
            let wr = ac_weights(&rotated, p, 0.0, 2.7);
            let mut expect = w.clone();
            expect.rotate_left(r);
            for (a, b) in wr.iter().zip(&expect) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn weights_monotone(mags in proptest::collection::vec(0.01f64..2.0, 2..6), bump in 0.0f64..1.0) {
            let w0 = ac_weights(&mags, 7.0, 0.0, 2.7);
            let mut up = mags.clone();
            up[0] += bump;
            let w1 = ac_weights(&up, 7.0, 0.0, 2.7);
            prop_assert!(w1[0] >= w0[0] - 1e-15);
        }

        #[test]
        fn ac_fusion_scale_equivariant(vals in proptest::collection::vec(-1.0f64..1.0, 3), s in 0.01f64..100.0) {
            let f0 = blend(vals.iter().cloned(), 7.0, 0.0);
            let f1 = blend(vals.iter().map(|v| v * s), 7.0, 0.0);
            prop_assert!((f1 - s * f0).abs() <= 1e-12 * s.max(1.0));
        }

        #[test]
        fn subthreshold_frequency_fuses_to_zero(vals in proptest::collection::vec(-0.26f64..0.26, 1..6)) {
            prop_assert_eq!(blend(vals.iter().cloned(), 7.0, 2.7 * 0.1), 0.0);
        }

        #[test]
        fn luma_dc_in_convex_hull(dcs in proptest::collection::vec(0.0f64..13.8, 1..6),
                                  mus in proptest::collection::vec(0.0f64..1.0, 6)) {
            let ps: Vec<DctPatch> = dcs.iter().map(|&d| {
                let mut p = DctPatch::zeros((0, 0), 8);
                p.coeffs[0] = d;
                p
            }).collect();
            let refs: Vec<&DctPatch> = ps.iter().collect();
            let ctx = ExposureContext::new(mus[..dcs.len()].to_vec());
            let f = fuse_patch_luma(&refs, &ctx, &FusionParams::default()).unwrap();
            let lo = dcs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = dcs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(f.dc() >= lo - 1e-12 && f.dc() <= hi + 1e-12);
            let means: Vec<f64> = dcs.iter().map(|d| d / (8.0 * LUMA_SCALE)).collect();
            let w = dc_weights_luma(&means, &ctx, 0.2, 0.2);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(w.iter().all(|&v| v > 0.0));
        }
    }
}
