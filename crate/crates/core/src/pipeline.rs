//! End-to-end fusion and joint denoise-and-fuse.
//!
//! Both modes map over the reference grid and aggregate processed patches
//! into an [`Accumulator`]. In parallel mode every worker owns an
//! accumulator and the partial results are summed at the end; the
//! deterministic mode walks the grid in raster order on the calling
//! thread.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::collab::{filter_members, BlockMatch, BlockMatcher, MatchParams, PatchGroup};
use crate::color::{rgb_to_yuv, yuv_to_rgb, LUMA_SCALE};
use crate::error::{Error, Result};
use crate::fusion::{
    fuse_chroma_into, fuse_luma_into, luma_weight_summary, ExposureContext, FusionParams,
};
use crate::image::{reference_grid, Accumulator, DctPatch, ExposureSequence, Image, Patch};
use crate::transform::{Dct1Plan, Dct2Plan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Per-patch DCT fusion, with optional threshold denoising.
    FuseOnly,
    /// Block matching and collaborative filtering feeding the fusion.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub fusion: FusionParams,
    pub matching: MatchParams,
    /// Grid stride between reference positions.
    pub step: usize,
    pub mode: Mode,
    /// Noise level used by the fusion threshold in joint mode, `[0, 1]`
    /// units. `None` reuses `fusion.sigma`.
    pub sigma_fusion: Option<f64>,
    /// Walk the grid sequentially for bit-reproducible output.
    pub deterministic: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fusion: FusionParams::default(),
            matching: MatchParams::default(),
            step: 2,
            mode: Mode::FuseOnly,
            sigma_fusion: None,
            deterministic: false,
        }
    }
}

impl PipelineConfig {
    pub fn fuse_only(sigma: f64) -> Self {
        let mut cfg = Self::default();
        cfg.fusion.sigma = sigma;
        cfg
    }

    pub fn joint(sigma: f64) -> Self {
        let mut cfg = Self::fuse_only(sigma);
        cfg.mode = Mode::Joint;
        cfg
    }

    /// Sets the patch size used by both fusion and matching.
    pub fn with_block(mut self, b: usize) -> Self {
        self.fusion.block = b;
        self.matching.block = b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.fusion.validate()?;
        self.matching.validate()?;
        if self.matching.block != self.fusion.block {
            return Err(Error::InvalidParameter(format!(
                "matching block {} differs from fusion block {}",
                self.matching.block, self.fusion.block
            )));
        }
        if self.step == 0 || self.step > self.fusion.block {
            return Err(Error::InvalidParameter(format!(
                "step {} must be in 1..={}",
                self.step, self.fusion.block
            )));
        }
        if self.mode == Mode::Joint && self.fusion.sigma <= 0.0 {
            return Err(Error::InvalidParameter(
                "joint mode requires sigma > 0".into(),
            ));
        }
        if let Some(s) = self.sigma_fusion {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter("fusion sigma must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// Fusion parameters as applied after collaborative filtering.
    pub fn fusion_stage_params(&self) -> FusionParams {
        match self.mode {
            Mode::Joint => FusionParams {
                sigma: self.sigma_fusion.unwrap_or(self.fusion.sigma),
                ..self.fusion
            },
            Mode::FuseOnly => self.fusion,
        }
    }
}

/// Mean gray level of each exposure in `[0, 1]`.
///
/// For RGB input this is the mean luma divided by `sqrt(3)`, i.e. the
/// mean of `(R + G + B) / 3`.
pub fn compute_exposure_context(seq: &ExposureSequence) -> ExposureContext {
    let means = seq
        .images()
        .iter()
        .map(|img| {
            let c = img.channels();
            (0..c).map(|ch| img.channel_mean(ch)).sum::<f64>() / c as f64
        })
        .collect();
    ExposureContext {
        image_means: means,
        luma_scale: if seq.channels() == 3 { LUMA_SCALE } else { 1.0 },
    }
}

/// A sequence moved into the working color space with its exposure statistics.
#[derive(Debug, Clone)]
pub struct PreparedSequence {
    seq: ExposureSequence,
    ctx: ExposureContext,
}

impl PreparedSequence {
    /// Converts RGB to luma/chroma. Grayscale passes through as luma.
    pub fn new(seq: &ExposureSequence) -> Result<Self> {
        let ctx = compute_exposure_context(seq);
        let seq = match seq.channels() {
            1 => seq.clone(),
            3 => {
                ExposureSequence::new(seq.images().iter().map(rgb_to_yuv).collect::<Result<_>>()?)?
            }
            n => {
                return Err(Error::ChannelCount {
                    expected: 3,
                    actual: n,
                })
            }
        };
        Ok(Self { seq, ctx })
    }

    pub fn sequence(&self) -> &ExposureSequence {
        &self.seq
    }

    pub fn context(&self) -> &ExposureContext {
        &self.ctx
    }

    fn finish(&self, acc: Accumulator) -> Result<Image> {
        let out = acc.finalize()?;
        let out = if out.channels() == 3 {
            yuv_to_rgb(&out)?
        } else {
            out
        };
        Ok(out.clamped())
    }
}

fn dct_at(
    img: &Image,
    channel: usize,
    origin: (usize, usize),
    plan: &Dct2Plan,
    buf: &mut [f64],
    tmp: &mut [f64],
) -> DctPatch {
    let b = plan.size();
    let w = img.width();
    let plane = img.plane(channel);
    for dy in 0..b {
        let src = (origin.1 + dy) * w + origin.0;
        buf[dy * b..(dy + 1) * b].copy_from_slice(&plane[src..src + b]);
    }
    let mut out = DctPatch::zeros(origin, b);
    plan.forward_slice(buf, &mut out.coeffs, tmp);
    out
}

struct Scratch {
    buf: Vec<f64>,
    tmp: Vec<f64>,
    weights: Vec<f64>,
    stack: Vec<f64>,
    spec: Vec<f64>,
}

impl Scratch {
    fn new(b: usize, k: usize, k_nn: usize) -> Self {
        Self {
            buf: vec![0.0; b * b],
            tmp: vec![0.0; b * b],
            weights: vec![0.0; k],
            stack: vec![0.0; k_nn],
            spec: vec![0.0; k_nn],
        }
    }
}

/// Runs `work` over every grid position and sums the partial accumulators.
fn map_grid<F>(
    grid: &[(usize, usize)],
    shape: (usize, usize, usize),
    deterministic: bool,
    new_scratch: impl Fn() -> Scratch + Sync,
    work: F,
) -> Result<Accumulator>
where
    F: Fn((usize, usize), &mut Accumulator, &mut Scratch) -> Result<()> + Sync,
{
    let (w, h, c) = shape;
    #[cfg(feature = "parallel")]
    if !deterministic {
        return grid
            .par_iter()
            .try_fold(
                || (Accumulator::new(w, h, c), new_scratch()),
                |(mut acc, mut scratch), &pos| {
                    work(pos, &mut acc, &mut scratch)?;
                    Ok::<_, Error>((acc, scratch))
                },
            )
            .map(|r| r.map(|(acc, _)| acc))
            .try_reduce(
                || Accumulator::new(w, h, c),
                |mut a, b| {
                    a.merge(&b)?;
                    Ok(a)
                },
            );
    }
    let _ = deterministic;
    let mut acc = Accumulator::new(w, h, c);
    let mut scratch = new_scratch();
    for &pos in grid {
        work(pos, &mut acc, &mut scratch)?;
    }
    Ok(acc)
}

/// Fuses a registered sequence patch by patch.
///
/// With `fusion.sigma > 0` AC coefficients under `T * sigma` are
/// discarded before weighting and blending.
pub fn fuse_sequence(seq: &ExposureSequence, cfg: &PipelineConfig) -> Result<Image> {
    cfg.validate()?;
    let prepared = PreparedSequence::new(seq)?;
    fuse_prepared(&prepared, cfg)
}

fn fuse_prepared(prepared: &PreparedSequence, cfg: &PipelineConfig) -> Result<Image> {
    let seq = prepared.sequence();
    let b = cfg.fusion.block;
    let k = seq.len();
    let grid = reference_grid(seq.width(), seq.height(), b, cfg.step)?;
    let plan = Dct2Plan::new(b);
    let params = cfg.fusion;
    let ctx = prepared.context();
    let acc = map_grid(
        &grid,
        (seq.width(), seq.height(), seq.channels()),
        cfg.deterministic,
        || Scratch::new(b, k, 1),
        |pos, acc, s| {
            let mut fused = Patch::constant(pos, b, 0.0);
            let mut coeffs = vec![0.0; b * b];
            for c in 0..seq.channels() {
                let dcts: Vec<DctPatch> = seq
                    .images()
                    .iter()
                    .map(|img| dct_at(img, c, pos, &plan, &mut s.buf, &mut s.tmp))
                    .collect();
                let refs: Vec<&DctPatch> = dcts.iter().collect();
                if c == 0 {
                    fuse_luma_into(&refs, ctx, &params, &mut coeffs, &mut s.weights);
                } else {
                    fuse_chroma_into(&refs, &params, &mut coeffs);
                }
                plan.inverse_slice(&coeffs, &mut fused.values, &mut s.tmp);
                acc.accumulate(&fused, c)?;
            }
            Ok(())
        },
    )?;
    prepared.finish(acc)
}

/// Everything the joint procedure produces for one reference position.
#[derive(Debug, Clone)]
pub struct ReferenceOutput {
    /// Matched block positions; the reference comes first.
    pub matches: Vec<BlockMatch>,
    pub channels: Vec<ChannelOutput>,
}

#[derive(Debug, Clone)]
pub struct ChannelOutput {
    /// Collaboratively filtered groups, one per exposure, in the DCT domain.
    pub groups: Vec<PatchGroup>,
    /// One fused DCT block per matched position.
    pub fused: Vec<DctPatch>,
}

/// Joint denoise-and-fuse for a prepared sequence.
pub struct JointEngine<'a> {
    prepared: &'a PreparedSequence,
    matcher: BlockMatcher<'a>,
    plan2: Dct2Plan,
    plans1: Vec<Dct1Plan>,
    collab_cutoff: f64,
    fusion: FusionParams,
}

impl<'a> JointEngine<'a> {
    pub fn new(prepared: &'a PreparedSequence, cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let b = cfg.fusion.block;
        Ok(Self {
            prepared,
            matcher: BlockMatcher::new(prepared.sequence(), 0, cfg.matching)?,
            plan2: Dct2Plan::new(b),
            plans1: (1..=cfg.matching.k_nn).map(Dct1Plan::new).collect(),
            collab_cutoff: cfg.fusion.cutoff(),
            fusion: cfg.fusion_stage_params(),
        })
    }

    pub fn fusion_params(&self) -> &FusionParams {
        &self.fusion
    }

    /// Matches, filters and fuses the blocks around one reference position.
    pub fn process_reference(&self, reference: (usize, usize)) -> Result<ReferenceOutput> {
        let b = self.plan2.size();
        let mut s = Scratch::new(b, self.prepared.seq.len(), self.plans1.len());
        self.process_with(reference, &mut s)
    }

    fn process_with(&self, reference: (usize, usize), s: &mut Scratch) -> Result<ReferenceOutput> {
        let seq = self.prepared.sequence();
        let b = self.plan2.size();
        let matches = self.matcher.find(reference)?;
        let n = matches.len();
        let plan1 = &self.plans1[n - 1];
        let mut channels = Vec::with_capacity(seq.channels());
        for c in 0..seq.channels() {
            let groups: Vec<PatchGroup> = seq
                .images()
                .iter()
                .enumerate()
                .map(|(k, img)| {
                    let mut members: Vec<DctPatch> = matches
                        .iter()
                        .map(|m| dct_at(img, c, m.position, &self.plan2, &mut s.buf, &mut s.tmp))
                        .collect();
                    filter_members(
                        &mut members,
                        self.collab_cutoff,
                        plan1,
                        &mut s.stack,
                        &mut s.spec,
                    );
                    PatchGroup {
                        exposure: k,
                        members,
                    }
                })
                .collect();
            let fused = (0..n)
                .map(|j| {
                    let refs: Vec<&DctPatch> = groups.iter().map(|g| &g.members[j]).collect();
                    let mut out = DctPatch::zeros(matches[j].position, b);
                    if c == 0 {
                        fuse_luma_into(
                            &refs,
                            &self.prepared.ctx,
                            &self.fusion,
                            &mut out.coeffs,
                            &mut s.weights,
                        );
                    } else {
                        fuse_chroma_into(&refs, &self.fusion, &mut out.coeffs);
                    }
                    out
                })
                .collect();
            channels.push(ChannelOutput { groups, fused });
        }
        Ok(ReferenceOutput { matches, channels })
    }

    fn aggregate(
        &self,
        reference: (usize, usize),
        acc: &mut Accumulator,
        s: &mut Scratch,
    ) -> Result<()> {
        let out = self.process_with(reference, s)?;
        let b = self.plan2.size();
        let mut patch = Patch::constant(reference, b, 0.0);
        for (c, ch) in out.channels.iter().enumerate() {
            for fused in &ch.fused {
                patch.origin = fused.origin;
                self.plan2
                    .inverse_slice(&fused.coeffs, &mut patch.values, &mut s.tmp);
                acc.accumulate(&patch, c)?;
            }
        }
        Ok(())
    }
}

/// Denoises and fuses a noisy sequence in one pass.
///
/// Block matches are found on luma and shared by the chroma channels.
/// Every fused block is aggregated at its own matched position.
pub fn denoise_and_fuse(seq: &ExposureSequence, cfg: &PipelineConfig) -> Result<Image> {
    cfg.validate()?;
    if cfg.mode != Mode::Joint {
        return Err(Error::InvalidParameter(
            "denoise_and_fuse requires joint mode".into(),
        ));
    }
    let prepared = PreparedSequence::new(seq)?;
    let engine = JointEngine::new(&prepared, cfg)?;
    let b = cfg.fusion.block;
    let grid = reference_grid(seq.width(), seq.height(), b, cfg.step)?;
    let acc = map_grid(
        &grid,
        (seq.width(), seq.height(), seq.channels()),
        cfg.deterministic,
        || Scratch::new(b, seq.len(), cfg.matching.k_nn),
        |pos, acc, s| engine.aggregate(pos, acc, s),
    )?;
    prepared.finish(acc)
}

/// Dispatches on `cfg.mode`.
pub fn run(seq: &ExposureSequence, cfg: &PipelineConfig) -> Result<Image> {
    match cfg.mode {
        Mode::FuseOnly => fuse_sequence(seq, cfg),
        Mode::Joint => denoise_and_fuse(seq, cfg),
    }
}

/// Per-exposure luma weight maps for inspection.
///
/// Returns one two-channel image per exposure: channel 0 holds the DC
/// (exposure) weight, channel 1 the mean AC weight, each averaged over
/// the patches covering a pixel.
pub fn weight_maps(seq: &ExposureSequence, cfg: &PipelineConfig) -> Result<Vec<Image>> {
    cfg.validate()?;
    let prepared = PreparedSequence::new(seq)?;
    let seq = prepared.sequence();
    let (b, k) = (cfg.fusion.block, seq.len());
    let grid = reference_grid(seq.width(), seq.height(), b, cfg.step)?;
    let plan = Dct2Plan::new(b);
    let params = cfg.fusion_stage_params();
    let acc = map_grid(
        &grid,
        (seq.width(), seq.height(), 2 * k),
        cfg.deterministic,
        || Scratch::new(b, k, 1),
        |pos, acc, s| {
            let dcts: Vec<DctPatch> = seq
                .images()
                .iter()
                .map(|img| dct_at(img, 0, pos, &plan, &mut s.buf, &mut s.tmp))
                .collect();
            let refs: Vec<&DctPatch> = dcts.iter().collect();
            let (dc, ac) = luma_weight_summary(&refs, prepared.context(), &params)?;
            for i in 0..k {
                acc.accumulate(&Patch::constant(pos, b, dc[i]), 2 * i)?;
                acc.accumulate(&Patch::constant(pos, b, ac[i]), 2 * i + 1)?;
            }
            Ok(())
        },
    )?;
    let all = acc.finalize()?;
    let n = seq.width() * seq.height();
    (0..k)
        .map(|i| {
            Image::from_planar(
                seq.width(),
                seq.height(),
                2,
                all.data()[2 * i * n..2 * (i + 1) * n].to_vec(),
            )
        })
        .collect()
}
