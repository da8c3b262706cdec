//! Cross-exposure block matching and collaborative DCT thresholding.
//!
//! A "3D block" is the stack of K co-located patches, one per exposure.
//! Blocks are compared with the sum over exposures of the per-image L2
//! patch distance, so each exposure is only ever compared with itself.
//! The k nearest blocks then yield, per exposure, a group of k patches
//! that is filtered jointly by a 1D DCT across the group followed by
//! hard thresholding. Filtered groups stay in the 2D DCT domain.

use crate::error::{Error, Result};
use crate::image::{DctPatch, ExposureSequence};
use crate::transform::Dct1Plan;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMatch {
    pub position: (usize, usize),
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchParams {
    /// Side of the square search window centred on the reference (odd).
    pub search_window: usize,
    /// Number of blocks per group, reference included.
    pub k_nn: usize,
    pub block: usize,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            search_window: 39,
            k_nn: 16,
            block: 8,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.search_window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "search window {} must be odd",
                self.search_window
            )));
        }
        if self.k_nn == 0 {
            return Err(Error::InvalidParameter("k_nn must be at least 1".into()));
        }
        if self.block == 0 {
            return Err(Error::InvalidParameter(
                "block size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// k patches of one exposure, all in the 2D DCT domain. The first member
/// is the reference position.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGroup {
    pub exposure: usize,
    pub members: Vec<DctPatch>,
}

fn check_origin(seq: &ExposureSequence, pos: (usize, usize), b: usize) -> Result<()> {
    if b == 0 || pos.0 + b > seq.width() || pos.1 + b > seq.height() {
        return Err(Error::PatchOutOfBounds {
            x: pos.0,
            y: pos.1,
            size: b,
            width: seq.width(),
            height: seq.height(),
        });
    }
    Ok(())
}

fn check_channel(seq: &ExposureSequence, channel: usize) -> Result<()> {
    if channel >= seq.channels() {
        return Err(Error::ChannelIndex {
            channel,
            channels: seq.channels(),
        });
    }
    Ok(())
}

/// Sums in ascending order so the result does not depend on exposure order.
fn sum_sorted(norms: &mut [f64]) -> f64 {
    norms.sort_unstable_by(f64::total_cmp);
    norms.iter().sum()
}

/// Sum over exposures of the L2 distance between the patches at `a` and `b`
/// in the given channel.
pub fn block_distance_3d(
    seq: &ExposureSequence,
    channel: usize,
    a: (usize, usize),
    b: (usize, usize),
    size: usize,
) -> Result<f64> {
    check_channel(seq, channel)?;
    check_origin(seq, a, size)?;
    check_origin(seq, b, size)?;
    let w = seq.width();
    let mut norms: Vec<f64> = seq
        .images()
        .iter()
        .map(|img| {
            let plane = img.plane(channel);
            let mut ss = 0.0;
            for dy in 0..size {
                let ra = &plane[(a.1 + dy) * w + a.0..][..size];
                let rb = &plane[(b.1 + dy) * w + b.0..][..size];
                ss += ra
                    .iter()
                    .zip(rb)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>();
            }
            ss.sqrt()
        })
        .collect();
    Ok(sum_sorted(&mut norms))
}

/// Reusable block matcher over one channel of a sequence.
pub struct BlockMatcher<'a> {
    planes: Vec<&'a [f64]>,
    width: usize,
    height: usize,
    params: MatchParams,
}

impl<'a> BlockMatcher<'a> {
    pub fn new(seq: &'a ExposureSequence, channel: usize, params: MatchParams) -> Result<Self> {
        params.validate()?;
        check_channel(seq, channel)?;
        if params.block > seq.width() || params.block > seq.height() {
            return Err(Error::ImageTooSmall {
                width: seq.width(),
                height: seq.height(),
                size: params.block,
            });
        }
        Ok(Self {
            planes: seq.images().iter().map(|i| i.plane(channel)).collect(),
            width: seq.width(),
            height: seq.height(),
            params,
        })
    }

    /// Distance from `r` to `c`, or `None` once it provably exceeds `bound`.
    fn distance_bounded(
        &self,
        r: (usize, usize),
        c: (usize, usize),
        bound: f64,
        norms: &mut [f64],
    ) -> Option<f64> {
        let b = self.params.block;
        let w = self.width;
        let mut done = 0.0;
        for (plane, n) in self.planes.iter().zip(norms.iter_mut()) {
            let mut ss = 0.0;
            for dy in 0..b {
                let ra = &plane[(r.1 + dy) * w + r.0..][..b];
                let rb = &plane[(c.1 + dy) * w + c.0..][..b];
                for (p, q) in ra.iter().zip(rb) {
                    let d = p - q;
                    ss += d * d;
                }
                if done + ss.sqrt() > bound {
                    return None;
                }
            }
            *n = ss.sqrt();
            done += *n;
        }
        Some(sum_sorted(norms))
    }

    /// The `k_nn` blocks closest to `reference` within the search window.
    ///
    /// The reference itself always comes first. The rest follow in order
    /// of increasing distance, ties broken by raster order (smaller y, then
    /// smaller x). Fewer than `k_nn` are returned only if the window holds
    /// fewer candidates.
    pub fn find(&self, reference: (usize, usize)) -> Result<Vec<BlockMatch>> {
        let b = self.params.block;
        if reference.0 + b > self.width || reference.1 + b > self.height {
            return Err(Error::PatchOutOfBounds {
                x: reference.0,
                y: reference.1,
                size: b,
                width: self.width,
                height: self.height,
            });
        }
        let half = self.params.search_window / 2;
        let keep = self.params.k_nn - 1;
        let x_lo = reference.0.saturating_sub(half);
        let x_hi = (reference.0 + half).min(self.width - b);
        let y_lo = reference.1.saturating_sub(half);
        let y_hi = (reference.1 + half).min(self.height - b);

        let mut best: Vec<BlockMatch> = Vec::with_capacity(keep + 1);
        let mut norms = vec![0.0; self.planes.len()];
        if keep > 0 {
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    if (x, y) == reference {
                        continue;
                    }
                    let bound = if best.len() == keep {
                        // Slack absorbs the summation-order difference between
                        // the running bound and the sorted final sum.
                        best[keep - 1].distance * (1.0 + 1e-12) + f64::MIN_POSITIVE
                    } else {
                        f64::INFINITY
                    };
                    let Some(d) = self.distance_bounded(reference, (x, y), bound, &mut norms)
                    else {
                        continue;
                    };
                    // Candidates arrive in raster order, so an equal distance
                    // never displaces an earlier entry.
                    let at = best.partition_point(|m| m.distance <= d);
                    if at < keep {
                        if best.len() == keep {
                            best.pop();
                        }
                        best.insert(
                            at,
                            BlockMatch {
                                position: (x, y),
                                distance: d,
                            },
                        );
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(best.len() + 1);
        out.push(BlockMatch {
            position: reference,
            distance: 0.0,
        });
        out.extend(best);
        Ok(out)
    }
}

/// One-shot version of [`BlockMatcher::find`].
pub fn find_similar_blocks(
    seq: &ExposureSequence,
    channel: usize,
    reference: (usize, usize),
    params: &MatchParams,
) -> Result<Vec<BlockMatch>> {
    BlockMatcher::new(seq, channel, *params)?.find(reference)
}

/// Filters a group in place. `stack` must hold `members.len()` values.
pub(crate) fn filter_members(
    members: &mut [DctPatch],
    cutoff: f64,
    plan: &Dct1Plan,
    stack: &mut [f64],
    spec: &mut [f64],
) {
    let k = members.len();
    let n = members[0].coeffs.len();
    for freq in 0..n {
        for (s, m) in stack.iter_mut().zip(members.iter()) {
            *s = m.coeffs[freq];
        }
        plan.forward_slice(stack, spec);
        let start = usize::from(freq == 0);
        for c in &mut spec[start..k] {
            if c.abs() < cutoff {
                *c = 0.0;
            }
        }
        plan.inverse_slice(spec, stack);
        for (s, m) in stack.iter().zip(members.iter_mut()) {
            m.coeffs[freq] = *s;
        }
    }
}

/// Collaborative hard thresholding of one exposure's group.
///
/// Each 2D frequency is transformed along the group with a 1D DCT, stack
/// coefficients below `threshold * sigma` are zeroed, and the result is
/// transformed back. Only the group mean of the patch DC is exempt.
pub fn collaborative_filter_group(
    group: &PatchGroup,
    sigma: f64,
    threshold: f64,
    plan: &Dct1Plan,
) -> Result<PatchGroup> {
    let k = group.members.len();
    if k != plan.len() {
        return Err(Error::SizeMismatch {
            expected: plan.len(),
            actual: k,
        });
    }
    let first = &group.members[0];
    if group
        .members
        .iter()
        .any(|m| m.size != first.size || m.coeffs.len() != first.size * first.size)
    {
        return Err(Error::PatchSetMismatch);
    }
    let mut out = group.clone();
    let mut stack = vec![0.0; k];
    let mut spec = vec![0.0; k];
    filter_members(
        &mut out.members,
        sigma * threshold,
        plan,
        &mut stack,
        &mut spec,
    );
    Ok(out)
}
