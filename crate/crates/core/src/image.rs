//! Rasters, patches and overlap-average aggregation.
//!
//! Images are planar: channel `c` occupies `data[c * w * h .. (c + 1) * w * h]`,
//! stored row-major. Values are nominally in `[0, 1]` but nothing here clamps;
//! clamping happens once at export.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::constant(width, height, channels, 0.0)
    }

    pub fn constant(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Wraps planar data. Fails if the length does not match the dimensions
    /// or any value is non-finite.
    pub fn from_planar(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "image contains non-finite values".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image from a per-sample function `f(x, y, channel)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[channel * n..(channel + 1) * n]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, channel: usize) -> f64 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, channel: usize, value: f64) {
        self.data[(channel * self.height + y) * self.width + x] = value;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(
                self.width,
                self.height,
                self.channels,
                other.width,
                other.height,
                other.channels,
            ))
        }
    }

    /// Arithmetic mean of one channel.
    pub fn channel_mean(&self, channel: usize) -> f64 {
        let plane = self.plane(channel);
        plane.iter().sum::<f64>() / plane.len() as f64
    }

    pub fn clamped(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }
}

/// K registered images of identical shape, ordered by exposure.
#[derive(Debug, Clone)]
pub struct ExposureSequence {
    images: Vec<Image>,
}

impl ExposureSequence {
    pub fn new(images: Vec<Image>) -> Result<Self> {
        let first = images.first().ok_or(Error::EmptySequence)?;
        for img in &images[1..] {
            first.check_same_shape(img)?;
        }
        Ok(Self { images })
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn width(&self) -> usize {
        self.images[0].width
    }

    pub fn height(&self) -> usize {
        self.images[0].height
    }

    pub fn channels(&self) -> usize {
        self.images[0].channels
    }

    /// Reorders the exposures; `order[i]` is the source index of the new i-th image.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.images.len() {
            return Err(Error::SizeMismatch {
                expected: self.images.len(),
                actual: order.len(),
            });
        }
        let images = order
            .iter()
            .map(|&i| {
                self.images.get(i).cloned().ok_or_else(|| {
                    Error::InvalidParameter(format!("permutation index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(images)
    }
}

/// A square block of spatial samples taken from one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub origin: (usize, usize),
    pub size: usize,
    pub values: Vec<f64>,
}

impl Patch {
    pub fn constant(origin: (usize, usize), size: usize, value: f64) -> Self {
        Self {
            origin,
            size,
            values: vec![value; size * size],
        }
    }
}

/// Orthonormal 2D DCT coefficients of a [`Patch`].
///
/// `coeffs[v * size + u]` holds horizontal frequency `u` and vertical
/// frequency `v`; index 0 is the DC coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct DctPatch {
    pub origin: (usize, usize),
    pub size: usize,
    pub coeffs: Vec<f64>,
}

impl DctPatch {
    pub fn zeros(origin: (usize, usize), size: usize) -> Self {
        Self {
            origin,
            size,
            coeffs: vec![0.0; size * size],
        }
    }

    #[inline]
    pub fn dc(&self) -> f64 {
        self.coeffs[0]
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.coeffs[v * self.size + u]
    }
}

fn check_patch_bounds(
    origin: (usize, usize),
    size: usize,
    width: usize,
    height: usize,
) -> Result<()> {
    let (x, y) = origin;
    if size == 0 || x + size > width || y + size > height {
        return Err(Error::PatchOutOfBounds {
            x,
            y,
            size,
            width,
            height,
        });
    }
    Ok(())
}

/// Copies the `b x b` block at `origin` out of one channel, row-major.
pub fn extract_patch(
    img: &Image,
    channel: usize,
    origin: (usize, usize),
    b: usize,
) -> Result<Patch> {
    if channel >= img.channels {
        return Err(Error::ChannelIndex {
            channel,
            channels: img.channels,
        });
    }
    check_patch_bounds(origin, b, img.width, img.height)?;
    let plane = img.plane(channel);
    let (x0, y0) = origin;
    let mut values = Vec::with_capacity(b * b);
    for y in y0..y0 + b {
        let row = y * img.width;
        values.extend_from_slice(&plane[row + x0..row + x0 + b]);
    }
    Ok(Patch {
        origin,
        size: b,
        values,
    })
}

fn axis_positions(len: usize, b: usize, step: usize) -> Vec<usize> {
    let last = len - b;
    let mut out: Vec<usize> = (0..last).step_by(step).collect();
    out.push(last);
    out
}

/// Top-left origins of the sliding-window grid, in raster order.
///
/// Positions advance by `step` and the final row/column snaps to the image
/// edge, so every pixel is covered whenever `step <= b`. Snapped positions
/// that coincide with a regular one appear once.
pub fn reference_grid(
    width: usize,
    height: usize,
    b: usize,
    step: usize,
) -> Result<Vec<(usize, usize)>> {
    if b == 0 || b > width || b > height {
        return Err(Error::ImageTooSmall {
            width,
            height,
            size: b,
        });
    }
    if step == 0 || step > b {
        return Err(Error::InvalidParameter(format!(
            "grid step {step} must be in 1..={b}"
        )));
    }
    let xs = axis_positions(width, b, step);
    let ys = axis_positions(height, b, step);
    Ok(ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .collect())
}

/// Running per-sample sums and hit counts for overlap averaging.
///
/// Counts are kept per channel so channels may be written independently.
/// Per-worker accumulators combine with [`Accumulator::merge`].
#[derive(Debug, Clone)]
pub struct Accumulator {
    width: usize,
    height: usize,
    channels: usize,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl Accumulator {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        let n = width * height * channels;
        Self {
            width,
            height,
            channels,
            sum: vec![0.0; n],
            count: vec![0; n],
        }
    }

    pub fn accumulate(&mut self, patch: &Patch, channel: usize) -> Result<()> {
        if channel >= self.channels {
            return Err(Error::ChannelIndex {
                channel,
                channels: self.channels,
            });
        }
        check_patch_bounds(patch.origin, patch.size, self.width, self.height)?;
        if patch.values.len() != patch.size * patch.size {
            return Err(Error::SizeMismatch {
                expected: patch.size * patch.size,
                actual: patch.values.len(),
            });
        }
        let (x0, y0) = patch.origin;
        let b = patch.size;
        let base = channel * self.width * self.height;
        for (dy, row) in patch.values.chunks_exact(b).enumerate() {
            let start = base + (y0 + dy) * self.width + x0;
            for (s, v) in self.sum[start..start + b].iter_mut().zip(row) {
                *s += v;
            }
            for c in &mut self.count[start..start + b] {
                *c += 1;
            }
        }
        Ok(())
    }

    /// Elementwise sum of another accumulator's sums and counts.
    pub fn merge(&mut self, other: &Accumulator) -> Result<()> {
        if self.width != other.width
            || self.height != other.height
            || self.channels != other.channels
        {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                self.channels,
                other.width,
                other.height,
                other.channels,
            ));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
        Ok(())
    }

    pub fn count_at(&self, x: usize, y: usize, channel: usize) -> u32 {
        self.count[(channel * self.height + y) * self.width + x]
    }

    /// Divides sums by counts. Fails on the first sample never written.
    pub fn finalize(self) -> Result<Image> {
        if let Some(i) = self.count.iter().position(|&c| c == 0) {
            let plane = self.width * self.height;
            let channel = i / plane;
            let r = i % plane;
            return Err(Error::UncoveredPixel {
                x: r % self.width,
                y: r / self.width,
                channel,
            });
        }
        let data = self
            .sum
            .iter()
            .zip(&self.count)
            .map(|(s, &c)| s / c as f64)
            .collect();
        Ok(Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 1, |x, y, _| (y * w + x) as f64 / (w * h) as f64)
    }

    #[test]
    fn extract_constant() {
        let img = Image::constant(8, 8, 1, 0.5);
        let p = extract_patch(&img, 0, (0, 0), 8).unwrap();
        assert_eq!(p.values, vec![0.5; 64]);
    }

    #[test]
    fn extract_quadrant() {
        let img = ramp(16, 16);
        let p = extract_patch(&img, 0, (8, 8), 8).unwrap();
        for dy in 0..8 {
            for dx in 0..8 {
                assert_eq!(p.values[dy * 8 + dx], img.get(8 + dx, 8 + dy, 0));
            }
        }
    }

    #[test]
    fn extract_out_of_bounds() {
        let img = ramp(16, 16);
        let err = extract_patch(&img, 0, (9, 9), 8).unwrap_err();
        assert!(err.to_string().contains("patch exceeds image bounds"));
        assert!(extract_patch(&img, 1, (0, 0), 8).is_err());
    }

    fn xs(grid: &[(usize, usize)]) -> Vec<usize> {
        let mut v: Vec<usize> = grid.iter().filter(|p| p.1 == 0).map(|p| p.0).collect();
        v.dedup();
        v
    }

    #[test]
    fn grid_single_patch() {
        for step in 1..=8 {
            assert_eq!(reference_grid(8, 8, 8, step).unwrap(), vec![(0, 0)]);
        }
    }

    #[test]
    fn grid_clamps_last_position() {
        let g = reference_grid(11, 8, 8, 2).unwrap();
        assert_eq!(xs(&g), vec![0, 2, 3]);
        let g = reference_grid(16, 16, 8, 8).unwrap();
        assert_eq!(xs(&g), vec![0, 8]);
        assert_eq!(g.len(), 4);
    }

    #[test]
    fn grid_errors() {
        assert!(reference_grid(7, 16, 8, 2).is_err());
        assert!(reference_grid(16, 16, 8, 0).is_err());
        assert!(reference_grid(16, 16, 8, 9).is_err());
    }

    #[test]
    fn accumulate_averages() {
        let mut acc = Accumulator::new(8, 8, 1);
        acc.accumulate(&Patch::constant((0, 0), 8, 0.0), 0).unwrap();
        acc.accumulate(&Patch::constant((0, 0), 8, 1.0), 0).unwrap();
        let img = acc.finalize().unwrap();
        assert!(img.data().iter().all(|&v| v == 0.5));

        let mut acc = Accumulator::new(8, 8, 1);
        for _ in 0..3 {
            acc.accumulate(&Patch::constant((0, 0), 8, 0.7), 0).unwrap();
        }
        let img = acc.finalize().unwrap();
        assert!(img.data().iter().all(|&v| v == 0.7 * 3.0 / 3.0));
    }

    #[test]
    fn whole_image_patch_is_identity() {
        let img = ramp(8, 8);
        let mut acc = Accumulator::new(8, 8, 1);
        acc.accumulate(&extract_patch(&img, 0, (0, 0), 8).unwrap(), 0)
            .unwrap();
        assert_eq!(acc.finalize().unwrap(), img);
    }

    #[test]
    fn finalize_reports_uncovered() {
        let acc = Accumulator::new(4, 4, 1);
        match acc.finalize() {
            Err(Error::UncoveredPixel {
                x: 0,
                y: 0,
                channel: 0,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let mut acc = Accumulator::new(16, 8, 1);
        acc.accumulate(&Patch::constant((0, 0), 8, 1.0), 0).unwrap();
        let err = acc.finalize().unwrap_err();
        assert!(err.to_string().contains("uncovered pixels"));
        assert!(err.to_string().contains("(8, 0)"));
    }

    #[test]
    fn merge_matches_single_accumulator() {
        let img = ramp(12, 10);
        let grid = reference_grid(12, 10, 4, 3).unwrap();
        let mut whole = Accumulator::new(12, 10, 1);
        let mut a = Accumulator::new(12, 10, 1);
        let mut b = Accumulator::new(12, 10, 1);
        for (i, &pos) in grid.iter().enumerate() {
            let p = extract_patch(&img, 0, pos, 4).unwrap();
            whole.accumulate(&p, 0).unwrap();
            if i % 2 == 0 { &mut a } else { &mut b }
                .accumulate(&p, 0)
                .unwrap();
        }
        a.merge(&b).unwrap();
        let x = whole.finalize().unwrap();
        let y = a.finalize().unwrap();
        for (p, q) in x.data().iter().zip(y.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn grid_covers_every_pixel(w in 1usize..40, h in 1usize..40, b in 1usize..12, step_frac in 0.0f64..1.0) {
            prop_assume!(b <= w && b <= h);
            let step = 1 + ((b - 1) as f64 * step_frac) as usize;
            let grid = reference_grid(w, h, b, step).unwrap();
            let mut hit = vec![false; w * h];
            for &(x, y) in &grid {
                prop_assert!(x + b <= w && y + b <= h);
                for yy in y..y + b {
                    for xx in x..x + b {
                        hit[yy * w + xx] = true;
                    }
                }
            }
            prop_assert!(hit.iter().all(|&h| h));
        }

        #[test]
        fn identity_pipeline(w in 4usize..24, h in 4usize..24, step in 1usize..=4, seed in any::<u64>()) {
            let b = 4;
            let img = Image::from_fn(w, h, 2, |x, y, c| {
                let z = (x as u64 * 31 + y as u64 * 17 + c as u64 * 7) ^ seed;
                (z % 1000) as f64 / 999.0
            });
            let mut acc = Accumulator::new(w, h, 2);
            for pos in reference_grid(w, h, b, step).unwrap() {
                for c in 0..2 {
                    acc.accumulate(&extract_patch(&img, c, pos, b).unwrap(), c).unwrap();
                }
            }
            let out = acc.finalize().unwrap();
            for (p, q) in out.data().iter().zip(img.data()) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }

        #[test]
        fn finalize_is_arithmetic_mean(vals in proptest::collection::vec(-10.0f64..10.0, 1..20)) {
            let mut acc = Accumulator::new(2, 2, 1);
            for &v in &vals {
                acc.accumulate(&Patch::constant((0, 0), 2, v), 0).unwrap();
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let out = acc.finalize().unwrap();
            for &v in out.data() {
                prop_assert!((v - mean).abs() <= 1e-12);
            }
        }
    }
}
