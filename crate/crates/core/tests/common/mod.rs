//! Synthetic scenes and exposure brackets shared by the integration suites.
#![allow(dead_code)]

use dctfusion::{io, ExposureSequence, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth random field built from a coarse lattice with bilinear interpolation.
fn value_noise(w: usize, h: usize, cell: usize, rng: &mut impl Rng) -> Vec<f64> {
    let gw = w / cell + 2;
    let gh = h / cell + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.gen::<f64>()).collect();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let fx = x as f64 / cell as f64;
            let fy = y as f64 / cell as f64;
            let (ix, iy) = (fx as usize, fy as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let at = |i: usize, j: usize| lattice[j * gw + i];
            let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
            let bot = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
            out[y * w + x] = top * (1.0 - ty) + bot * ty;
        }
    }
    out
}

/// A colour test scene with flat regions, hard edges, gradients and texture.
/// Radiance spans roughly `[0.02, 1.0]`.
pub fn scene(w: usize, h: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coarse = value_noise(w, h, 32, &mut rng);
    let fine = value_noise(w, h, 4, &mut rng);
    let shapes: Vec<(f64, f64, f64, [f64; 3])> = (0..6)
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(0.08..0.25) * w.min(h) as f64,
                [
                    rng.gen_range(0.1..1.0),
                    rng.gen_range(0.1..1.0),
                    rng.gen_range(0.1..1.0),
                ],
            )
        })
        .collect();
    let tint = [
        rng.gen_range(0.7..1.0),
        rng.gen_range(0.7..1.0),
        rng.gen_range(0.7..1.0),
    ];
    Image::from_fn(w, h, 3, |x, y, c| {
        let i = y * w + x;
        let (xf, yf) = (x as f64, y as f64);
        let mut v = 0.15 + 0.6 * coarse[i] * tint[c] + 0.5 * xf / w as f64 * (c as f64 * 0.2 + 0.3);
        for (cx, cy, r, col) in &shapes {
            if (xf - cx).powi(2) + (yf - cy).powi(2) < r * r {
                v = 0.5 * v + 0.5 * col[c];
            }
        }
        if x > w / 2 && y > h / 2 {
            v += 0.12 * (xf * 0.7).sin() * (yf * 0.45).cos();
        }
        v += 0.15 * (fine[i] - 0.5);
        v.clamp(0.02, 1.0)
    })
}

/// Exposure bracket `min(scene * gain, 1)` for each gain.
pub fn bracket(scene: &Image, gains: &[f64]) -> ExposureSequence {
    ExposureSequence::new(
        gains
            .iter()
            .map(|&g| {
                let mut img = scene.clone();
                for v in img.data_mut() {
                    *v = (*v * g).min(1.0);
                }
                img
            })
            .collect(),
    )
    .unwrap()
}

pub fn with_noise(seq: &ExposureSequence, sigma_8bit: f64, seed: u64) -> ExposureSequence {
    ExposureSequence::new(
        seq.images()
            .iter()
            .enumerate()
            .map(|(k, img)| io::add_gaussian_noise(img, sigma_8bit, seed + k as u64).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn random_sequence(
    w: usize,
    h: usize,
    k: usize,
    channels: usize,
    seed: u64,
) -> ExposureSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ExposureSequence::new(
        (0..k)
            .map(|_| Image::from_fn(w, h, channels, |_, _, _| rng.gen::<f64>()))
            .collect(),
    )
    .unwrap()
}

pub fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
