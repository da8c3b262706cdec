//! Orthonormal DCT-II / DCT-III pairs.
//!
//! Both plans use a precomputed cosine table and direct matrix products.
//! At the sizes in play (patches of 8, stacks of 16) that is as fast as a
//! factorized transform and keeps the code obviously correct.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::{DctPatch, Patch};

/// `basis[k * n + i]` is the k-th orthonormal DCT-II basis vector at sample i.
fn dct_table(n: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n * n);
    let nf = n as f64;
    for k in 0..n {
        let scale = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        for i in 0..n {
            t.push(scale * (PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos());
        }
    }
    t
}

/// Separable 2D transform for `b x b` patches.
#[derive(Debug, Clone)]
pub struct Dct2Plan {
    b: usize,
    basis: Vec<f64>,
}

impl Dct2Plan {
    pub fn new(b: usize) -> Self {
        assert!(b > 0, "DCT size must be positive");
        Self {
            b,
            basis: dct_table(b),
        }
    }

    pub fn size(&self) -> usize {
        self.b
    }

    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    /// `dst = C * src * C^T`; `tmp` must hold `b * b` values.
    pub fn forward_slice(&self, src: &[f64], dst: &mut [f64], tmp: &mut [f64]) {
        let b = self.b;
        let c = &self.basis;
        // Rows: tmp[y][u] = sum_x src[y][x] C[u][x]
        for y in 0..b {
            let row = &src[y * b..(y + 1) * b];
            for u in 0..b {
                let cu = &c[u * b..(u + 1) * b];
                tmp[y * b + u] = row.iter().zip(cu).map(|(a, w)| a * w).sum();
            }
        }
        // Columns: dst[v][u] = sum_y C[v][y] tmp[y][u]
        for v in 0..b {
            let out = &mut dst[v * b..(v + 1) * b];
            out.fill(0.0);
            for y in 0..b {
                let w = c[v * b + y];
                for (o, t) in out.iter_mut().zip(&tmp[y * b..(y + 1) * b]) {
                    *o += w * t;
                }
            }
        }
    }

    /// `dst = C^T * src * C`.
    pub fn inverse_slice(&self, src: &[f64], dst: &mut [f64], tmp: &mut [f64]) {
        let b = self.b;
        let c = &self.basis;
        // Columns: tmp[y][u] = sum_v C[v][y] src[v][u]
        tmp[..b * b].fill(0.0);
        for v in 0..b {
            let srow = &src[v * b..(v + 1) * b];
            for y in 0..b {
                let w = c[v * b + y];
                for (t, s) in tmp[y * b..(y + 1) * b].iter_mut().zip(srow) {
                    *t += w * s;
                }
            }
        }
        // Rows: dst[y][x] = sum_u tmp[y][u] C[u][x]
        for y in 0..b {
            let out = &mut dst[y * b..(y + 1) * b];
            out.fill(0.0);
            for u in 0..b {
                let t = tmp[y * b + u];
                for (o, w) in out.iter_mut().zip(&c[u * b..(u + 1) * b]) {
                    *o += t * w;
                }
            }
        }
    }

    pub fn forward(&self, patch: &Patch) -> Result<DctPatch> {
        self.check(patch.size, patch.values.len())?;
        let n = self.b * self.b;
        let mut coeffs = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        self.forward_slice(&patch.values, &mut coeffs, &mut tmp);
        Ok(DctPatch {
            origin: patch.origin,
            size: self.b,
            coeffs,
        })
    }

    pub fn inverse(&self, dct: &DctPatch) -> Result<Patch> {
        self.check(dct.size, dct.coeffs.len())?;
        let n = self.b * self.b;
        let mut values = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        self.inverse_slice(&dct.coeffs, &mut values, &mut tmp);
        Ok(Patch {
            origin: dct.origin,
            size: self.b,
            values,
        })
    }

    fn check(&self, size: usize, len: usize) -> Result<()> {
        if size != self.b || len != self.b * self.b {
            return Err(Error::SizeMismatch {
                expected: self.b * self.b,
                actual: len,
            });
        }
        Ok(())
    }
}

/// Length-k transform applied along a stack of grouped coefficients.
#[derive(Debug, Clone)]
pub struct Dct1Plan {
    k: usize,
    basis: Vec<f64>,
}

impl Dct1Plan {
    pub fn new(k: usize) -> Self {
        assert!(k > 0, "DCT length must be positive");
        Self {
            k,
            basis: dct_table(k),
        }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn forward_slice(&self, src: &[f64], dst: &mut [f64]) {
        let k = self.k;
        for (j, d) in dst[..k].iter_mut().enumerate() {
            *d = self.basis[j * k..(j + 1) * k]
                .iter()
                .zip(src)
                .map(|(w, s)| w * s)
                .sum();
        }
    }

    pub fn inverse_slice(&self, src: &[f64], dst: &mut [f64]) {
        let k = self.k;
        dst[..k].fill(0.0);
        for (j, &s) in src[..k].iter().enumerate() {
            for (d, w) in dst[..k].iter_mut().zip(&self.basis[j * k..(j + 1) * k]) {
                *d += s * w;
            }
        }
    }

    pub fn forward(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check(values.len())?;
        let mut out = vec![0.0; self.k];
        self.forward_slice(values, &mut out);
        Ok(out)
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check(coeffs.len())?;
        let mut out = vec![0.0; self.k];
        self.inverse_slice(coeffs, &mut out);
        Ok(out)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.k {
            return Err(Error::SizeMismatch {
                expected: self.k,
                actual: len,
            });
        }
        Ok(())
    }
}
