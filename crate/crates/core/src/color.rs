//! Orthonormal luma/chroma decorrelation.
//!
//! Because the matrix is orthonormal, white noise keeps the same standard
//! deviation in every output channel and a single threshold serves all
//! three. Luma spans `[0, sqrt(3)]` for inputs in `[0, 1]`.

use crate::error::{Error, Result};
use crate::image::Image;

/// Rows are the Y, U and V basis vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorMatrix(pub [[f64; 3]; 3]);

/// Scale between the luma channel and a `[0, 1]` gray level.
pub const LUMA_SCALE: f64 = 1.732_050_807_568_877_2;

impl ColorMatrix {
    pub fn yuv() -> Self {
        let s3 = 1.0 / 3f64.sqrt();
        let s2 = std::f64::consts::SQRT_2 / 2.0;
        let s6 = 1.0 / 6f64.sqrt();
        ColorMatrix([[s3, s3, s3], [s2, 0.0, -s2], [s6, -2.0 * s6, s6]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t[j][i] = v;
            }
        }
        ColorMatrix(t)
    }

    #[inline]
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }
}

fn transform(img: &Image, m: &ColorMatrix) -> Result<Image> {
    if img.channels() != 3 {
        return Err(Error::ChannelCount {
            expected: 3,
            actual: img.channels(),
        });
    }
    let n = img.width() * img.height();
    let mut out = Image::new(img.width(), img.height(), 3);
    let (a, b, c) = (img.plane(0), img.plane(1), img.plane(2));
    let data = out.data_mut();
    for i in 0..n {
        let r = m.apply([a[i], b[i], c[i]]);
        data[i] = r[0];
        data[n + i] = r[1];
        data[2 * n + i] = r[2];
    }
    Ok(out)
}

/// RGB to (Y, U, V). Chroma stays signed.
pub fn rgb_to_yuv(img: &Image) -> Result<Image> {
    transform(img, &ColorMatrix::yuv())
}

pub fn yuv_to_rgb(img: &Image) -> Result<Image> {
    transform(img, &ColorMatrix::yuv().transpose())
}
