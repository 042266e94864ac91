//! Reference implementations written directly from the defining formulas.
//! Nothing here calls into the library under test.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Row-major `f[x][y]` 8x8 block.
pub type Block = [f64; 64];

fn alpha(k: usize) -> f64 {
    if k == 0 {
        1.0 / 2f64.sqrt()
    } else {
        1.0
    }
}

/// Double-sum DCT-II: `F(u,v) = ¼ α(u) α(v) Σ f(x,y) cos((2x+1)uπ/16) cos((2y+1)vπ/16)`.
pub fn dct_by_summation(f: &Block) -> Block {
    let mut out = [0.0; 64];
    for u in 0..8 {
        for v in 0..8 {
            let mut s = 0.0;
            for x in 0..8 {
                for y in 0..8 {
                    s += f[x * 8 + y]
                        * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos()
                        * ((2 * y + 1) as f64 * v as f64 * PI / 16.0).cos();
                }
            }
            out[u * 8 + v] = 0.25 * alpha(u) * alpha(v) * s;
        }
    }
    out
}

pub fn idct_by_summation(fq: &Block) -> Block {
    let mut out = [0.0; 64];
    for x in 0..8 {
        for y in 0..8 {
            let mut s = 0.0;
            for u in 0..8 {
                for v in 0..8 {
                    s += alpha(u)
                        * alpha(v)
                        * fq[u * 8 + v]
                        * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos()
                        * ((2 * y + 1) as f64 * v as f64 * PI / 16.0).cos();
                }
            }
            out[x * 8 + y] = 0.25 * s;
        }
    }
    out
}

/// Paints `(x, y, w, h)` rectangles into a bitmask and counts set pixels.
pub fn rasterized_area(rects: &[(u32, u32, u32, u32)], width: u32, height: u32) -> u64 {
    let mut mask = vec![false; (width * height) as usize];
    for &(x, y, w, h) in rects {
        for yy in y..y + h {
            for xx in x..x + w {
                mask[(yy * width + xx) as usize] = true;
            }
        }
    }
    mask.iter().filter(|&&m| m).count() as u64
}

/// `m = round(3 (S − A) / S)`, halves rounded away from zero.
pub fn level_by_formula(s: u64, a: u64) -> u8 {
    (3.0 * (s - a) as f64 / s as f64).round() as u8
}

/// Grayscale image for the SSIM oracle, row-major.
#[derive(Clone)]
pub struct Gray {
    pub w: usize,
    pub h: usize,
    pub px: Vec<f64>,
}

impl Gray {
    pub fn new(w: usize, h: usize, px: Vec<f64>) -> Self {
        assert_eq!(px.len(), w * h);
        Gray { w, h, px }
    }

    // Half-sample symmetric extension: -1 -> 0, -2 -> 1, n -> n-1.
    fn at(&self, x: isize, y: isize) -> f64 {
        let fold = |i: isize, n: usize| -> usize {
            let n = n as isize;
            let mut i = i;
            loop {
                if i < 0 {
                    i = -1 - i;
                } else if i >= n {
                    i = 2 * n - 1 - i;
                } else {
                    return i as usize;
                }
            }
        };
        self.px[fold(y, self.h) * self.w + fold(x, self.w)]
    }

    fn pooled(&self) -> Gray {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let s: f64 = [(0, 0), (1, 0), (0, 1), (1, 1)]
                    .iter()
                    .map(|&(dx, dy)| self.px[(2 * y + dy) * self.w + 2 * x + dx])
                    .sum();
                px.push(s / 4.0);
            }
        }
        Gray { w, h, px }
    }
}

/// 11x11 Gaussian window, σ = 1.5, built as a full 2-D array and normalized.
fn window() -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; 11]; 11];
    let mut total = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    for row in &mut g {
        for v in row {
            *v /= total;
        }
    }
    g
}

/// `(mean cs, mean ssim)` over the full-size map.
fn ssim_means(a: &Gray, b: &Gray) -> (f64, f64) {
    let g = window();
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let (mut cs_sum, mut ssim_sum) = (0.0, 0.0);
    for y in 0..a.h as isize {
        for x in 0..a.w as isize {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, row) in g.iter().enumerate() {
                for (j, &wgt) in row.iter().enumerate() {
                    let (yy, xx) = (y + i as isize - 5, x + j as isize - 5);
                    let (va, vb) = (a.at(xx, yy), b.at(xx, yy));
                    ma += wgt * va;
                    mb += wgt * vb;
                    saa += wgt * va * va;
                    sbb += wgt * vb * vb;
                    sab += wgt * va * vb;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            let cs = (2.0 * cov + c2) / (va + vb + c2);
            cs_sum += cs;
            ssim_sum += l * cs;
        }
    }
    let n = (a.w * a.h) as f64;
    (cs_sum / n, ssim_sum / n)
}

/// Five-scale MS-SSIM: Π_{j<4} cs_j^{w_j} · ssim_4^{w_4}, negative terms clamped to 0.
pub fn ms_ssim_direct(a: &Gray, b: &Gray) -> f64 {
    const W: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    assert!(a.w >= 176 && a.h >= 176, "oracle covers the full five-scale case only");
    let (mut a, mut b) = (a.clone(), b.clone());
    let mut value = 1.0;
    for (j, w) in W.iter().enumerate() {
        let (cs, ssim) = ssim_means(&a, &b);
        let term = if j == 4 { ssim } else { cs };
        value *= term.max(0.0).powf(*w);
        a = a.pooled();
        b = b.pooled();
    }
    value
}

/// Mean single-scale SSIM.
pub fn ssim_direct(a: &Gray, b: &Gray) -> f64 {
    ssim_means(a, b).1
}

/// Least-squares slope through the origin of `y` against `x`.
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    sxy / sxx
}
