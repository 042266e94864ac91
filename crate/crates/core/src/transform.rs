//! 8x8 block tiling and the orthonormal 2-D DCT in matrix form.
//!
//! With `C[k][j] = ½·α(k)·cos((2j+1)kπ/16)` (α(0) = 1/√2, else 1) the forward
//! transform is `F = C·f·Cᵀ` and the inverse is `f = Cᵀ·F·C`. Blocks are
//! row-major: `block[8*x + y]` holds `f(x, y)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::colorspace::ShiftedPlane;
use crate::error::{Error, Result};

pub const N: usize = 8;

/// Spatial-domain 8x8 block.
pub type Block = [f64; 64];

/// Frequency-domain 8x8 block; `coeffs[8*u + v]` holds `F(u, v)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreqBlock {
    pub coeffs: [f64; 64],
}

impl FreqBlock {
    pub fn zero() -> Self {
        FreqBlock { coeffs: [0.0; 64] }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.coeffs[u * N + v]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PadMode {
    #[default]
    ReplicateEdge,
    ZeroFill,
}

impl std::str::FromStr for PadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replicate" | "replicate-edge" => Ok(PadMode::ReplicateEdge),
            "zero" | "zero-fill" => Ok(PadMode::ZeroFill),
            other => Err(Error::Config(format!("unknown pad mode `{other}`"))),
        }
    }
}

/// A plane cut into 8x8 tiles, row-major over tiles.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockGrid {
    pub blocks: Vec<Block>,
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub orig_width: usize,
    pub orig_height: usize,
}

impl BlockGrid {
    pub fn block(&self, bx: usize, by: usize) -> &Block {
        &self.blocks[by * self.blocks_x + bx]
    }
}

pub fn split_blocks(plane: &ShiftedPlane, pad: PadMode) -> Result<BlockGrid> {
    let (w, h) = (plane.width, plane.height);
    if w == 0 || h == 0 {
        return Err(Error::Dimension(format!("cannot tile a {w}x{h} plane")));
    }
    let blocks_x = w.div_ceil(N);
    let blocks_y = h.div_ceil(N);
    let mut blocks = Vec::with_capacity(blocks_x * blocks_y);
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            let mut b = [0.0; 64];
            for r in 0..N {
                for c in 0..N {
                    let (x, y) = (bx * N + c, by * N + r);
                    b[r * N + c] = if x < w && y < h {
                        plane.get(x, y)
                    } else {
                        match pad {
                            PadMode::ZeroFill => 0.0,
                            PadMode::ReplicateEdge => plane.get(x.min(w - 1), y.min(h - 1)),
                        }
                    };
                }
            }
            blocks.push(b);
        }
    }
    Ok(BlockGrid {
        blocks,
        blocks_x,
        blocks_y,
        orig_width: w,
        orig_height: h,
    })
}

pub fn merge_blocks(grid: &BlockGrid) -> ShiftedPlane {
    let (w, h) = (grid.orig_width, grid.orig_height);
    let mut data = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            data[y * w + x] = grid.block(x / N, y / N)[(y % N) * N + x % N];
        }
    }
    ShiftedPlane {
        width: w,
        height: h,
        data,
    }
}

/// The orthonormal DCT-II basis matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DctMatrix {
    pub c: [[f64; N]; N],
}

pub fn dct_matrix() -> &'static DctMatrix {
    static MATRIX: OnceLock<DctMatrix> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let mut c = [[0.0; N]; N];
        for (k, row) in c.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = if k == 0 {
                    0.5 * (0.5f64).sqrt()
                } else {
                    0.5 * (((2 * j + 1) * k) as f64 * PI / 16.0).cos()
                };
            }
        }
        DctMatrix { c }
    })
}

// A·m·Aᵀ with A = C, or A = Cᵀ when `left_t`
fn sandwich(m: &[f64; 64], left_t: bool) -> [f64; 64] {
    let c = &dct_matrix().c;
    let at = |i: usize, j: usize| if left_t { c[j][i] } else { c[i][j] };
    let mut tmp = [0.0; 64];
    for i in 0..N {
        for j in 0..N {
            let mut s = 0.0;
            for k in 0..N {
                s += at(i, k) * m[k * N + j];
            }
            tmp[i * N + j] = s;
        }
    }
    let mut out = [0.0; 64];
    for i in 0..N {
        for j in 0..N {
            let mut s = 0.0;
            for k in 0..N {
                s += tmp[i * N + k] * at(j, k);
            }
            out[i * N + j] = s;
        }
    }
    out
}

/// `F = C·f·Cᵀ`.
pub fn forward_dct(block: &Block) -> FreqBlock {
    FreqBlock {
        coeffs: sandwich(block, false),
    }
}

/// `f = Cᵀ·F·C`.
pub fn inverse_dct(freq: &FreqBlock) -> Block {
    sandwich(&freq.coeffs, true)
}
