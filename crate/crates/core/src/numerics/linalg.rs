//! Dense kernels behind the graph ops: GEMM and im2col convolution helpers.

use crate::exec;

/// Rows per parallel GEMM block. Fixed so results never depend on the pool size.
const GEMM_ROW_BLOCK: usize = 64;
/// Below this many multiply-adds a GEMM is not split.
const GEMM_PAR_THRESHOLD: usize = 1 << 18;

/// `c = op(a) · op(b)` (or `c += ...` when `accumulate`), where `op(a)` is
/// `m x k` and `op(b)` is `k x n`, all row-major.
///
/// With `a_t`, `a` is stored as `k x m`; with `b_t`, `b` is stored as `n x k`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m * k * n >= GEMM_PAR_THRESHOLD && m > GEMM_ROW_BLOCK {
        exec::for_each_chunk_mut(c, GEMM_ROW_BLOCK * n, |blk, cb| {
            gemm_block(blk * GEMM_ROW_BLOCK, cb.len() / n, m, k, n, a, a_t, b, b_t, cb, accumulate)
        });
    } else {
        gemm_block(0, m, m, k, n, a, a_t, b, b_t, c, accumulate);
    }
}

/// Sequential reference path, used by benches and tests.
#[allow(clippy::too_many_arguments)]
pub fn gemm_seq(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    assert_eq!(c.len(), m * n);
    gemm_block(0, m, m, k, n, a, a_t, b, b_t, c, accumulate);
}

#[allow(clippy::too_many_arguments)]
fn gemm_block(
    row0: usize,
    rows: usize,
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    if rows == 0 || n == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
        return;
    }
    let (a_off, rsa, csa) = if a_t {
        (row0, 1isize, m as isize)
    } else {
        (row0 * k, k as isize, 1isize)
    };
    let (rsb, csb) = if b_t {
        (1isize, k as isize)
    } else {
        (n as isize, 1isize)
    };
    // SAFETY: strides describe in-bounds views of `a`, `b` and `c`, checked
    // against their lengths above; `c` does not alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            k,
            n,
            1.0,
            a.as_ptr().add(a_off),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of a 2-D convolution over one `channels x height x width` image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn col_cols(&self) -> usize {
        self.out_height() * self.out_width()
    }
}

/// Unfolds `img` (`c x h x w`) into `cols` (`c*k*k x oh*ow`).
pub fn im2col(g: &ConvGeom, img: &[f64], cols: &mut [f64]) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let ncols = oh * ow;
    debug_assert_eq!(cols.len(), g.col_rows() * ncols);
    for c in 0..g.channels {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        dst[oy * ow + ox] = if iy >= 0
                            && ix >= 0
                            && (iy as usize) < g.height
                            && (ix as usize) < g.width
                        {
                            img[(c * g.height + iy as usize) * g.width + ix as usize]
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `cols` back, adding into `img`.
pub fn col2im(g: &ConvGeom, cols: &[f64], img: &mut [f64]) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let ncols = oh * ow;
    for c in 0..g.channels {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let src = &cols[row * ncols..(row + 1) * ncols];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy as usize >= g.height {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix < 0 || ix as usize >= g.width {
                            continue;
                        }
                        img[(c * g.height + iy as usize) * g.width + ix as usize] +=
                            src[oy * ow + ox];
                    }
                }
            }
        }
    }
}
