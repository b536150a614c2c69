// Slice-level numeric kernels. Every reduction runs in a fixed order so that
// results are bit-reproducible.

/// Dot product with four independent accumulators, combined in a fixed order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let mut acc = [0.0f64; 4];
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

const MR: usize = 4;
const NR: usize = 4;

/// `c[m×n] += a[m×k] · b[k×n]`
///
/// Register-blocked: each `MR×NR` tile of `c` is accumulated over the whole
/// `k` range before being added back, so every entry is summed in `p` order.
pub fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let m_main = m - m % MR;
    let n_main = n - n % NR;
    for i0 in (0..m_main).step_by(MR) {
        for j0 in (0..n_main).step_by(NR) {
            let mut acc = [[0.0f64; NR]; MR];
            for p in 0..k {
                let bp: &[f64; NR] = b[p * n + j0..p * n + j0 + NR].try_into().unwrap();
                for r in 0..MR {
                    let ar = a[(i0 + r) * k + p];
                    for q in 0..NR {
                        acc[r][q] += ar * bp[q];
                    }
                }
            }
            for r in 0..MR {
                let row = &mut c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR];
                for q in 0..NR {
                    row[q] += acc[r][q];
                }
            }
        }
        for j in n_main..n {
            for r in 0..MR {
                let i = i0 + r;
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a[i * k + p] * b[p * n + j];
                }
                c[i * n + j] += acc;
            }
        }
    }
    for i in m_main..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        let mut acc = vec![0.0; n];
        for p in 0..k {
            axpy(a[i * k + p], &b[p * n..(p + 1) * n], &mut acc);
        }
        axpy(1.0, &acc, c_row);
    }
}

/// Row-major transpose of an `rows×cols` matrix.
pub fn transpose(rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = x[i * cols + j];
        }
    }
    out
}

/// `c[m×n] += a[m×k] · b[n×k]ᵀ`
pub fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm_nn(m, k, n, a, &transpose(n, k, b), c);
}

/// `c[m×n] += a[k×m]ᵀ · b[k×n]`
pub fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm_nn(m, k, n, &transpose(k, m, a), b, c);
}

/// Geometry of a 2-D cross-correlation over a `C×H×W` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding.0 - self.kernel_h) / self.stride.0 + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding.1 - self.kernel_w) / self.stride.1 + 1
    }

    /// Rows of the unfolded matrix: `C·kh·kw`.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel_h * self.kernel_w
    }

    pub fn out_positions(&self) -> usize {
        self.out_height() * self.out_width()
    }
}

/// Unfolds the input into a `(C·kh·kw) × (H'·W')` matrix; padded cells are 0.
pub fn im2col(g: &ConvGeometry, input: &[f64]) -> Vec<f64> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let positions = oh * ow;
    let mut cols = vec![0.0; g.patch_len() * positions];
    for c in 0..g.channels {
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                let dst = &mut cols[row * positions..(row + 1) * positions];
                for y in 0..oh {
                    let iy = (y * g.stride.0 + ki) as isize - g.padding.0 as isize;
                    if iy < 0 || iy as usize >= g.height {
                        continue;
                    }
                    let src_row = (c * g.height + iy as usize) * g.width;
                    for x in 0..ow {
                        let ix = (x * g.stride.1 + kj) as isize - g.padding.1 as isize;
                        if ix >= 0 && (ix as usize) < g.width {
                            dst[y * ow + x] = input[src_row + ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters-and-adds a column matrix back into `out`.
pub fn col2im_add(g: &ConvGeometry, cols: &[f64], out: &mut [f64]) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let positions = oh * ow;
    for c in 0..g.channels {
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                let src = &cols[row * positions..(row + 1) * positions];
                for y in 0..oh {
                    let iy = (y * g.stride.0 + ki) as isize - g.padding.0 as isize;
                    if iy < 0 || iy as usize >= g.height {
                        continue;
                    }
                    let dst_row = (c * g.height + iy as usize) * g.width;
                    for x in 0..ow {
                        let ix = (x * g.stride.1 + kj) as isize - g.padding.1 as isize;
                        if ix >= 0 && (ix as usize) < g.width {
                            out[dst_row + ix as usize] += src[y * ow + x];
                        }
                    }
                }
            }
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
