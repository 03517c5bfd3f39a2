//! Safe wrappers over the dense matrix kernel.

/// Row-major matrix view with explicit strides.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a> View<'a> {
    pub fn dense(data: &'a [f64], rows: usize, cols: usize) -> Self {
        View { data, rows, cols, row_stride: cols, col_stride: 1 }
    }

    pub fn t(self) -> Self {
        View {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }

    fn check(&self) {
        if self.rows > 0 && self.cols > 0 {
            let last = (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride;
            assert!(last < self.data.len(), "matrix view out of bounds");
        }
    }
}

/// `c = alpha * a @ b + beta * c` with `c` dense row-major `[a.rows, b.cols]`.
pub(crate) fn gemm(alpha: f64, a: View<'_>, b: View<'_>, beta: f64, c: &mut [f64]) {
    assert_eq!(a.cols, b.rows, "gemm inner dimensions");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(c.len(), m * n, "gemm output size");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    a.check();
    b.check();
    // SAFETY: both input views were bounds-checked above, `c` is an exclusive
    // dense buffer of exactly m*n elements, and the inputs are shared slices
    // that cannot alias the mutable output.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[inline(always)]
fn axpy_body(a: f64, x: &[f64], y: &mut [f64]) {
    for (o, v) in y.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// Four interleaved partial sums, so the loop vectorizes while the
/// summation order stays fixed.
#[inline(always)]
fn dot_body(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for l in 0..4 {
            acc[l] += a[l] * b[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(all(feature = "std", target_arch = "x86_64"))]
mod simd {
    #[target_feature(enable = "avx2")]
    pub unsafe fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
        super::axpy_body(a, x, y)
    }

    #[target_feature(enable = "avx2")]
    pub unsafe fn dot(x: &[f64], y: &[f64]) -> f64 {
        super::dot_body(x, y)
    }

    pub fn available() -> bool {
        std::is_x86_feature_detected!("avx2")
    }
}

/// `y += a * x` over the common length.
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    #[cfg(all(feature = "std", target_arch = "x86_64"))]
    if simd::available() {
        // SAFETY: the CPU supports AVX2, checked at runtime just above.
        return unsafe { simd::axpy(a, x, y) };
    }
    axpy_body(a, x, y)
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    #[cfg(all(feature = "std", target_arch = "x86_64"))]
    if simd::available() {
        // SAFETY: as in `axpy`.
        return unsafe { simd::dot(x, y) };
    }
    dot_body(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_with_transposes() {
        let a: alloc::vec::Vec<f64> = (0..6).map(|x| x as f64 - 2.0).collect(); // 2x3
        let b: alloc::vec::Vec<f64> = (0..6).map(|x| (x * x) as f64 * 0.5).collect(); // 3x2
        let mut c = [0.0; 4];
        gemm(1.0, View::dense(&a, 2, 3), View::dense(&b, 3, 2), 0.0, &mut c);
        let mut naive = [0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..3 {
                    naive[i * 2 + j] += a[i * 3 + k] * b[k * 2 + j];
                }
            }
        }
        assert_eq!(c, naive);
        // (b^T a^T) = (a b)^T
        let mut ct = [0.0; 4];
        gemm(1.0, View::dense(&b, 3, 2).t(), View::dense(&a, 2, 3).t(), 0.0, &mut ct);
        assert_eq!([ct[0], ct[2], ct[1], ct[3]], naive);
    }

    #[test]
    fn vector_helpers() {
        let x: alloc::vec::Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let mut y = alloc::vec![1.0; 11];
        axpy(2.0, &x, &mut y);
        assert_eq!(y[10], 11.0);
        assert_eq!(dot(&x, &x), x.iter().map(|v| v * v).sum::<f64>());
        assert_eq!(dot_body(&x, &y), dot(&x, &y));
    }
}
