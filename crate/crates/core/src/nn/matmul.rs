//! Small dense matmul helpers shared by the convolution paths.
//!
//! `ikj` loop order keeps the inner loop contiguous over both output and
//! right-hand rows, which the compiler vectorizes without reordering the
//! per-element accumulation (fixed summation order, reproducible results).

/// `c += a * b` for row-major `a (m x k)`, `b (k x n)`, `c (m x n)`.
pub(crate) fn matmul_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (p, &aip) in a_row.iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cj, bj) in c_row.iter_mut().zip(b_row) {
                *cj += aip * bj;
            }
        }
    }
}

/// `c += a * b^T` for row-major `a (m x k)`, `b (n x k)`, `c (m x n)`: rows of
/// both operands are read contiguously. The dot product accumulates in four
/// fixed-order lanes so it vectorizes while staying reproducible.
pub(crate) fn matmul_abt_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (j, cj) in c_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = [0.0f64; 4];
            let mut ai = a_row.chunks_exact(4);
            let mut bi = b_row.chunks_exact(4);
            for (ca, cb) in (&mut ai).zip(&mut bi) {
                acc[0] += ca[0] * cb[0];
                acc[1] += ca[1] * cb[1];
                acc[2] += ca[2] * cb[2];
                acc[3] += ca[3] * cb[3];
            }
            let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            for (va, vb) in ai.remainder().iter().zip(bi.remainder()) {
                s += va * vb;
            }
            *cj += s;
        }
    }
}

/// Row-major transpose of `a (rows x cols)` into `out (cols x rows)`.
pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(out.len(), rows * cols);
    for r in 0..rows {
        let row = &a[r * cols..(r + 1) * cols];
        for (c, &v) in row.iter().enumerate() {
            out[c * rows + r] = v;
        }
    }
}
