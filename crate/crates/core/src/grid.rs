//! Finite-difference operators and pixel binning on the fine grid.
//!
//! Arrays are indexed `[row, col]` = `[y, x]`.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis, Zip};

fn first_derivative_1d(f: ArrayView1<f64>, mut out: ArrayViewMut1<f64>, h: f64) {
    let n = f.len();
    if n < 3 {
        out.fill(0.0);
        return;
    }
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
}

fn second_derivative_1d(f: ArrayView1<f64>, mut out: ArrayViewMut1<f64>, h: f64) {
    let n = f.len();
    if n < 3 {
        out.fill(0.0);
        return;
    }
    let h2 = h * h;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    }
    if n >= 4 {
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
        out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    } else {
        out[0] = out[1];
        out[n - 1] = out[n - 2];
    }
}

/// `∂φ/∂x` along rows.
pub fn gradient_x(phi: ArrayView2<f64>, dx: f64) -> Array2<f64> {
    let mut out = Array2::zeros(phi.raw_dim());
    Zip::from(phi.rows())
        .and(out.rows_mut())
        .for_each(|f, o| first_derivative_1d(f, o, dx));
    out
}

/// Second-order central differences with one-sided second-order stencils at
/// the borders. Returns `(∂φ/∂x, ∇⊥²φ)`. An axis with fewer than three
/// samples is treated as invariant and contributes nothing.
pub fn derivatives_from_phase(phi: ArrayView2<f64>, dx: f64, dy: f64) -> (Array2<f64>, Array2<f64>) {
    let dphi_dx = gradient_x(phi, dx);
    let mut lap = Array2::zeros(phi.raw_dim());
    Zip::from(phi.rows())
        .and(lap.rows_mut())
        .for_each(|f, o| second_derivative_1d(f, o, dx));
    if phi.nrows() >= 3 {
        let mut d2y = Array2::zeros(phi.raw_dim());
        Zip::from(phi.columns())
            .and(d2y.columns_mut())
            .for_each(|f, o| second_derivative_1d(f, o, dy));
        lap += &d2y;
    }
    (dphi_dx, lap)
}

/// Area average over `block_rows × block_cols` cells.
pub fn bin_average(field: ArrayView2<f64>, block_rows: usize, block_cols: usize) -> Array2<f64> {
    let (rows, cols) = field.dim();
    assert!(rows % block_rows == 0 && cols % block_cols == 0, "field not divisible into blocks");
    let (out_r, out_c) = (rows / block_rows, cols / block_cols);
    let scale = 1.0 / (block_rows * block_cols) as f64;
    let mut out = Array2::zeros((out_r, out_c));
    for (r, row) in field.axis_iter(Axis(0)).enumerate() {
        let mut dst = out.row_mut(r / block_rows);
        for (c, chunk) in row.exact_chunks(block_cols).into_iter().enumerate() {
            dst[c] += chunk.sum();
        }
    }
    out.mapv_inplace(|v| v * scale);
    out
}
