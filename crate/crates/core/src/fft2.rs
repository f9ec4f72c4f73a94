use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// In-place 2-D DFT over both axes, unnormalized in both directions.
pub(crate) fn fft2_inplace(data: &mut Array2<Complex64>, direction: FftDirection) {
    let (ny, nx) = data.dim();
    let mut planner = FftPlanner::<f64>::new();

    let row_fft = planner.plan_fft(nx, direction);
    let mut scratch = vec![Complex64::default(); row_fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); nx];
    for mut row in data.axis_iter_mut(Axis(0)) {
        for (b, v) in buf.iter_mut().zip(row.iter()) {
            *b = *v;
        }
        row_fft.process_with_scratch(&mut buf, &mut scratch);
        for (v, b) in row.iter_mut().zip(buf.iter()) {
            *v = *b;
        }
    }

    let col_fft = planner.plan_fft(ny, direction);
    let mut scratch = vec![Complex64::default(); col_fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); ny];
    for mut col in data.axis_iter_mut(Axis(1)) {
        for (b, v) in buf.iter_mut().zip(col.iter()) {
            *b = *v;
        }
        col_fft.process_with_scratch(&mut buf, &mut scratch);
        for (v, b) in col.iter_mut().zip(buf.iter()) {
            *v = *b;
        }
    }
}

pub(crate) fn fft2(data: &mut Array2<Complex64>) {
    fft2_inplace(data, FftDirection::Forward);
}

/// Inverse 2-D DFT including the 1/(nx*ny) factor.
pub(crate) fn ifft2(data: &mut Array2<Complex64>) {
    fft2_inplace(data, FftDirection::Inverse);
    let scale = 1.0 / data.len() as f64;
    data.mapv_inplace(|v| v * scale);
}

/// Signed frequency index of bin `k` on an `n`-point axis.
pub(crate) fn signed_index(k: usize, n: usize) -> isize {
    if 2 * k < n {
        k as isize
    } else {
        k as isize - n as isize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_roundtrip() {
        let orig = Array2::from_shape_fn((6, 8), |(y, x)| Complex64::new(y as f64, x as f64 * 0.5));
        let mut a = orig.clone();
        fft2(&mut a);
        ifft2(&mut a);
        for (u, v) in a.iter().zip(orig.iter()) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let mut a = Array2::<Complex64>::zeros((4, 4));
        a[[0, 0]] = Complex64::new(1.0, 0.0);
        fft2(&mut a);
        assert!(a.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }
}
