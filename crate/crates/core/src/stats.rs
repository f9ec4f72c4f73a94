//! Small numeric helpers shared by the analysis modules and tests.

use ndarray::Array2;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn pop_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Pearson correlation; `NaN` when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "pearson inputs must have equal length");
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

/// Percentile with linear interpolation between order statistics
/// (rank `q/100 * (n-1)`).
pub fn percentile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    percentile_sorted(&s, q)
}

pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (q / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Separable Gaussian blur. Borders use point reflection about the edge
/// pixel (`f[-i] = 2 f[0] - f[i]`), which leaves linear ramps unchanged.
pub fn gaussian_blur(img: &Array2<f64>, sigma_px: f64) -> Array2<f64> {
    let radius = (3.0 * sigma_px).ceil() as isize;
    let kernel: Vec<f64> = {
        let k: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma_px * sigma_px)).exp())
            .collect();
        let s: f64 = k.iter().sum();
        k.into_iter().map(|v| v / s).collect()
    };
    let blur_line = |line: &[f64]| -> Vec<f64> {
        let n = line.len() as isize;
        let at = |i: isize| -> f64 {
            if i < 0 {
                2.0 * line[0] - line[(-i).min(n - 1) as usize]
            } else if i >= n {
                2.0 * line[(n - 1) as usize] - line[(2 * (n - 1) - i).max(0) as usize]
            } else {
                line[i as usize]
            }
        };
        (0..n)
            .map(|c| {
                kernel
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * at(c + j as isize - radius))
                    .sum()
            })
            .collect()
    };
    let (ny, nx) = img.dim();
    let mut tmp = Array2::<f64>::zeros((ny, nx));
    for y in 0..ny {
        let row: Vec<f64> = img.row(y).to_vec();
        for (x, v) in blur_line(&row).into_iter().enumerate() {
            tmp[[y, x]] = v;
        }
    }
    let mut out = Array2::<f64>::zeros((ny, nx));
    for x in 0..nx {
        let col: Vec<f64> = tmp.column(x).to_vec();
        for (y, v) in blur_line(&col).into_iter().enumerate() {
            out[[y, x]] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        assert_eq!(mean(&[1.0, 3.0]), 2.0);
        assert_eq!(pop_std(&[1.0, 3.0]), 1.0);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 4.5 / (2.0f64 * 61.0 / 6.0).sqrt()).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn percentile_interpolates() {
        let x = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&x, 0.0), 1.0);
        assert_eq!(percentile(&x, 100.0), 5.0);
        assert_eq!(percentile(&x, 50.0), 3.0);
        assert!((percentile(&x, 5.0) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn blur_keeps_ramps_and_constants() {
        let ramp = Array2::from_shape_fn((20, 30), |(y, x)| 1.0 + 0.1 * x as f64 + 0.05 * y as f64);
        let b = gaussian_blur(&ramp, 4.0);
        for (u, v) in b.iter().zip(ramp.iter()) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}
