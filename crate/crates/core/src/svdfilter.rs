//! Singular value decomposition clutter filter on the space-time
//! (Casorati) matrix of each short-time window.
//!
//! Only the dominant `k` right singular vectors are computed. Small windows
//! go through the exact Gram eigenproblem; larger ones use block subspace
//! iteration with Rayleigh-Ritz extraction. All reductions over pixels run
//! in fixed-size chunks summed in chunk order, so results do not depend on
//! the rayon thread count.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::Window;

const OVERSAMPLE: usize = 8;
/// Up to this window length the Gram eigenproblem is cheaper than a
/// typical subspace iteration run.
const EXACT_MAX_N: usize = 1024;
const MAX_ITER: usize = 100;
const RESIDUAL_TOL: f64 = 1e-7;
const PIXEL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvdFilterSpec {
    pub cutoff_hz: f64,
    #[serde(default)]
    pub rank_override: Option<usize>,
}

impl Default for SvdFilterSpec {
    fn default() -> Self {
        SvdFilterSpec {
            cutoff_hz: 200.0,
            rank_override: None,
        }
    }
}

impl SvdFilterSpec {
    pub fn with_rank(k: usize) -> Self {
        SvdFilterSpec {
            cutoff_hz: 0.0,
            rank_override: Some(k),
        }
    }

    /// Number of rejected components for a window of `n_win` frames.
    pub fn rank(&self, sample_rate_hz: f64, n_win: usize) -> Result<usize> {
        if !(self.cutoff_hz >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff_hz must be >= 0, got {}",
                self.cutoff_hz
            )));
        }
        match self.rank_override {
            Some(k) if k >= n_win => Err(Error::InvalidParameter(format!(
                "rank_override {k} must be < n_win {n_win}"
            ))),
            Some(k) => Ok(k),
            None => cutoff_to_rank(self.cutoff_hz, sample_rate_hz, n_win),
        }
    }
}

/// `round(2 * n_win * cutoff / f_S)` clamped to `[1, n_win / 4]`: the count
/// of two-sided DFT bins with |f| below the cutoff.
pub fn cutoff_to_rank(cutoff_hz: f64, sample_rate_hz: f64, n_win: usize) -> Result<usize> {
    if !(cutoff_hz >= 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff_hz} Hz must be in [0, f_S/2 = {} Hz)",
            sample_rate_hz / 2.0
        )));
    }
    let k = (2.0 * n_win as f64 * cutoff_hz / sample_rate_hz).round() as usize;
    Ok(k.clamp(1, (n_win / 4).max(1)))
}

/// Dominant right singular vectors of a Casorati matrix.
#[derive(Debug, Clone)]
pub struct TopSingular {
    /// Non-increasing singular values.
    pub values: Vec<f64>,
    /// `n_win x k`, orthonormal columns.
    pub right_vectors: Array2<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClutterReport {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub energy_in: f64,
    pub energy_out: f64,
}

/// `A - sum_{i<=k} s_i u_i v_i^*` on the window's Casorati matrix.
pub fn svd_clutter_filter(window: &Window, spec: &SvdFilterSpec, sample_rate_hz: f64) -> Result<Window> {
    let mut out = window.clone();
    svd_clutter_filter_inplace(&mut out, spec, sample_rate_hz)?;
    Ok(out)
}

pub fn svd_clutter_filter_inplace(
    window: &mut Window,
    spec: &SvdFilterSpec,
    sample_rate_hz: f64,
) -> Result<ClutterReport> {
    let k = spec.rank(sample_rate_hz, window.n_win())?;
    let energy_in = window.energy();
    if k == 0 {
        return Ok(ClutterReport {
            rank: 0,
            singular_values: vec![],
            energy_in,
            energy_out: energy_in,
        });
    }
    let top = top_singular(&window.data, k).map_err(|reason| Error::Decomposition {
        window: window.index,
        reason,
    })?;
    remove_subspace(&mut window.data, &top.right_vectors);
    Ok(ClutterReport {
        rank: k,
        singular_values: top.values,
        energy_in,
        energy_out: window.energy(),
    })
}

/// Rejected part `A V V^H` (numerical rank <= number of columns of `v`).
pub fn project_onto(a: &Array2<Complex64>, v: &Array2<Complex64>) -> Array2<Complex64> {
    let y = mul_av(a, v);
    let (np, n) = a.dim();
    let k = v.dim().1;
    Array2::from_shape_fn((np, n), |(p, t)| {
        (0..k).map(|i| y[[p, i]] * v[[t, i]].conj()).sum()
    })
}

/// `A <- A - (A V) V^H`.
pub fn remove_subspace(a: &mut Array2<Complex64>, v: &Array2<Complex64>) {
    let y = mul_av(a, v);
    let (n, k) = v.dim();
    let vconj: Vec<Complex64> = (0..n * k).map(|j| v[[j / k, j % k]].conj()).collect();
    let a_slice = a.as_slice_mut().expect("contiguous Casorati matrix");
    let y_slice = y.as_slice().expect("contiguous");
    a_slice
        .par_chunks_mut(n)
        .zip(y_slice.par_chunks(k))
        .for_each(|(row, yrow)| {
            for (t, val) in row.iter_mut().enumerate() {
                let mut acc = Complex64::default();
                for i in 0..k {
                    acc += yrow[i] * vconj[t * k + i];
                }
                *val -= acc;
            }
        });
}

/// Top-`k` singular triplets' values and right vectors.
pub fn top_singular(a: &Array2<Complex64>, k: usize) -> std::result::Result<TopSingular, String> {
    let (_, n) = a.dim();
    let k = k.min(n);
    let l = (k + OVERSAMPLE).min(n);
    if l == n || n <= EXACT_MAX_N {
        exact_top(a, k)
    } else {
        subspace_top(a, k, l)
    }
}

fn exact_top(a: &Array2<Complex64>, k: usize) -> std::result::Result<TopSingular, String> {
    let n = a.dim().1;
    let gram = gram(a);
    let g = DMatrix::from_fn(n, n, |i, j| gram[[i, j]]);
    let (vals, vecs) = hermitian_eigen(g)?;
    let right_vectors = Array2::from_shape_fn((n, k), |(t, i)| vecs[(t, vals[i].1)]);
    Ok(TopSingular {
        values: vals.iter().take(k).map(|(e, _)| e.max(0.0).sqrt()).collect(),
        right_vectors,
    })
}

fn subspace_top(a: &Array2<Complex64>, k: usize, l: usize) -> std::result::Result<TopSingular, String> {
    let n = a.dim().1;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c1a7);
    let mut v = Array2::from_shape_fn((n, l), |_| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    orthonormalize(&mut v, &mut rng);

    let mut best: Option<TopSingular> = None;
    for _ in 0..MAX_ITER {
        let y = mul_av(a, &v);
        let w = mul_ahy(a, &y);
        // Rayleigh-Ritz on span(V): H = (AV)^H (AV)
        let h = DMatrix::from_fn(l, l, |i, j| {
            (0..y.dim().0).fold(Complex64::default(), |acc, p| acc + y[[p, i]].conj() * y[[p, j]])
        });
        let (vals, q) = hermitian_eigen(h)?;
        let ritz: Array2<Complex64> = Array2::from_shape_fn((n, l), |(t, c)| {
            (0..l).map(|j| v[[t, j]] * q[(j, vals[c].1)]).sum()
        });
        // residual of the top-k Ritz pairs: ||A^H A x - theta x|| / theta_1
        let theta1 = vals[0].0.max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for c in 0..k {
            let mut r2 = 0.0f64;
            for t in 0..n {
                let awx: Complex64 = (0..l).map(|j| w[[t, j]] * q[(j, vals[c].1)]).sum();
                r2 += (awx - ritz[[t, c]] * vals[c].0).norm_sqr();
            }
            worst = worst.max(r2.sqrt() / theta1);
        }
        best = Some(TopSingular {
            values: vals.iter().take(k).map(|(e, _)| e.max(0.0).sqrt()).collect(),
            right_vectors: ritz.slice(ndarray::s![.., ..k]).to_owned(),
        });
        if worst < RESIDUAL_TOL {
            break;
        }
        v = w;
        orthonormalize(&mut v, &mut rng);
    }
    best.ok_or_else(|| "subspace iteration produced no estimate".to_string())
}

type EigenPairs = (Vec<(f64, usize)>, DMatrix<Complex64>);

/// Eigenpairs sorted by descending eigenvalue, as (value, column index).
fn hermitian_eigen(m: DMatrix<Complex64>) -> std::result::Result<EigenPairs, String> {
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err("non-finite eigenvalue".into());
    }
    let mut order: Vec<(f64, usize)> = eig.eigenvalues.iter().copied().zip(0..).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok((order, eig.eigenvectors))
}

/// `A^H A`, reduced over fixed pixel chunks.
fn gram(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.dim().1;
    let data = a.as_slice().expect("contiguous Casorati matrix");
    let partials: Vec<Vec<Complex64>> = data
        .par_chunks(PIXEL_CHUNK * n)
        .map(|chunk| {
            let mut g = vec![Complex64::default(); n * n];
            for row in chunk.chunks_exact(n) {
                for i in 0..n {
                    let ci = row[i].conj();
                    let gi = &mut g[i * n..(i + 1) * n];
                    for j in i..n {
                        gi[j] += ci * row[j];
                    }
                }
            }
            g
        })
        .collect();
    let mut g = Array2::<Complex64>::zeros((n, n));
    for part in &partials {
        for i in 0..n {
            for j in i..n {
                g[[i, j]] += part[i * n + j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            g[[i, j]] = g[[j, i]].conj();
        }
    }
    g
}

/// `A V`, row-parallel.
fn mul_av(a: &Array2<Complex64>, v: &Array2<Complex64>) -> Array2<Complex64> {
    let (np, n) = a.dim();
    let l = v.dim().1;
    let vt: Vec<Complex64> = (0..n * l).map(|j| v[[j / l, j % l]]).collect();
    let data = a.as_slice().expect("contiguous Casorati matrix");
    let mut out = vec![Complex64::default(); np * l];
    out.par_chunks_mut(l)
        .zip(data.par_chunks(n))
        .for_each(|(o, row)| {
            for (t, x) in row.iter().enumerate() {
                let vrow = &vt[t * l..(t + 1) * l];
                for (oi, vi) in o.iter_mut().zip(vrow) {
                    *oi += x * vi;
                }
            }
        });
    Array2::from_shape_vec((np, l), out).expect("sized above")
}

/// `A^H Y`, reduced over fixed pixel chunks.
fn mul_ahy(a: &Array2<Complex64>, y: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.dim().1;
    let l = y.dim().1;
    let data = a.as_slice().expect("contiguous Casorati matrix");
    let ys = y.as_slice().expect("contiguous");
    let partials: Vec<Vec<Complex64>> = data
        .par_chunks(PIXEL_CHUNK * n)
        .zip(ys.par_chunks(PIXEL_CHUNK * l))
        .map(|(ac, yc)| {
            let mut w = vec![Complex64::default(); n * l];
            for (row, yrow) in ac.chunks_exact(n).zip(yc.chunks_exact(l)) {
                for (t, x) in row.iter().enumerate() {
                    let xc = x.conj();
                    let wt = &mut w[t * l..(t + 1) * l];
                    for (wi, yi) in wt.iter_mut().zip(yrow) {
                        *wi += xc * yi;
                    }
                }
            }
            w
        })
        .collect();
    let mut w = vec![Complex64::default(); n * l];
    for part in &partials {
        for (a, b) in w.iter_mut().zip(part) {
            *a += b;
        }
    }
    Array2::from_shape_vec((n, l), w).expect("sized above")
}

/// Modified Gram-Schmidt with one reorthogonalization pass; dependent
/// columns are replaced by fresh random directions.
fn orthonormalize(v: &mut Array2<Complex64>, rng: &mut ChaCha8Rng) {
    let (n, l) = v.dim();
    for c in 0..l {
        let orig: f64 = (0..n).map(|t| v[[t, c]].norm_sqr()).sum::<f64>().sqrt();
        for attempt in 0..3 {
            for _ in 0..2 {
                for j in 0..c {
                    let dot: Complex64 = (0..n).map(|t| v[[t, j]].conj() * v[[t, c]]).sum();
                    for t in 0..n {
                        let vj = v[[t, j]];
                        v[[t, c]] -= vj * dot;
                    }
                }
            }
            let norm: f64 = (0..n).map(|t| v[[t, c]].norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-10 * orig.max(1e-300) && norm > 1e-300 {
                for t in 0..n {
                    v[[t, c]] /= norm;
                }
                break;
            }
            assert!(attempt < 2, "could not complete an orthonormal basis");
            for t in 0..n {
                v[[t, c]] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
    }
}
