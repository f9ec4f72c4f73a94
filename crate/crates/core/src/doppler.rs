//! Power Doppler movies and everything derived from them: reverse
//! contrast, illumination and baseline corrections, coefficient of
//! variation, ROI traces and spectrograms.

use ndarray::{Array2, Array3, Axis};

use crate::band::{band_bins, Band};
use crate::error::{Error, Result};
use crate::model::{PowerDopplerMovie, RoiMask, SpectralCube};
use crate::stats::{gaussian_blur, mean, percentile_sorted, pop_std};

/// Incremental band integration, one cube at a time.
#[derive(Debug, Clone)]
pub struct PowerDopplerBuilder {
    band: Band,
    bins: Option<Vec<usize>>,
    frames: Vec<Array2<f64>>,
    times: Vec<f64>,
    hop_s: f64,
}

impl PowerDopplerBuilder {
    pub fn new(band: Band, hop_s: f64) -> Self {
        PowerDopplerBuilder {
            band,
            bins: None,
            frames: Vec::new(),
            times: Vec::new(),
            hop_s,
        }
    }

    pub fn push(&mut self, cube: &SpectralCube) -> Result<()> {
        if self.bins.is_none() {
            self.bins = Some(band_bins(&self.band, cube.nbins(), cube.sample_rate_hz())?);
        }
        let bins = self.bins.as_ref().expect("set above");
        self.frames.push(cube.sum_bins(bins));
        self.times.push(cube.t_center_s());
        Ok(())
    }

    pub fn finish(self) -> Result<PowerDopplerMovie> {
        let first = self
            .frames
            .first()
            .ok_or_else(|| Error::InvalidParameter("no spectral cubes".into()))?;
        let (ny, nx) = first.dim();
        let mut frames = Array3::<f64>::zeros((self.frames.len(), ny, nx));
        for (mut dst, src) in frames.axis_iter_mut(Axis(0)).zip(&self.frames) {
            dst.assign(src);
        }
        PowerDopplerMovie::new(frames, self.times, self.hop_s, self.band)
    }
}

/// `M0 = sum over band bins of S`, per window and pixel.
pub fn power_doppler(cubes: &[SpectralCube], band: Band, hop_s: f64) -> Result<PowerDopplerMovie> {
    let mut b = PowerDopplerBuilder::new(band, hop_s);
    for c in cubes {
        b.push(c)?;
    }
    b.finish()
}

/// Negative power Doppler.
pub fn reverse_contrast(movie: &PowerDopplerMovie) -> Result<PowerDopplerMovie> {
    if movie.is_rc() {
        return Err(Error::AlreadyReverseContrast);
    }
    let base = movie.is_baseline_removed();
    Ok(movie
        .with_frames(movie.frames().mapv(|v| -v))
        .set_flags(true, base))
}

/// Divides each frame by the blurred temporal-mean frame and rescales by
/// that reference's spatial mean.
pub fn flat_field(movie: &PowerDopplerMovie, sigma_px: f64) -> Result<PowerDopplerMovie> {
    if movie.is_rc() {
        return Err(Error::InvalidParameter(
            "flat_field expects a standard-polarity movie".into(),
        ));
    }
    if !(sigma_px > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma_px must be > 0, got {sigma_px}")));
    }
    let reference = gaussian_blur(&movie.mean_image(), sigma_px);
    let ref_mean = reference.mean().unwrap_or(0.0);
    if !(ref_mean > 0.0) {
        return Err(Error::ZeroReference);
    }
    let floor = 1e-6 * ref_mean;
    let gain = reference.mapv(|r| ref_mean / r.max(floor));
    let mut frames = movie.frames().clone();
    for mut f in frames.axis_iter_mut(Axis(0)) {
        f.zip_mut_with(&gain, |v, g| *v *= g);
    }
    Ok(movie.with_frames(frames))
}

/// Default flat-field blur scale: an eighth of the image width.
pub fn default_flat_field_sigma(nx: usize) -> f64 {
    (nx as f64 / 8.0).max(1.0)
}

/// Subtracts each pixel's temporal 5th percentile.
pub fn baseline_subtract(movie: &PowerDopplerMovie) -> Result<PowerDopplerMovie> {
    let n = movie.n_windows();
    if n < 8 {
        return Err(Error::InvalidParameter(format!(
            "baseline subtraction needs >= 8 windows, got {n}"
        )));
    }
    let (ny, nx) = movie.dims();
    let mut frames = movie.frames().clone();
    let mut series = vec![0.0; n];
    for y in 0..ny {
        for x in 0..nx {
            for (t, s) in series.iter_mut().enumerate() {
                *s = frames[[t, y, x]];
            }
            series.sort_by(f64::total_cmp);
            let base = percentile_sorted(&series, 5.0);
            for t in 0..n {
                frames[[t, y, x]] -= base;
            }
        }
    }
    let rc = movie.is_rc();
    Ok(movie.with_frames(frames).set_flags(rc, true))
}

/// Per-pixel population standard deviation over mean.
pub fn cov_map(movie: &PowerDopplerMovie) -> Result<Array2<f64>> {
    if movie.is_rc() {
        return Err(Error::InvalidParameter(
            "coefficient of variation needs a standard-polarity movie".into(),
        ));
    }
    if movie.n_windows() < 2 {
        return Err(Error::InvalidParameter("coefficient of variation needs >= 2 windows".into()));
    }
    let (ny, nx) = movie.dims();
    let frames = movie.frames();
    Ok(Array2::from_shape_fn((ny, nx), |(y, x)| {
        let s: Vec<f64> = frames.slice(ndarray::s![.., y, x]).to_vec();
        let m = mean(&s);
        if m <= 1e-12 {
            0.0
        } else {
            pop_std(&s) / m
        }
    }))
}

fn check_mask(mask: &RoiMask, dims: (usize, usize)) -> Result<()> {
    if mask.dims() != dims {
        return Err(Error::ShapeMismatch(format!(
            "mask {:?} vs image {:?}",
            mask.dims(),
            dims
        )));
    }
    mask.require_non_empty()
}

/// Spatial mean over the mask for every window. RC movies give the trace
/// of the negative power Doppler.
pub fn roi_trace(movie: &PowerDopplerMovie, mask: &RoiMask) -> Result<Vec<f64>> {
    check_mask(mask, movie.dims())?;
    let idx = mask.pixel_indices();
    let nx = movie.dims().1;
    Ok(movie
        .frames()
        .axis_iter(Axis(0))
        .map(|f| idx.iter().map(|&i| f[[i / nx, i % nx]]).sum::<f64>() / idx.len() as f64)
        .collect())
}

/// Artery/vein traces mapped by the artery's mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    pub t_s: Vec<f64>,
    pub artery: Vec<f64>,
    pub vein: Vec<f64>,
    pub normalized: bool,
}

pub fn normalize_trace_pair(t_s: &[f64], artery: &[f64], vein: &[f64]) -> Result<TracePair> {
    if artery.len() != vein.len() || artery.len() != t_s.len() {
        return Err(Error::ShapeMismatch(format!(
            "trace lengths differ: t {}, artery {}, vein {}",
            t_s.len(),
            artery.len(),
            vein.len()
        )));
    }
    let m = mean(artery);
    let s = pop_std(artery);
    if !(s > 0.0) {
        return Err(Error::ZeroArteryStd);
    }
    Ok(TracePair {
        t_s: t_s.to_vec(),
        artery: artery.iter().map(|v| (v - m) / s).collect(),
        vein: vein.iter().map(|v| (v - m) / s).collect(),
        normalized: true,
    })
}

/// ROI-averaged spectra over time, `(f_bin, window)`, bins in DFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub power: Array2<f64>,
    pub residual: bool,
    pub t_center_s: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl Spectrogram {
    pub fn nbins(&self) -> usize {
        self.power.dim().0
    }

    pub fn n_windows(&self) -> usize {
        self.power.dim().1
    }

    /// Sum over the rows whose |f| lies in `band`, per window.
    pub fn band_sum(&self, band: &Band) -> Result<Vec<f64>> {
        let bins = band_bins(band, self.nbins(), self.sample_rate_hz)?;
        Ok((0..self.n_windows())
            .map(|n| bins.iter().map(|&k| self.power[[k, n]]).sum())
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct SpectrogramBuilder {
    mask: RoiMask,
    idx: Vec<usize>,
    subtract_spatial_mean: bool,
    columns: Vec<Vec<f64>>,
    times: Vec<f64>,
    sample_rate_hz: f64,
}

impl SpectrogramBuilder {
    pub fn new(mask: RoiMask, subtract_spatial_mean: bool) -> Result<Self> {
        mask.require_non_empty()?;
        let idx = mask.pixel_indices();
        Ok(SpectrogramBuilder {
            mask,
            idx,
            subtract_spatial_mean,
            columns: Vec::new(),
            times: Vec::new(),
            sample_rate_hz: 0.0,
        })
    }

    pub fn push(&mut self, cube: &SpectralCube) -> Result<()> {
        check_mask(&self.mask, cube.dims())?;
        let power = cube.power();
        let nb = cube.nbins();
        let mut col = vec![0.0; nb];
        for &p in &self.idx {
            for (c, v) in col.iter_mut().zip(power.row(p)) {
                *c += v;
            }
        }
        let inv = 1.0 / self.idx.len() as f64;
        col.iter_mut().for_each(|c| *c *= inv);
        if self.subtract_spatial_mean {
            let field = power.mean_axis(Axis(0)).expect("cube has pixels");
            for (c, f) in col.iter_mut().zip(field.iter()) {
                *c -= f;
            }
        }
        self.columns.push(col);
        self.times.push(cube.t_center_s());
        self.sample_rate_hz = cube.sample_rate_hz();
        Ok(())
    }

    pub fn finish(self) -> Result<Spectrogram> {
        let nb = self
            .columns
            .first()
            .map(|c| c.len())
            .ok_or_else(|| Error::InvalidParameter("no spectral cubes".into()))?;
        let power = Array2::from_shape_fn((nb, self.columns.len()), |(k, n)| self.columns[n][k]);
        Ok(Spectrogram {
            power,
            residual: self.subtract_spatial_mean,
            t_center_s: self.times,
            sample_rate_hz: self.sample_rate_hz,
        })
    }
}

pub fn spectrogram(cubes: &[SpectralCube], mask: &RoiMask, subtract_spatial_mean: bool) -> Result<Spectrogram> {
    let mut b = SpectrogramBuilder::new(mask.clone(), subtract_spatial_mean)?;
    for c in cubes {
        b.push(c)?;
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson;
    use proptest::prelude::*;

    fn movie_from(frames: Array3<f64>) -> PowerDopplerMovie {
        let n = frames.dim().0;
        let t = (0..n).map(|i| i as f64 * 1e-3).collect();
        PowerDopplerMovie::new(frames, t, 1e-3, Band::new(0.0, 1000.0).unwrap()).unwrap()
    }

    fn cube(power: Array2<f64>, ny: usize, nx: usize, fs: f64) -> SpectralCube {
        SpectralCube::new(power, ny, nx, fs, 0.0).unwrap()
    }

    #[test]
    fn uniform_cube_band_sum() {
        let c = cube(Array2::from_elem((6, 8), 1.0), 2, 3, 8000.0);
        let m = power_doppler(&[c], Band::new(1000.0, 3000.0).unwrap(), 1e-3).unwrap();
        assert!(m.frames().iter().all(|&v| v == 4.0));
        assert!(!m.is_rc());
    }

    #[test]
    fn band_over_nyquist_errors() {
        let c = cube(Array2::from_elem((1, 8), 1.0), 1, 1, 8000.0);
        assert!(power_doppler(&[c], Band::new(0.0, 5000.0).unwrap(), 1e-3).is_err());
    }

    #[test]
    fn reverse_contrast_negates_once() {
        let m = movie_from(Array3::from_shape_vec((1, 1, 3), vec![2.0, 3.0, 2.0]).unwrap());
        let rc = reverse_contrast(&m).unwrap();
        assert_eq!(rc.frames().iter().copied().collect::<Vec<_>>(), vec![-2.0, -3.0, -2.0]);
        assert!(rc.is_rc());
        assert_eq!(rc.band(), m.band());
        assert_eq!(rc.times(), m.times());
        let err = reverse_contrast(&rc).unwrap_err();
        assert!(err.to_string().contains("already reverse-contrast"));
    }

    #[test]
    fn rc_argmax_is_original_argmin() {
        let m = movie_from(Array3::from_shape_vec((1, 1, 5), vec![4.0, 1.0, 7.0, 0.5, 3.0]).unwrap());
        let rc = reverse_contrast(&m).unwrap();
        let argmax = |v: Vec<f64>| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let argmin = |v: Vec<f64>| v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(
            argmax(rc.frames().iter().copied().collect()),
            argmin(m.frames().iter().copied().collect())
        );
    }

    #[test]
    fn flat_field_uniform_is_unchanged() {
        let m = movie_from(Array3::from_elem((3, 16, 16), 5.0));
        let f = flat_field(&m, 2.0).unwrap();
        for (a, b) in f.frames().iter().zip(m.frames().iter()) {
            assert!((a - b).abs() < 1e-6 * b);
        }
    }

    #[test]
    fn flat_field_removes_illumination_gradient() {
        // 2:1 smooth gradient across the field on a flat scene
        let frames = Array3::from_shape_fn((4, 64, 64), |(t, _, x)| {
            (1.0 + x as f64 / 63.0) * (1.0 + 0.01 * t as f64)
        });
        let m = movie_from(frames);
        let before = m.mean_image();
        let cov = |img: &Array2<f64>| {
            let v: Vec<f64> = img.iter().copied().collect();
            pop_std(&v) / mean(&v)
        };
        assert!(cov(&before) > 0.15);
        let f = flat_field(&m, default_flat_field_sigma(64)).unwrap();
        assert!(cov(&f.mean_image()) < 0.05);
    }

    #[test]
    fn flat_field_rejects_zero_reference_and_rc() {
        let m = movie_from(Array3::zeros((2, 4, 4)));
        assert!(matches!(flat_field(&m, 1.0), Err(Error::ZeroReference)));
        let m = movie_from(Array3::from_elem((2, 4, 4), 1.0));
        assert!(flat_field(&reverse_contrast(&m).unwrap(), 1.0).is_err());
    }

    #[test]
    fn baseline_of_constant_is_zero() {
        let m = movie_from(Array3::from_elem((10, 2, 2), 3.5));
        let b = baseline_subtract(&m).unwrap();
        assert!(b.frames().iter().all(|&v| v == 0.0));
        assert!(baseline_subtract(&movie_from(Array3::from_elem((7, 1, 1), 1.0))).is_err());
    }

    #[test]
    fn baseline_recovers_pulse() {
        let c = 1000.0;
        let n = 100;
        // 8 of 100 samples sit at the floor, so the 5th percentile is exactly c
        let pulse: Vec<f64> = (0..n)
            .map(|t| if t % 12 == 0 { 0.0 } else { 1.0 + (t as f64 * 0.3).sin().abs() * 5.0 })
            .collect();
        let frames = Array3::from_shape_fn((n, 1, 1), |(t, _, _)| c + pulse[t]);
        let b = baseline_subtract(&movie_from(frames)).unwrap();
        for (t, p) in pulse.iter().enumerate() {
            assert!((b.frames()[[t, 0, 0]] - p).abs() < 1e-6 * c);
        }
        assert!(b.is_baseline_removed());
    }

    #[test]
    fn cov_examples() {
        let m = movie_from(Array3::from_elem((4, 2, 2), 2.0));
        assert!(cov_map(&m).unwrap().iter().all(|&v| v == 0.0));
        let m = movie_from(Array3::from_shape_vec((2, 1, 1), vec![1.0, 3.0]).unwrap());
        assert!((cov_map(&m).unwrap()[[0, 0]] - 0.5).abs() < 1e-15);
        let m = movie_from(Array3::zeros((3, 1, 1)));
        assert_eq!(cov_map(&m).unwrap()[[0, 0]], 0.0);
    }

    #[test]
    fn trace_examples() {
        let frames = Array3::from_shape_fn((5, 3, 3), |(t, y, x)| (t * 9 + y * 3 + x) as f64);
        let m = movie_from(frames.clone());
        let tr = roi_trace(&m, &RoiMask::single(3, 3, 1, 2)).unwrap();
        assert_eq!(tr, (0..5).map(|t| (t * 9 + 5) as f64).collect::<Vec<_>>());

        let uni = movie_from(Array3::from_elem((3, 3, 3), 7.25));
        assert_eq!(roi_trace(&uni, &RoiMask::rect(3, 3, 0..2, 0..3)).unwrap(), vec![7.25; 3]);

        let mask = RoiMask::rect(3, 3, 0..3, 1..3);
        let a = roi_trace(&m, &mask).unwrap();
        let b = roi_trace(&reverse_contrast(&m).unwrap(), &mask).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }

        let empty = RoiMask::new(Array2::from_elem((3, 3), false));
        assert!(matches!(roi_trace(&m, &empty), Err(Error::EmptyMask)));
    }

    #[test]
    fn normalize_two_points() {
        let p = normalize_trace_pair(&[0.0, 1.0], &[1.0, 3.0], &[2.0, 2.0]).unwrap();
        assert_eq!(p.artery, vec![-1.0, 1.0]);
        assert_eq!(p.vein, vec![0.0, 0.0]);
        assert!(p.normalized);
        assert!(matches!(
            normalize_trace_pair(&[0.0, 1.0], &[2.0, 2.0], &[1.0, 3.0]),
            Err(Error::ZeroArteryStd)
        ));
    }

    proptest! {
        #[test]
        fn normalization_properties(
            a in proptest::collection::vec(-100.0f64..100.0, 3..40),
            v_scale in 0.1f64..3.0, v_off in -50.0f64..50.0,
        ) {
            prop_assume!(pop_std(&a) > 1e-3);
            let vein: Vec<f64> = a.iter().rev().map(|x| x * v_scale + v_off).collect();
            let t: Vec<f64> = (0..a.len()).map(|i| i as f64).collect();
            let p = normalize_trace_pair(&t, &a, &vein).unwrap();
            prop_assert!(mean(&p.artery).abs() < 1e-9);
            prop_assert!((pop_std(&p.artery) - 1.0).abs() < 1e-9);
            let range = |x: &[f64]| x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
            let raw_ratio = range(&vein) / range(&a);
            let norm_ratio = range(&p.vein) / range(&p.artery);
            prop_assert!((raw_ratio - norm_ratio).abs() < 1e-9 * raw_ratio.max(1.0));
        }

        #[test]
        fn disjoint_bands_add_up(vals in proptest::collection::vec(0.0f64..10.0, 16), cut in 1usize..8) {
            let power = Array2::from_shape_vec((1, 16), vals).unwrap();
            let c = cube(power, 1, 1, 16_000.0);
            let cut_hz = cut as f64 * 1000.0 + 300.0;
            let lo = power_doppler(std::slice::from_ref(&c), Band::new(0.0, cut_hz).unwrap(), 1e-3).unwrap();
            let hi = power_doppler(std::slice::from_ref(&c), Band::to_nyquist(cut_hz, 16_000.0).unwrap(), 1e-3).unwrap();
            let full = power_doppler(std::slice::from_ref(&c), Band::full(16_000.0), 1e-3).unwrap();
            let s = lo.frames()[[0, 0, 0]] + hi.frames()[[0, 0, 0]];
            prop_assert!((s - full.frames()[[0, 0, 0]]).abs() <= 1e-12 * (1.0 + s));
        }
    }

    #[test]
    fn spectrogram_examples() {
        let uniform = cube(Array2::from_elem((9, 4), 2.0), 3, 3, 4000.0);
        let s = spectrogram(&[uniform.clone(), uniform], &RoiMask::rect(3, 3, 0..2, 0..2), true).unwrap();
        assert!(s.power.iter().all(|v| v.abs() < 1e-15));
        assert!(s.residual);

        let p = Array2::from_shape_fn((4, 4), |(pix, k)| (pix * 4 + k) as f64);
        let c = cube(p.clone(), 2, 2, 4000.0);
        let s = spectrogram(&[c], &RoiMask::single(2, 2, 1, 0), false).unwrap();
        assert_eq!(s.power.column(0).to_vec(), p.row(2).to_vec());

        let empty = RoiMask::new(Array2::from_elem((2, 2), false));
        assert!(spectrogram(&[], &empty, false).is_err());
    }

    #[test]
    fn spectrogram_band_sum_tracks_pulsation() {
        // energy moves from low to high bins and back
        let mut cubes = Vec::new();
        let mut shift = Vec::new();
        for n in 0..20 {
            let s = (n as f64 / 20.0 * std::f64::consts::TAU).sin() * 0.5 + 0.5;
            shift.push(s);
            let p = Array2::from_shape_fn((1, 8), |(_, k)| match k {
                1 | 7 => 2.0 - s,
                3 | 5 => 1.0 + s,
                _ => 0.5,
            });
            cubes.push(SpectralCube::new(p, 1, 1, 8000.0, n as f64).unwrap());
        }
        let s = spectrogram(&cubes, &RoiMask::full(1, 1), false).unwrap();
        let low = s.band_sum(&Band::new(500.0, 2000.0).unwrap()).unwrap();
        let high = s.band_sum(&Band::new(2000.0, 4000.0).unwrap()).unwrap();
        assert!(pearson(&low, &high) < -0.99);
        assert!(pearson(&high, &shift) > 0.99);
    }
}
