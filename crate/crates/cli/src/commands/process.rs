use std::path::{Path, PathBuf};

use ldh_core::band::bin_frequency;
use ldh_core::composite::{compose_low_high, to_grayscale, Image, RenderSpec};
use ldh_core::doppler::{baseline_subtract, default_flat_field_sigma, flat_field, reverse_contrast, roi_trace, Spectrogram};
use ldh_core::pipeline::{run_pipeline, PipelineSpec};
use ldh_core::reconstruct::reconstruct_stack;
use ldh_core::simulator::RegionKind;
use ldh_core::svdfilter::ClutterReport;
use ldh_core::{read_stack, CarrierSpec, Error, HologramStack, PowerDopplerMovie, RoiMask, Stack, StftPlan, SvdFilterSpec};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{self, NamedBand, ProcessConfig, RoiConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{trace_csv, Manifest, OutDir, RunInfo};

/// Parameters stored with every raw movie dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieParams {
    pub band: String,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    pub rc: bool,
    pub sample_rate_hz: f64,
    pub plan: StftPlan,
    pub svd: Option<SvdFilterSpec>,
    pub flat_field_sigma_px: Option<f64>,
    pub baseline: bool,
    /// Little-endian f64, row-major `(window, y, x)`.
    pub shape: [usize; 3],
    pub hop_s: f64,
    pub t_center_s: Vec<f64>,
}

pub fn run(config_path: &Path, out: &Path, info: &RunInfo) -> CliResult<Manifest> {
    let cfg: ProcessConfig = config::load(config_path)?;
    let cfg = cfg.expanded();
    if cfg.input.as_os_str().is_empty() {
        return Err(CliError::config(config_path, "input is required"));
    }
    cfg.check_rois()?;
    cfg.render.validate()?;
    let input = config::config_dir(config_path).join(&cfg.input);
    let echo = config::echo(&cfg)?;

    let stack = load_field(&input, &cfg)?;
    let fs = stack.meta().sample_rate_hz;
    let bands = cfg.bands(fs)?;
    let (ny, nx) = (stack.meta().ny, stack.meta().nx);
    let rois = resolve_rois(&cfg.roi, &input, ny, nx)?;

    let mut spec = PipelineSpec::new(cfg.stft, cfg.svd.spec(), bands.iter().map(|b| b.band).collect());
    spec.rois = rois.iter().map(|(_, m)| m.clone()).collect();
    spec.residual_spectrograms = cfg.residual_spectrograms;
    let result = run_pipeline(&stack, &spec)?;
    drop(stack);

    let sigma = cfg.flat_field.then(|| cfg.flat_field_sigma_px.unwrap_or_else(|| default_flat_field_sigma(nx)));
    let mut dir = OutDir::create(out)?;
    let mut means = Vec::with_capacity(bands.len());
    for (nb, movie) in bands.iter().zip(result.movies) {
        let movie = postprocess(movie, sigma, cfg.baseline)?;
        let params = MovieParams {
            band: nb.name.clone(),
            f_low_hz: nb.band.f_low_hz,
            f_high_hz: nb.band.f_high_hz,
            rc: nb.rc,
            sample_rate_hz: fs,
            plan: cfg.stft,
            svd: cfg.svd.spec(),
            flat_field_sigma_px: sigma,
            baseline: cfg.baseline,
            shape: [movie.n_windows(), ny, nx],
            hop_s: movie.hop_s(),
            t_center_s: movie.times().to_vec(),
        };
        write_band(&mut dir, nb, &movie, &params, &rois, &cfg.render)?;
        let rc_mean = if nb.rc { Some(reverse_contrast(&movie)?.mean_image()) } else { None };
        means.push((movie.mean_image(), rc_mean));
    }

    for ((name, mask), gram) in rois.iter().zip(&result.spectrograms) {
        write_spectrogram(&mut dir, name, mask, gram, cfg.residual_spectrograms)?;
    }
    if !result.clutter.is_empty() {
        dir.write_bytes(
            "clutter.csv",
            "clutter_report",
            json!({ "svd": cfg.svd.spec(), "plan": cfg.stft }),
            clutter_csv(&result.clutter).as_bytes(),
        )?;
    }
    if let Some(c) = &cfg.composite {
        let pick = |n: &str, allow_rc: bool| {
            let i = bands.iter().position(|b| b.name == n).expect("composite bands validated");
            match (&means[i], allow_rc) {
                ((_, Some(rc)), true) => rc,
                ((m, _), _) => m,
            }
        };
        let rgb = compose_low_high(pick(&c.slow, false), pick(&c.fast, true), &cfg.render)?;
        dir.write_image(
            "composite.ppm",
            "composite",
            json!({ "slow": c.slow, "fast": c.fast, "render": cfg.render, "red": "fast", "green_blue": "slow" }),
            &Image::Rgb(rgb),
        )?;
    }
    dir.finish(info, echo)
}

fn load_field(input: &Path, cfg: &ProcessConfig) -> CliResult<HologramStack> {
    match (read_stack(input)?, &cfg.reconstruct) {
        (Stack::Complex(s), None) => Ok(s),
        (Stack::Real(frames), Some(r)) => {
            let carrier = CarrierSpec::new(r.kx, r.ky, r.halfwidth)?;
            Ok(reconstruct_stack(&frames, &carrier, r.z_m)?)
        }
        (Stack::Real(_), None) => Err(CliError::Invalid(format!(
            "{} holds interferograms; add a [reconstruct] section",
            input.display()
        ))),
        (Stack::Complex(_), Some(_)) => Err(CliError::Invalid(format!(
            "{} already holds a complex field; remove the [reconstruct] section",
            input.display()
        ))),
    }
}

/// Ground-truth labels written next to a simulated stack.
pub fn labels_path(input: &Path) -> PathBuf {
    input.with_extension("labels.u8")
}

fn resolve_rois(rois: &[RoiConfig], input: &Path, ny: usize, nx: usize) -> CliResult<Vec<(String, RoiMask)>> {
    let mut labels: Option<Vec<u8>> = None;
    let mut out = Vec::with_capacity(rois.len());
    for r in rois {
        let mask = match (r.rect, r.region) {
            (Some([x0, y0, x1, y1]), _) => {
                if !(x0 < x1 && y0 < y1 && x1 <= nx && y1 <= ny) {
                    return Err(CliError::Invalid(format!(
                        "roi {:?} rect [{x0}, {y0}, {x1}, {y1}] is empty or outside {nx}x{ny}",
                        r.name
                    )));
                }
                RoiMask::rect(ny, nx, y0..y1, x0..x1)
            }
            (None, Some(kind)) => {
                if labels.is_none() {
                    let p = labels_path(input);
                    let bytes = std::fs::read(&p).map_err(|e| CliError::io(&p, e))?;
                    if bytes.len() != nx * ny {
                        return Err(Error::SizeMismatch {
                            expected: (nx * ny) as u64,
                            actual: bytes.len() as u64,
                        }
                        .into());
                    }
                    labels = Some(bytes);
                }
                let code = RegionKind::ALL.iter().position(|&k| k == kind).unwrap() as u8;
                let l = labels.as_ref().unwrap();
                RoiMask::new(Array2::from_shape_fn((ny, nx), |(y, x)| l[y * nx + x] == code))
            }
            _ => unreachable!("checked by check_rois"),
        };
        if mask.count() == 0 {
            return Err(CliError::Invalid(format!("roi {:?} selects no pixels", r.name)));
        }
        out.push((r.name.clone(), mask));
    }
    Ok(out)
}

fn postprocess(movie: PowerDopplerMovie, sigma: Option<f64>, baseline: bool) -> CliResult<PowerDopplerMovie> {
    let movie = match sigma {
        Some(s) => flat_field(&movie, s)?,
        None => movie,
    };
    Ok(if baseline { baseline_subtract(&movie)? } else { movie })
}

pub fn movie_bytes(movie: &PowerDopplerMovie) -> Vec<u8> {
    movie.frames().iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn gray_frames(movie: &PowerDopplerMovie, render: &RenderSpec) -> CliResult<Vec<Image>> {
    movie
        .frames()
        .axis_iter(Axis(0))
        .map(|f| Ok(Image::Gray(to_grayscale(&f.to_owned(), render)?)))
        .collect()
}

fn write_band(
    dir: &mut OutDir,
    nb: &NamedBand,
    movie: &PowerDopplerMovie,
    params: &MovieParams,
    rois: &[(String, RoiMask)],
    render: &RenderSpec,
) -> CliResult<()> {
    let p = serde_json::to_value(params).map_err(|e| CliError::Core(e.into()))?;
    let name = &nb.name;
    dir.write_bytes(&format!("movies/{name}.f64"), "movie", p.clone(), &movie_bytes(movie))?;

    let mut views = vec![(name.clone(), movie.clone())];
    if nb.rc {
        views.push((format!("{name}_rc"), reverse_contrast(movie)?));
    }
    for (label, m) in &views {
        let mut ip = p.clone();
        ip["polarity"] = json!(if m.is_rc() { "reverse" } else { "standard" });
        ip["render"] = json!(render);
        dir.write_sequence(&format!("frames/{label}"), label, "frame", ip.clone(), &gray_frames(m, render)?, m.times())?;
        let mean = to_grayscale(&m.mean_image(), render)?;
        dir.write_image(&format!("images/{label}_mean.pgm"), "mean_image", ip.clone(), &Image::Gray(mean))?;
        for (roi, mask) in rois {
            let trace = roi_trace(m, mask)?;
            let mut tp = ip.clone();
            tp["roi"] = json!(roi);
            tp["roi_pixels"] = json!(mask.count());
            dir.write_bytes(&format!("traces/{roi}__{label}.csv"), "trace", tp, trace_csv(m.times(), &trace).as_bytes())?;
        }
    }
    Ok(())
}

/// Bin indices sorted by ascending frequency.
fn ascending_bins(nbins: usize, fs: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..nbins).collect();
    idx.sort_by(|&a, &b| bin_frequency(a, nbins, fs).total_cmp(&bin_frequency(b, nbins, fs)));
    idx
}

fn to_db(p: f64, floor: f64) -> f64 {
    10.0 * p.max(floor).log10()
}

fn write_spectrogram(dir: &mut OutDir, roi: &str, mask: &RoiMask, gram: &Spectrogram, residual: bool) -> CliResult<()> {
    let (nbins, nwin) = gram.power.dim();
    let fs = gram.sample_rate_hz;
    let order = ascending_bins(nbins, fs);
    let peak = gram.power.iter().fold(0.0f64, |a, &b| a.max(b));
    let floor = if peak > 0.0 { peak * 1e-12 } else { f64::MIN_POSITIVE };
    let params = json!({
        "roi": roi,
        "roi_pixels": mask.count(),
        "residual": residual,
        "sample_rate_hz": fs,
        "shape": [nbins, nwin],
        "rows": "ascending frequency",
        "t_center_s": gram.t_center_s,
        "db_floor": floor,
    });

    let raw: Vec<u8> = order
        .iter()
        .flat_map(|&k| (0..nwin).map(move |n| (k, n)))
        .flat_map(|(k, n)| gram.power[[k, n]].to_le_bytes())
        .collect();
    dir.write_bytes(&format!("spectrograms/{roi}.f64"), "spectrogram_raw", params.clone(), &raw)?;

    let mut csv = String::from("freq_hz");
    for t in &gram.t_center_s {
        csv.push_str(&format!(",{t:.9}"));
    }
    csv.push('\n');
    for &k in &order {
        csv.push_str(&format!("{}", bin_frequency(k, nbins, fs)));
        for n in 0..nwin {
            csv.push_str(&format!(",{:.6}", to_db(gram.power[[k, n]], floor)));
        }
        csv.push('\n');
    }
    dir.write_bytes(&format!("spectrograms/{roi}_db.csv"), "spectrogram_db", params.clone(), csv.as_bytes())?;

    // top row is the highest frequency
    let img = Array2::from_shape_fn((nbins, nwin), |(r, n)| to_db(gram.power[[order[nbins - 1 - r], n]], floor));
    let gray = to_grayscale(&img, &RenderSpec::full_range())?;
    dir.write_image(&format!("spectrograms/{roi}_db.pgm"), "spectrogram_image", params, &Image::Gray(gray))?;
    Ok(())
}

fn clutter_csv(reports: &[ClutterReport]) -> String {
    let mut s = String::from("window,rank,energy_in,energy_out,s1\n");
    for (i, r) in reports.iter().enumerate() {
        let s1 = r.singular_values.first().copied().unwrap_or(0.0);
        s.push_str(&format!("{i},{},{:.12e},{:.12e},{:.12e}\n", r.rank, r.energy_in, r.energy_out, s1));
    }
    s
}
