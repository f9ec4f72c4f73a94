//! Streaming chain: window extraction, SVD filtering and DPSD produce one
//! spectral cube at a time; band integration and spectrogram accumulation
//! consume them through a bounded queue.

use std::sync::mpsc::sync_channel;

use crate::band::Band;
use crate::doppler::{PowerDopplerBuilder, Spectrogram, SpectrogramBuilder};
use crate::error::{Error, Result};
use crate::model::{PowerDopplerMovie, RoiMask, SpectralCube};
use crate::stack::HologramStack;
use crate::stft::{dpsd, make_windows, Apodization, StftPlan};
use crate::svdfilter::{svd_clutter_filter_inplace, ClutterReport, SvdFilterSpec};

const QUEUE_DEPTH: usize = 2;

#[derive(Debug, Clone)]
pub struct PipelineSpec {
    pub plan: StftPlan,
    /// `None` skips clutter filtering.
    pub svd: Option<SvdFilterSpec>,
    pub bands: Vec<Band>,
    pub rois: Vec<RoiMask>,
    /// Spectrograms minus the whole-field mean spectrum.
    pub residual_spectrograms: bool,
}

impl PipelineSpec {
    pub fn new(plan: StftPlan, svd: Option<SvdFilterSpec>, bands: Vec<Band>) -> Self {
        PipelineSpec {
            plan,
            svd,
            bands,
            rois: Vec::new(),
            residual_spectrograms: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// One movie per band, in the order of `PipelineSpec::bands`.
    pub movies: Vec<PowerDopplerMovie>,
    /// One spectrogram per ROI.
    pub spectrograms: Vec<Spectrogram>,
    pub clutter: Vec<ClutterReport>,
}

/// Runs the chain over every window of `stack`. Errors carry the stage name
/// and window index.
pub fn run_pipeline(stack: &HologramStack, spec: &PipelineSpec) -> Result<PipelineOutput> {
    let fs = stack.meta().sample_rate_hz;
    for b in &spec.bands {
        b.validate_for(fs)?;
    }
    let windows = make_windows(stack, &spec.plan)?;
    let hop_s = spec.plan.hop_s(fs);

    let mut movies: Vec<PowerDopplerBuilder> = spec.bands.iter().map(|&b| PowerDopplerBuilder::new(b, hop_s)).collect();
    let mut grams = spec
        .rois
        .iter()
        .map(|m| SpectrogramBuilder::new(m.clone(), spec.residual_spectrograms))
        .collect::<Result<Vec<_>>>()?;

    // The heavy stages stay on the calling thread so they run in the
    // caller's rayon pool; accumulation happens on the consumer thread.
    std::thread::scope(|scope| -> Result<PipelineOutput> {
        let (tx, rx) = sync_channel::<(SpectralCube, Option<ClutterReport>)>(QUEUE_DEPTH);
        let consumer = scope.spawn(move || -> Result<PipelineOutput> {
            let mut clutter = Vec::new();
            for (idx, (cube, report)) in rx.into_iter().enumerate() {
                for b in &mut movies {
                    b.push(&cube).map_err(|e| e.in_stage("power doppler", idx))?;
                }
                for g in &mut grams {
                    g.push(&cube).map_err(|e| e.in_stage("spectrogram", idx))?;
                }
                clutter.extend(report);
            }
            Ok(PipelineOutput {
                movies: movies.into_iter().map(|b| b.finish()).collect::<Result<_>>()?,
                spectrograms: grams.into_iter().map(|g| g.finish()).collect::<Result<_>>()?,
                clutter,
            })
        });
        let produced = (|| -> Result<()> {
            for mut w in windows {
                let idx = w.index;
                let report = match &spec.svd {
                    Some(svd) => Some(svd_clutter_filter_inplace(&mut w, svd, fs).map_err(|e| e.in_stage("svd filter", idx))?),
                    None => None,
                };
                let cube = dpsd(&w, spec.plan.apodization).map_err(|e| e.in_stage("dpsd", idx))?;
                if tx.send((cube, report)).is_err() {
                    break;
                }
            }
            Ok(())
        })();
        drop(tx);
        let consumed = consumer.join().expect("consumer thread panicked");
        produced?;
        consumed
    })
}

/// Convenience: one band, no ROIs.
pub fn band_movie(
    stack: &HologramStack,
    plan: &StftPlan,
    svd: Option<SvdFilterSpec>,
    band: Band,
) -> Result<PowerDopplerMovie> {
    let out = run_pipeline(stack, &PipelineSpec::new(*plan, svd, vec![band]))?;
    out.movies
        .into_iter()
        .next()
        .ok_or_else(|| Error::InvalidParameter("no movie produced".into()))
}

/// All spectral cubes of a stack, for callers that need raw spectra.
pub fn spectral_cubes(
    stack: &HologramStack,
    plan: &StftPlan,
    svd: Option<SvdFilterSpec>,
    apodization: Apodization,
) -> Result<Vec<SpectralCube>> {
    let fs = stack.meta().sample_rate_hz;
    make_windows(stack, plan)?
        .map(|mut w| {
            let idx = w.index;
            if let Some(s) = &svd {
                svd_clutter_filter_inplace(&mut w, s, fs).map_err(|e| e.in_stage("svd filter", idx))?;
            }
            dpsd(&w, apodization).map_err(|e| e.in_stage("dpsd", idx))
        })
        .collect()
}
