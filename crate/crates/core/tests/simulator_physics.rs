use ldh_core::band::Band;
use ldh_core::pipeline::{run_pipeline, spectral_cubes, PipelineSpec};
use ldh_core::simulator::{gen_field_stack, RegionKind, RegionParams, RegionShape, SceneSpec};
use ldh_core::stats::mean;
use ldh_core::stft::{Apodization, StftPlan};
use ndarray::Axis;

fn two_region_scene() -> SceneSpec {
    let mut s = SceneSpec {
        nx: 32,
        ny: 32,
        layout: vec![RegionShape::rect(RegionKind::Artery, 16, 0, 32, 32)],
        ..SceneSpec::default()
    };
    s.regions.tissue = RegionParams::new(1.0e-3, 0.0, 0.0, 1.0);
    s.regions.artery = RegionParams::new(6.4e-5, 0.0, 0.0, 1.0);
    s
}

#[test]
fn windowed_dpsd_matches_analytic_ar1_spectrum() {
    let scene = two_region_scene();
    let (stack, truth) = gen_field_stack(&scene, 64_000.0, 4096).unwrap();
    let plan = StftPlan::new(128, 16);
    let cubes = spectral_cubes(&stack, &plan, None, Apodization::None).unwrap();
    assert!(cubes.len() >= 200);
    for kind in [RegionKind::Tissue, RegionKind::Artery] {
        let idx = truth.region_mask(kind).pixel_indices();
        let mut avg = vec![0.0; plan.n_win];
        for c in &cubes {
            for &p in &idx {
                for (k, v) in c.power().row(p).iter().enumerate() {
                    avg[k] += v;
                }
            }
        }
        let norm = (cubes.len() * idx.len()) as f64;
        let expected = truth.analytic_spectrum(kind, 0.0, plan.n_win);
        for (k, (a, e)) in avg.iter().zip(&expected).enumerate() {
            let rel = (a / norm - e).abs() / e;
            assert!(rel < 0.05, "{kind} bin {k}: {} vs {e}", a / norm);
        }
    }
}

#[test]
fn broadening_moves_energy_without_changing_total() {
    let scene = two_region_scene();
    let (stack, truth) = gen_field_stack(&scene, 64_000.0, 4096).unwrap();
    let fs = 64_000.0;
    let bands = vec![Band::full(fs), Band::new(200.0, 1_000.0).unwrap(), Band::to_nyquist(6_000.0, fs).unwrap()];
    let out = run_pipeline(&stack, &PipelineSpec::new(StftPlan::new(256, 256), None, bands)).unwrap();
    let region = |m: usize, kind| -> f64 {
        let img = out.movies[m].mean_image();
        let mask = truth.region_mask(kind);
        mean(&img.iter().zip(mask.mask().iter()).filter(|(_, &b)| b).map(|(v, _)| *v).collect::<Vec<_>>())
    };
    let full_t = region(0, RegionKind::Tissue);
    let full_a = region(0, RegionKind::Artery);
    assert!((full_t / full_a - 1.0).abs() < 0.02, "{full_t} vs {full_a}");
    assert!(region(1, RegionKind::Tissue) > 1.3 * region(1, RegionKind::Artery));
    assert!(region(2, RegionKind::Artery) > 5.0 * region(2, RegionKind::Tissue));
}

#[test]
fn bulk_phase_leaves_full_band_power_and_corrupts_low_band() {
    let mut still = two_region_scene();
    still.noise_snr_db = f64::INFINITY;
    still.layout.push(RegionShape::rect(RegionKind::Static, 0, 0, 8, 32));
    let mut moving = still.clone();
    moving.bulk_motion.amplitude_rad = 30.0;
    let fs = 64_000.0;
    let plan = StftPlan::new(256, 256);
    let bands = vec![Band::full(fs), Band::new(200.0, 1_000.0).unwrap()];
    let run = |s: &SceneSpec| {
        let (st, _) = gen_field_stack(s, fs, 2048).unwrap();
        run_pipeline(&st, &PipelineSpec::new(plan, None, bands.clone())).unwrap().movies
    };
    let a = run(&still);
    let b = run(&moving);
    for (x, y) in a[0].frames().iter().zip(b[0].frames().iter()) {
        assert!((x - y).abs() <= 1e-4 * x.abs().max(1e-3), "{x} vs {y}");
    }
    let static_low = |m: &ldh_core::PowerDopplerMovie| m.frames().index_axis(Axis(2), 2).mean().unwrap();
    let full = a[0].frames().index_axis(Axis(2), 2).mean().unwrap();
    assert!(static_low(&a[1]) < 1e-9 * full);
    assert!(static_low(&b[1]) > 0.1 * full);
}

#[test]
fn generation_is_thread_count_independent() {
    let mut scene = SceneSpec {
        nx: 20,
        ny: 12,
        aperture_cyc_per_px: Some(0.3),
        defocus_m: 1e-3,
        layout: vec![RegionShape::rect(RegionKind::Vein, 3, 2, 9, 12)],
        ..SceneSpec::default()
    };
    scene.bulk_motion.amplitude_rad = 3.0;
    let gen = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| gen_field_stack(&scene, 32_000.0, 300).unwrap().0)
    };
    assert_eq!(gen(1), gen(3));
}
