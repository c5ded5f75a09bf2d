use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;

use super::artifacts::{Artifacts, Manifest};
use super::arrays::Array;
use super::config::{ExperimentConfig, ExperimentKind, ImageSource, PriorKind};
use super::phantom::make_phantom;
use crate::domain::{ComplexImage, KSpaceData, NoiseSchedule, SamplerConfig};
use crate::error::{Error, Result};
use crate::estimators::{mmse, psnr, ssim, variance_map, RangePolicy, SampleSet, SSIM_WINDOW};
use crate::forward::{CoilMaps, ForwardOperator, SamplingMask};
use crate::oracles::{grid_posterior_2d, histogram_2d, total_variation, GridSpec};
use crate::prior::{gmm_exact_posterior, GaussianPrior, GmmComponent, GmmPrior, ScorePrior};
use crate::sampler::{run_map, run_posterior_sampling, write_trace_csv, PosteriorRun, SamplerOutput};
use crate::score_training::load_checkpoint;

pub const METRICS_HEADER: &str = "estimate,psnr_db,ssim";

/// What a finished run reports back to the command line.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub lines: Vec<String>,
    pub manifest: Manifest,
}

/// Three well separated clusters in the complex plane.
pub fn builtin_toy_mixture() -> GmmPrior {
    let c = Complex64::new;
    let v = 0.015;
    GmmPrior::new(vec![
        GmmComponent { weight: 0.3, mean: vec![c(-2.0, 0.0)], variance: v },
        GmmComponent { weight: 0.4, mean: vec![c(2.0, 0.0)], variance: v },
        GmmComponent { weight: 0.3, mean: vec![c(0.0, 2.5)], variance: v },
    ])
    .expect("built-in mixture is valid")
}

/// Imaging problem assembled from a config.
struct Problem {
    truth: ComplexImage,
    operator: ForwardOperator,
    y: KSpaceData,
    prior: Box<dyn ScorePrior>,
}

fn ground_truth(config: &ExperimentConfig) -> Result<ComplexImage> {
    match config.image.source {
        ImageSource::Phantom => make_phantom(config.image.phantom, config.image.size),
        ImageSource::File => {
            let path = config.image.path.as_ref().ok_or_else(|| Error::Config("image.path missing".into()))?;
            Array::load(path)?.to_image()
        }
    }
}

fn build_prior(config: &ExperimentConfig, truth: &ComplexImage, schedule: &NoiseSchedule) -> Result<Box<dyn ScorePrior>> {
    let (h, w) = truth.shape();
    let p = &config.prior;
    let path = || p.path.as_deref().ok_or_else(|| Error::Config("prior.path missing".into()));
    Ok(match p.kind {
        PriorKind::Gaussian => {
            let variance = truth
                .as_slice()
                .iter()
                .map(|z| if z.norm() > p.support_threshold { p.variance } else { p.background_variance })
                .collect();
            Box::new(GaussianPrior::diagonal(ComplexImage::zeros(h, w), variance)?)
        }
        PriorKind::Gmm => {
            let gmm = GmmPrior::load(path()?)?;
            if gmm.dim() != h * w {
                return Err(Error::Config(format!("mixture has dimension {}, image has {} pixels", gmm.dim(), h * w)));
            }
            Box::new(gmm)
        }
        PriorKind::Checkpoint => {
            let net = load_checkpoint(path()?, schedule)?;
            if net.shape() != (h, w) {
                return Err(Error::Config(format!("checkpoint expects {:?} images, got {h}x{w}", net.shape())));
            }
            Box::new(net)
        }
    })
}

fn build_problem(config: &ExperimentConfig, schedule: &NoiseSchedule) -> Result<Problem> {
    let truth = ground_truth(config)?;
    let (h, w) = truth.shape();
    let mask = SamplingMask::make(h, w, &config.mask.spec())?;
    let coils = if config.coils.count == 1 { CoilMaps::unit(h, w) } else { CoilMaps::synthetic(h, w, config.coils.count)? };
    let operator = ForwardOperator::new(mask, coils)?;
    let y = operator.simulate_measurement(&truth, config.image.noise_sd, config.image.seed)?;
    let prior = build_prior(config, &truth, schedule)?;
    Ok(Problem { truth, operator, y, prior })
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

/// PSNR and SSIM against `reference`; SSIM is left out for images smaller than its window.
fn image_metrics(x: &ComplexImage, reference: &ComplexImage) -> Result<(f64, Option<f64>)> {
    let p = psnr(x, reference, RangePolicy::PerSliceMax)?;
    let s = if x.height() >= SSIM_WINDOW && x.width() >= SSIM_WINDOW {
        Some(ssim(x, reference, RangePolicy::PerSliceMax)?)
    } else {
        None
    };
    Ok((p, s))
}

fn metrics_csv(samples: &SampleSet, estimate: &ComplexImage, extra: &[(&str, &ComplexImage)], reference: Option<&ComplexImage>) -> Result<String> {
    let mut out = format!("{METRICS_HEADER}\n");
    let mut row = |name: String, x: &ComplexImage| -> Result<()> {
        let (p, s) = match reference {
            Some(r) => {
                let (p, s) = image_metrics(x, r)?;
                (Some(p), s)
            }
            None => (None, None),
        };
        writeln!(out, "{name},{},{}", fmt_value(p), fmt_value(s)).expect("writing to a string");
        Ok(())
    };
    for (k, s) in samples.samples().iter().enumerate() {
        row(format!("sample_{k}"), s)?;
    }
    row("mmse".into(), estimate)?;
    for (name, x) in extra {
        row(name.to_string(), x)?;
    }
    Ok(out)
}

/// Samples, MMSE, variance map, CI overlay, metrics and trace.
fn write_common(
    art: &mut Artifacts,
    out: &SamplerOutput,
    extra: &[(&str, &ComplexImage)],
    reference: Option<&ComplexImage>,
    ci_percentile: f64,
) -> Result<ComplexImage> {
    let samples = &out.samples;
    let (h, w) = samples.shape();
    let estimate = mmse(samples);
    let umap = variance_map(samples)?;
    art.array("samples.dparr", &Array::from_images(samples.samples())?)?;
    art.array("mmse.dparr", &Array::from_image(&estimate))?;
    art.png16("mmse.png", &estimate.magnitude(), h, w)?;
    art.array("variance.dparr", &Array::real(vec![h, w], umap.variance.clone())?)?;
    art.png16("variance.png", &umap.variance, h, w)?;
    art.png8("ci_overlay.png", &umap.ci_overlay(ci_percentile)?, h, w)?;
    art.text("metrics.csv", &metrics_csv(samples, &estimate, extra, reference)?)?;
    let mut trace = Vec::new();
    write_trace_csv(&out.trace, &mut trace)?;
    art.bytes("trace.csv", &trace)?;
    Ok(estimate)
}

fn describe(lines: &mut Vec<String>, name: &str, x: &ComplexImage, reference: &ComplexImage) -> Result<()> {
    let (p, s) = image_metrics(x, reference)?;
    lines.push(match s {
        Some(s) => format!("{name}: PSNR {p:.2} dB, SSIM {s:.4}"),
        None => format!("{name}: PSNR {p:.2} dB"),
    });
    Ok(())
}

fn sampler_config(config: &ExperimentConfig, schedule: &NoiseSchedule, default_noise_var: f64) -> Result<SamplerConfig> {
    config.sampler.build(schedule, default_noise_var)
}

fn run_toy(config: &ExperimentConfig, schedule: &NoiseSchedule, art: &mut Artifacts, lines: &mut Vec<String>) -> Result<()> {
    let toy = &config.toy;
    let prior = match &config.prior.path {
        Some(p) => GmmPrior::load(p)?,
        None => builtin_toy_mixture(),
    };
    if prior.dim() != 1 {
        return Err(Error::Config(format!("toy-gmm needs a one-dimensional mixture, got {}", prior.dim())));
    }
    let y0 = Complex64::new(toy.y_re, toy.y_im);
    let op = ForwardOperator::identity_fourier(1, 1);
    let y = op.kspace_from_samples(vec![y0])?;
    let sc = sampler_config(config, schedule, toy.noise_var)?;
    let run = PosteriorRun::new(sc, schedule, &prior, &op, &y)?;
    let out = run_posterior_sampling(&run)?;
    let points: Vec<Complex64> = out.samples.samples().iter().map(|s| s.get(0, 0)).collect();

    let spec = GridSpec::square(toy.grid_half_width, toy.grid_cells);
    let oracle = grid_posterior_2d(
        |z| prior.density(&[z], 0.0).unwrap_or(0.0),
        |z| (-(y0 - z).norm_sqr() / toy.noise_var).exp(),
        spec,
    )?;
    let oracle_p = oracle.cell_probabilities();
    let hist = histogram_2d(&points, &spec);
    let tv = total_variation(&hist, &oracle_p);
    let exact = gmm_exact_posterior(&prior, &vec![vec![Complex64::new(1.0, 0.0)]], &[y0], toy.noise_var)?;

    let reference = ComplexImage::from_vec(1, 1, vec![oracle.mean()])?;
    write_common(art, &out, &[], None, config.experiment.ci_percentile)?;
    let cells = toy.grid_cells;
    art.array("histogram.dparr", &Array::real(vec![cells, cells], hist)?)?;
    art.array("oracle.dparr", &Array::real(vec![cells, cells], oracle_p)?)?;

    // empirical cluster weights by nearest component mean
    let comps = prior.components();
    let mut counts = vec![0usize; comps.len()];
    for z in &points {
        let k = (0..comps.len())
            .min_by(|&a, &b| (z - comps[a].mean[0]).norm().total_cmp(&(z - comps[b].mean[0]).norm()))
            .expect("mixture is non-empty");
        counts[k] += 1;
    }
    let mut summary = String::from("quantity,value\n");
    writeln!(summary, "tv_distance,{tv:.10e}").unwrap();
    let mean = mmse(&out.samples).get(0, 0);
    writeln!(summary, "mmse_error,{:.10e}", (mean - reference.get(0, 0)).norm()).unwrap();
    for (k, w) in exact.weights().iter().enumerate() {
        writeln!(summary, "cluster_{k}_empirical,{:.10e}", counts[k] as f64 / points.len() as f64).unwrap();
        writeln!(summary, "cluster_{k}_exact,{w:.10e}").unwrap();
    }
    art.text("toy_summary.csv", &summary)?;
    lines.push(format!("TV distance to grid posterior: {tv:.4}"));
    lines.push(format!("posterior mean {mean:.4} (oracle {:.4})", reference.get(0, 0)));
    Ok(())
}

fn run_imaging(config: &ExperimentConfig, schedule: &NoiseSchedule, art: &mut Artifacts, lines: &mut Vec<String>) -> Result<()> {
    let problem = build_problem(config, schedule)?;
    let noise_var = config.image.noise_sd * config.image.noise_sd;
    let sc = sampler_config(config, schedule, noise_var)?;
    let Problem { truth, operator, y, prior } = &problem;
    let (h, w) = truth.shape();
    lines.push(format!(
        "{}x{} image, {} coil(s), {:.1}% of k-space acquired",
        h,
        w,
        operator.coils().coils(),
        100.0 * operator.mask().acquired_fraction()
    ));
    art.array("truth.dparr", &Array::from_image(truth))?;
    let mask: Vec<u8> = operator.mask().grid().iter().map(|&b| if b { 255 } else { 0 }).collect();
    art.png8("mask.png", &mask, h, w)?;
    let zero_filled = operator.adjoint(y)?;
    describe(lines, "zero-filled", &zero_filled, truth)?;

    match config.experiment.kind {
        ExperimentKind::Unfolding | ExperimentKind::Multicoil => {
            let run = PosteriorRun::new(sc, schedule, prior.as_ref(), operator, y)?.with_reference(truth.clone())?;
            let out = run_posterior_sampling(&run)?;
            let estimate = write_common(art, &out, &[], Some(truth), config.experiment.ci_percentile)?;
            describe(lines, "MMSE", &estimate, truth)?;
        }
        ExperimentKind::BurnIn => run_burn_in(config, sc, &problem, schedule, art, lines)?,
        ExperimentKind::Map => {
            let run = PosteriorRun::new(sc.clone(), schedule, prior.as_ref(), operator, y)?.with_reference(truth.clone())?;
            let out = run_posterior_sampling(&run)?;
            let map_cfg = SamplerConfig { deterministic: true, ..sc };
            let map_run = PosteriorRun::new(map_cfg, schedule, prior.as_ref(), operator, y)?;
            let map = run_map(&map_run, config.sampler.extended_iters)?;
            let estimate = write_common(art, &out, &[("map", &map.x)], Some(truth), config.experiment.ci_percentile)?;
            art.array("map.dparr", &Array::from_image(&map.x))?;
            art.png16("map.png", &map.x.magnitude(), h, w)?;
            let mut steps = String::from("step,update_norm\n");
            for (k, n) in map.step_norms.iter().enumerate() {
                writeln!(steps, "{},{n:.10e}", k + 1).unwrap();
            }
            art.text("map_steps.csv", &steps)?;
            describe(lines, "MMSE", &estimate, truth)?;
            describe(lines, "MAP", &map.x, truth)?;
        }
        ExperimentKind::ToyGmm => unreachable!("handled by run_toy"),
    }
    Ok(())
}

fn run_burn_in(
    config: &ExperimentConfig,
    sc: SamplerConfig,
    problem: &Problem,
    schedule: &NoiseSchedule,
    art: &mut Artifacts,
    lines: &mut Vec<String>,
) -> Result<()> {
    let Problem { truth, operator, y, prior } = problem;
    let k = sc.steps_per_scale;
    let (start, split, chains, ext) = (sc.start_index, sc.split_index, sc.n_chains, sc.extended_iters);

    let independent_cfg = SamplerConfig { split_index: 0, ..sc.clone() };
    let t0 = Instant::now();
    let run = PosteriorRun::new(independent_cfg, schedule, prior.as_ref(), operator, y)?.with_reference(truth.clone())?;
    let independent = run_posterior_sampling(&run)?;
    let t_independent = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let run = PosteriorRun::new(sc, schedule, prior.as_ref(), operator, y)?.with_reference(truth.clone())?;
    let burn = run_posterior_sampling(&run)?;
    let t_burn = t0.elapsed().as_secs_f64();

    let estimate = write_common(art, &burn, &[], Some(truth), config.experiment.ci_percentile)?;
    let reference_mmse = mmse(&independent.samples);
    let rows = [
        ("independent", &independent, chains * (k * (start - 1) + ext)),
        ("burn-in", &burn, k * (start - 1 - split) + chains * (k * split + ext)),
    ];
    let mut csv = String::from("mode,langevin_steps,mmse_psnr_db,mmse_ssim,mean_variance,mmse_distance\n");
    for (name, out, steps) in rows {
        let m = mmse(&out.samples);
        let (p, s) = image_metrics(&m, truth)?;
        let var = variance_map(&out.samples)?.mean_variance();
        let dist = m.sub(&reference_mmse)?.norm();
        writeln!(csv, "{name},{steps},{p:.10e},{},{var:.10e},{dist:.10e}", fmt_value(s)).unwrap();
        lines.push(format!("{name}: {steps} Langevin steps, mean variance {var:.3e}, MMSE distance {dist:.3e}"));
    }
    art.text("burn_in.csv", &csv)?;
    art.volatile_text("timing.csv", &format!("mode,seconds\nindependent,{t_independent:.6}\nburn-in,{t_burn:.6}\n"))?;
    lines.push(format!("wall time: independent {t_independent:.2} s, burn-in {t_burn:.2} s"));
    describe(lines, "MMSE (burn-in)", &estimate, truth)
}

/// Runs one experiment described by `config_text`, whose relative paths
/// resolve against `base`, writing artifacts and the manifest.
pub fn run_experiment(config_text: &str, base: &Path, output_root: Option<&Path>) -> Result<RunSummary> {
    let mut config = ExperimentConfig::from_toml_str(config_text)?;
    config.experiment.output_dir = super::artifacts::redirect_output(&config.experiment.output_dir, output_root);
    config.resolve_paths(base)?;
    let schedule = config.schedule.build()?;
    let mut art = Artifacts::create(&config.experiment.output_dir)?;
    let mut lines = vec![format!("experiment {}", config.experiment.kind)];
    match config.experiment.kind {
        ExperimentKind::ToyGmm => run_toy(&config, &schedule, &mut art, &mut lines)?,
        _ => run_imaging(&config, &schedule, &mut art, &mut lines)?,
    }
    let output_dir = art.dir().to_path_buf();
    let manifest = art.finish("run", config_text, base, config.sampler.seed)?;
    lines.push(format!("wrote {} artifacts to {}", manifest.artifacts.len(), output_dir.display()));
    Ok(RunSummary { output_dir, lines, manifest })
}
