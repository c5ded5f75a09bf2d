use diffpost::domain::rng::stream_rng;
use diffpost::domain::{ComplexImage, LikelihoodWeight, NoiseSchedule, SamplerConfig};
use diffpost::estimators::{complex_variance, mmse, variance_map};
use diffpost::forward::{CoilMaps, ForwardOperator, MaskSpec, SamplingMask};
use diffpost::oracles::{conjugate_scalar_posterior, langevin_stationary_scalar};
use diffpost::prior::GaussianPrior;
use diffpost::sampler::{perturb_oneshot, perturb_stepwise, run_map, run_posterior_sampling, run_with_burn_in, PosteriorRun};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn scalar_problem(y0: Complex64) -> (ForwardOperator, diffpost::domain::KSpaceData, GaussianPrior) {
    let op = ForwardOperator::identity_fourier(1, 1);
    let y = op.kspace_from_samples(vec![y0]).unwrap();
    let prior = GaussianPrior::isotropic(ComplexImage::point(0.5, -0.5), 2.0).unwrap();
    (op, y, prior)
}

#[test]
fn fixed_scale_chain_reaches_its_stationary_law() {
    let y0 = c(1.5, 0.5);
    let (op, y, prior) = scalar_problem(y0);
    let schedule = NoiseSchedule::from_sigmas(vec![0.4, 0.6, 3.0]).unwrap();
    // start at scale 1: every step repeats the scale-1 coefficients
    let config = SamplerConfig {
        start_index: 1,
        n_chains: 4000,
        extended_iters: 400,
        lambda: 1.0,
        likelihood: LikelihoodWeight::TauSqOverLambda,
        seed: 4,
        ..Default::default()
    };
    let run = PosteriorRun::new(config, &schedule, &prior, &op, &y).unwrap();
    let out = run_posterior_sampling(&run).unwrap();
    let k = run.coefficients(1).unwrap();
    let law = langevin_stationary_scalar(
        c(0.5, -0.5),
        2.0 + schedule.sigma_sq(1).unwrap(),
        k.prior,
        c(1.0, 0.0),
        y0,
        k.data,
        k.noise_sd * k.noise_sd,
    )
    .unwrap();
    let mean = mmse(&out.samples).get(0, 0);
    let var = complex_variance(&out.samples).unwrap()[0];
    let n = out.samples.len() as f64;
    assert!((mean - law.mean).norm() < 3.0 * (law.var / n).sqrt(), "{mean} vs {}", law.mean);
    assert!((var - law.var).abs() < 4.0 * law.var / n.sqrt(), "{var} vs {}", law.var);
}

#[test]
fn deterministic_matched_run_stops_at_the_tempered_mode() {
    let y0 = c(2.0, -1.0);
    let (op, y, prior) = scalar_problem(y0);
    let schedule = NoiseSchedule::geometric(0.3, 2.0, 10).unwrap();
    let config = SamplerConfig {
        start_index: 10,
        steps_per_scale: 5,
        deterministic: true,
        likelihood: LikelihoodWeight::Matched { noise_var: 0.5 },
        ..Default::default()
    };
    let run = PosteriorRun::new(config, &schedule, &prior, &op, &y).unwrap();
    let map = run_map(&run, 20_000).unwrap();
    // fixed point: mode of the scale-1 prior CN(μ, v + σ₁²) times the likelihood
    let post = conjugate_scalar_posterior(c(0.5, -0.5), 2.0 + 0.09, c(1.0, 0.0), y0, 0.5);
    assert!((map.x.get(0, 0) - post.mean).norm() < 1e-10);
    let tail = &map.step_norms[map.step_norms.len() - 50..];
    assert!(tail.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn burn_in_through_every_scale_yields_identical_chains() {
    let (op, y, prior) = scalar_problem(c(0.0, 1.0));
    let schedule = NoiseSchedule::geometric(0.1, 2.0, 6).unwrap();
    let config = SamplerConfig { start_index: 6, n_chains: 5, steps_per_scale: 4, seed: 2, ..Default::default() };
    let run = PosteriorRun::new(config.clone(), &schedule, &prior, &op, &y).unwrap();
    let out = run_with_burn_in(&run, 0).unwrap();
    let first = &out.samples.samples()[0];
    assert!(out.samples.samples().iter().all(|x| x == first));

    // extended iterations after the fork separate them again
    let run = PosteriorRun::new(SamplerConfig { extended_iters: 3, ..config }, &schedule, &prior, &op, &y).unwrap();
    let out = run_with_burn_in(&run, 0).unwrap();
    assert_ne!(out.samples.samples()[0], out.samples.samples()[1]);
}

#[test]
fn aliased_pairs_stay_uncertain() {
    // 2×2 image, even k-space rows only: each column measures the sum of its two pixels.
    // The lower-right pixel is known to be empty, pinning its partner.
    let variance = vec![1.0, 1.0, 1.0, 1e-4];
    let prior = GaussianPrior::diagonal(ComplexImage::zeros(2, 2), variance).unwrap();
    let mask = SamplingMask::make(2, 2, &MaskSpec::SkipOddEven).unwrap();
    let op = ForwardOperator::new(mask, CoilMaps::unit(2, 2)).unwrap();
    let truth = ComplexImage::from_vec(2, 2, vec![c(0.8, 0.1), c(-0.4, 0.6), c(0.2, -0.9), c(0.0, 0.0)]).unwrap();
    let y = op.simulate_measurement(&truth, 0.01, 3).unwrap();
    let schedule = NoiseSchedule::geometric(0.01, 3.0, 30).unwrap();
    let config = SamplerConfig {
        start_index: 30,
        steps_per_scale: 10,
        n_chains: 300,
        extended_iters: 50,
        likelihood: LikelihoodWeight::TauSqOverLambda,
        seed: 8,
        ..Default::default()
    };
    let run = PosteriorRun::new(config, &schedule, &prior, &op, &y).unwrap();
    let out = run_posterior_sampling(&run).unwrap();
    let v = variance_map(&out.samples).unwrap().variance;
    // pixels 0 and 2 share a column and are ambiguous; pixel 1 is pinned by pixel 3
    assert!(v[0] > 5.0 * v[1] && v[2] > 5.0 * v[1], "{v:?}");
    let pinned = mmse(&out.samples).get(0, 1);
    assert!((pinned - truth.get(0, 1)).norm() < 0.05);
}

#[test]
fn one_shot_and_stepwise_perturbations_share_moments() {
    let schedule = NoiseSchedule::geometric(0.2, 4.0, 6).unwrap();
    let x0 = ComplexImage::point(-0.3, 0.9);
    let mut ra = stream_rng(1, 0);
    let mut rb = stream_rng(1, 1);
    let n = 20_000;
    for i in [1, 4, 6] {
        let s2 = schedule.sigma_sq(i).unwrap();
        for draws in [
            (0..n).map(|_| perturb_stepwise(&schedule, &x0, i, &mut ra).unwrap().get(0, 0)).collect::<Vec<_>>(),
            (0..n).map(|_| perturb_oneshot(&schedule, &x0, i, &mut rb).unwrap().get(0, 0)).collect(),
        ] {
            let m = draws.iter().sum::<Complex64>() / n as f64;
            let v = draws.iter().map(|z| (z - m).norm_sqr()).sum::<f64>() / (n - 1) as f64;
            assert!((m - x0.get(0, 0)).norm() < 4.0 * (s2 / n as f64).sqrt());
            assert!((v - s2).abs() < 4.0 * s2 / (n as f64).sqrt());
        }
    }
    assert!(perturb_oneshot(&schedule, &x0, 0, &mut ra).is_err());
    assert!(perturb_stepwise(&schedule, &x0, 7, &mut ra).is_err());
}

#[test]
fn stochastic_runs_with_parallel_chains_match_sequential() {
    let (op, y, prior) = scalar_problem(c(1.0, 1.0));
    let schedule = NoiseSchedule::geometric(0.1, 2.0, 6).unwrap();
    let config = SamplerConfig { start_index: 6, n_chains: 16, split_index: 3, seed: 12, ..Default::default() };
    let seq = PosteriorRun::new(config.clone(), &schedule, &prior, &op, &y).unwrap();
    let par = PosteriorRun::new(SamplerConfig { threads: 4, ..config }, &schedule, &prior, &op, &y).unwrap();
    assert_eq!(
        run_posterior_sampling(&seq).unwrap().samples.samples(),
        run_posterior_sampling(&par).unwrap().samples.samples()
    );
}
