use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use diffpost_ffi::*;

fn ok(status: DpStatus) {
    if status != DpStatus::Ok {
        panic!("{status:?}: {}", last_error());
    }
}

fn last_error() -> String {
    let n = unsafe { dp_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n + 1];
    unsafe { dp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

struct Problem {
    schedule: *mut DpSchedule,
    op: *mut DpOperator,
    prior: *mut DpPrior,
    y: Vec<f64>,
}

impl Drop for Problem {
    fn drop(&mut self) {
        unsafe {
            dp_schedule_free(self.schedule);
            dp_operator_free(self.op);
            dp_prior_free(self.prior);
        }
    }
}

/// 8×8 image, every other line, two coils, zero-mean unit-variance prior.
fn problem() -> Problem {
    let (h, w) = (8usize, 8usize);
    let mut schedule = ptr::null_mut();
    let mut op = ptr::null_mut();
    let mut prior = ptr::null_mut();
    unsafe {
        ok(dp_schedule_geometric(0.05, 2.0, 20, &mut schedule));
        let mask: Vec<u8> = (0..h * w).map(|k| ((k / w) % 2 == 0) as u8).collect();
        ok(dp_operator_new(h, w, mask.as_ptr(), 2, &mut op));
        let mean = vec![0.0; 2 * h * w];
        let var = vec![1.0; h * w];
        ok(dp_prior_gaussian(h, w, mean.as_ptr(), var.as_ptr(), &mut prior));
        let truth: Vec<f64> = (0..2 * h * w).map(|k| ((k * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let mut m = 0;
        ok(dp_operator_measurement_len(op, &mut m));
        let mut y = vec![0.0; 2 * m];
        ok(dp_operator_simulate(op, truth.as_ptr(), 0.05, 1, y.as_mut_ptr()));
        Problem { schedule, op, prior, y }
    }
}

#[test]
fn version_and_config_defaults() {
    let v = unsafe { CStr::from_ptr(dp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let c = dp_sampler_config_default();
    assert_eq!(c.likelihood, DpLikelihood::TauOverLambda);
    assert_eq!(c.threads, 1);
    assert!(c.n_chains >= 1 && c.lambda > 0.0);
}

#[test]
fn schedule_accessors() {
    let mut s = ptr::null_mut();
    unsafe {
        ok(dp_schedule_from_sigmas([0.1, 0.5, 2.0].as_ptr(), 3, &mut s));
        let mut n = 0;
        ok(dp_schedule_len(s, &mut n));
        assert_eq!(n, 3);
        let mut sigma = -1.0;
        ok(dp_schedule_sigma(s, 0, &mut sigma));
        assert_eq!(sigma, 0.0);
        ok(dp_schedule_sigma(s, 3, &mut sigma));
        assert_eq!(sigma, 2.0);
        assert_eq!(dp_schedule_sigma(s, 4, &mut sigma), DpStatus::InvalidArgument);
        dp_schedule_free(s);
    }
}

#[test]
fn adjoint_matches_forward() {
    let p = problem();
    let (h, w) = (8, 8);
    let x: Vec<f64> = (0..2 * h * w).map(|k| (k as f64 * 0.37).sin()).collect();
    let z: Vec<f64> = (0..p.y.len()).map(|k| (k as f64 * 0.91).cos()).collect();
    let mut ax = vec![0.0; p.y.len()];
    let mut ahz = vec![0.0; 2 * h * w];
    unsafe {
        ok(dp_operator_apply(p.op, x.as_ptr(), ax.as_mut_ptr()));
        ok(dp_operator_adjoint(p.op, z.as_ptr(), ahz.as_mut_ptr()));
    }
    // ⟨Ax, z⟩ = ⟨x, Aᴴz⟩ with complex inner products over interleaved pairs
    let inner = |a: &[f64], b: &[f64]| {
        a.chunks(2).zip(b.chunks(2)).fold((0.0, 0.0), |(re, im), (u, v)| {
            (re + u[0] * v[0] + u[1] * v[1], im + u[0] * v[1] - u[1] * v[0])
        })
    };
    let (l, r) = (inner(&ax, &z), inner(&x, &ahz));
    assert!((l.0 - r.0).abs() < 1e-10 && (l.1 - r.1).abs() < 1e-10, "{l:?} vs {r:?}");
}

#[test]
fn sampling_round_trip() {
    let p = problem();
    let mut config = dp_sampler_config_default();
    config.start_index = 20;
    config.n_chains = 6;
    config.steps_per_scale = 4;
    config.seed = 3;
    config.threads = 2;
    let mut samples = ptr::null_mut();
    unsafe {
        ok(dp_sample(p.schedule, p.prior, p.op, p.y.as_ptr(), &config, &mut samples));
        let (mut n, mut h, mut w) = (0, 0, 0);
        ok(dp_samples_count(samples, &mut n));
        ok(dp_samples_shape(samples, &mut h, &mut w));
        assert_eq!((n, h, w), (6, 8, 8));
        let mut mean = vec![0.0; 2 * h * w];
        let mut buf = vec![0.0; 2 * h * w];
        for k in 0..n {
            ok(dp_samples_get(samples, k, buf.as_mut_ptr()));
            mean.iter_mut().zip(&buf).for_each(|(m, b)| *m += b / n as f64);
        }
        let mut mmse = vec![0.0; 2 * h * w];
        ok(dp_samples_mmse(samples, mmse.as_mut_ptr()));
        assert!(mean.iter().zip(&mmse).all(|(a, b)| (a - b).abs() < 1e-12));
        let mut var = vec![-1.0; h * w];
        ok(dp_samples_variance(samples, var.as_mut_ptr()));
        assert!(var.iter().all(|v| *v >= 0.0));
        assert_eq!(dp_samples_get(samples, n, buf.as_mut_ptr()), DpStatus::InvalidArgument);

        let mut ps = 0.0;
        ok(dp_psnr(h, w, mmse.as_ptr(), mmse.as_ptr(), &mut ps));
        assert!(ps.is_infinite());
        let mut ss = 0.0;
        ok(dp_ssim(h, w, buf.as_ptr(), mmse.as_ptr(), &mut ss));
        assert!(ss < 1.0);
        dp_samples_free(samples);
    }

    // the same seed gives the same MMSE through a second handle
    let mut again = ptr::null_mut();
    unsafe {
        ok(dp_sample(p.schedule, p.prior, p.op, p.y.as_ptr(), &config, &mut again));
        let mut a = vec![0.0; 128];
        ok(dp_samples_get(again, 0, a.as_mut_ptr()));
        let mut b = vec![0.0; 128];
        ok(dp_sample(p.schedule, p.prior, p.op, p.y.as_ptr(), &config, &mut samples));
        ok(dp_samples_get(samples, 0, b.as_mut_ptr()));
        assert_eq!(a, b);
        dp_samples_free(again);
        dp_samples_free(samples);
    }
}

#[test]
fn map_needs_deterministic_config() {
    let p = problem();
    let mut config = dp_sampler_config_default();
    config.start_index = 20;
    config.extended_iters = 20;
    let mut x = vec![0.0; 128];
    unsafe {
        assert_eq!(dp_map(p.schedule, p.prior, p.op, p.y.as_ptr(), &config, x.as_mut_ptr()), DpStatus::InvalidArgument);
        assert!(last_error().contains("deterministic"));
        config.deterministic = true;
        ok(dp_map(p.schedule, p.prior, p.op, p.y.as_ptr(), &config, x.as_mut_ptr()));
    }
    assert!(x.iter().all(|v| v.is_finite()) && x.iter().any(|v| *v != 0.0));
}

#[test]
fn errors_are_reported_not_raised() {
    let mut s = ptr::null_mut();
    unsafe {
        dp_clear_error();
        assert_eq!(dp_last_error_message(ptr::null_mut(), 0), 0);
        assert_eq!(dp_schedule_geometric(1.0, 0.5, 4, &mut s), DpStatus::InvalidArgument);
        assert!(s.is_null());
        let full = last_error();
        assert!(!full.is_empty());
        let mut small = [0 as c_char; 5];
        let n = dp_last_error_message(small.as_mut_ptr(), small.len());
        assert_eq!(n, full.len());
        assert_eq!(CStr::from_ptr(small.as_ptr()).to_bytes(), &full.as_bytes()[..4]);

        assert_eq!(dp_schedule_geometric(0.1, 1.0, 4, ptr::null_mut()), DpStatus::NullPointer);
        let mut n = 0;
        assert_eq!(dp_schedule_len(ptr::null(), &mut n), DpStatus::NullPointer);
        let mut op = ptr::null_mut();
        assert_eq!(dp_operator_new(2, 2, [0u8; 4].as_ptr(), 1, &mut op), DpStatus::InvalidArgument);
        assert_eq!(dp_operator_new(2, 2, [1u8; 4].as_ptr(), 0, &mut op), DpStatus::InvalidArgument);
        assert_eq!(dp_operator_new(0, 2, ptr::null(), 1, &mut op), DpStatus::InvalidArgument);
        let mut prior = ptr::null_mut();
        assert_eq!(dp_prior_gaussian(1, 1, [0.0, 0.0].as_ptr(), [-1.0].as_ptr(), &mut prior), DpStatus::InvalidArgument);
        let missing = CString::new("/nonexistent/mixture.toml").unwrap();
        assert_eq!(dp_prior_gmm_load(missing.as_ptr(), &mut prior), DpStatus::Io);
        assert_eq!(dp_prior_gmm_load(ptr::null(), &mut prior), DpStatus::NullPointer);

        dp_schedule_free(ptr::null_mut());
        dp_operator_free(ptr::null_mut());
        dp_prior_free(ptr::null_mut());
        dp_samples_free(ptr::null_mut());
    }
}

#[test]
fn divergence_has_its_own_status() {
    let p = problem();
    let mut config = dp_sampler_config_default();
    config.start_index = 20;
    config.likelihood = DpLikelihood::Matched;
    config.noise_var = 1e-8;
    let mut samples = ptr::null_mut();
    let status = unsafe { dp_sample(p.schedule, p.prior, p.op, p.y.as_ptr(), &config, &mut samples) };
    assert_eq!(status, DpStatus::Diverged);
    assert!(samples.is_null());
}

#[test]
fn mixture_and_mask_helpers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mix.toml");
    std::fs::write(&path, "weights = [0.5, 0.5]\nvariances = [0.1, 0.1]\nmeans = [[1.0, 0.0], [-1.0, 0.0]]\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut prior = ptr::null_mut();
    let mut schedule = ptr::null_mut();
    let mut grid = vec![7u8; 16 * 16];
    unsafe {
        ok(dp_prior_gmm_load(c.as_ptr(), &mut prior));
        ok(dp_schedule_geometric(0.1, 1.0, 3, &mut schedule));
        let mut s = [0.0; 2];
        ok(dp_prior_score(prior, schedule, 1, 1, [0.0, 0.0].as_ptr(), 1, s.as_mut_ptr()));
        assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
        ok(dp_prior_score(prior, schedule, 1, 1, [3.0, 0.0].as_ptr(), 1, s.as_mut_ptr()));
        assert!(s[0] < 0.0);
        ok(dp_mask_variable_density(16, 16, 0.3, 4, 2.0, 1.0, 5, grid.as_mut_ptr()));
        dp_prior_free(prior);
        dp_schedule_free(schedule);
    }
    assert!(grid.iter().all(|&b| b <= 1));
    let frac = grid.iter().filter(|&&b| b == 1).count() as f64 / grid.len() as f64;
    assert!((frac - 0.3).abs() < 0.05, "{frac}");
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "diffpost.h"

int main(void) {
    DpSchedule *s = NULL;
    if (dp_schedule_geometric(0.1, 3.0, 30, &s) != DP_STATUS_OK) return 10;
    uint8_t mask[1] = {1};
    DpOperator *op = NULL;
    if (dp_operator_new(1, 1, mask, 1, &op) != DP_STATUS_OK) return 11;
    double mean[2] = {0.0, 0.0}, var[1] = {1.0};
    DpPrior *prior = NULL;
    if (dp_prior_gaussian(1, 1, mean, var, &prior) != DP_STATUS_OK) return 12;
    double y[2] = {2.0, 0.0};
    DpSamplerConfig cfg = dp_sampler_config_default();
    cfg.start_index = 30;
    cfg.steps_per_scale = 10;
    cfg.n_chains = 2000;
    cfg.extended_iters = 200;
    cfg.likelihood = DP_LIKELIHOOD_MATCHED;
    cfg.noise_var = 1.0;
    DpSamples *out = NULL;
    if (dp_sample(s, prior, op, y, &cfg, &out) != DP_STATUS_OK) return 13;
    double m[2];
    dp_samples_mmse(out, m);
    printf("%.6f %.6f\n", m[0], m[1]);
    DpSchedule *bad = NULL;
    DpStatus st = dp_schedule_geometric(-1.0, 1.0, 3, &bad);
    char msg[256];
    dp_last_error_message(msg, sizeof msg);
    printf("%d %s\n", (int)st, msg);
    dp_samples_free(out);
    dp_prior_free(prior);
    dp_operator_free(op);
    dp_schedule_free(s);
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    assert!(lib_dir.join("libdiffpost_ffi.so").exists(), "shared library missing in {}", lib_dir.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let build = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg(format!("-I{}", include.display()))
        .arg(format!("-L{}", lib_dir.display()))
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-ldiffpost_ffi")
        .output()
        .expect("C compiler runs");
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8(run.stdout).unwrap();
    let mut lines = text.lines();
    let m: Vec<f64> = lines.next().unwrap().split(' ').map(|v| v.parse().unwrap()).collect();
    // conjugate posterior mean of CN(0,1) prior, y = 2, unit noise: 1 + 0i
    assert!((m[0] - 1.0).abs() < 0.1 && m[1].abs() < 0.1, "{m:?}");
    assert!(lines.next().unwrap().starts_with(&format!("{} ", DpStatus::InvalidArgument as i32)));
}
