use crate::error::{Error, Result};

/// Direct window-by-window SSIM (7×7 uniform, K1 = 0.01, K2 = 0.03, sample covariances).
pub fn naive_ssim(x: &[f64], y: &[f64], height: usize, width: usize, range: f64) -> Result<f64> {
    const WIN: usize = 7;
    if height < WIN || width < WIN || x.len() != height * width || y.len() != x.len() {
        return Err(Error::invalid("naive SSIM needs matching images of at least 7x7"));
    }
    let c1 = (0.01 * range) * (0.01 * range);
    let c2 = (0.03 * range) * (0.03 * range);
    let mut scores = Vec::new();
    for r in 0..=height - WIN {
        for c in 0..=width - WIN {
            let mut xs = Vec::with_capacity(WIN * WIN);
            let mut ys = Vec::with_capacity(WIN * WIN);
            for dr in 0..WIN {
                for dc in 0..WIN {
                    xs.push(x[(r + dr) * width + c + dc]);
                    ys.push(y[(r + dr) * width + c + dc]);
                }
            }
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let vx = xs.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>() / (n - 1.0);
            let vy = ys.iter().map(|b| (b - my) * (b - my)).sum::<f64>() / (n - 1.0);
            let cov = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
            let lum = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            let cs = (2.0 * cov + c2) / (vx + vy + c2);
            scores.push(lum * cs);
        }
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn naive_psnr(x: &[f64], y: &[f64], range: f64) -> f64 {
    let mut se = 0.0;
    for (a, b) in x.iter().zip(y) {
        se += (a - b) * (a - b);
    }
    let mse = se / x.len() as f64;
    20.0 * range.log10() - 10.0 * mse.log10()
}
