use std::io::Write;

use crate::error::Result;

pub const TRACE_HEADER: &str = "chain,scale,step,update_norm,psnr,ssim";

/// One sampled point of a chain's convergence curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// `None` for the burn-in chain.
    pub chain: Option<usize>,
    pub scale: usize,
    pub step: usize,
    pub update_norm: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

/// CSV with [`TRACE_HEADER`]; the burn-in chain is written as `burn-in` and
/// missing metrics as empty fields.
pub fn write_trace_csv(records: &[TraceRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
    for r in records {
        let chain = r.chain.map(|c| c.to_string()).unwrap_or_else(|| "burn-in".into());
        writeln!(out, "{chain},{},{},{:.10e},{},{}", r.scale, r.step, r.update_norm, opt(r.psnr), opt(r.ssim))?;
    }
    Ok(())
}
