use serde::Serialize;

use super::special::{t_quantile, t_two_sided_p};
use crate::error::{invalid, Error, Result};
use crate::grid::ImageVolume;
use crate::phantom::RegionMask;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionStats {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub fn region_stats(img: &ImageVolume, mask: &RegionMask) -> Result<RegionStats> {
    img.dims.check_same(&mask.dims, "image vs mask")?;
    let vals: Vec<f64> = img
        .data
        .iter()
        .zip(&mask.voxels)
        .filter(|(_, m)| **m)
        .map(|(v, _)| *v)
        .collect();
    if vals.is_empty() {
        return Err(Error::EmptyMask(mask.region_name.clone()));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(RegionStats {
        mean,
        sd: var.sqrt(),
        min: vals.iter().copied().fold(f64::INFINITY, f64::min),
        max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n: vals.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairedTestResult {
    pub mean_diff: f64,
    /// Sample standard deviation of the differences.
    pub sd_diff: f64,
    pub n: usize,
    pub ci95: [f64; 2],
    pub t_stat: f64,
    pub p_two_sided: f64,
    /// All differences equal; `p` is then 0 for a nonzero mean and 1 otherwise.
    pub degenerate: bool,
}

/// Paired-samples t test on the differences.
pub fn paired_ttest(diffs: &[f64]) -> Result<PairedTestResult> {
    if diffs.len() < 2 {
        return Err(invalid("paired test needs at least two differences"));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(invalid("differences must be finite"));
    }
    let n = diffs.len();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let sd = (diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (nf - 1.0)).sqrt();
    Ok(ttest_from_moments(mean, sd, n))
}

/// The same test from summary statistics.
pub fn ttest_from_moments(mean: f64, sd: f64, n: usize) -> PairedTestResult {
    let df = (n - 1) as f64;
    let se = sd / (n as f64).sqrt();
    if sd == 0.0 {
        let (t, p) = if mean == 0.0 { (0.0, 1.0) } else { (mean.signum() * f64::INFINITY, 0.0) };
        return PairedTestResult {
            mean_diff: mean,
            sd_diff: 0.0,
            n,
            ci95: [mean, mean],
            t_stat: t,
            p_two_sided: p,
            degenerate: true,
        };
    }
    let t = mean / se;
    let half = t_quantile(0.975, df) * se;
    PairedTestResult {
        mean_diff: mean,
        sd_diff: sd,
        n,
        ci95: [mean - half, mean + half],
        t_stat: t,
        p_two_sided: t_two_sided_p(t, df),
        degenerate: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    pub p_two_sided: f64,
    pub n: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(invalid("correlation needs at least three pairs"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        t_two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(Correlation { r, p_two_sided: p, n })
}
