//! Report rows and their CSV layout.

use std::fmt::Write as _;

use crate::quant::PairedTestResult;
use crate::recon::ReconMethod;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub method: ReconMethod,
    pub spokes: usize,
    pub ssim: f64,
    pub rmse: f64,
    pub focus: f64,
    pub dice: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TscRow {
    pub method: ReconMethod,
    pub spokes: usize,
    pub region: String,
    pub mean: f64,
    pub sd: f64,
    pub n_voxels: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedRow {
    pub a: ReconMethod,
    pub b: ReconMethod,
    pub test: PairedTestResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverRow {
    pub method: ReconMethod,
    pub spokes: usize,
    pub converged: bool,
    pub iterations: usize,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub method: ReconMethod,
    pub spokes: usize,
    pub error: String,
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("method,spokes,ssim,rmse,focus_measure,dice\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.method, r.spokes, r.ssim, r.rmse, r.focus, r.dice);
    }
    s
}

pub fn focus_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("method,spokes,focus_measure\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.method, r.spokes, r.focus);
    }
    s
}

pub fn tsc_csv(rows: &[TscRow]) -> String {
    let mut s = String::from("method,spokes,region,mean,sd,n\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.method, r.spokes, csv_text(&r.region), r.mean, r.sd, r.n_voxels);
    }
    s
}

pub fn paired_csv(rows: &[PairedRow]) -> String {
    let mut s = String::from("pair,n,mean_diff,sd,ci_lo,ci_hi,t,p,degenerate\n");
    for r in rows {
        let t = &r.test;
        let _ = writeln!(
            s,
            "{} - {},{},{},{},{},{},{},{},{}",
            r.a, r.b, t.n, t.mean_diff, t.sd_diff, t.ci95[0], t.ci95[1], t.t_stat, t.p_two_sided, t.degenerate
        );
    }
    s
}

pub fn solver_csv(rows: &[SolverRow]) -> String {
    let mut s = String::from("method,spokes,converged,iterations,note\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.method, r.spokes, r.converged, r.iterations, csv_text(&r.note));
    }
    s
}

pub fn failures_csv(rows: &[CellFailure]) -> String {
    let mut s = String::from("method,spokes,error\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.method, r.spokes, csv_text(&r.error));
    }
    s
}

/// Long-format profile table: one row per sample.
pub fn profiles_csv(profiles: &[(String, crate::metrics::LineProfile)]) -> String {
    let mut s = String::from("series,position_mm,value\n");
    for (name, p) in profiles {
        for (i, v) in p.values.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", csv_text(name), p.position(i), v);
        }
    }
    s
}
