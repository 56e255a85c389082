//! End-to-end experiment: phantom, acquisitions over a spoke sweep, every
//! (method, spokes) reconstruction, metrics, TSC and paired statistics.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::PipelineConfig;
use super::io::{read_volume, to_f32_precision, write_atomic, write_kspace, write_volume};
use super::render::render_panel;
use super::report::*;
use crate::acquisition::*;
use crate::error::{Error, Result};
use crate::grid::{ImageVolume, Units};
use crate::metrics::{dice, focus_measure, line_profile, rmse, segment_tumor, ssim, LineProfile};
use crate::par;
use crate::phantom::*;
use crate::quant::{fit_calibration, paired_ttest, quantify_tsc, region_stats};
use crate::recon::{recon_adc_with, reconstruct, BackgroundMask, ConvergenceLog, ReconMethod};

/// Seed of an RNG stream identified by `label`, derived from the master seed.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    // FNV-1a over the label, then a splitmix64 finaliser
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Phantom-derived inputs shared by every cell.
pub struct Scene {
    pub phantom: DigitalPhantom,
    pub truth: ImageVolume,
    pub labels: ImageVolume,
    pub prior: PriorImage,
    pub coils: CoilSensitivities,
    pub background: BackgroundMask,
}

pub fn build_scene(cfg: &PipelineConfig) -> Result<Scene> {
    let dims = cfg.recon_dims()?;
    let phantom = build_breast_phantom(
        cfg.phantom_dims()?,
        cfg.phantom.voxel_size_mm,
        &cfg.phantom.geometry,
        derive_seed(cfg.master_seed, "phantom"),
    )?;
    let truth = to_f32_precision(&phantom.signal_at(dims)?);
    let labels = ImageVolume {
        dims,
        voxel_size: truth.voxel_size,
        units: Units::Label,
        data: resample_labels(&phantom, dims).into_iter().map(f64::from).collect(),
    };
    let prior = render_prior(&phantom, cfg.prior_dims()?, &cfg.phantom.mismatch)?;
    let coils = make_coils(dims, cfg.acquisition.n_coils, derive_seed(cfg.master_seed, "coils"))?;
    let background = BackgroundMask::from_phantom(&phantom, dims, 1);
    Ok(Scene {
        phantom,
        truth,
        labels,
        prior,
        coils,
        background,
    })
}

/// Acquisition at one spoke count.
pub fn acquire(cfg: &PipelineConfig, scene: &Scene, spokes: usize) -> Result<(KSpaceData, EncodingOperator)> {
    let a = &cfg.acquisition;
    let dims = scene.truth.dims;
    let traj = make_radial_trajectory(spokes, a.samples_per_spoke, dims, a.mode, a.k0_fraction)?;
    let path = a.path.eval_path();
    let clean = forward_model(&scene.truth, &traj, &scene.coils, path)?;
    let data = add_noise(&clean, a.sigma, derive_seed(cfg.master_seed, &format!("noise/{spokes}")))?;
    let op = EncodingOperator::new(dims, &traj, &scene.coils, path)?;
    Ok((data, op))
}

fn mask_from_labels(labels: &ImageVolume, name: &str, erosion: usize) -> Result<RegionMask> {
    let label = label_for_name(name).ok_or_else(|| Error::InvalidParameter(format!("unknown region {name:?}")))?;
    let m = RegionMask::new(
        labels.dims,
        labels.data.iter().map(|&l| l as u8 == label).collect(),
        name,
    )?
    .eroded(erosion);
    if m.is_empty() {
        return Err(Error::EmptyMask(format!("{name} after {erosion} erosion steps")));
    }
    Ok(m)
}

/// Everything the evaluation of one stored image needs; all of it is persisted.
pub struct EvalInputs<'a> {
    pub truth: &'a ImageVolume,
    pub labels: &'a ImageVolume,
    pub reference: &'a ImageVolume,
}

/// Metric row and TSC rows of one reconstruction.
pub fn evaluate(
    cfg: &PipelineConfig,
    method: ReconMethod,
    spokes: usize,
    image: &ImageVolume,
    inputs: &EvalInputs,
) -> Result<(MetricRow, Vec<TscRow>)> {
    let tumor = mask_from_labels(inputs.labels, "tumor", 0)?;
    let seg = segment_tumor(image, &tumor, cfg.metrics.segment_margin)?;
    let row = MetricRow {
        method,
        spokes,
        ssim: ssim(inputs.reference, image, &cfg.metrics.ssim)?.mean,
        rmse: rmse(inputs.truth, image)?,
        focus: focus_measure(image)?,
        dice: dice(&seg, &tumor)?,
    };
    let e = cfg.tsc.erosion;
    let v77 = region_stats(image, &mask_from_labels(inputs.labels, "vial77", e)?)?.mean;
    let v154 = region_stats(image, &mask_from_labels(inputs.labels, "vial154", e)?)?.mean;
    let c = &cfg.phantom.geometry.concentrations;
    let curve = fit_calibration([v77, v154], [c.vial77, c.vial154])?;
    let mut tsc = Vec::new();
    for region in &cfg.tsc.regions {
        let mask = mask_from_labels(inputs.labels, region, e)?;
        let is_tissue = !region.starts_with("vial");
        let t = quantify_tsc(image, &mask, &curve, is_tissue, cfg.tsc.water_fraction)?;
        tsc.push(TscRow {
            method,
            spokes,
            region: region.clone(),
            mean: t.mean,
            sd: t.sd,
            n_voxels: t.n_voxels,
        });
    }
    Ok((row, tsc))
}

/// Paired tests on `a − b` over every (spokes, region) where both have a TSC.
pub fn paired_tests(cfg: &PipelineConfig, tsc: &[TscRow]) -> Vec<PairedRow> {
    let table: BTreeMap<(ReconMethod, usize, &str), f64> =
        tsc.iter().map(|r| ((r.method, r.spokes, r.region.as_str()), r.mean)).collect();
    let mut out = Vec::new();
    for &[a, b] in &cfg.tsc.paired {
        if !cfg.methods.contains(&a) || !cfg.methods.contains(&b) {
            continue;
        }
        let mut diffs = Vec::new();
        for &s in &cfg.acquisition.spokes {
            for region in &cfg.tsc.regions {
                if let (Some(x), Some(y)) = (table.get(&(a, s, region.as_str())), table.get(&(b, s, region.as_str()))) {
                    diffs.push(x - y);
                }
            }
        }
        match paired_ttest(&diffs) {
            Ok(test) => out.push(PairedRow { a, b, test }),
            Err(e) => ::log::warn!("paired test {a} - {b} skipped: {e}"),
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct ReportBundle {
    pub metrics: Vec<MetricRow>,
    pub tsc: Vec<TscRow>,
    pub paired: Vec<PairedRow>,
    pub solver: Vec<SolverRow>,
    pub failures: Vec<CellFailure>,
    pub profiles: Vec<(String, LineProfile)>,
    pub files: Vec<PathBuf>,
}

impl ReportBundle {
    pub fn all_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn metric(&self, method: ReconMethod, spokes: usize) -> Option<&MetricRow> {
        self.metrics.iter().find(|r| r.method == method && r.spokes == spokes)
    }
}

struct CellOutput {
    image: ImageVolume,
    log: ConvergenceLog,
    metric: MetricRow,
    tsc: Vec<TscRow>,
}

fn volume_name(method: ReconMethod, spokes: usize) -> String {
    format!("recon_{}_{spokes}.snav", method.as_str().replace('-', "").to_lowercase())
}

fn reference_name(spokes: usize) -> String {
    format!("reference_{spokes}.snav")
}

fn profile_endpoints(cfg: &PipelineConfig) -> [[f64; 3]; 2] {
    cfg.metrics.profile.unwrap_or_else(|| {
        let g = &cfg.phantom.geometry;
        let c = g.tumor_center_mm;
        let r = 2.0 * g.tumor_radius_mm.max(5.0);
        [[c[0] - r, c[1], c[2]], [c[0] + r, c[1], c[2]]]
    })
}

struct Writer {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.root.join(name);
        write_atomic(&p, body.as_bytes())?;
        self.files.push(p);
        Ok(())
    }

    fn volume(&mut self, name: &str, img: &ImageVolume, seed: u64) -> Result<()> {
        let p = self.root.join(name);
        write_volume(img, seed, &p)?;
        self.files.push(p);
        Ok(())
    }
}

/// Run every configured cell and write the reports under `out`.
///
/// Cell failures are recorded in the bundle and do not stop the run.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<ReportBundle> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let mut w = Writer {
        root: out.to_path_buf(),
        files: Vec::new(),
    };
    let scene = build_scene(cfg)?;
    let seed = cfg.master_seed;
    w.text("config.toml", &cfg.to_toml())?;
    w.volume("truth.snav", &scene.truth, seed)?;
    w.volume("labels.snav", &scene.labels, seed)?;
    w.volume("prior.snav", &scene.prior.values, seed)?;

    let spokes = &cfg.acquisition.spokes;
    let cells: Vec<(ReconMethod, usize)> = cfg
        .methods
        .iter()
        .flat_map(|&m| spokes.iter().map(move |&s| (m, s)))
        .collect();

    let (acqs, outcomes) = par::with_jobs(cfg.jobs, || -> Result<_> {
        let acqs: Vec<(KSpaceData, EncodingOperator, ImageVolume)> = par::map_slice(spokes, |&s| {
            let (data, op) = acquire(cfg, &scene, s)?;
            let reference = recon_adc_with(&op, &data, &cfg.recon_for(ReconMethod::Adc))?;
            Ok((data, op, to_f32_precision(&reference.image)))
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let outcomes: Vec<Result<CellOutput>> = par::map_slice(&cells, |&(method, s)| {
            let t0 = Instant::now();
            let k = spokes.iter().position(|&x| x == s).unwrap();
            let (data, op, reference) = &acqs[k];
            let mut rc = cfg.recon_for(method);
            rc.seed = derive_seed(seed, &format!("recon/{method}/{s}"));
            let r = reconstruct(op, data, &rc, Some(&scene.prior), Some(&scene.background))?;
            let image = to_f32_precision(&r.image);
            let inputs = EvalInputs {
                truth: &scene.truth,
                labels: &scene.labels,
                reference,
            };
            let (metric, tsc) = evaluate(cfg, method, s, &image, &inputs)?;
            ::log::info!("{method} @ {s} spokes: {:.1} s", t0.elapsed().as_secs_f64());
            Ok(CellOutput {
                image,
                log: r.log,
                metric,
                tsc,
            })
        });
        Ok((acqs, outcomes))
    })?;

    for (s, (data, _, reference)) in spokes.iter().zip(&acqs) {
        let p = out.join(format!("kspace_{s}.snak"));
        write_kspace(data, &p)?;
        w.files.push(p);
        w.volume(&reference_name(*s), reference, data.seed)?;
    }

    let mut bundle = ReportBundle::default();
    let mut images: BTreeMap<(ReconMethod, usize), ImageVolume> = BTreeMap::new();
    for (&(method, s), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(c) => {
                w.volume(&volume_name(method, s), &c.image, seed)?;
                if !c.log.records.is_empty() {
                    let name = format!("convergence/{}_{s}.csv", method.as_str().replace('-', "").to_lowercase());
                    w.text(&name, &c.log.to_csv())?;
                }
                bundle.solver.push(SolverRow {
                    method,
                    spokes: s,
                    converged: c.log.converged,
                    iterations: c.log.records.len(),
                    note: c.log.note.clone(),
                });
                bundle.metrics.push(c.metric);
                bundle.tsc.extend(c.tsc);
                images.insert((method, s), c.image);
            }
            Err(e) => {
                ::log::error!("{method} @ {s} spokes failed: {e}");
                bundle.failures.push(CellFailure {
                    method,
                    spokes: s,
                    error: e.to_string(),
                });
            }
        }
    }
    bundle.paired = paired_tests(cfg, &bundle.tsc);

    let [p0, p1] = profile_endpoints(cfg);
    let n = cfg.metrics.profile_samples;
    let top = *spokes.iter().max().unwrap();
    match line_profile(&scene.truth, p0, p1, n) {
        Ok(p) => {
            bundle.profiles.push(("truth".into(), p));
            for &m in &cfg.methods {
                if let Some(img) = images.get(&(m, top)) {
                    bundle.profiles.push((format!("{m}@{top}"), line_profile(img, p0, p1, n)?));
                }
            }
        }
        Err(e) => ::log::warn!("line profile skipped: {e}"),
    }

    w.text("metrics.csv", &metrics_csv(&bundle.metrics))?;
    w.text("focus_vs_spokes.csv", &focus_csv(&bundle.metrics))?;
    w.text("tsc.csv", &tsc_csv(&bundle.tsc))?;
    w.text("paired_tests.csv", &paired_csv(&bundle.paired))?;
    w.text("solver.csv", &solver_csv(&bundle.solver))?;
    w.text("failures.csv", &failures_csv(&bundle.failures))?;
    w.text("profiles.csv", &profiles_csv(&bundle.profiles))?;

    if cfg.render_panels {
        let hi = {
            let mut v = scene.truth.data.clone();
            v.sort_by(f64::total_cmp);
            crate::metrics::segment::percentile(&v, 0.99)
        };
        for &s in spokes {
            let mut tiles = vec![&scene.truth];
            tiles.extend(cfg.methods.iter().filter_map(|m| images.get(&(*m, s))));
            let p = out.join(format!("panel_{s}.png"));
            render_panel(&tiles, [0.0, hi.max(f64::MIN_POSITIVE)], &p)?;
            w.files.push(p);
        }
    }
    bundle.files = w.files;
    Ok(bundle)
}

/// Recompute metrics, TSC and paired tests from the volumes a previous run
/// persisted in `out`, and rewrite the corresponding reports.
pub fn recompute_reports(cfg: &PipelineConfig, out: &Path) -> Result<ReportBundle> {
    cfg.validate()?;
    let (truth, _) = read_volume(&out.join("truth.snav"))?;
    let (labels, _) = read_volume(&out.join("labels.snav"))?;
    let mut bundle = ReportBundle::default();
    for &m in &cfg.methods {
        for &s in &cfg.acquisition.spokes {
            let path = out.join(volume_name(m, s));
            if !path.exists() {
                bundle.failures.push(CellFailure {
                    method: m,
                    spokes: s,
                    error: format!("{} missing", path.display()),
                });
                continue;
            }
            let (image, _) = read_volume(&path)?;
            let (reference, _) = read_volume(&out.join(reference_name(s)))?;
            let inputs = EvalInputs {
                truth: &truth,
                labels: &labels,
                reference: &reference,
            };
            match evaluate(cfg, m, s, &image, &inputs) {
                Ok((row, tsc)) => {
                    bundle.metrics.push(row);
                    bundle.tsc.extend(tsc);
                }
                Err(e) => bundle.failures.push(CellFailure {
                    method: m,
                    spokes: s,
                    error: e.to_string(),
                }),
            }
        }
    }
    bundle.paired = paired_tests(cfg, &bundle.tsc);
    let mut w = Writer {
        root: out.to_path_buf(),
        files: Vec::new(),
    };
    w.text("metrics.csv", &metrics_csv(&bundle.metrics))?;
    w.text("focus_vs_spokes.csv", &focus_csv(&bundle.metrics))?;
    w.text("tsc.csv", &tsc_csv(&bundle.tsc))?;
    w.text("paired_tests.csv", &paired_csv(&bundle.paired))?;
    bundle.files = w.files;
    Ok(bundle)
}
