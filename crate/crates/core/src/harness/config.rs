use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::{EvalPath, TrajectoryMode};
use crate::error::{Error, Result};
use crate::grid::Dims;
use crate::metrics::SsimParams;
use crate::phantom::{label_for_name, Mismatch, PhantomGeometry};
use crate::recon::{ReconConfig, ReconMethod};

pub const SCHEMA_VERSION: u32 = 1;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSection {
    /// Grid the phantom labels are drawn on, `[nx, ny, nz]`.
    pub dims: [usize; 3],
    pub voxel_size_mm: f64,
    /// Grid of the prior image; `None` uses the phantom grid.
    pub prior_dims: Option<[usize; 3]>,
    pub mismatch: Mismatch,
    pub geometry: PhantomGeometry,
}

impl Default for PhantomSection {
    fn default() -> Self {
        Self {
            dims: [192, 192, 1],
            voxel_size_mm: 1.0,
            prior_dims: None,
            mismatch: Mismatch::None,
            geometry: PhantomGeometry::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PathChoice {
    #[default]
    Gridded,
    Direct,
}

impl PathChoice {
    pub fn eval_path(self) -> EvalPath {
        match self {
            PathChoice::Gridded => EvalPath::Gridded,
            PathChoice::Direct => EvalPath::Direct,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionSection {
    /// Reconstruction grid.
    pub dims: [usize; 3],
    pub spokes: Vec<usize>,
    pub samples_per_spoke: usize,
    pub mode: TrajectoryMode,
    pub k0_fraction: f64,
    pub n_coils: usize,
    /// Per-component noise standard deviation.
    pub sigma: f64,
    pub path: PathChoice,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        Self {
            dims: [64, 64, 1],
            spokes: vec![8, 16, 32, 64],
            samples_per_spoke: 64,
            mode: TrajectoryMode::DensityAdapted,
            k0_fraction: 0.2,
            n_coils: 8,
            sigma: 100.0,
            path: PathChoice::Gridded,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub ssim: SsimParams,
    /// Margin around the true tumour box for the segmentation.
    pub segment_margin: usize,
    /// Profile endpoints in mm; `None` draws a horizontal line through the tumour.
    pub profile: Option<[[f64; 3]; 2]>,
    pub profile_samples: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            ssim: SsimParams::default(),
            segment_margin: 3,
            profile: None,
            profile_samples: 101,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TscSection {
    pub regions: Vec<String>,
    pub water_fraction: f64,
    pub erosion: usize,
    /// Method pairs `[a, b]` compared by paired t tests on `a − b`.
    pub paired: Vec<[ReconMethod; 2]>,
}

impl Default for TscSection {
    fn default() -> Self {
        Self {
            regions: vec!["glandular".into(), "adipose".into(), "tumor".into()],
            water_fraction: crate::phantom::TISSUE_WATER_FRACTION,
            erosion: 1,
            paired: vec![
                [ReconMethod::Adc, ReconMethod::Wtv],
                [ReconMethod::Adc, ReconMethod::Dtv],
                [ReconMethod::Adc, ReconMethod::AgTv],
                [ReconMethod::Wtv, ReconMethod::AgTv],
                [ReconMethod::Dtv, ReconMethod::AgTv],
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub master_seed: u64,
    pub output_dir: String,
    /// Worker threads for cells; 0 uses every core.
    pub jobs: usize,
    pub methods: Vec<ReconMethod>,
    pub render_panels: bool,
    pub phantom: PhantomSection,
    pub acquisition: AcquisitionSection,
    /// Per-method solver settings; missing methods use the defaults.
    pub recon: BTreeMap<ReconMethod, ReconConfig>,
    pub metrics: MetricsSection,
    pub tsc: TscSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            master_seed: 7,
            output_dir: "out".into(),
            jobs: 0,
            methods: vec![ReconMethod::Adc, ReconMethod::Wtv, ReconMethod::Dtv, ReconMethod::AgTv],
            render_panels: true,
            phantom: PhantomSection::default(),
            acquisition: AcquisitionSection::default(),
            recon: BTreeMap::new(),
            metrics: MetricsSection::default(),
            tsc: TscSection::default(),
        }
    }
}

fn dims_of(d: [usize; 3], what: &str) -> Result<Dims> {
    Dims::from_slice(&d).map_err(|e| config_err(format!("{what}: {e}")))
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn phantom_dims(&self) -> Result<Dims> {
        dims_of(self.phantom.dims, "phantom.dims")
    }

    pub fn prior_dims(&self) -> Result<Dims> {
        dims_of(self.phantom.prior_dims.unwrap_or(self.phantom.dims), "phantom.prior_dims")
    }

    pub fn recon_dims(&self) -> Result<Dims> {
        dims_of(self.acquisition.dims, "acquisition.dims")
    }

    /// Recon voxel size: the phantom field of view divided over the recon grid.
    pub fn recon_voxel_size(&self) -> Result<[f64; 3]> {
        let p = self.phantom_dims()?.axes();
        let r = self.recon_dims()?.axes();
        Ok([0, 1, 2].map(|a| p[a] as f64 * self.phantom.voxel_size_mm / r[a] as f64))
    }

    /// Solver settings for `method`.
    pub fn recon_for(&self, method: ReconMethod) -> ReconConfig {
        let mut c = self.recon.get(&method).cloned().unwrap_or_else(|| ReconConfig::for_method(method));
        c.method = method;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let a = &self.acquisition;
        if a.spokes.is_empty() || a.spokes.contains(&0) {
            return Err(config_err("acquisition.spokes must be a nonempty list of positive counts"));
        }
        if a.samples_per_spoke < 8 {
            return Err(config_err("acquisition.samples_per_spoke must be at least 8"));
        }
        if !(a.k0_fraction > 0.0 && a.k0_fraction <= 0.5) {
            return Err(config_err("acquisition.k0_fraction must lie in (0, 0.5]"));
        }
        if a.n_coils == 0 {
            return Err(config_err("acquisition.n_coils must be at least 1"));
        }
        if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
            return Err(config_err("acquisition.sigma must be finite and >= 0"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods must not be empty"));
        }
        let pd = self.phantom_dims()?;
        let rd = self.recon_dims()?;
        let prd = self.prior_dims()?;
        if (pd.nz > 1) != (rd.nz > 1) || (pd.nz > 1) != (prd.nz > 1) {
            return Err(config_err("phantom, prior and recon grids must share dimensionality"));
        }
        if rd.nx > pd.nx || rd.ny > pd.ny || rd.nz > pd.nz {
            return Err(config_err("recon grid must not be finer than the phantom grid"));
        }
        if !(self.phantom.voxel_size_mm > 0.0) {
            return Err(config_err("phantom.voxel_size_mm must be positive"));
        }
        for (m, c) in &self.recon {
            let mut c = c.clone();
            c.method = *m;
            c.validate().map_err(|e| config_err(format!("recon.{m}: {e}")))?;
        }
        self.metrics.ssim.validate().map_err(|e| config_err(format!("metrics.ssim: {e}")))?;
        if self.metrics.profile_samples < 2 {
            return Err(config_err("metrics.profile_samples must be at least 2"));
        }
        for r in &self.tsc.regions {
            if label_for_name(r).is_none() {
                return Err(config_err(format!("tsc.regions: unknown region {r:?}")));
            }
        }
        if !(self.tsc.water_fraction > 0.0 && self.tsc.water_fraction <= 1.0) {
            return Err(config_err("tsc.water_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}
