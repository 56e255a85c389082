//! Digital breast phantoms with known sodium concentrations, synthetic ¹H-like
//! prior images, and region masks.
//!
//! Geometry is defined in millimetres relative to the field-of-view centre, so
//! the same phantom can be rasterised at any grid (labels at the sodium grid,
//! priors at a finer grid, supersampled partial-volume signal, ...).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Dims, ImageVolume, Units};
use crate::par;

pub const BACKGROUND: u8 = 0;
pub const ADIPOSE: u8 = 1;
pub const GLANDULAR: u8 = 2;
pub const TUMOR: u8 = 3;
pub const VIAL77: u8 = 4;
pub const VIAL154: u8 = 5;
pub const SKIN: u8 = 6;

pub const COMPARTMENT_NAMES: [&str; 7] = [
    "background",
    "adipose",
    "glandular",
    "tumor",
    "vial77",
    "vial154",
    "skin",
];

/// Water fraction assigned to every tissue compartment.
pub const TISSUE_WATER_FRACTION: f64 = 0.75;

pub fn label_for_name(name: &str) -> Option<u8> {
    COMPARTMENT_NAMES
        .iter()
        .position(|n| *n == name)
        .map(|p| p as u8)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Compartment {
    pub label: u8,
    pub name: String,
    /// mmol/L
    pub concentration: f64,
    pub water_fraction: f64,
}

/// Sodium concentrations (mmol/L) per compartment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Concentrations {
    pub adipose: f64,
    pub glandular: f64,
    pub tumor: f64,
    pub vial77: f64,
    pub vial154: f64,
    pub skin: f64,
}

impl Default for Concentrations {
    fn default() -> Self {
        Self {
            adipose: 20.0,
            glandular: 40.0,
            tumor: 80.0,
            vial77: 77.0,
            vial154: 154.0,
            skin: 30.0,
        }
    }
}

/// Phantom geometry in mm, relative to the centre of the field of view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomGeometry {
    pub breast_center_mm: [f64; 3],
    pub breast_semi_axes_mm: [f64; 3],
    /// 0 disables the skin compartment.
    pub skin_thickness_mm: f64,
    /// Glandular region as a fraction of the breast semi-axes.
    pub gland_extent: f64,
    /// Characteristic wavelength of the glandular texture.
    pub texture_scale_mm: f64,
    /// Threshold on the unit-variance texture field; 0 gives roughly half glandular.
    pub gland_threshold: f64,
    pub tumor_center_mm: [f64; 3],
    /// 0 means no tumour.
    pub tumor_radius_mm: f64,
    pub vial77_center_mm: [f64; 3],
    pub vial154_center_mm: [f64; 3],
    pub vial_radius_mm: f64,
    /// Vials are cylinders along z; only used for 3D grids.
    pub vial_half_length_mm: f64,
    pub concentrations: Concentrations,
}

impl Default for PhantomGeometry {
    fn default() -> Self {
        Self {
            breast_center_mm: [0.0, 12.0, 0.0],
            breast_semi_axes_mm: [72.0, 56.0, 45.0],
            skin_thickness_mm: 3.0,
            gland_extent: 0.78,
            texture_scale_mm: 30.0,
            gland_threshold: 0.0,
            tumor_center_mm: [22.0, 16.0, 0.0],
            tumor_radius_mm: 12.0,
            vial77_center_mm: [-62.0, -66.0, 0.0],
            vial154_center_mm: [62.0, -66.0, 0.0],
            vial_radius_mm: 13.0,
            vial_half_length_mm: 30.0,
            concentrations: Concentrations::default(),
        }
    }
}

const TEXTURE_MODES: usize = 32;

/// Seeded band-limited random field with unit variance.
#[derive(Clone, Debug, PartialEq)]
struct Texture {
    /// (wavevector in cycles/mm, phase)
    modes: Vec<([f64; 3], f64)>,
}

impl Texture {
    fn new(seed: u64, scale_mm: f64, three_d: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e47_u64);
        let modes = (0..TEXTURE_MODES)
            .map(|_| {
                let mag = rng.random_range(0.6..1.0) / scale_mm;
                let dir = if three_d {
                    let z: f64 = rng.random_range(-1.0..1.0);
                    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let s = (1.0 - z * z).sqrt();
                    [s * phi.cos(), s * phi.sin(), z]
                } else {
                    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    [phi.cos(), phi.sin(), 0.0]
                };
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                ([dir[0] * mag, dir[1] * mag, dir[2] * mag], phase)
            })
            .collect();
        Self { modes }
    }

    fn eval(&self, p: [f64; 3]) -> f64 {
        let norm = (2.0 / self.modes.len() as f64).sqrt();
        self.modes
            .iter()
            .map(|(k, ph)| {
                (std::f64::consts::TAU * (k[0] * p[0] + k[1] * p[1] + k[2] * p[2]) + ph).cos()
            })
            .sum::<f64>()
            * norm
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DigitalPhantom {
    pub dims: Dims,
    pub voxel_size: [f64; 3],
    pub labels: Vec<u8>,
    pub compartments: Vec<Compartment>,
    pub seed: u64,
    pub geometry: PhantomGeometry,
    texture: Texture,
}

fn dist_xy(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn dist(a: [f64; 3], b: [f64; 3], three_d: bool) -> f64 {
    if three_d {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    } else {
        dist_xy(a, b)
    }
}

fn ellipsoid_q(p: [f64; 3], c: [f64; 3], axes: [f64; 3], three_d: bool) -> f64 {
    let mut q = ((p[0] - c[0]) / axes[0]).powi(2) + ((p[1] - c[1]) / axes[1]).powi(2);
    if three_d {
        q += ((p[2] - c[2]) / axes[2]).powi(2);
    }
    q
}

fn check_dims(dims: Dims) -> Result<()> {
    let small = if dims.nz == 1 {
        dims.nx < 16 || dims.ny < 16
    } else {
        dims.nx < 16 || dims.ny < 16 || dims.nz < 16
    };
    if small {
        return Err(invalid(format!("phantom grid {dims} is below 16 voxels on some axis")));
    }
    Ok(())
}

fn validate_geometry(g: &PhantomGeometry, fov: [f64; 3], three_d: bool) -> Result<()> {
    let c = &g.concentrations;
    for (name, v) in [
        ("adipose", c.adipose),
        ("glandular", c.glandular),
        ("tumor", c.tumor),
        ("vial77", c.vial77),
        ("vial154", c.vial154),
        ("skin", c.skin),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} concentration must be finite and >= 0")));
        }
    }
    if g.breast_semi_axes_mm[..if three_d { 3 } else { 2 }]
        .iter()
        .any(|a| !(*a > 0.0))
    {
        return Err(invalid("breast semi-axes must be positive"));
    }
    if g.skin_thickness_mm < 0.0 || g.tumor_radius_mm < 0.0 || !(g.vial_radius_mm > 0.0) {
        return Err(invalid("radii and skin thickness must be non-negative"));
    }
    if !(g.texture_scale_mm > 0.0) || !(g.gland_extent > 0.0 && g.gland_extent <= 1.0) {
        return Err(invalid("texture scale must be positive and gland extent in (0, 1]"));
    }
    let half = [fov[0] / 2.0, fov[1] / 2.0, fov[2] / 2.0];
    let r = g.vial_radius_mm;
    for (name, v) in [("vial77", g.vial77_center_mm), ("vial154", g.vial154_center_mm)] {
        if v[0].abs() + r > half[0] || v[1].abs() + r > half[1] {
            return Err(Error::GeometryConflict(format!("{name} extends outside the field of view")));
        }
        // Any point of the vial disc inside the breast outline is a conflict.
        let inside = (0..64).any(|t| {
            let a = t as f64 / 64.0 * std::f64::consts::TAU;
            let p = [v[0] + r * a.cos(), v[1] + r * a.sin(), g.breast_center_mm[2]];
            ellipsoid_q(p, g.breast_center_mm, g.breast_semi_axes_mm, false) <= 1.0
        }) || ellipsoid_q(
            [v[0], v[1], g.breast_center_mm[2]],
            g.breast_center_mm,
            g.breast_semi_axes_mm,
            false,
        ) <= 1.0;
        if inside {
            return Err(Error::GeometryConflict(format!("{name} overlaps the breast outline")));
        }
        if g.tumor_radius_mm > 0.0 && dist_xy(v, g.tumor_center_mm) < r + g.tumor_radius_mm {
            return Err(Error::GeometryConflict(format!("{name} overlaps the tumour")));
        }
    }
    if dist_xy(g.vial77_center_mm, g.vial154_center_mm) < 2.0 * r {
        return Err(Error::GeometryConflict("the two vials overlap".into()));
    }
    if g.tumor_radius_mm > 0.0 {
        let inner = g.breast_semi_axes_mm.map(|a| a - g.skin_thickness_mm);
        if ellipsoid_q(g.tumor_center_mm, g.breast_center_mm, inner, three_d) > 1.0 {
            return Err(Error::GeometryConflict("tumour centre lies outside the breast".into()));
        }
    }
    Ok(())
}

impl DigitalPhantom {
    pub fn is_3d(&self) -> bool {
        self.dims.nz > 1
    }

    pub fn fov_mm(&self) -> [f64; 3] {
        [
            self.dims.nx as f64 * self.voxel_size[0],
            self.dims.ny as f64 * self.voxel_size[1],
            self.dims.nz as f64 * self.voxel_size[2],
        ]
    }

    pub fn compartment(&self, label: u8) -> &Compartment {
        &self.compartments[label as usize]
    }

    pub fn compartment_by_name(&self, name: &str) -> Option<&Compartment> {
        self.compartments.iter().find(|c| c.name == name)
    }

    /// Label of the tissue at a physical point (mm from the FOV centre).
    pub fn label_at_mm(&self, p: [f64; 3]) -> u8 {
        self.label_at_mm_with(p, self.geometry.tumor_radius_mm)
    }

    fn label_at_mm_with(&self, p: [f64; 3], tumor_radius: f64) -> u8 {
        let g = &self.geometry;
        let three_d = self.is_3d();
        let in_vial = |c: [f64; 3]| {
            dist_xy(p, c) <= g.vial_radius_mm
                && (!three_d || (p[2] - c[2]).abs() <= g.vial_half_length_mm)
        };
        if in_vial(g.vial77_center_mm) {
            return VIAL77;
        }
        if in_vial(g.vial154_center_mm) {
            return VIAL154;
        }
        if ellipsoid_q(p, g.breast_center_mm, g.breast_semi_axes_mm, three_d) > 1.0 {
            return BACKGROUND;
        }
        if g.skin_thickness_mm > 0.0 {
            let inner = g.breast_semi_axes_mm.map(|a| a - g.skin_thickness_mm);
            if ellipsoid_q(p, g.breast_center_mm, inner, three_d) > 1.0 {
                return SKIN;
            }
        }
        if tumor_radius > 0.0 && dist(p, g.tumor_center_mm, three_d) <= tumor_radius {
            return TUMOR;
        }
        let gland_axes = g.breast_semi_axes_mm.map(|a| a * g.gland_extent);
        if ellipsoid_q(p, g.breast_center_mm, gland_axes, three_d) <= 1.0
            && self.texture.eval(p) > g.gland_threshold
        {
            return GLANDULAR;
        }
        ADIPOSE
    }

    /// Physical centre (mm) of voxel `idx` on a grid covering this phantom's FOV.
    pub fn voxel_center_mm(&self, dims: Dims, idx: usize) -> [f64; 3] {
        let fov = self.fov_mm();
        let (i, j, k) = dims.coords(idx);
        let vs = [
            fov[0] / dims.nx as f64,
            fov[1] / dims.ny as f64,
            fov[2] / dims.nz as f64,
        ];
        let z = if self.is_3d() {
            (k as f64 + 0.5) * vs[2] - fov[2] / 2.0
        } else {
            0.0
        };
        [
            (i as f64 + 0.5) * vs[0] - fov[0] / 2.0,
            (j as f64 + 0.5) * vs[1] - fov[1] / 2.0,
            z,
        ]
    }

    /// Point-sample the label geometry at the voxel centres of `dims`.
    pub fn rasterize(&self, dims: Dims) -> Vec<u8> {
        par::map_range(dims.len(), |idx| self.label_at_mm(self.voxel_center_mm(dims, idx)))
    }

    fn map_labels(&self, f: impl Fn(&Compartment) -> f64, units: Units) -> ImageVolume {
        let table: Vec<f64> = self.compartments.iter().map(f).collect();
        ImageVolume {
            dims: self.dims,
            voxel_size: self.voxel_size,
            units,
            data: self.labels.iter().map(|&l| table[l as usize]).collect(),
        }
    }

    /// Piecewise-constant concentration map (mmol/L).
    pub fn concentration_map(&self) -> ImageVolume {
        self.map_labels(|c| c.concentration, Units::Concentration)
    }

    /// Ideal sodium signal: concentration × water fraction.
    pub fn signal_map(&self) -> ImageVolume {
        self.map_labels(|c| c.concentration * c.water_fraction, Units::Signal)
    }

    /// Ideal signal on a coarser grid, including partial-volume mixing. Uses block
    /// averaging when the phantom grid is an integer multiple of `dims`, otherwise
    /// supersamples the geometry 3× per axis.
    pub fn signal_at(&self, dims: Dims) -> Result<ImageVolume> {
        let fine = self.signal_map();
        if dims == self.dims {
            return Ok(fine);
        }
        if let Some(f) = integer_factor(self.dims, dims) {
            return Ok(block_mean(&fine, dims, f));
        }
        let ss = 3usize;
        let sd = Dims::new3(
            dims.nx * ss,
            dims.ny * ss,
            if dims.nz == 1 { 1 } else { dims.nz * ss },
        );
        let table: Vec<f64> = self
            .compartments
            .iter()
            .map(|c| c.concentration * c.water_fraction)
            .collect();
        let labels = self.rasterize(sd);
        let fov = self.fov_mm();
        let fine = ImageVolume {
            dims: sd,
            voxel_size: [fov[0] / sd.nx as f64, fov[1] / sd.ny as f64, fov[2] / sd.nz as f64],
            units: Units::Signal,
            data: labels.iter().map(|&l| table[l as usize]).collect(),
        };
        let f = [ss, ss, if dims.nz == 1 { 1 } else { ss }];
        Ok(block_mean(&fine, dims, f))
    }
}

/// Per-axis integer ratio `fine / coarse`, if every axis divides evenly.
pub fn integer_factor(fine: Dims, coarse: Dims) -> Option<[usize; 3]> {
    let f = fine.axes();
    let c = coarse.axes();
    let mut out = [1; 3];
    for a in 0..3 {
        if c[a] == 0 || f[a] % c[a] != 0 {
            return None;
        }
        out[a] = f[a] / c[a];
    }
    Some(out)
}

/// Average `factor`-sized blocks of `fine` into a `dims` grid.
pub fn block_mean(fine: &ImageVolume, dims: Dims, factor: [usize; 3]) -> ImageVolume {
    let n = (factor[0] * factor[1] * factor[2]) as f64;
    let data = par::map_range(dims.len(), |idx| {
        let (i, j, k) = dims.coords(idx);
        let mut acc = 0.0;
        for kk in 0..factor[2] {
            for jj in 0..factor[1] {
                for ii in 0..factor[0] {
                    acc += fine.get(i * factor[0] + ii, j * factor[1] + jj, k * factor[2] + kk);
                }
            }
        }
        acc / n
    });
    ImageVolume {
        dims,
        voxel_size: [
            fine.voxel_size[0] * factor[0] as f64,
            fine.voxel_size[1] * factor[1] as f64,
            fine.voxel_size[2] * factor[2] as f64,
        ],
        units: fine.units,
        data,
    }
}

/// Build a phantom on `dims` with isotropic `voxel_size` mm.
pub fn build_breast_phantom(
    dims: Dims,
    voxel_size: f64,
    geometry: &PhantomGeometry,
    seed: u64,
) -> Result<DigitalPhantom> {
    check_dims(dims)?;
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(invalid("voxel size must be positive"));
    }
    let vs = [voxel_size; 3];
    let fov = [
        dims.nx as f64 * vs[0],
        dims.ny as f64 * vs[1],
        dims.nz as f64 * vs[2],
    ];
    let three_d = dims.nz > 1;
    validate_geometry(geometry, fov, three_d)?;
    let c = &geometry.concentrations;
    let tissue = TISSUE_WATER_FRACTION;
    let table = [
        (0.0, 0.0),
        (c.adipose, tissue),
        (c.glandular, tissue),
        (c.tumor, tissue),
        (c.vial77, 1.0),
        (c.vial154, 1.0),
        (c.skin, tissue),
    ];
    let compartments = table
        .iter()
        .enumerate()
        .map(|(l, &(conc, wf))| Compartment {
            label: l as u8,
            name: COMPARTMENT_NAMES[l].to_string(),
            concentration: conc,
            water_fraction: wf,
        })
        .collect();
    let mut phantom = DigitalPhantom {
        dims,
        voxel_size: vs,
        labels: Vec::new(),
        compartments,
        seed,
        geometry: geometry.clone(),
        texture: Texture::new(seed, geometry.texture_scale_mm, three_d),
    };
    phantom.labels = phantom.rasterize(dims);
    Ok(phantom)
}

/// Deliberate disagreement between the prior and the sodium truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mismatch {
    #[default]
    None,
    /// Rigid translation of the prior content, in mm.
    Shift { mm: [f64; 3] },
    /// A structure present only in the prior (disc/ball of glandular-like intensity).
    ExtraEdge { center_mm: [f64; 3], radius_mm: f64 },
    /// The prior shows healthy tissue where the tumour is.
    DeleteTumorEdge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorImage {
    pub values: ImageVolume,
    pub mismatch: Mismatch,
}

/// ¹H-like brightness per compartment: fat bright, fibroglandular mid, tumour
/// mid-low, vials dark. All values distinct so every boundary is an edge.
pub fn proton_intensity(label: u8) -> f64 {
    match label {
        ADIPOSE => 1.0,
        GLANDULAR => 0.55,
        TUMOR => 0.35,
        VIAL77 => 0.15,
        VIAL154 => 0.22,
        SKIN => 0.75,
        _ => 0.0,
    }
}

pub fn render_prior(
    phantom: &DigitalPhantom,
    prior_dims: Dims,
    mismatch: &Mismatch,
) -> Result<PriorImage> {
    let pd = phantom.dims;
    if prior_dims.nx < pd.nx || prior_dims.ny < pd.ny || prior_dims.nz < pd.nz {
        return Err(invalid(format!(
            "prior grid {prior_dims} must be at least the phantom grid {pd}"
        )));
    }
    if phantom.is_3d() != (prior_dims.nz > 1) {
        return Err(invalid("prior and phantom must have the same dimensionality"));
    }
    let fov = phantom.fov_mm();
    let (shift, extra, tumor_r) = match mismatch {
        Mismatch::None => ([0.0; 3], None, phantom.geometry.tumor_radius_mm),
        Mismatch::Shift { mm } => {
            for a in 0..3 {
                if mm[a].abs() >= fov[a] && !(a == 2 && !phantom.is_3d() && mm[a] == 0.0) {
                    return Err(Error::OutsideFov(format!(
                        "shift of {} mm on axis {a} exceeds the {} mm field of view",
                        mm[a], fov[a]
                    )));
                }
            }
            (*mm, None, phantom.geometry.tumor_radius_mm)
        }
        Mismatch::ExtraEdge {
            center_mm,
            radius_mm,
        } => {
            if !(*radius_mm > 0.0) {
                return Err(invalid("extra edge radius must be positive"));
            }
            ([0.0; 3], Some((*center_mm, *radius_mm)), phantom.geometry.tumor_radius_mm)
        }
        Mismatch::DeleteTumorEdge => ([0.0; 3], None, 0.0),
    };
    let three_d = phantom.is_3d();
    let data = par::map_range(prior_dims.len(), |idx| {
        let c = phantom.voxel_center_mm(prior_dims, idx);
        let p = [c[0] - shift[0], c[1] - shift[1], c[2] - shift[2]];
        if let Some((ec, er)) = extra {
            if dist(p, ec, three_d) <= er {
                return proton_intensity(GLANDULAR);
            }
        }
        proton_intensity(phantom.label_at_mm_with(p, tumor_r))
    });
    let vs = [
        fov[0] / prior_dims.nx as f64,
        fov[1] / prior_dims.ny as f64,
        fov[2] / prior_dims.nz as f64,
    ];
    Ok(PriorImage {
        values: ImageVolume {
            dims: prior_dims,
            voxel_size: vs,
            units: Units::Dimensionless,
            data,
        },
        mismatch: mismatch.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionMask {
    pub dims: Dims,
    pub voxels: Vec<bool>,
    pub region_name: String,
}

impl RegionMask {
    pub fn new(dims: Dims, voxels: Vec<bool>, region_name: impl Into<String>) -> Result<Self> {
        if voxels.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} mask voxels for a {dims} grid",
                voxels.len()
            )));
        }
        Ok(Self {
            dims,
            voxels,
            region_name: region_name.into(),
        })
    }

    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|v| **v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.voxels.iter().any(|v| *v)
    }

    pub fn eroded(&self, steps: usize) -> RegionMask {
        let mut v = self.voxels.clone();
        for _ in 0..steps {
            v = morph(&v, self.dims, true);
        }
        RegionMask {
            dims: self.dims,
            voxels: v,
            region_name: self.region_name.clone(),
        }
    }

    pub fn dilated(&self, steps: usize) -> RegionMask {
        let mut v = self.voxels.clone();
        for _ in 0..steps {
            v = morph(&v, self.dims, false);
        }
        RegionMask {
            dims: self.dims,
            voxels: v,
            region_name: self.region_name.clone(),
        }
    }

    pub fn complement(&self, name: impl Into<String>) -> RegionMask {
        RegionMask {
            dims: self.dims,
            voxels: self.voxels.iter().map(|v| !v).collect(),
            region_name: name.into(),
        }
    }
}

/// One step of face-connected erosion (`erode = true`) or dilation. Neighbours
/// outside the grid are ignored, which keeps erosion the adjoint of the
/// clipped dilation (so closing is idempotent).
fn morph(v: &[bool], dims: Dims, erode: bool) -> Vec<bool> {
    let axes = dims.axes();
    (0..dims.len())
        .map(|idx| {
            let (i, j, k) = dims.coords(idx);
            let c = [i, j, k];
            let mut hit = v[idx];
            for a in 0..3 {
                if axes[a] == 1 {
                    continue;
                }
                for dir in [-1i64, 1] {
                    let n = c[a] as i64 + dir;
                    let nb = if n < 0 || n >= axes[a] as i64 {
                        erode
                    } else {
                        let mut q = c;
                        q[a] = n as usize;
                        v[dims.index(q[0], q[1], q[2])]
                    };
                    if erode {
                        hit &= nb;
                    } else {
                        hit |= nb;
                    }
                }
            }
            hit
        })
        .collect()
}

/// Labels resampled to `target` by block majority (ties go to the lower label),
/// or nearest-voxel lookup when the grids are not integer multiples.
pub fn resample_labels(phantom: &DigitalPhantom, target: Dims) -> Vec<u8> {
    if target == phantom.dims {
        return phantom.labels.clone();
    }
    if let Some(f) = integer_factor(phantom.dims, target) {
        return par::map_range(target.len(), |idx| {
            let (i, j, k) = target.coords(idx);
            let mut counts = [0usize; COMPARTMENT_NAMES.len()];
            for kk in 0..f[2] {
                for jj in 0..f[1] {
                    for ii in 0..f[0] {
                        let l = phantom.labels[phantom.dims.index(
                            i * f[0] + ii,
                            j * f[1] + jj,
                            k * f[2] + kk,
                        )];
                        counts[l as usize] += 1;
                    }
                }
            }
            let mut best = 0usize;
            for l in 1..counts.len() {
                if counts[l] > counts[best] {
                    best = l;
                }
            }
            best as u8
        });
    }
    let pd = phantom.dims;
    par::map_range(target.len(), |idx| {
        let (i, j, k) = target.coords(idx);
        let map = |x: usize, nt: usize, np: usize| {
            (((x as f64 + 0.5) * np as f64 / nt as f64).floor() as usize).min(np - 1)
        };
        phantom.labels[pd.index(map(i, target.nx, pd.nx), map(j, target.ny, pd.ny), map(k, target.nz, pd.nz))]
    })
}

pub fn make_mask(
    phantom: &DigitalPhantom,
    region_name: &str,
    target_dims: Dims,
    erosion_voxels: usize,
) -> Result<RegionMask> {
    let label = label_for_name(region_name)
        .ok_or_else(|| invalid(format!("unknown region {region_name:?}")))?;
    let labels = resample_labels(phantom, target_dims);
    let mask = RegionMask {
        dims: target_dims,
        voxels: labels.iter().map(|&l| l == label).collect(),
        region_name: region_name.to_string(),
    }
    .eroded(erosion_voxels);
    if mask.is_empty() {
        return Err(Error::EmptyMask(format!(
            "{region_name} at {target_dims} after {erosion_voxels} erosion steps"
        )));
    }
    Ok(mask)
}

/// Everything that is not background air, resampled to `target`.
pub fn support_mask(phantom: &DigitalPhantom, target: Dims) -> RegionMask {
    let labels = resample_labels(phantom, target);
    RegionMask {
        dims: target,
        voxels: labels.iter().map(|&l| l != BACKGROUND).collect(),
        region_name: "support".into(),
    }
}

/// Breast tissue only (no vials).
pub fn breast_mask(phantom: &DigitalPhantom, target: Dims) -> RegionMask {
    let labels = resample_labels(phantom, target);
    RegionMask {
        dims: target,
        voxels: labels
            .iter()
            .map(|&l| matches!(l, ADIPOSE | GLANDULAR | TUMOR | SKIN))
            .collect(),
        region_name: "breast".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_phantom() -> DigitalPhantom {
        build_breast_phantom(Dims::new2(64, 64), 3.0, &PhantomGeometry::default(), 7).unwrap()
    }

    #[test]
    fn compartment_table_has_seven_entries() {
        let p = default_phantom();
        assert_eq!(p.compartments.len(), 7);
        let conc: Vec<f64> = p.compartments.iter().map(|c| c.concentration).collect();
        assert_eq!(conc, vec![0.0, 20.0, 40.0, 80.0, 77.0, 154.0, 30.0]);
        let wf: Vec<f64> = p.compartments.iter().map(|c| c.water_fraction).collect();
        assert_eq!(wf, vec![0.0, 0.75, 0.75, 0.75, 1.0, 1.0, 0.75]);
    }

    #[test]
    fn vial_means_are_exact() {
        let p = default_phantom();
        let conc = p.concentration_map();
        for (label, want) in [(VIAL77, 77.0), (VIAL154, 154.0)] {
            let vals: Vec<f64> = p
                .labels
                .iter()
                .zip(&conc.data)
                .filter(|(l, _)| **l == label)
                .map(|(_, v)| *v)
                .collect();
            assert!(!vals.is_empty());
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert_eq!(mean, want);
        }
    }

    #[test]
    fn tissue_labels_carry_their_concentration() {
        let p = default_phantom();
        let conc = p.concentration_map();
        let mut seen_g = false;
        let mut seen_a = false;
        for (l, v) in p.labels.iter().zip(&conc.data) {
            match *l {
                GLANDULAR => {
                    seen_g = true;
                    assert_eq!(*v, 40.0)
                }
                ADIPOSE => {
                    seen_a = true;
                    assert_eq!(*v, 20.0)
                }
                _ => {}
            }
        }
        assert!(seen_g && seen_a);
    }

    #[test]
    fn zero_tumor_radius_removes_only_the_tumor() {
        let with = default_phantom();
        let g = PhantomGeometry {
            tumor_radius_mm: 0.0,
            ..Default::default()
        };
        let without = build_breast_phantom(Dims::new2(64, 64), 3.0, &g, 7).unwrap();
        assert!(!without.labels.contains(&TUMOR));
        assert_eq!(without.compartments, with.compartments);
        for (a, b) in with.labels.iter().zip(&without.labels) {
            if *a != TUMOR {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        assert_eq!(default_phantom(), default_phantom());
        let other =
            build_breast_phantom(Dims::new2(64, 64), 3.0, &PhantomGeometry::default(), 8).unwrap();
        assert_ne!(other.labels, default_phantom().labels);
    }

    #[test]
    fn geometry_conflicts_are_rejected() {
        let g = PhantomGeometry {
            vial77_center_mm: [22.0, -40.0, 0.0],
            tumor_center_mm: [22.0, -40.0, 0.0],
            breast_center_mm: [0.0, 40.0, 0.0],
            breast_semi_axes_mm: [60.0, 40.0, 40.0],
            ..Default::default()
        };
        let err = build_breast_phantom(Dims::new2(64, 64), 3.0, &g, 1).unwrap_err();
        assert!(matches!(err, Error::GeometryConflict(_)), "{err}");

        let g = PhantomGeometry {
            vial154_center_mm: [-55.0, -66.0, 0.0],
            ..Default::default()
        };
        let err = build_breast_phantom(Dims::new2(64, 64), 3.0, &g, 1).unwrap_err();
        assert!(matches!(err, Error::GeometryConflict(_)));
    }

    #[test]
    fn small_grids_are_rejected() {
        let err =
            build_breast_phantom(Dims::new2(15, 64), 3.0, &PhantomGeometry::default(), 1).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn mask_identity_and_erosion() {
        let p = default_phantom();
        let m = make_mask(&p, "vial77", p.dims, 0).unwrap();
        let expect: Vec<bool> = p.labels.iter().map(|l| *l == VIAL77).collect();
        assert_eq!(m.voxels, expect);
        let e = make_mask(&p, "vial77", p.dims, 1).unwrap();
        assert!(e.count() < m.count());
        assert!(e.voxels.iter().zip(&m.voxels).all(|(a, b)| !a || *b));
    }

    #[test]
    fn erosion_of_small_disc_is_strict_subset() {
        let dims = Dims::new2(16, 16);
        let voxels: Vec<bool> = (0..dims.len())
            .map(|idx| {
                let c = dims.centered(idx);
                c[0] * c[0] + c[1] * c[1] <= 9.0
            })
            .collect();
        let m = RegionMask::new(dims, voxels, "disc").unwrap();
        let e = m.eroded(1);
        assert!(!e.is_empty());
        assert!(e.count() < m.count());
        assert!(e.voxels.iter().zip(&m.voxels).all(|(a, b)| !a || *b));
    }

    #[test]
    fn empty_masks_are_errors() {
        let p = default_phantom();
        assert!(matches!(
            make_mask(&p, "vial77", p.dims, 20),
            Err(Error::EmptyMask(_))
        ));
        assert!(matches!(
            make_mask(&p, "nonsense", p.dims, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn prior_mismatch_modes() {
        let p = default_phantom();
        let clean = render_prior(&p, Dims::new2(128, 128), &Mismatch::None).unwrap();
        assert_eq!(clean.values.dims, Dims::new2(128, 128));
        assert!(clean.values.data.iter().all(|v| *v >= 0.0));

        let deleted = render_prior(&p, Dims::new2(128, 128), &Mismatch::DeleteTumorEdge).unwrap();
        let g = PhantomGeometry {
            tumor_radius_mm: 0.0,
            ..p.geometry.clone()
        };
        let healthy = build_breast_phantom(p.dims, 3.0, &g, p.seed).unwrap();
        let healthy_prior = render_prior(&healthy, Dims::new2(128, 128), &Mismatch::None).unwrap();
        assert_eq!(deleted.values.data, healthy_prior.values.data);

        let err = render_prior(
            &p,
            Dims::new2(128, 128),
            &Mismatch::Shift {
                mm: [500.0, 0.0, 0.0],
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::OutsideFov(_)));
        assert!(render_prior(&p, Dims::new2(32, 32), &Mismatch::None).is_err());
    }

    #[test]
    fn extra_edge_adds_structure() {
        let p = default_phantom();
        let extra = render_prior(
            &p,
            p.dims,
            &Mismatch::ExtraEdge {
                center_mm: [-30.0, 20.0, 0.0],
                radius_mm: 9.0,
            },
        )
        .unwrap();
        let clean = render_prior(&p, p.dims, &Mismatch::None).unwrap();
        assert_ne!(extra.values.data, clean.values.data);
    }

    #[test]
    fn shifted_prior_correlation_peaks_at_shift() {
        let p = default_phantom();
        // 1 mm prior voxels
        let pd = Dims::new2(192, 192);
        let base = render_prior(&p, pd, &Mismatch::None).unwrap().values;
        let shifted = render_prior(&p, pd, &Mismatch::Shift { mm: [2.0, 0.0, 0.0] })
            .unwrap()
            .values;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&base.data), mean(&shifted.data));
        let mut best = (f64::MIN, 0i64, 0i64);
        for dy in -5i64..=5 {
            for dx in -5i64..=5 {
                let mut acc = 0.0;
                for j in 5..pd.ny as i64 - 5 {
                    for i in 5..pd.nx as i64 - 5 {
                        let a = base.data[pd.index(i as usize, j as usize, 0)] - ma;
                        let b = shifted.data[pd.index((i + dx) as usize, (j + dy) as usize, 0)] - mb;
                        acc += a * b;
                    }
                }
                if acc > best.0 {
                    best = (acc, dx, dy);
                }
            }
        }
        let mm = best.1 as f64 * base.voxel_size[0];
        assert_eq!((mm, best.2), (2.0, 0));
    }

    #[test]
    fn prior_edges_sit_on_label_boundaries() {
        let p = default_phantom();
        let pd = Dims::new2(128, 128);
        let prior = render_prior(&p, pd, &Mismatch::None).unwrap().values;
        let labels = p.rasterize(pd);
        let mut boundary = Vec::new();
        let mut interior = Vec::new();
        for idx in 0..pd.len() {
            let (i, j, _) = pd.coords(idx);
            if i + 1 >= pd.nx || j + 1 >= pd.ny {
                continue;
            }
            let right = pd.index(i + 1, j, 0);
            let up = pd.index(i, j + 1, 0);
            let gx = prior.data[right] - prior.data[idx];
            let gy = prior.data[up] - prior.data[idx];
            let g = (gx * gx + gy * gy).sqrt();
            if labels[right] != labels[idx] || labels[up] != labels[idx] {
                boundary.push(g);
            } else {
                interior.push(g);
            }
        }
        interior.sort_by(|a, b| a.total_cmp(b));
        let median = interior[interior.len() / 2];
        assert!(!boundary.is_empty());
        assert!(boundary.iter().all(|g| *g > median));
    }

    #[test]
    fn tumor_mask_volume_matches_high_resolution_fraction() {
        let fine = Dims::new3(192, 192, 192);
        let p = build_breast_phantom(fine, 1.0, &PhantomGeometry::default(), 3).unwrap();
        let fine_count = p.labels.iter().filter(|l| **l == TUMOR).count() as f64;
        let expected = fine_count / 27.0;
        let m = make_mask(&p, "tumor", Dims::new3(64, 64, 64), 0).unwrap();
        let got = m.count() as f64;
        assert!(((got - expected) / expected).abs() <= 0.15, "{got} vs {expected}");
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn closing_is_idempotent(bits in proptest::collection::vec(any::<bool>(), 12 * 10)) {
                let m = RegionMask::new(Dims::new2(12, 10), bits, "r").unwrap();
                let once = m.dilated(1).eroded(1);
                let twice = once.dilated(1).eroded(1);
                prop_assert_eq!(once.voxels, twice.voxels);
            }

            #[test]
            fn closing_is_idempotent_3d(bits in proptest::collection::vec(any::<bool>(), 6 * 5 * 4)) {
                let m = RegionMask::new(Dims::new3(6, 5, 4), bits, "r").unwrap();
                let once = m.dilated(1).eroded(1);
                let twice = once.dilated(1).eroded(1);
                prop_assert_eq!(once.voxels, twice.voxels);
            }

            #[test]
            fn every_label_has_a_compartment(seed in 0u64..1000) {
                let p = build_breast_phantom(Dims::new2(32, 32), 6.0, &PhantomGeometry::default(), seed).unwrap();
                for l in &p.labels {
                    prop_assert_eq!(p.compartments.iter().filter(|c| c.label == *l).count(), 1);
                }
                let conc = p.concentration_map();
                for v in &conc.data {
                    prop_assert!(p.compartments.iter().any(|c| c.concentration == *v));
                }
            }
        }
    }
}
