//! Regular 2D/3D grids and the scalar/complex volumes that live on them.
//!
//! Storage is x-fastest: `index = i + nx * (j + ny * k)`. A 2D grid is a 3D
//! grid with `nz == 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new2(nx: usize, ny: usize) -> Self {
        Self { nx, ny, nz: 1 }
    }

    pub const fn new3(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub fn from_slice(d: &[usize]) -> Result<Self> {
        match *d {
            [nx, ny] => Ok(Self::new2(nx, ny)),
            [nx, ny, nz] => Ok(Self::new3(nx, ny, nz)),
            _ => Err(Error::InvalidParameter(format!(
                "grid size needs 2 or 3 axes, got {}",
                d.len()
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spatial dimensionality: 2 for single-slice grids, otherwise 3.
    pub fn ndim(&self) -> usize {
        if self.nz == 1 {
            2
        } else {
            3
        }
    }

    pub fn axes(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        (i, j, k)
    }

    /// Offset of voxel `idx` from the grid centre (voxel `n/2` on each axis), in voxels.
    #[inline]
    pub fn centered(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords(idx);
        [
            i as f64 - (self.nx / 2) as f64,
            j as f64 - (self.ny / 2) as f64,
            k as f64 - (self.nz / 2) as f64,
        ]
    }

    pub fn center_index(&self) -> usize {
        self.index(self.nx / 2, self.ny / 2, self.nz / 2)
    }

    pub fn min_axis(&self) -> usize {
        if self.nz == 1 {
            self.nx.min(self.ny)
        } else {
            self.nx.min(self.ny).min(self.nz)
        }
    }

    pub fn check_same(&self, other: &Dims, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {self} vs {other}"
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.nz == 1 {
            write!(f, "{}x{}", self.nx, self.ny)
        } else {
            write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Units {
    #[default]
    Signal,
    Concentration,
    Label,
    Dimensionless,
}

impl Units {
    pub fn as_str(&self) -> &'static str {
        match self {
            Units::Signal => "a.u.",
            Units::Concentration => "mmol/L",
            Units::Label => "label",
            Units::Dimensionless => "1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "a.u." => Some(Units::Signal),
            "mmol/L" => Some(Units::Concentration),
            "label" => Some(Units::Label),
            "1" => Some(Units::Dimensionless),
            _ => None,
        }
    }
}

/// Scalar image on a regular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageVolume {
    pub dims: Dims,
    /// Voxel edge length in mm per axis.
    pub voxel_size: [f64; 3],
    pub units: Units,
    pub data: Vec<f64>,
}

impl ImageVolume {
    pub fn zeros(dims: Dims, voxel_size: [f64; 3], units: Units) -> Self {
        Self {
            dims,
            voxel_size,
            units,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn from_data(dims: Dims, voxel_size: [f64; 3], units: Units, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {dims} grid",
                data.len()
            )));
        }
        Ok(Self {
            dims,
            voxel_size,
            units,
            data,
        })
    }

    /// Same grid, new values.
    pub fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.dims.len());
        Self {
            dims: self.dims,
            voxel_size: self.voxel_size,
            units: self.units,
            data,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.dims.index(i, j, k)]
    }

    pub fn fov_mm(&self) -> [f64; 3] {
        [
            self.dims.nx as f64 * self.voxel_size[0],
            self.dims.ny as f64 * self.voxel_size[1],
            self.dims.nz as f64 * self.voxel_size[2],
        ]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation at a continuous voxel index, clamped to the grid.
    pub fn sample_linear(&self, pos: [f64; 3]) -> f64 {
        let axes = self.dims.axes();
        let mut lo = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = axes[a];
            let p = pos[a].clamp(0.0, (n - 1) as f64);
            let f = p.floor();
            lo[a] = (f as usize).min(n - 1);
            frac[a] = p - f;
        }
        let mut acc = 0.0;
        for corner in 0..8usize {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let up = (corner >> a) & 1 == 1;
                if up {
                    w *= frac[a];
                    idx[a] = (lo[a] + 1).min(axes[a] - 1);
                } else {
                    w *= 1.0 - frac[a];
                    idx[a] = lo[a];
                }
            }
            if w != 0.0 {
                acc += w * self.get(idx[0], idx[1], idx[2]);
            }
        }
        acc
    }

    /// Resample to `dims` over the same field of view with (bi/tri)linear interpolation
    /// at the new voxel centres.
    pub fn resample_linear(&self, dims: Dims) -> ImageVolume {
        let fov = self.fov_mm();
        let vs = [
            fov[0] / dims.nx as f64,
            fov[1] / dims.ny as f64,
            fov[2] / dims.nz as f64,
        ];
        let data = crate::par::map_range(dims.len(), |idx| {
            let (i, j, k) = dims.coords(idx);
            let mm = [
                (i as f64 + 0.5) * vs[0],
                (j as f64 + 0.5) * vs[1],
                (k as f64 + 0.5) * vs[2],
            ];
            let pos = [
                mm[0] / self.voxel_size[0] - 0.5,
                mm[1] / self.voxel_size[1] - 0.5,
                mm[2] / self.voxel_size[2] - 0.5,
            ];
            self.sample_linear(pos)
        });
        ImageVolume {
            dims,
            voxel_size: vs,
            units: self.units,
            data,
        }
    }

    /// 2D slice `k` as a standalone volume.
    pub fn slice(&self, k: usize) -> ImageVolume {
        let n = self.dims.nx * self.dims.ny;
        ImageVolume {
            dims: Dims::new2(self.dims.nx, self.dims.ny),
            voxel_size: self.voxel_size,
            units: self.units,
            data: self.data[k * n..(k + 1) * n].to_vec(),
        }
    }
}

/// Complex image on a regular grid (per-coil images, sensitivities).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVolume {
    pub dims: Dims,
    pub voxel_size: [f64; 3],
    pub data: Vec<Complex64>,
}

impl ComplexVolume {
    pub fn zeros(dims: Dims, voxel_size: [f64; 3]) -> Self {
        Self {
            dims,
            voxel_size,
            data: vec![Complex64::new(0.0, 0.0); dims.len()],
        }
    }

    pub fn magnitude(&self) -> ImageVolume {
        ImageVolume {
            dims: self.dims,
            voxel_size: self.voxel_size,
            units: Units::Signal,
            data: self.data.iter().map(|c| c.norm()).collect(),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
