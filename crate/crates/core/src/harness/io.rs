//! Binary volume (`SNAV`) and k-space (`SNAK`) files.
//!
//! Layout: 4-byte magic, version byte, u32 LE header length, UTF-8
//! `key=value` header lines, little-endian payload. Floats in the payload are
//! 32-bit; trajectory geometry trailing a k-space payload is 64-bit.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::acquisition::{KSpaceData, Trajectory, TrajectoryMode};
use crate::error::{FormatError, Result};
use crate::grid::{ComplexVolume, Dims, ImageVolume, Units};

pub const VOLUME_MAGIC: [u8; 4] = *b"SNAV";
pub const KSPACE_MAGIC: [u8; 4] = *b"SNAK";
pub const FORMAT_VERSION: u8 = 1;

/// Write `bytes` to a sibling temporary file and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

struct Header(BTreeMap<String, String>);

impl Header {
    fn get(&self, key: &str) -> std::result::Result<&str, FormatError> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| FormatError::Header(format!("missing key {key:?}")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> std::result::Result<T, FormatError> {
        let v = self.get(key)?;
        v.parse().map_err(|_| FormatError::Header(format!("bad value {v:?} for {key:?}")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str, n: usize) -> std::result::Result<Vec<T>, FormatError> {
        let v = self.get(key)?;
        let out: Vec<T> = v
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| FormatError::Header(format!("bad list {v:?} for {key:?}")))?;
        if out.len() != n {
            return Err(FormatError::Header(format!("{key:?} needs {n} entries")));
        }
        Ok(out)
    }

    fn dims(&self) -> std::result::Result<Dims, FormatError> {
        let d = self.list::<usize>("dims", 3)?;
        Dims::from_slice(&d).map_err(|e| FormatError::Header(e.to_string()))
    }
}

fn encode(magic: [u8; 4], header: &[(&str, String)], payload: &[u8]) -> Vec<u8> {
    let text: String = header.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let mut out = Vec::with_capacity(9 + text.len() + payload.len());
    out.extend_from_slice(&magic);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(payload);
    out
}

fn decode(magic: [u8; 4], bytes: &[u8]) -> std::result::Result<(Header, &[u8]), FormatError> {
    if bytes.len() < 4 {
        return Err(FormatError::Truncated { needed: 4, available: bytes.len() });
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != magic {
        return Err(FormatError::BadMagic { expected: magic, found });
    }
    if bytes.len() < 9 {
        return Err(FormatError::Truncated { needed: 9, available: bytes.len() });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(bytes[4]));
    }
    let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let end = 9 + hlen;
    if bytes.len() < end {
        return Err(FormatError::Truncated { needed: end, available: bytes.len() });
    }
    let text = std::str::from_utf8(&bytes[9..end]).map_err(|e| FormatError::Header(e.to_string()))?;
    let mut map = BTreeMap::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FormatError::Header(format!("line without '=': {line:?}")))?;
        map.insert(k.to_string(), v.to_string());
    }
    Ok((Header(map), &bytes[end..]))
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn f32s(payload: &[u8]) -> impl Iterator<Item = f64> + '_ {
    payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
}

fn check_len(expected: usize, found: usize) -> std::result::Result<(), FormatError> {
    if expected == found {
        Ok(())
    } else {
        Err(FormatError::SizeMismatch { expected, found })
    }
}

/// Round to the precision the volume format stores.
pub fn to_f32_precision(img: &ImageVolume) -> ImageVolume {
    img.with_data(img.data.iter().map(|v| *v as f32 as f64).collect())
}

fn volume_header(dims: Dims, voxel_size: [f64; 3], dtype: &str, units: &str, seed: u64) -> Vec<(&'static str, String)> {
    vec![
        ("dims", join(&dims.axes())),
        ("dtype", dtype.into()),
        ("voxel_size_mm", join(&voxel_size)),
        ("units", units.into()),
        ("seed", seed.to_string()),
    ]
}

pub fn encode_volume(img: &ImageVolume, seed: u64) -> Vec<u8> {
    let payload: Vec<u8> = img.data.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect();
    encode(VOLUME_MAGIC, &volume_header(img.dims, img.voxel_size, "f32", img.units.as_str(), seed), &payload)
}

pub fn encode_complex_volume(img: &ComplexVolume, seed: u64) -> Vec<u8> {
    let payload: Vec<u8> = img
        .data
        .iter()
        .flat_map(|v| [(v.re as f32).to_le_bytes(), (v.im as f32).to_le_bytes()])
        .flatten()
        .collect();
    encode(VOLUME_MAGIC, &volume_header(img.dims, img.voxel_size, "c64", "a.u.", seed), &payload)
}

/// A decoded `SNAV` file.
#[derive(Clone, Debug, PartialEq)]
pub enum StoredVolume {
    Real { image: ImageVolume, seed: u64 },
    Complex { image: ComplexVolume, seed: u64 },
}

pub fn decode_volume(bytes: &[u8]) -> Result<StoredVolume> {
    let (h, payload) = decode(VOLUME_MAGIC, bytes)?;
    let dims = h.dims()?;
    let vs: Vec<f64> = h.list("voxel_size_mm", 3)?;
    let voxel_size = [vs[0], vs[1], vs[2]];
    let seed: u64 = h.parse("seed")?;
    match h.get("dtype")? {
        "f32" => {
            check_len(4 * dims.len(), payload.len())?;
            let units = h.get("units")?;
            let units = Units::parse(units).ok_or_else(|| FormatError::Header(format!("unknown units {units:?}")))?;
            Ok(StoredVolume::Real {
                image: ImageVolume {
                    dims,
                    voxel_size,
                    units,
                    data: f32s(payload).collect(),
                },
                seed,
            })
        }
        "c64" => {
            check_len(8 * dims.len(), payload.len())?;
            let v: Vec<f64> = f32s(payload).collect();
            Ok(StoredVolume::Complex {
                image: ComplexVolume {
                    dims,
                    voxel_size,
                    data: v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
                },
                seed,
            })
        }
        other => Err(FormatError::Header(format!("unknown dtype {other:?}")).into()),
    }
}

pub fn write_volume(img: &ImageVolume, seed: u64, path: &Path) -> Result<()> {
    write_atomic(path, &encode_volume(img, seed))
}

/// Read a real-valued volume.
pub fn read_volume(path: &Path) -> Result<(ImageVolume, u64)> {
    match decode_volume(&fs::read(path)?)? {
        StoredVolume::Real { image, seed } => Ok((image, seed)),
        StoredVolume::Complex { .. } => Err(FormatError::Header("expected a real (f32) volume".into()).into()),
    }
}

pub fn encode_kspace(data: &KSpaceData) -> Vec<u8> {
    let t = &data.trajectory;
    let header = vec![
        ("dims", join(&data.dims.axes())),
        ("voxel_size_mm", join(&data.voxel_size)),
        ("n_coils", data.n_coils.to_string()),
        ("n_spokes", t.n_spokes().to_string()),
        ("n_samples", t.n_samples().to_string()),
        ("readout", "two_sided".to_string()),
        ("ndim", t.ndim.to_string()),
        ("mode", t.mode.as_str().to_string()),
        ("k0_fraction", t.k0_fraction.to_string()),
        ("sigma", data.noise_sigma.to_string()),
        ("seed", data.seed.to_string()),
    ];
    let mut payload: Vec<u8> = data
        .samples
        .iter()
        .flat_map(|v| [(v.re as f32).to_le_bytes(), (v.im as f32).to_le_bytes()])
        .flatten()
        .collect();
    payload.extend(t.radii.iter().flat_map(|r| r.to_le_bytes()));
    payload.extend(t.directions.iter().flatten().flat_map(|r| r.to_le_bytes()));
    encode(KSPACE_MAGIC, &header, &payload)
}

pub fn decode_kspace(bytes: &[u8]) -> Result<KSpaceData> {
    let (h, payload) = decode(KSPACE_MAGIC, bytes)?;
    let dims = h.dims()?;
    let vs: Vec<f64> = h.list("voxel_size_mm", 3)?;
    let n_coils: usize = h.parse("n_coils")?;
    let n_spokes: usize = h.parse("n_spokes")?;
    let n_samples: usize = h.parse("n_samples")?;
    if h.get("readout")? != "two_sided" {
        return Err(FormatError::Header("only two-sided readouts are supported".into()).into());
    }
    let ndim: usize = h.parse("ndim")?;
    let mode = h.get("mode")?;
    let mode = TrajectoryMode::parse(mode).ok_or_else(|| FormatError::Header(format!("unknown mode {mode:?}")))?;
    let k0_fraction: f64 = h.parse("k0_fraction")?;
    let n_meas = n_coils * n_spokes * 2 * n_samples;
    let expected = 8 * n_meas + 8 * n_samples + 24 * n_spokes;
    check_len(expected, payload.len())?;
    let (samples, rest) = payload.split_at(8 * n_meas);
    let (radii, dirs) = rest.split_at(8 * n_samples);
    let f64s = |b: &[u8]| -> Vec<f64> {
        b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
    };
    let s: Vec<f64> = f32s(samples).collect();
    let d = f64s(dirs);
    let trajectory = Trajectory::from_parts(
        ndim,
        d.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        f64s(radii),
        mode,
        k0_fraction,
    )?;
    Ok(KSpaceData {
        dims,
        voxel_size: [vs[0], vs[1], vs[2]],
        n_coils,
        samples: s.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
        trajectory,
        noise_sigma: h.parse("sigma")?,
        seed: h.parse("seed")?,
    })
}

pub fn write_kspace(data: &KSpaceData, path: &Path) -> Result<()> {
    write_atomic(path, &encode_kspace(data))
}

pub fn read_kspace(path: &Path) -> Result<KSpaceData> {
    decode_kspace(&fs::read(path)?)
}
