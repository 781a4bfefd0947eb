//! Byte-level codecs for the dataset files.

use nalgebra::{Matrix3, Vector3};

use super::{CalibrationRecord, DatasetError};
use crate::depth::DepthSemantics;
use crate::render::Intrinsics;
use crate::vo::FeatureObservation;
use crate::{DepthRaster, Pose};

const DEPTH_MAGIC: &[u8; 4] = b"TFSD";
const DEPTH_HEADER: usize = 16;
/// Rotation orthonormality tolerance for pose rows.
const ROTATION_TOL: f64 = 1e-6;

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> DatasetError {
    DatasetError::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

fn format_err(file: &str, msg: impl Into<String>) -> DatasetError {
    DatasetError::Format {
        file: file.to_string(),
        msg: msg.into(),
    }
}

fn number(tok: &str, file: &str, line: usize) -> Result<f64, DatasetError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(file, line, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(file, line, format!("`{tok}` is not finite")));
    }
    Ok(v)
}

/// Exactly `N` whitespace-separated finite numbers.
pub(crate) fn parse_fixed<const N: usize>(
    row: &str,
    file: &str,
    line: usize,
) -> Result<[f64; N], DatasetError> {
    let toks: Vec<&str> = row.split_whitespace().collect();
    if toks.len() != N {
        return Err(parse_err(
            file,
            line,
            format!("expected {N} values, found {}", toks.len()),
        ));
    }
    let mut out = [0.0; N];
    for (o, t) in out.iter_mut().zip(toks) {
        *o = number(t, file, line)?;
    }
    Ok(out)
}

/// Binary RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

pub fn write_ppm(image: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.rgb);
    out
}

/// Reads the exact PPM dialect [`write_ppm`] emits.
pub fn read_ppm(bytes: &[u8], file: &str) -> Result<Image, DatasetError> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b' ' || b == b'\n')
            .ok_or_else(|| format_err(file, "truncated PPM header"))?;
        fields.push((
            std::str::from_utf8(&bytes[pos..pos + end]).unwrap_or(""),
            bytes[pos + end],
        ));
        pos += end + 1;
    }
    let seps: Vec<u8> = fields.iter().map(|f| f.1).collect();
    if fields[0].0 != "P6" || seps != *b"\n \n\n" || fields[3].0 != "255" {
        return Err(format_err(file, "not a binary 8-bit PPM"));
    }
    let dim = |s: &str| -> Result<usize, DatasetError> {
        match s.parse::<usize>() {
            Ok(v) if v > 0 && !s.starts_with('0') => Ok(v),
            _ => Err(format_err(file, format!("bad image dimension `{s}`"))),
        }
    };
    let (width, height) = (dim(fields[1].0)?, dim(fields[2].0)?);
    let rgb = &bytes[pos..];
    if rgb.len() != 3 * width * height {
        return Err(format_err(
            file,
            format!("{} pixel bytes for a {width}x{height} image", rgb.len()),
        ));
    }
    Ok(Image {
        width,
        height,
        rgb: rgb.to_vec(),
    })
}

/// Contents of a depth file; `semantics` is `None` for raw NDC values.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFile {
    pub width: usize,
    pub height: usize,
    pub semantics: Option<DepthSemantics>,
    pub data: Vec<f32>,
}

impl DepthFile {
    pub fn into_metric(self, file: &str) -> Result<DepthRaster, DatasetError> {
        let semantics = self
            .semantics
            .ok_or_else(|| format_err(file, "holds NDC values, not metric depth"))?;
        Ok(DepthRaster {
            width: self.width,
            height: self.height,
            semantics,
            data: self.data.into_iter().map(f64::from).collect(),
        })
    }
}

fn semantics_code(s: Option<DepthSemantics>) -> u32 {
    match s {
        Some(DepthSemantics::Ray) => 0,
        Some(DepthSemantics::Planar) => 1,
        None => 2,
    }
}

fn encode_depth(
    width: usize,
    height: usize,
    code: u32,
    values: impl Iterator<Item = f32>,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(DEPTH_HEADER + 4 * width * height);
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out.extend_from_slice(&code.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Metric raster as `f32`; the far sentinel is stored as `+inf`.
pub fn write_depth(depth: &DepthRaster) -> Vec<u8> {
    encode_depth(
        depth.width,
        depth.height,
        semantics_code(Some(depth.semantics)),
        depth.data.iter().map(|&d| d as f32),
    )
}

/// Raw NDC buffer in the depth container.
pub fn write_ndc(width: usize, height: usize, ndc: &[f64]) -> Vec<u8> {
    encode_depth(
        width,
        height,
        semantics_code(None),
        ndc.iter().map(|&d| d as f32),
    )
}

pub fn read_depth(bytes: &[u8], file: &str) -> Result<DepthFile, DatasetError> {
    if bytes.len() < DEPTH_HEADER || &bytes[..4] != DEPTH_MAGIC {
        return Err(format_err(file, "missing depth header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let (width, height) = (word(4) as usize, word(8) as usize);
    let semantics = match word(12) {
        0 => Some(DepthSemantics::Ray),
        1 => Some(DepthSemantics::Planar),
        2 => None,
        c => {
            return Err(format_err(
                file,
                format!("unknown depth semantics code {c}"),
            ))
        }
    };
    if width == 0 || height == 0 || bytes.len() != DEPTH_HEADER + 4 * width * height {
        return Err(format_err(
            file,
            format!("{} bytes for a {width}x{height} raster", bytes.len()),
        ));
    }
    let data: Vec<f32> = bytes[DEPTH_HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if data
        .iter()
        .any(|v| v.is_nan() || *v < 0.0 || *v == f32::NEG_INFINITY)
    {
        return Err(format_err(file, "negative or NaN depth value"));
    }
    Ok(DepthFile {
        width,
        height,
        semantics,
        data,
    })
}

pub(crate) fn format_pose(p: &Pose) -> String {
    let r = &p.rotation;
    let t = &p.translation;
    let vals = [
        r[(0, 0)],
        r[(0, 1)],
        r[(0, 2)],
        t.x,
        r[(1, 0)],
        r[(1, 1)],
        r[(1, 2)],
        t.y,
        r[(2, 0)],
        r[(2, 1)],
        r[(2, 2)],
        t.z,
    ];
    vals.iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// KITTI pose rows: 12 numbers, `[R | t]` row-major. Rotations must be
/// orthonormal with unit determinant to within 1e-6.
pub fn parse_kitti_poses(text: &str, file: &str) -> Result<Vec<Pose>, DatasetError> {
    text.lines()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 1;
            let v = parse_fixed::<12>(row, file, line)?;
            let rotation = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
            let pose = Pose::new(rotation, Vector3::new(v[3], v[7], v[11]));
            if !pose.is_rotation_valid(ROTATION_TOL) {
                let (orth, det) = pose.rotation_residual();
                return Err(parse_err(
                    file,
                    line,
                    format!("rotation not orthonormal (|RRᵀ−I| = {orth:.3e}, |det−1| = {det:.3e})"),
                ));
            }
            Ok(pose)
        })
        .collect()
}

pub fn parse_times(text: &str, file: &str) -> Result<Vec<f64>, DatasetError> {
    text.lines()
        .enumerate()
        .map(|(i, row)| parse_fixed::<1>(row, file, i + 1).map(|[t]| t))
        .collect()
}

pub(crate) fn format_features(features: &[FeatureObservation<f64>]) -> String {
    let mut out = String::new();
    for f in features {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            f.id, f.left[0], f.left[1], f.right[0], f.right[1]
        ));
    }
    out
}

/// Feature rows `id uL vL uR vR`, ids strictly increasing.
pub fn parse_features(
    text: &str,
    file: &str,
) -> Result<Vec<FeatureObservation<f64>>, DatasetError> {
    let mut out: Vec<FeatureObservation<f64>> = Vec::new();
    for (i, row) in text.lines().enumerate() {
        let line = i + 1;
        let (id_tok, rest) = row
            .split_once(' ')
            .ok_or_else(|| parse_err(file, line, "expected `id uL vL uR vR`"))?;
        let id: u32 = id_tok
            .parse()
            .map_err(|_| parse_err(file, line, format!("bad beacon id `{id_tok}`")))?;
        if out.last().is_some_and(|p| p.id >= id) {
            return Err(parse_err(
                file,
                line,
                "beacon ids must be strictly increasing",
            ));
        }
        let [ul, vl, ur, vr] = parse_fixed::<4>(rest, file, line)?;
        out.push(FeatureObservation {
            id,
            left: [ul, vl],
            right: [ur, vr],
        });
    }
    Ok(out)
}

fn k_row(k: &Intrinsics) -> String {
    let m = k.matrix();
    (0..3)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .map(|(r, c)| format!("{}", m[(r, c)]))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn format_calibration(c: &CalibrationRecord) -> String {
    let semantics = match c.semantics {
        DepthSemantics::Ray => "ray",
        DepthSemantics::Planar => "planar",
    };
    format!(
        "width {}\nheight {}\nK_L {}\nK_R {}\nbaseline {}\nnear {}\nfar {}\ndepth {}\n",
        c.width,
        c.height,
        k_row(&c.left),
        k_row(&c.right),
        c.baseline,
        c.near,
        c.far,
        semantics
    )
}

pub(crate) fn parse_calibration(text: &str) -> Result<CalibrationRecord, DatasetError> {
    const FILE: &str = "calib.txt";
    const KEYS: [&str; 8] = [
        "width", "height", "K_L", "K_R", "baseline", "near", "far", "depth",
    ];
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != KEYS.len() {
        return Err(format_err(
            FILE,
            format!("expected {} lines, found {}", KEYS.len(), lines.len()),
        ));
    }
    let mut values = Vec::new();
    for (i, (row, key)) in lines.iter().zip(KEYS).enumerate() {
        let rest = row
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| parse_err(FILE, i + 1, format!("expected `{key} …`")))?;
        values.push(rest);
    }
    let size = |i: usize| -> Result<usize, DatasetError> {
        values[i]
            .parse()
            .map_err(|_| parse_err(FILE, i + 1, format!("bad size `{}`", values[i])))
    };
    let intrinsics = |i: usize| -> Result<Intrinsics, DatasetError> {
        let m = parse_fixed::<9>(values[i], FILE, i + 1)?;
        if m[1] != 0.0 || m[3] != 0.0 || m[6] != 0.0 || m[7] != 0.0 || m[8] != 1.0 {
            return Err(parse_err(
                FILE,
                i + 1,
                "intrinsic matrix must be [fx 0 cx; 0 fy cy; 0 0 1]",
            ));
        }
        Ok(Intrinsics {
            fx: m[0],
            fy: m[4],
            cx: m[2],
            cy: m[5],
        })
    };
    let scalar = |i: usize| parse_fixed::<1>(values[i], FILE, i + 1).map(|[v]| v);
    let semantics = match values[7] {
        "ray" => DepthSemantics::Ray,
        "planar" => DepthSemantics::Planar,
        other => {
            return Err(parse_err(
                FILE,
                8,
                format!("unknown depth semantics `{other}`"),
            ))
        }
    };
    let record = CalibrationRecord {
        width: size(0)?,
        height: size(1)?,
        left: intrinsics(2)?,
        right: intrinsics(3)?,
        baseline: scalar(4)?,
        near: scalar(5)?,
        far: scalar(6)?,
        semantics,
    };
    record.validate().map_err(|msg| format_err(FILE, msg))?;
    Ok(record)
}
