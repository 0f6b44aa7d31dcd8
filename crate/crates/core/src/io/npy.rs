//! NPY (format 1.0) reading and writing for radar cubes and feature arrays.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp::RadarCube;
use crate::{HgrError, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NpyDtype {
    F32,
    F64,
    I16,
}

impl NpyDtype {
    fn size(self) -> usize {
        match self {
            NpyDtype::F32 => 4,
            NpyDtype::F64 => 8,
            NpyDtype::I16 => 2,
        }
    }

    fn code(self) -> &'static str {
        match self {
            NpyDtype::F32 => "f4",
            NpyDtype::F64 => "f8",
            NpyDtype::I16 => "i2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I16(Vec<i16>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
    /// Element type found in the file.
    pub dtype: NpyDtype,
    /// Whether the file stored big-endian values (converted on read).
    pub big_endian: bool,
}

impl NpyArray {
    pub fn to_f32(&self) -> Vec<f32> {
        match &self.data {
            NpyData::F32(v) => v.clone(),
            NpyData::F64(v) => v.iter().map(|&x| x as f32).collect(),
            NpyData::I16(v) => v.iter().map(|&x| f32::from(x)).collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            NpyData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            NpyData::F64(v) => v.clone(),
            NpyData::I16(v) => v.iter().map(|&x| f64::from(x)).collect(),
        }
    }
}

fn header_bytes(dtype: NpyDtype, shape: &[usize]) -> Vec<u8> {
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    let shape_txt = if dims.len() == 1 { format!("({},)", dims[0]) } else { format!("({})", dims.join(", ")) };
    let mut dict = format!("{{'descr': '<{}', 'fortran_order': False, 'shape': {}, }}", dtype.code(), shape_txt);
    // magic + version + u16 length + dict + '\n' padded to a multiple of 64
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    dict.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    dict.push('\n');
    let mut out = Vec::with_capacity(10 + dict.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

pub fn npy_bytes_f32(shape: &[usize], data: &[f32]) -> Result<Vec<u8>> {
    check_len(shape, data.len())?;
    let mut out = header_bytes(NpyDtype::F32, shape);
    out.reserve(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn npy_bytes_f64(shape: &[usize], data: &[f64]) -> Result<Vec<u8>> {
    check_len(shape, data.len())?;
    let mut out = header_bytes(NpyDtype::F64, shape);
    out.reserve(data.len() * 8);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn check_len(shape: &[usize], len: usize) -> Result<()> {
    if shape.iter().product::<usize>() != len {
        return Err(HgrError::Shape(format!("shape {shape:?} does not hold {len} values")));
    }
    Ok(())
}

struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Minimal parser for the Python dict literal of an NPY header.
fn parse_header(text: &str) -> Result<Header> {
    let body = text.trim().strip_prefix('{').and_then(|t| t.strip_suffix('}')).ok_or_else(|| HgrError::format("header", "not a dict literal"))?;
    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    let mut rest = body.trim();
    while !rest.is_empty() {
        let (key, after) = quoted(rest).ok_or_else(|| HgrError::format("header", format!("expected key at `{rest}`")))?;
        let after = after.trim_start().strip_prefix(':').ok_or_else(|| HgrError::format("header", "missing `:`"))?.trim_start();
        let consumed;
        match key {
            "descr" => {
                let (v, a) = quoted(after).ok_or_else(|| HgrError::format("descr", "expected a string"))?;
                descr = Some(v.to_string());
                consumed = a;
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("False") {
                    fortran = Some(false);
                    consumed = a;
                } else if let Some(a) = after.strip_prefix("True") {
                    fortran = Some(true);
                    consumed = a;
                } else {
                    return Err(HgrError::format("fortran_order", "expected True or False"));
                }
            }
            "shape" => {
                let inner = after.strip_prefix('(').ok_or_else(|| HgrError::format("shape", "expected a tuple"))?;
                let close = inner.find(')').ok_or_else(|| HgrError::format("shape", "unterminated tuple"))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim_end_matches('L').parse::<usize>().map_err(|_| HgrError::format("shape", format!("bad dimension `{s}`"))))
                    .collect::<Result<Vec<_>>>()?;
                shape = Some(dims);
                consumed = &inner[close + 1..];
            }
            other => return Err(HgrError::format("header", format!("unexpected key `{other}`"))),
        }
        rest = consumed.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Ok(Header {
        descr: descr.ok_or_else(|| HgrError::format("descr", "missing"))?,
        fortran_order: fortran.ok_or_else(|| HgrError::format("fortran_order", "missing"))?,
        shape: shape.ok_or_else(|| HgrError::format("shape", "missing"))?,
    })
}

fn quoted(s: &str) -> Option<(&str, &str)> {
    let q = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let end = s[1..].find(q)? + 1;
    Some((&s[1..end], &s[end + 1..]))
}

/// Parses an in-memory NPY file. Big-endian payloads are converted when
/// `lenient` is set and rejected otherwise.
pub fn parse_npy(bytes: &[u8], lenient: bool) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(HgrError::format("magic", "missing \\x93NUMPY prefix"));
    }
    let (header_len, start) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 if bytes.len() >= 12 => (u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize, 12),
        v => return Err(HgrError::format("version", format!("unsupported format version {v}.{}", bytes[7]))),
    };
    let data_start = start + header_len;
    if bytes.len() < data_start {
        return Err(HgrError::format("header", "truncated header"));
    }
    let text = std::str::from_utf8(&bytes[start..data_start]).map_err(|_| HgrError::format("header", "not ASCII"))?;
    let header = parse_header(text)?;
    if header.fortran_order {
        return Err(HgrError::format("fortran_order", "Fortran-ordered arrays are not supported"));
    }
    let descr = header.descr.as_str();
    let (order, code) = descr.split_at(1.min(descr.len()));
    let big_endian = match order {
        "<" | "|" => false,
        ">" => true,
        _ => return Err(HgrError::format("dtype", format!("unsupported descr `{descr}`"))),
    };
    let dtype = match code {
        "f4" => NpyDtype::F32,
        "f8" => NpyDtype::F64,
        "i2" => NpyDtype::I16,
        _ => return Err(HgrError::format("dtype", format!("unsupported descr `{descr}`"))),
    };
    if big_endian && !lenient {
        return Err(HgrError::format("dtype", format!("big-endian descr `{descr}` (strict mode)")));
    }
    let count: usize = header.shape.iter().product();
    let payload = &bytes[data_start..];
    if payload.len() != count * dtype.size() {
        return Err(HgrError::format("data", format!("{} payload bytes for {count} x {} elements", payload.len(), dtype.code())));
    }
    let chunks = payload.chunks_exact(dtype.size());
    let data = match dtype {
        NpyDtype::F32 => NpyData::F32(
            chunks
                .map(|c| {
                    let b = [c[0], c[1], c[2], c[3]];
                    if big_endian { f32::from_be_bytes(b) } else { f32::from_le_bytes(b) }
                })
                .collect(),
        ),
        NpyDtype::F64 => NpyData::F64(
            chunks
                .map(|c| {
                    let b: [u8; 8] = c.try_into().expect("chunk of 8");
                    if big_endian { f64::from_be_bytes(b) } else { f64::from_le_bytes(b) }
                })
                .collect(),
        ),
        NpyDtype::I16 => NpyData::I16(
            chunks
                .map(|c| {
                    let b = [c[0], c[1]];
                    if big_endian { i16::from_be_bytes(b) } else { i16::from_le_bytes(b) }
                })
                .collect(),
        ),
    };
    Ok(NpyArray { shape: header.shape, data, dtype, big_endian })
}

pub fn read_npy(path: &Path, lenient: bool) -> Result<NpyArray> {
    let bytes = std::fs::read(path).map_err(|e| HgrError::io(path, e))?;
    parse_npy(&bytes, lenient)
}

/// Reads a radar cube, checking its shape against `expected` when given.
pub fn read_cube(path: &Path, expected: Option<[usize; 4]>, lenient: bool) -> Result<(RadarCube, NpyDtype)> {
    let arr = read_npy(path, lenient)?;
    cube_from_array(&arr, expected).map(|c| (c, arr.dtype))
}

pub fn cube_from_array(arr: &NpyArray, expected: Option<[usize; 4]>) -> Result<RadarCube> {
    let shape: [usize; 4] = arr
        .shape
        .as_slice()
        .try_into()
        .map_err(|_| HgrError::format("shape", format!("expected 4 dimensions, found {:?}", arr.shape)))?;
    if let Some(want) = expected {
        if shape != want {
            return Err(HgrError::format("shape", format!("found {shape:?}, expected {want:?}")));
        }
    }
    RadarCube::new(shape, arr.to_f32())
}

pub fn cube_bytes(cube: &RadarCube) -> Result<Vec<u8>> {
    npy_bytes_f32(&cube.shape(), &cube.data)
}

pub fn write_npy(cube: &RadarCube, path: &Path) -> Result<()> {
    super::atomic_write(path, &cube_bytes(cube)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_64_aligned() {
        for shape in [vec![3], vec![100, 3, 32, 64], vec![7, 5]] {
            let n: usize = shape.iter().product();
            let b = npy_bytes_f32(&shape, &vec![0.0; n]).unwrap();
            let hl = u16::from_le_bytes([b[8], b[9]]) as usize;
            assert_eq!((10 + hl) % 64, 0);
            assert_eq!(b[10 + hl - 1], b'\n');
        }
    }

    #[test]
    fn big_endian_strict_and_lenient() {
        let mut b = npy_bytes_f32(&[2], &[1.5, -2.0]).unwrap();
        let pos = b.windows(3).position(|w| w == b"<f4").unwrap();
        b[pos] = b'>';
        let n = b.len();
        for c in b[n - 8..].chunks_mut(4) {
            c.reverse();
        }
        match parse_npy(&b, false) {
            Err(HgrError::Format { field, .. }) => assert_eq!(field, "dtype"),
            other => panic!("{other:?}"),
        }
        let a = parse_npy(&b, true).unwrap();
        assert!(a.big_endian);
        assert_eq!(a.to_f32(), vec![1.5, -2.0]);
    }

    #[test]
    fn bad_magic_and_short_payload() {
        let mut b = npy_bytes_f64(&[2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let n = b.len();
        assert!(matches!(parse_npy(&b[..n - 1], false), Err(HgrError::Format { field: "data", .. })));
        b[0] = 0;
        assert!(matches!(parse_npy(&b, false), Err(HgrError::Format { field: "magic", .. })));
    }
}
