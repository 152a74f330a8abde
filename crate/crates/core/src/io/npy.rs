//! Minimal NPY v1.0 reader/writer for little-endian float arrays, plus NPZ
//! archives of such arrays.
//!
//! Arrays are written as `<f4` in C order. `<f8` is accepted on read and
//! narrowed to `f32`.

use std::fs::File;
use std::io::{Read, Seek, Write};
use std::path::Path;

use zip::write::SimpleFileOptions;

use crate::error::{Error, Result};

const MAGIC: &[u8] = b"\x93NUMPY";

#[derive(Clone, Debug, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }
}

pub fn encode(array: &NpyArray) -> Vec<u8> {
    let shape = match array.shape.len() {
        1 => format!("({},)", array.shape[0]),
        _ => format!(
            "({})",
            array.shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': {shape}, }}");
    // magic(6) + version(2) + header_len(2) + header + '\n' is a multiple of 64
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + 4 * array.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in &array.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<NpyArray> {
    let fail = |msg: &str| Error::format(path, msg);
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(fail("not an NPY file"));
    }
    let (major, _minor) = (bytes[6], bytes[7]);
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(fail("truncated header"));
            }
            (u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize, 12)
        }
        v => return Err(fail(&format!("unsupported NPY version {v}"))),
    };
    let header = bytes
        .get(start..start + header_len)
        .ok_or_else(|| fail("truncated header"))?;
    let header = std::str::from_utf8(header).map_err(|_| fail("header is not UTF-8"))?;
    let descr = dict_value(header, "descr").ok_or_else(|| fail("header lacks 'descr'"))?;
    let fortran = dict_value(header, "fortran_order").ok_or_else(|| fail("header lacks 'fortran_order'"))?;
    let shape_src = dict_value(header, "shape").ok_or_else(|| fail("header lacks 'shape'"))?;
    if fortran.trim() != "False" {
        return Err(fail("Fortran-ordered arrays are not supported"));
    }
    let shape = parse_shape(shape_src).ok_or_else(|| fail("malformed shape"))?;
    let count: usize = shape.iter().product();
    let body = &bytes[start + header_len..];

    let descr = descr.trim().trim_matches(|c| c == '\'' || c == '"');
    let data = match descr {
        "<f4" => {
            let raw = body.get(..4 * count).ok_or_else(|| fail("truncated data"))?;
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect()
        }
        "<f8" => {
            let raw = body.get(..8 * count).ok_or_else(|| fail("truncated data"))?;
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")) as f32)
                .collect()
        }
        other => return Err(fail(&format!("unsupported dtype {other}; expected <f4 or <f8"))),
    };
    Ok(NpyArray { shape, data })
}

/// Raw text of `key`'s value in a Python dict literal.
fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let needle_sq = format!("'{key}'");
    let needle_dq = format!("\"{key}\"");
    let pos = header.find(&needle_sq).or_else(|| header.find(&needle_dq))?;
    let rest = &header[pos + key.len() + 2..];
    let rest = rest.trim_start().strip_prefix(':')?.trim_start();
    if rest.starts_with('(') {
        let end = rest.find(')')?;
        return Some(&rest[..=end]);
    }
    let end = rest.find([',', '}']).unwrap_or(rest.len());
    Some(&rest[..end])
}

fn parse_shape(src: &str) -> Option<Vec<usize>> {
    let inner = src.trim().strip_prefix('(')?.strip_suffix(')')?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.trim_end_matches('L').parse().ok())
        .collect()
}

pub fn write_npy(path: &Path, array: &NpyArray) -> Result<()> {
    std::fs::write(path, encode(array)).map_err(|e| Error::io(path, e))
}

pub fn read_npy(path: &Path) -> Result<NpyArray> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Writes an uncompressed NPZ with fixed timestamps, so equal inputs give
/// equal bytes.
pub fn write_npz(path: &Path, arrays: &[(&str, &NpyArray)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut zip = zip::ZipWriter::new(file);
    let opts = SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Stored)
        .last_modified_time(zip::DateTime::default());
    for (name, array) in arrays {
        zip.start_file(format!("{name}.npy"), opts)
            .map_err(|e| Error::format(path, e.to_string()))?;
        zip.write_all(&encode(array)).map_err(|e| Error::io(path, e))?;
    }
    zip.finish().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(())
}

pub fn read_npz(path: &Path) -> Result<Vec<(String, NpyArray)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_npz_from(file, path)
}

fn read_npz_from<R: Read + Seek>(reader: R, path: &Path) -> Result<Vec<(String, NpyArray)>> {
    let mut zip = zip::ZipArchive::new(reader).map_err(|e| Error::format(path, e.to_string()))?;
    let mut out = Vec::with_capacity(zip.len());
    for k in 0..zip.len() {
        let mut entry = zip.by_index(k).map_err(|e| Error::format(path, e.to_string()))?;
        let name = entry.name().trim_end_matches(".npy").to_string();
        let mut bytes = Vec::with_capacity(entry.size() as usize);
        entry.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        out.push((name, decode(&bytes, path)?));
    }
    Ok(out)
}
