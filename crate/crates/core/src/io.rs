//! OPB1 binary container for operator bundles.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "OPB1" | u32 version (=1) | u32 N | u32 section count
//! section* = [u8; 8] tag (ASCII, NUL padded) | u64 payload length | payload
//! ```
//!
//! Matrices are row-major complex128 stored as interleaved (re, im) f64
//! pairs. `Fmat` and `Vexc` hold a list of length-N vectors back to back,
//! `TMPR` is an M×N matrix with M implied by the payload length. Masks use
//! one byte per DOF. `META` holds (f, k, a) as three f64.

use std::hash::Hasher;
use std::io::Write;
use std::path::Path;

use fnv::FnvHasher;
use log::warn;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::model::{Meta, OperatorBundle};

pub const MAGIC: &[u8; 4] = b"OPB1";
pub const VERSION: u32 = 1;

const TAG_Z: &str = "Zmat";
const TAG_R0: &str = "R0mt";
const TAG_X: &str = "Xmat";
const TAG_W: &str = "Wmat";
const TAG_RRHO: &str = "Rrho";
const TAG_F: &str = "Fmat";
const TAG_V: &str = "Vexc";
const TAG_FIXED: &str = "FIXM";
const TAG_CTRL: &str = "CTRL";
const TAG_CHIP: &str = "CHIP";
const TAG_TM: &str = "TMPR";
const TAG_META: &str = "META";

fn tag_bytes(tag: &str) -> [u8; 8] {
    let mut out = [0u8; 8];
    out[..tag.len()].copy_from_slice(tag.as_bytes());
    out
}

fn push_complex(buf: &mut Vec<u8>, z: C64) {
    buf.extend_from_slice(&z.re.to_le_bytes());
    buf.extend_from_slice(&z.im.to_le_bytes());
}

fn matrix_payload(m: &CMat) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 * m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            push_complex(&mut buf, m[(r, c)]);
        }
    }
    buf
}

fn vectors_payload(vs: &[CVec]) -> Vec<u8> {
    let mut buf = Vec::new();
    for v in vs {
        for &z in v.iter() {
            push_complex(&mut buf, z);
        }
    }
    buf
}

fn mask_payload(mask: &[bool]) -> Vec<u8> {
    mask.iter().map(|&b| b as u8).collect()
}

/// Serializes a bundle into OPB1 bytes. Section order is fixed, so equal
/// bundles always produce identical bytes.
pub fn encode_bundle(bundle: &OperatorBundle) -> Vec<u8> {
    let mut sections: Vec<(&str, Vec<u8>)> = vec![
        (TAG_Z, matrix_payload(&bundle.z)),
        (TAG_R0, matrix_payload(&bundle.r0)),
        (TAG_X, matrix_payload(&bundle.x)),
    ];
    if let Some(w) = &bundle.w {
        sections.push((TAG_W, matrix_payload(w)));
    }
    if let Some(r) = &bundle.r_rho {
        sections.push((TAG_RRHO, matrix_payload(r)));
    }
    if !bundle.far_field.is_empty() {
        sections.push((TAG_F, vectors_payload(&bundle.far_field)));
    }
    sections.push((TAG_V, vectors_payload(&bundle.excitations)));
    sections.push((TAG_FIXED, mask_payload(&bundle.fixed)));
    sections.push((TAG_CTRL, mask_payload(&bundle.controllable)));
    if let Some(chip) = &bundle.chip {
        sections.push((TAG_CHIP, mask_payload(chip)));
    }
    if let Some(u) = &bundle.tm_projector {
        sections.push((TAG_TM, matrix_payload(u)));
    }
    let mut meta = Vec::with_capacity(24);
    for v in [bundle.meta.frequency, bundle.meta.wavenumber, bundle.meta.radius] {
        meta.extend_from_slice(&v.to_le_bytes());
    }
    sections.push((TAG_META, meta));

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(bundle.n_dof() as u32).to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (tag, payload) in sections {
        out.extend_from_slice(&tag_bytes(tag));
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
    }
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!("truncated OPB1 payload while reading {what}"),
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn f64_at(bytes: &[u8], k: usize) -> f64 {
    f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap())
}

fn complex_list(payload: &[u8], tag: &str) -> Result<Vec<C64>> {
    if payload.len() % 16 != 0 {
        return Err(Error::Format(format!("{tag}: payload length {} is not a multiple of 16", payload.len())));
    }
    Ok((0..payload.len() / 16)
        .map(|k| C64::new(f64_at(payload, 2 * k), f64_at(payload, 2 * k + 1)))
        .collect())
}

fn parse_matrix(payload: &[u8], tag: &str, rows: Option<usize>, n: usize) -> Result<CMat> {
    let vals = complex_list(payload, tag)?;
    if n == 0 || vals.len() % n != 0 {
        return Err(Error::Format(format!("{tag}: {} entries do not fill rows of {n}", vals.len())));
    }
    let m = vals.len() / n;
    if let Some(r) = rows {
        if m != r {
            return Err(Error::Format(format!("{tag}: expected {r}x{n}, found {m} rows")));
        }
    }
    Ok(CMat::from_row_slice(m, n, &vals))
}

fn parse_vectors(payload: &[u8], tag: &str, n: usize) -> Result<Vec<CVec>> {
    let m = parse_matrix(payload, tag, None, n)?;
    Ok((0..m.nrows()).map(|r| m.row(r).transpose()).collect())
}

fn parse_mask(payload: &[u8], tag: &str, n: usize) -> Result<Vec<bool>> {
    if payload.len() != n {
        return Err(Error::Format(format!("{tag}: expected {n} mask bytes, found {}", payload.len())));
    }
    payload
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!("{tag}: invalid mask byte {other}"))),
        })
        .collect()
}

/// Parses OPB1 bytes without running bundle validation.
pub fn decode_bundle_unchecked(data: &[u8]) -> Result<OperatorBundle> {
    let mut cur = Cursor { data, pos: 0 };
    if data.len() < 4 || &data[..4] != MAGIC {
        return Err(Error::Format("bad magic bytes, expected \"OPB1\"".into()));
    }
    cur.pos = 4;
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported OPB1 version {version}")));
    }
    let n = cur.u32("N")? as usize;
    let count = cur.u32("section count")?;

    let mut z = None;
    let mut r0 = None;
    let mut x = None;
    let mut w = None;
    let mut r_rho = None;
    let mut far_field = Vec::new();
    let mut excitations = Vec::new();
    let mut fixed = None;
    let mut controllable = None;
    let mut chip = None;
    let mut tm = None;
    let mut meta = None;

    for _ in 0..count {
        let raw_tag = cur.take(8, "section tag")?;
        let len = cur.u64("section length")? as usize;
        let payload = cur.take(len, "section payload")?;
        let end = raw_tag.iter().position(|&b| b == 0).unwrap_or(8);
        let tag = std::str::from_utf8(&raw_tag[..end])
            .map_err(|_| Error::Format("non-ASCII section tag".into()))?;
        match tag {
            TAG_Z => z = Some(parse_matrix(payload, tag, Some(n), n)?),
            TAG_R0 => r0 = Some(parse_matrix(payload, tag, Some(n), n)?),
            TAG_X => x = Some(parse_matrix(payload, tag, Some(n), n)?),
            TAG_W => w = Some(parse_matrix(payload, tag, Some(n), n)?),
            TAG_RRHO => r_rho = Some(parse_matrix(payload, tag, Some(n), n)?),
            TAG_F => far_field = parse_vectors(payload, tag, n)?,
            TAG_V => excitations = parse_vectors(payload, tag, n)?,
            TAG_FIXED => fixed = Some(parse_mask(payload, tag, n)?),
            TAG_CTRL => controllable = Some(parse_mask(payload, tag, n)?),
            TAG_CHIP => chip = Some(parse_mask(payload, tag, n)?),
            TAG_TM => tm = Some(parse_matrix(payload, tag, None, n)?),
            TAG_META => {
                if payload.len() != 24 {
                    return Err(Error::Format("META: expected 24 bytes".into()));
                }
                meta = Some(Meta {
                    frequency: f64_at(payload, 0),
                    wavenumber: f64_at(payload, 1),
                    radius: f64_at(payload, 2),
                });
            }
            other => warn!("skipping unknown OPB1 section {other:?} ({len} bytes)"),
        }
    }
    if cur.pos != data.len() {
        warn!("{} trailing bytes after the last OPB1 section", data.len() - cur.pos);
    }

    let missing = |name: &str| Error::Format(format!("missing required section {name}"));
    Ok(OperatorBundle {
        z: z.ok_or_else(|| missing(TAG_Z))?,
        r0: r0.ok_or_else(|| missing(TAG_R0))?,
        x: x.ok_or_else(|| missing(TAG_X))?,
        w,
        r_rho,
        far_field,
        excitations,
        tm_projector: tm,
        fixed: fixed.ok_or_else(|| missing(TAG_FIXED))?,
        controllable: controllable.ok_or_else(|| missing(TAG_CTRL))?,
        chip,
        meta: meta.ok_or_else(|| missing(TAG_META))?,
    })
}

/// Parses and fully validates OPB1 bytes.
pub fn decode_bundle(data: &[u8]) -> Result<OperatorBundle> {
    let b = decode_bundle_unchecked(data)?;
    b.validate()?;
    Ok(b)
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<OperatorBundle> {
    let data = std::fs::read(path)?;
    decode_bundle(&data)
}

pub fn write_bundle(bundle: &OperatorBundle, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_bundle(bundle);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Hash identifying a bundle in logs: FNV-1a over its OPB1 encoding.
pub fn bundle_hash(bundle: &OperatorBundle) -> u64 {
    fnv1a64(&encode_bundle(bundle))
}

pub fn format_hash(h: u64) -> String {
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opgen::{gen_random_passive, RandomPassive};

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let b = gen_random_passive(&RandomPassive::new(5, 11).with_far_field(2));
        let bytes = encode_bundle(&b);
        let back = decode_bundle(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(encode_bundle(&back), bytes);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode_bundle(&gen_random_passive(&RandomPassive::new(3, 1)));
        bytes[0] = b'X';
        assert!(matches!(decode_bundle(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn bad_version_is_format_error() {
        let mut bytes = encode_bundle(&gen_random_passive(&RandomPassive::new(3, 1)));
        bytes[4] = 2;
        assert!(matches!(decode_bundle(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let bytes = encode_bundle(&gen_random_passive(&RandomPassive::new(3, 1)));
        let cut = &bytes[..bytes.len() - 5];
        assert!(matches!(decode_bundle(cut), Err(Error::Io(_))));
    }

    #[test]
    fn unknown_section_is_skipped() {
        let b = gen_random_passive(&RandomPassive::new(3, 2));
        let mut bytes = encode_bundle(&b);
        bytes.extend_from_slice(&tag_bytes("XTRA"));
        bytes.extend_from_slice(&3u64.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3]);
        let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) + 1;
        bytes[12..16].copy_from_slice(&count.to_le_bytes());
        assert_eq!(decode_bundle(&bytes).unwrap(), b);
    }

    #[test]
    fn asymmetric_z_names_the_check() {
        let mut b = gen_random_passive(&RandomPassive::new(4, 5));
        b.z[(0, 1)] += C64::new(1e-3, 0.0);
        let err = decode_bundle(&encode_bundle(&b)).unwrap_err();
        assert_eq!(err.check(), Some("Z symmetry"));
    }
}
