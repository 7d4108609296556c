//! Field files: one line of JSON header terminated by `\n`, followed by the
//! raw little-endian `f64` samples, one block of `n^d` values per component in
//! row-major grid order.
//!
//! ```text
//! {"d":2,"n":64,"kind":"vector","component_order":["1","2"]}\n
//! <4096 f64 for component 1><4096 f64 for component 2>
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ScalarField, SymTensorField0, VectorField};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Scalar,
    Vector,
    Tensor0,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub d: usize,
    pub n: usize,
    pub kind: FieldKind,
    pub component_order: Vec<String>,
}

impl FieldHeader {
    pub fn new(d: usize, n: usize, kind: FieldKind) -> Self {
        let component_order = match kind {
            FieldKind::Scalar => vec!["value".to_string()],
            FieldKind::Vector => (1..=d).map(|i| i.to_string()).collect(),
            FieldKind::Tensor0 => SymTensorField0::component_names(d)
                .iter()
                .map(|s| s.to_string())
                .collect(),
        };
        Self {
            d,
            n,
            kind,
            component_order,
        }
    }

    fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StoredField {
    Scalar(ScalarField),
    Vector(VectorField),
    Tensor0(SymTensorField0),
}

impl StoredField {
    pub fn kind(&self) -> FieldKind {
        match self {
            StoredField::Scalar(_) => FieldKind::Scalar,
            StoredField::Vector(_) => FieldKind::Vector,
            StoredField::Tensor0(_) => FieldKind::Tensor0,
        }
    }

    fn blocks(&self) -> Vec<&ScalarField> {
        match self {
            StoredField::Scalar(f) => vec![f],
            StoredField::Vector(v) => v.comps().iter().collect(),
            StoredField::Tensor0(t) => t.entries().iter().collect(),
        }
    }
}

pub fn encode(d: usize, n: usize, field: &StoredField) -> Result<Vec<u8>> {
    let header = FieldHeader::new(d, n, field.kind());
    let blocks = field.blocks();
    if blocks.len() != header.component_order.len() || blocks.iter().any(|b| b.len() != header.points()) {
        return Err(Error::ShapeMismatch(format!(
            "field does not match a d = {d}, n = {n} {:?} layout",
            field.kind()
        )));
    }
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(blocks.len() * header.points() * 8);
    for b in blocks {
        for v in b.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<(FieldHeader, StoredField)> {
    let bad = |offset: usize, msg: String| Error::MalformedFile {
        path: path.to_path_buf(),
        offset: offset as u64,
        msg,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad(bytes.len(), "header line is not terminated by a newline".into()))?;
    let header: FieldHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| bad(e.column().saturating_sub(1), format!("invalid JSON header: {e}")))?;
    if !(1..=3).contains(&header.d) || header.n == 0 {
        return Err(bad(0, format!("unsupported shape d = {}, n = {}", header.d, header.n)));
    }
    let expected = FieldHeader::new(header.d, header.n, header.kind);
    if header.component_order != expected.component_order {
        return Err(bad(
            0,
            format!(
                "component_order {:?} does not match the {:?} layout {:?}",
                header.component_order, header.kind, expected.component_order
            ),
        ));
    }

    let data_start = nl + 1;
    let points = header.points();
    let block_bytes = points * 8;
    let want = header.component_order.len() * block_bytes;
    let have = bytes.len() - data_start;
    if have != want {
        return Err(bad(
            data_start + have.min(want),
            format!("expected {want} bytes of sample data, found {have}"),
        ));
    }

    let blocks: Vec<ScalarField> = bytes[data_start..]
        .chunks_exact(block_bytes)
        .map(|blk| {
            ScalarField::new(
                blk.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            )
        })
        .collect();

    if let Some(pos) = blocks
        .iter()
        .flat_map(|b| b.values())
        .position(|v| !v.is_finite())
    {
        return Err(bad(data_start + pos * 8, "non-finite sample".into()));
    }

    let field = match header.kind {
        FieldKind::Scalar => StoredField::Scalar(blocks.into_iter().next().expect("one block")),
        FieldKind::Vector => StoredField::Vector(VectorField::new(blocks)?),
        FieldKind::Tensor0 => StoredField::Tensor0(SymTensorField0::new(header.d, blocks)?),
    };
    Ok((header, field))
}

pub fn write_field(path: &Path, d: usize, n: usize, field: &StoredField) -> Result<()> {
    let bytes = encode(d, n, field)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<(FieldHeader, StoredField)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

fn kind_error(path: &Path, want: FieldKind, got: FieldKind) -> Error {
    Error::MalformedFile {
        path: path.to_path_buf(),
        offset: 0,
        msg: format!("expected a {want:?} field, found {got:?}"),
    }
}

pub fn read_scalar(path: &Path) -> Result<(FieldHeader, ScalarField)> {
    match read_field(path)? {
        (h, StoredField::Scalar(f)) => Ok((h, f)),
        (h, _) => Err(kind_error(path, FieldKind::Scalar, h.kind)),
    }
}

pub fn read_vector(path: &Path) -> Result<(FieldHeader, VectorField)> {
    match read_field(path)? {
        (h, StoredField::Vector(f)) => Ok((h, f)),
        (h, _) => Err(kind_error(path, FieldKind::Vector, h.kind)),
    }
}

pub fn read_tensor(path: &Path) -> Result<(FieldHeader, SymTensorField0)> {
    match read_field(path)? {
        (h, StoredField::Tensor0(f)) => Ok((h, f)),
        (h, _) => Err(kind_error(path, FieldKind::Tensor0, h.kind)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn header_layout_is_stable() {
        let g = Grid::new(2, 8).unwrap();
        let bytes = encode(2, 8, &StoredField::Scalar(g.constant(1.0))).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(
            std::str::from_utf8(&bytes[..nl]).unwrap(),
            r#"{"d":2,"n":8,"kind":"scalar","component_order":["value"]}"#
        );
        assert_eq!(bytes.len(), nl + 1 + 64 * 8);
        assert_eq!(&bytes[nl + 1..nl + 9], &1.0f64.to_le_bytes());
    }

    #[test]
    fn truncated_file_reports_offset() {
        let g = Grid::new(2, 8).unwrap();
        let mut bytes = encode(2, 8, &StoredField::Vector(g.zero_vector())).unwrap();
        bytes.truncate(bytes.len() - 5);
        let err = decode(&bytes, Path::new("v.fld")).unwrap_err();
        match err {
            Error::MalformedFile { offset, msg, .. } => {
                assert_eq!(offset as usize, bytes.len());
                assert!(msg.contains("expected 1024 bytes"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_header_is_reported() {
        let err = decode(b"{\"d\":2,\"n\":8,\"kind\":\"blob\"}\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::MalformedFile { .. }));
        let err = decode(b"no newline", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::MalformedFile { offset: 10, .. }));
    }

    #[test]
    fn tensor_roundtrip() {
        let g = Grid::new(3, 8).unwrap();
        let e: Vec<_> = (0..5).map(|k| g.sample(|x| x[0] + k as f64 * x[2])).collect();
        let t = StoredField::Tensor0(SymTensorField0::new(3, e).unwrap());
        let bytes = encode(3, 8, &t).unwrap();
        let (h, back) = decode(&bytes, Path::new("t")).unwrap();
        assert_eq!(h.component_order, vec!["11", "12", "13", "22", "23"]);
        assert_eq!(back, t);
    }
}
