//! Binary feature tensor format and per-filter sample extraction.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes   "FCPG"
//! version  u32       1
//! dtype    u8        0 = f32 little-endian
//! ndim     u8
//! dims     u64 * ndim    (images, filters, rows, cols)
//! payload  f32 * prod(dims), row-major
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"FCPG";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;

const HEADER_FIXED: usize = 4 + 4 + 1 + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensorFile {
    dims: Vec<u64>,
    data: Vec<f32>,
}

impl FeatureTensorFile {
    pub fn new(dims: Vec<u64>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > u8::MAX as usize {
            return Err(Error::Malformed(format!("unsupported rank {}", dims.len())));
        }
        let expected = element_count(&dims)?;
        if expected != data.len() {
            return Err(Error::LengthMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn version(&self) -> u32 {
        VERSION
    }

    pub fn dtype(&self) -> u8 {
        DTYPE_F32
    }

    pub fn dims(&self) -> &[u64] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Dims as `(images, filters, rows, cols)`; only valid for rank-4 tensors.
    pub fn shape4(&self) -> Result<[usize; 4]> {
        match self.dims.as_slice() {
            &[a, b, c, d] => Ok([a as usize, b as usize, c as usize, d as usize]),
            other => Err(Error::Malformed(format!(
                "expected rank-4 tensor, found rank {}",
                other.len()
            ))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_FIXED + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(DTYPE_F32);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated {
                expected: HEADER_FIXED,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic {
                found: magic,
                expected: MAGIC,
            });
        }
        if bytes.len() < HEADER_FIXED {
            return Err(Error::Truncated {
                expected: HEADER_FIXED,
                found: bytes.len(),
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                supported: VERSION,
            });
        }
        let dtype = bytes[8];
        if dtype != DTYPE_F32 {
            return Err(Error::UnsupportedDtype(dtype));
        }
        let ndim = bytes[9] as usize;
        if ndim == 0 {
            return Err(Error::Malformed("rank 0 tensor".into()));
        }
        let header_len = HEADER_FIXED + 8 * ndim;
        if bytes.len() < header_len {
            return Err(Error::Truncated {
                expected: header_len,
                found: bytes.len(),
            });
        }
        let dims: Vec<u64> = bytes[HEADER_FIXED..header_len]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let count = element_count(&dims)?;
        let payload_len = count
            .checked_mul(4)
            .ok_or_else(|| Error::Malformed("payload size overflows".into()))?;
        let total = header_len + payload_len;
        if bytes.len() < total {
            return Err(Error::Truncated {
                expected: total,
                found: bytes.len(),
            });
        }
        if bytes.len() > total {
            return Err(Error::TrailingBytes(bytes.len() - total));
        }
        let data = bytes[header_len..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { dims, data })
    }
}

fn element_count(dims: &[u64]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| {
            usize::try_from(d).ok().and_then(|d| acc.checked_mul(d))
        })
        .ok_or_else(|| Error::Malformed("element count overflows".into()))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<FeatureTensorFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureTensorFile::from_bytes(&bytes)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &FeatureTensorFile) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

/// One filter's activations flattened over images and spatial positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSample {
    pub filter: usize,
    pub layer: usize,
    pub values: Vec<f64>,
}

impl FeatureSample {
    pub fn new(filter: usize, layer: usize, values: Vec<f64>) -> Self {
        Self {
            filter,
            layer,
            values,
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self::new(0, 0, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Collects every spatial position of one filter across all images, in
/// `(image, row, col)` lexicographic order.
pub fn flatten_filter(
    tensor: &FeatureTensorFile,
    filter: usize,
    layer: usize,
) -> Result<FeatureSample> {
    let [images, filters, rows, cols] = tensor.shape4()?;
    if filter >= filters {
        return Err(Error::IndexOutOfRange {
            index: filter,
            len: filters,
        });
    }
    let plane = rows * cols;
    let mut values = Vec::with_capacity(images * plane);
    for image in 0..images {
        let start = (image * filters + filter) * plane;
        values.extend(tensor.data[start..start + plane].iter().map(|&v| v as f64));
    }
    Ok(FeatureSample::new(filter, layer, values))
}

/// Flattens every filter of a rank-4 tensor.
pub fn flatten_all(tensor: &FeatureTensorFile, layer: usize) -> Result<Vec<FeatureSample>> {
    let [_, filters, _, _] = tensor.shape4()?;
    (0..filters)
        .map(|f| flatten_filter(tensor, f, layer))
        .collect()
}

/// Packs position-aligned columns into a `[n, columns, 1, 1]` tensor.
pub fn pack_columns(columns: &[Vec<f64>]) -> Result<FeatureTensorFile> {
    let d = columns.len();
    if d == 0 {
        return Err(Error::EmptySample);
    }
    let n = columns[0].len();
    if let Some(bad) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        data.extend(columns.iter().map(|c| c[i] as f32));
    }
    FeatureTensorFile::new(vec![n as u64, d as u64, 1, 1], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor(dims: Vec<u64>) -> FeatureTensorFile {
        let n: u64 = dims.iter().product();
        FeatureTensorFile::new(dims, (0..n).map(|v| v as f32).collect()).unwrap()
    }

    #[test]
    fn reads_expected_element_count() {
        let t = tensor(vec![2, 3, 4, 4]);
        let back = FeatureTensorFile::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back.len(), 96);
        assert_eq!(back.dims(), &[2, 3, 4, 4]);
    }

    #[test]
    fn short_payload_is_truncated() {
        let t = tensor(vec![2, 3, 4, 4]);
        let mut bytes = t.to_bytes();
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(
            FeatureTensorFile::from_bytes(&bytes),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn header_errors_are_distinct() {
        let good = tensor(vec![1, 1, 1, 1]).to_bytes();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            FeatureTensorFile::from_bytes(&bad_magic),
            Err(Error::BadMagic { .. })
        ));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(
            FeatureTensorFile::from_bytes(&bad_version),
            Err(Error::VersionMismatch { found: 2, .. })
        ));

        let mut bad_dtype = good.clone();
        bad_dtype[8] = 1;
        assert!(matches!(
            FeatureTensorFile::from_bytes(&bad_dtype),
            Err(Error::UnsupportedDtype(1))
        ));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(
            FeatureTensorFile::from_bytes(&trailing),
            Err(Error::TrailingBytes(1))
        ));

        assert!(matches!(
            FeatureTensorFile::from_bytes(&good[..12]),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn header_bytes_are_fixed() {
        let t = FeatureTensorFile::new(vec![1, 2, 1, 1], vec![5.0, 7.0]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[0..4], b"FCPG");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(bytes[8], 0);
        assert_eq!(bytes[9], 4);
        assert_eq!(&bytes[10..18], &1u64.to_le_bytes());
        assert_eq!(&bytes[18..26], &2u64.to_le_bytes());
        assert_eq!(&bytes[42..46], &5.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 10 + 32 + 8);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.fcpg");
        let t = tensor(vec![2, 3, 4, 4]);
        write_tensor(&path, &t).unwrap();
        assert_eq!(read_tensor(&path).unwrap(), t);
    }

    #[test]
    fn flatten_lengths_and_indexing() {
        let t = tensor(vec![2, 1, 2, 2]);
        assert_eq!(flatten_filter(&t, 0, 0).unwrap().len(), 8);

        let t = FeatureTensorFile::new(vec![1, 2, 1, 1], vec![5.0, 7.0]).unwrap();
        assert_eq!(flatten_filter(&t, 1, 0).unwrap().values, vec![7.0]);
        assert!(matches!(
            flatten_filter(&t, 2, 0),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn flatten_order_is_image_row_col() {
        // dims [2, 2, 1, 2]: image-major, then filter, then spatial
        let t = tensor(vec![2, 2, 1, 2]);
        let f1 = flatten_filter(&t, 1, 3).unwrap();
        assert_eq!(f1.values, vec![2.0, 3.0, 6.0, 7.0]);
        assert_eq!(f1.layer, 3);
        assert_eq!(f1.filter, 1);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(
            dims in proptest::collection::vec(1u64..4, 1..5),
            seed in any::<u32>(),
        ) {
            let n: u64 = dims.iter().product();
            let data: Vec<f32> = (0..n)
                .map(|i| f32::from_bits((i as u32).wrapping_mul(2654435761).wrapping_add(seed)))
                .collect();
            let t = FeatureTensorFile::new(dims, data).unwrap();
            let back = FeatureTensorFile::from_bytes(&t.to_bytes()).unwrap();
            let a: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(t.dims(), back.dims());
        }

        #[test]
        fn flatten_length_is_product_of_other_dims(
            n in 1u64..4, f in 1u64..4, r in 1u64..5, c in 1u64..5, pick in 0u64..4,
        ) {
            let t = tensor(vec![n, f, r, c]);
            let filter = (pick % f) as usize;
            let s = flatten_filter(&t, filter, 0).unwrap();
            prop_assert_eq!(s.len() as u64, n * r * c);
        }
    }
}
