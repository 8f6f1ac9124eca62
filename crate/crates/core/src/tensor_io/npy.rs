//! Reader and writer for the `\x93NUMPY` version 1.0 container.
//!
//! Only little-endian `<f4` and `<i8`, C-order arrays are accepted. The header
//! written here is byte-identical to what `numpy.save` emits for the same
//! array, so fixtures produced by numpy read back unchanged.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::blob::{element_count, Dtype, TensorBlob, TensorData};
use super::TensorError;

pub const MAGIC: [u8; 6] = *b"\x93NUMPY";
const ALIGN: usize = 64;
const PREAMBLE_LEN: usize = 10;

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorBlob, TensorError> {
    let file = File::open(path)?;
    read_from(&mut BufReader::new(file))
}

pub fn write_tensor(blob: &TensorBlob, path: impl AsRef<Path>) -> Result<(), TensorError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_to(blob, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_from<R: Read>(reader: &mut R) -> Result<TensorBlob, TensorError> {
    let mut preamble = [0u8; PREAMBLE_LEN];
    let mut filled = 0;
    while filled < PREAMBLE_LEN {
        let n = reader.read(&mut preamble[filled..])?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    if filled < MAGIC.len() || preamble[..6] != MAGIC {
        return Err(TensorError::BadMagic);
    }
    if filled < PREAMBLE_LEN {
        return Err(TensorError::BadHeader("file ends inside the preamble".into()));
    }
    if preamble[6..8] != [1, 0] {
        return Err(TensorError::BadHeader(format!("unsupported format version {}.{}", preamble[6], preamble[7])));
    }
    let header_len = u16::from_le_bytes([preamble[8], preamble[9]]) as usize;
    let mut header = vec![0u8; header_len];
    reader.read_exact(&mut header).map_err(|_| TensorError::BadHeader("file ends inside the header".into()))?;
    let header = std::str::from_utf8(&header)
        .ok()
        .filter(|h| h.is_ascii())
        .ok_or_else(|| TensorError::BadHeader("header is not ASCII".into()))?;
    let meta = parse_header(header)?;

    let count = element_count(&meta.shape)
        .ok_or_else(|| TensorError::BadHeader(format!("shape {:?} overflows", meta.shape)))?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let expected = count
        .checked_mul(meta.dtype.scalar_size())
        .ok_or_else(|| TensorError::BadHeader(format!("shape {:?} overflows", meta.shape)))?;
    if payload.len() != expected {
        return Err(TensorError::ShapeMismatch(format!(
            "shape {:?} of {} needs {expected} payload bytes, found {}",
            meta.shape,
            meta.dtype.descr(),
            payload.len()
        )));
    }

    let data = match meta.dtype {
        Dtype::F32 => {
            TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
        }
        Dtype::I64 => TensorData::I64(
            payload.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect(),
        ),
    };
    TensorBlob::new(meta.shape, data)
}

pub fn write_to<W: Write>(blob: &TensorBlob, writer: &mut W) -> Result<(), TensorError> {
    // Blobs are validated on construction; this guards against future
    // constructors forgetting to.
    if element_count(blob.shape()) != Some(blob.len()) {
        return Err(TensorError::ShapeMismatch(format!(
            "shape {:?} does not match {} values",
            blob.shape(),
            blob.len()
        )));
    }
    writer.write_all(&encode_header(blob.dtype(), blob.shape()))?;
    match blob.data() {
        TensorData::F32(values) => {
            for v in values {
                writer.write_all(&v.to_le_bytes())?;
            }
        }
        TensorData::I64(values) => {
            for v in values {
                writer.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn shape_literal(shape: &[usize]) -> String {
    match shape {
        [] => "()".to_string(),
        [d] => format!("({d},)"),
        dims => {
            let parts: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
            format!("({})", parts.join(", "))
        }
    }
}

pub(crate) fn encode_header(dtype: Dtype, shape: &[usize]) -> Vec<u8> {
    let mut dict =
        format!("{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}", dtype.descr(), shape_literal(shape));
    // pad so that preamble + dict + '\n' is a multiple of ALIGN
    let unpadded = PREAMBLE_LEN + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', padding));
    dict.push('\n');

    let mut out = Vec::with_capacity(PREAMBLE_LEN + dict.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

#[derive(Debug)]
struct HeaderMeta {
    dtype: Dtype,
    shape: Vec<usize>,
}

#[derive(Debug, PartialEq)]
enum Literal {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Minimal parser for the Python dict literal stored in the header.
struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn new(text: &'a str) -> Self {
        Self { bytes: text.as_bytes(), pos: 0 }
    }

    fn err(&self, what: &str) -> TensorError {
        TensorError::BadHeader(format!("{what} at header offset {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<(), TensorError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", b as char)))
        }
    }

    fn string(&mut self) -> Result<String, TensorError> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err(self.err("expected a quoted string")),
        };
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos == self.bytes.len() {
            return Err(self.err("unterminated string"));
        }
        let s = String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(s)
    }

    fn integer(&mut self) -> Result<usize, TensorError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        // numpy on some platforms writes `3L`
        let end = self.pos;
        if self.bytes.get(self.pos) == Some(&b'L') {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..end])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err("expected a non-negative integer"))
    }

    fn value(&mut self) -> Result<Literal, TensorError> {
        match self.peek() {
            Some(b'\'' | b'"') => self.string().map(Literal::Str),
            Some(b'(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    if self.peek() == Some(b')') {
                        self.pos += 1;
                        break;
                    }
                    dims.push(self.integer()?);
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {}
                        _ => return Err(self.err("malformed shape tuple")),
                    }
                }
                Ok(Literal::Tuple(dims))
            }
            _ => {
                let rest = &self.bytes[self.pos..];
                if rest.starts_with(b"True") {
                    self.pos += 4;
                    Ok(Literal::Bool(true))
                } else if rest.starts_with(b"False") {
                    self.pos += 5;
                    Ok(Literal::Bool(false))
                } else {
                    Err(self.err("unrecognised literal"))
                }
            }
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, Literal)>, TensorError> {
        self.expect(b'{')?;
        let mut entries = Vec::new();
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = self.string()?;
            self.expect(b':')?;
            let value = self.value()?;
            entries.push((key, value));
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(self.err("expected ',' or '}'")),
            }
        }
        if self.peek().is_some() {
            return Err(self.err("trailing characters after dict"));
        }
        Ok(entries)
    }
}

fn parse_header(text: &str) -> Result<HeaderMeta, TensorError> {
    let entries = HeaderParser::new(text).dict()?;
    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    for (key, value) in entries {
        match (key.as_str(), value) {
            ("descr", Literal::Str(s)) => descr = Some(s),
            ("fortran_order", Literal::Bool(b)) => fortran = Some(b),
            ("shape", Literal::Tuple(t)) => shape = Some(t),
            (k @ ("descr" | "fortran_order" | "shape"), _) => {
                return Err(TensorError::BadHeader(format!("key '{k}' has the wrong type")))
            }
            (k, _) => return Err(TensorError::BadHeader(format!("unexpected key '{k}'"))),
        }
    }
    let descr = descr.ok_or_else(|| TensorError::BadHeader("missing 'descr'".into()))?;
    let fortran = fortran.ok_or_else(|| TensorError::BadHeader("missing 'fortran_order'".into()))?;
    let shape = shape.ok_or_else(|| TensorError::BadHeader("missing 'shape'".into()))?;
    if fortran {
        return Err(TensorError::BadHeader("fortran-order arrays are not supported".into()));
    }
    let dtype = match descr.as_str() {
        "<f4" => Dtype::F32,
        "<i8" => Dtype::I64,
        other => return Err(TensorError::UnsupportedDtype(other.to_string())),
    };
    Ok(HeaderMeta { dtype, shape })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn roundtrip(blob: &TensorBlob) -> TensorBlob {
        let mut buf = Vec::new();
        write_to(blob, &mut buf).unwrap();
        read_from(&mut Cursor::new(buf)).unwrap()
    }

    fn raw_file(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn matrix_bytes_are_numpy_layout() {
        let blob = TensorBlob::from_f32(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_to(&blob, &mut buf).unwrap();
        assert_eq!(buf.len(), 128 + 16);
        let header = std::str::from_utf8(&buf[10..128]).unwrap();
        assert!(header.starts_with("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), }"));
        assert!(header.ends_with(" \n"));
        assert_eq!(&buf[128..132], &1.0f32.to_le_bytes());
        assert!(roundtrip(&blob).bit_eq(&blob));
    }

    #[test]
    fn scalar_and_vector_literals() {
        assert_eq!(shape_literal(&[]), "()");
        assert_eq!(shape_literal(&[4]), "(4,)");
        assert_eq!(shape_literal(&[3, 1, 2]), "(3, 1, 2)");
        let scalar = TensorBlob::from_f32(vec![], vec![0.0]).unwrap();
        assert!(roundtrip(&scalar).bit_eq(&scalar));
        let labels = TensorBlob::from_i64(vec![4], vec![0, 1, 2, 1]).unwrap();
        assert!(roundtrip(&labels).bit_eq(&labels));
    }

    #[test]
    fn header_is_aligned_to_64() {
        for shape in [vec![], vec![1], vec![123_456, 7], vec![1, 2, 3, 4, 5, 6, 7, 8]] {
            let h = encode_header(Dtype::I64, &shape);
            assert_eq!(h.len() % 64, 0, "shape {shape:?}");
            assert_eq!(*h.last().unwrap(), b'\n');
        }
    }

    #[test]
    fn short_payload_is_shape_mismatch() {
        let bytes = raw_file("{'descr': '<f4', 'fortran_order': False, 'shape': (3,), }\n", &[0u8; 8]);
        let err = read_from(&mut Cursor::new(bytes)).unwrap_err();
        assert!(matches!(err, TensorError::ShapeMismatch(_)), "{err}");
    }

    #[test]
    fn long_payload_is_shape_mismatch() {
        let bytes = raw_file("{'descr': '<f4', 'fortran_order': False, 'shape': (1,), }\n", &[0u8; 8]);
        let err = read_from(&mut Cursor::new(bytes)).unwrap_err();
        assert!(matches!(err, TensorError::ShapeMismatch(_)));
    }

    #[test]
    fn nan_payload_is_non_finite() {
        let mut payload = 1.0f32.to_le_bytes().to_vec();
        payload.extend_from_slice(&f32::NAN.to_le_bytes());
        let bytes = raw_file("{'descr': '<f4', 'fortran_order': False, 'shape': (2,), }\n", &payload);
        let err = read_from(&mut Cursor::new(bytes)).unwrap_err();
        assert!(matches!(err, TensorError::NonFinite { index: 1 }));
    }

    #[test]
    fn bad_magic() {
        let err = read_from(&mut Cursor::new(b"PK\x03\x04 not numpy".to_vec())).unwrap_err();
        assert!(matches!(err, TensorError::BadMagic));
        let err = read_from(&mut Cursor::new(Vec::new())).unwrap_err();
        assert!(matches!(err, TensorError::BadMagic));
    }

    #[test]
    fn unsupported_dtypes() {
        for descr in ["<f8", ">f4", "|u1", "<i4"] {
            let header = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': (1,), }}\n");
            let err = read_from(&mut Cursor::new(raw_file(&header, &[0u8; 8]))).unwrap_err();
            assert!(matches!(err, TensorError::UnsupportedDtype(_)), "{descr}: {err}");
        }
    }

    #[test]
    fn malformed_headers() {
        let cases = [
            "{'descr': '<f4', 'fortran_order': True, 'shape': (1,), }\n",
            "{'descr': '<f4', 'shape': (1,), }\n",
            "{'descr': '<f4', 'fortran_order': False, 'shape': (1,)\n",
            "{'descr': '<f4', 'fortran_order': False, 'shape': (-1,), }\n",
            "{'descr': '<f4', 'fortran_order': False, 'shape': (1,), 'extra': 1}\n",
            "not a dict",
        ];
        for header in cases {
            let err = read_from(&mut Cursor::new(raw_file(header, &[0u8; 4]))).unwrap_err();
            assert!(matches!(err, TensorError::BadHeader(_)), "{header:?}: {err}");
        }
    }

    #[test]
    fn version_two_rejected() {
        let mut bytes = raw_file("{'descr': '<f4', 'fortran_order': False, 'shape': (), }\n", &[0u8; 4]);
        bytes[6] = 2;
        assert!(matches!(read_from(&mut Cursor::new(bytes)), Err(TensorError::BadHeader(_))));
    }

    #[test]
    fn accepts_numpy_style_variants() {
        // double quotes, no trailing comma, extra spaces
        let header = "{\"descr\": \"<i8\" , \"shape\": ( 2 , ) , \"fortran_order\": False}\n";
        let mut payload = 5i64.to_le_bytes().to_vec();
        payload.extend_from_slice(&(-3i64).to_le_bytes());
        let blob = read_from(&mut Cursor::new(raw_file(header, &payload))).unwrap();
        assert_eq!(blob.as_i64().unwrap(), &[5, -3]);
    }
}
