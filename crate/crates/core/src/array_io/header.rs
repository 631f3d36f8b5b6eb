//! `.npy` version 1.0 header codec.
//!
//! Layout: the magic `\x93NUMPY`, version bytes `1 0`, a little-endian `u16`
//! header length, then an ASCII Python dict literal with the keys `descr`,
//! `fortran_order` and `shape`, space padded and newline terminated so the
//! data starts on a 64-byte boundary.

use std::fmt;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;
/// Matches numpy's spare room for in-place growth of the leading axis.
const GROWTH_AXIS_MAX_DIGITS: usize = 21;
/// Magic, version and length field.
const PREAMBLE_LEN: usize = 10;

/// Element type: little-endian IEEE floats only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dtype {
    F4,
    F8,
}

impl Dtype {
    pub fn descr(self) -> &'static str {
        match self {
            Dtype::F4 => "<f4",
            Dtype::F8 => "<f8",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F4 => 4,
            Dtype::F8 => 8,
        }
    }

    fn from_descr(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(Dtype::F4),
            "<f8" => Ok(Dtype::F8),
            other => Err(Error::Format(format!(
                "unsupported dtype {other:?} (expected '<f4' or '<f8')"
            ))),
        }
    }

    #[inline]
    pub(crate) fn decode(self, bytes: &[u8]) -> f64 {
        match self {
            Dtype::F4 => f64::from(f32::from_le_bytes(bytes.try_into().expect("4 bytes"))),
            Dtype::F8 => f64::from_le_bytes(bytes.try_into().expect("8 bytes")),
        }
    }

    #[inline]
    pub(crate) fn encode(self, value: f64, out: &mut Vec<u8>) {
        match self {
            Dtype::F4 => out.extend_from_slice(&(value as f32).to_le_bytes()),
            Dtype::F8 => out.extend_from_slice(&value.to_le_bytes()),
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.descr())
    }
}

/// Parsed header of any supported array, before shape restrictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpyHeader {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    /// Byte offset of the first element.
    pub data_offset: usize,
}

impl NpyHeader {
    pub fn element_count(&self) -> Option<usize> {
        self.shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
    }

    pub fn data_len(&self) -> Option<usize> {
        self.element_count()?.checked_mul(self.dtype.size())
    }
}

/// Length of the full header given the first ten bytes.
pub fn header_len(preamble: &[u8]) -> Result<usize> {
    if preamble.len() < PREAMBLE_LEN {
        return Err(Error::Format("file too short for an .npy preamble".into()));
    }
    if &preamble[..6] != MAGIC {
        return Err(Error::Format("bad magic (expected \\x93NUMPY)".into()));
    }
    if preamble[6] != 1 || preamble[7] != 0 {
        return Err(Error::Version {
            found: format!("{}.{}", preamble[6], preamble[7]),
            expected: "1.0".into(),
        });
    }
    let dict_len = u16::from_le_bytes([preamble[8], preamble[9]]) as usize;
    Ok(PREAMBLE_LEN + dict_len)
}

/// Parses the header at the start of `bytes` (which may extend past it).
pub fn parse_header(bytes: &[u8]) -> Result<NpyHeader> {
    let total = header_len(bytes)?;
    if bytes.len() < total {
        return Err(Error::Format(format!(
            "header declares {total} bytes but only {} are present",
            bytes.len()
        )));
    }
    let dict = &bytes[PREAMBLE_LEN..total];
    if dict.last() != Some(&b'\n') {
        return Err(Error::Format("header is not newline terminated".into()));
    }
    let text = std::str::from_utf8(dict)
        .ok()
        .filter(|t| t.is_ascii())
        .ok_or_else(|| Error::Format("header is not ASCII".into()))?;
    let fields = DictParser::new(text).parse()?;
    Ok(NpyHeader {
        dtype: fields.dtype,
        shape: fields.shape,
        data_offset: total,
    })
}

/// Encodes a header exactly as numpy's `np.save` does for C-order arrays.
pub fn encode_header(dtype: Dtype, shape: &[usize]) -> Vec<u8> {
    let shape_repr = match shape {
        [] => "()".to_string(),
        [d] => format!("({d},)"),
        dims => format!(
            "({})",
            dims.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {shape_repr}, }}",
        dtype.descr()
    );
    if let Some(first) = shape.first() {
        let digits = first.to_string().len();
        dict.push_str(&" ".repeat(GROWTH_AXIS_MAX_DIGITS.saturating_sub(digits)));
    }
    let unpadded = PREAMBLE_LEN + dict.len() + 1;
    let pad = ALIGN - unpadded % ALIGN;
    dict.push_str(&" ".repeat(pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(PREAMBLE_LEN + dict.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

struct Fields {
    dtype: Dtype,
    shape: Vec<usize>,
}

enum Value {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Parser for the restricted dict literal numpy writes.
struct DictParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> DictParser<'a> {
    fn new(text: &'a str) -> Self {
        DictParser {
            src: text.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, what: &str) -> Error {
        Error::Format(format!(
            "malformed header dict at byte {}: {what}",
            self.pos
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn parse(mut self) -> Result<Fields> {
        self.expect(b'{')?;
        let mut descr = None;
        let mut fortran = None;
        let mut shape = None;
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = match self.value()? {
                Value::Str(s) => s,
                _ => return Err(self.err("dict keys must be strings")),
            };
            self.expect(b':')?;
            let value = self.value()?;
            let slot_taken = match (key.as_str(), value) {
                ("descr", Value::Str(s)) => descr.replace(s).is_some(),
                ("fortran_order", Value::Bool(b)) => fortran.replace(b).is_some(),
                ("shape", Value::Tuple(t)) => shape.replace(t).is_some(),
                ("descr" | "fortran_order" | "shape", _) => {
                    return Err(Error::Format(format!("field '{key}' has the wrong type")))
                }
                _ => return Err(Error::Format(format!("unexpected header field '{key}'"))),
            };
            if slot_taken {
                return Err(Error::Format(format!("duplicate header field '{key}'")));
            }
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(self.err("expected ',' or '}'")),
            }
        }
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.err("trailing characters after dict"));
        }

        let descr = descr.ok_or_else(|| Error::Format("missing header field 'descr'".into()))?;
        let fortran =
            fortran.ok_or_else(|| Error::Format("missing header field 'fortran_order'".into()))?;
        let shape = shape.ok_or_else(|| Error::Format("missing header field 'shape'".into()))?;
        if fortran {
            return Err(Error::Format(
                "field 'fortran_order' is True; only C-order arrays are supported".into(),
            ));
        }
        Ok(Fields {
            dtype: Dtype::from_descr(&descr)?,
            shape,
        })
    }

    fn value(&mut self) -> Result<Value> {
        match self.peek() {
            Some(q @ (b'\'' | b'"')) => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos] != q {
                    self.pos += 1;
                }
                if self.pos == self.src.len() {
                    return Err(self.err("unterminated string"));
                }
                let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                self.pos += 1;
                Ok(Value::Str(s))
            }
            Some(b'(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    match self.peek() {
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        Some(c) if c.is_ascii_digit() => {
                            let start = self.pos;
                            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                                self.pos += 1;
                            }
                            let text = std::str::from_utf8(&self.src[start..self.pos])
                                .expect("ascii digits");
                            // Python 2 era writers append L to long ints.
                            if self.src.get(self.pos) == Some(&b'L') {
                                self.pos += 1;
                            }
                            dims.push(
                                text.parse::<usize>()
                                    .map_err(|_| self.err("dimension out of range"))?,
                            );
                            match self.peek() {
                                Some(b',') => self.pos += 1,
                                Some(b')') => {}
                                _ => return Err(self.err("expected ',' or ')' in shape")),
                            }
                        }
                        _ => return Err(self.err("expected a dimension")),
                    }
                }
                Ok(Value::Tuple(dims))
            }
            Some(b'T') if self.src[self.pos..].starts_with(b"True") => {
                self.pos += 4;
                Ok(Value::Bool(true))
            }
            Some(b'F') if self.src[self.pos..].starts_with(b"False") => {
                self.pos += 5;
                Ok(Value::Bool(false))
            }
            _ => Err(self.err("expected a string, tuple or boolean")),
        }
    }
}
