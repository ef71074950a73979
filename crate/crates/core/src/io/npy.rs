use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;
// Spare header room numpy reserves so the leading axis can grow in place.
const GROWTH_AXIS_MAX_DIGITS: usize = 21;

/// Element types understood by the reader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F4,
    F8,
    U1,
    U4,
}

impl Dtype {
    fn parse(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(Dtype::F4),
            "<f8" => Ok(Dtype::F8),
            "|u1" | "<u1" => Ok(Dtype::U1),
            "<u4" => Ok(Dtype::U4),
            d if d.starts_with('>') => {
                Err(Error::UnsupportedLayout(format!("big-endian dtype {d:?}")))
            }
            d => Err(Error::Format(format!("unsupported dtype {d:?}"))),
        }
    }

    fn descr(self) -> &'static str {
        match self {
            Dtype::F4 => "<f4",
            Dtype::F8 => "<f8",
            Dtype::U1 => "|u1",
            Dtype::U4 => "<u4",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F4 | Dtype::U4 => 4,
            Dtype::F8 => 8,
            Dtype::U1 => 1,
        }
    }
}

/// A decoded NPY v1.0 array: header fields plus the raw payload.
#[derive(Debug, Clone)]
pub struct NpyArray<'a> {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    payload: &'a [u8],
}

impl<'a> NpyArray<'a> {
    pub fn parse(bytes: &'a [u8]) -> Result<Self> {
        if bytes.len() < 10 || &bytes[..6] != MAGIC {
            return Err(Error::Format("missing NPY magic".into()));
        }
        if bytes[6] != 1 || bytes[7] != 0 {
            return Err(Error::Format(format!(
                "NPY version {}.{} not supported (only 1.0)",
                bytes[6], bytes[7]
            )));
        }
        let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        let header = bytes
            .get(10..10 + hlen)
            .ok_or_else(|| Error::Format("truncated header".into()))?;
        let header = std::str::from_utf8(header)
            .map_err(|_| Error::Format("header is not ASCII".into()))?;
        let dict = HeaderDict::parse(header)?;
        if dict.fortran_order {
            return Err(Error::UnsupportedLayout("Fortran-order arrays are not supported".into()));
        }
        let dtype = Dtype::parse(&dict.descr)?;
        let count: usize = dict.shape.iter().product();
        let payload = &bytes[10 + hlen..];
        if payload.len() != count * dtype.size() {
            return Err(Error::Format(format!(
                "payload has {} bytes, shape {:?} of {} needs {}",
                payload.len(),
                dict.shape,
                dtype.descr(),
                count * dtype.size()
            )));
        }
        Ok(Self { dtype, shape: dict.shape, payload })
    }

    pub fn to_f64(&self) -> Result<Vec<f64>> {
        match self.dtype {
            Dtype::F8 => Ok(self
                .payload
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect()),
            Dtype::F4 => Ok(self
                .payload
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
                .collect()),
            d => Err(Error::Format(format!("expected float data, found {}", d.descr()))),
        }
    }

    pub fn to_u32(&self) -> Result<Vec<u32>> {
        match self.dtype {
            Dtype::U1 => Ok(self.payload.iter().map(|&b| u32::from(b)).collect()),
            Dtype::U4 => Ok(self
                .payload
                .chunks_exact(4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .collect()),
            d => Err(Error::Format(format!("expected unsigned integer data, found {}", d.descr()))),
        }
    }
}

struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

impl HeaderDict {
    /// Parses the python dict literal numpy writes, e.g.
    /// `{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }`.
    fn parse(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Format(format!("bad NPY header ({what}): {text:?}"));
        let body = text
            .trim_end()
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| bad("not a dict"))?;

        let mut descr = None;
        let mut fortran = None;
        let mut shape = None;
        let mut rest = body.trim_start();
        while !rest.is_empty() {
            let (key, after) = take_quoted(rest).ok_or_else(|| bad("key"))?;
            let after = after.trim_start().strip_prefix(':').ok_or_else(|| bad("colon"))?.trim_start();
            rest = match key {
                "descr" => {
                    let (v, r) = take_quoted(after).ok_or_else(|| bad("descr"))?;
                    descr = Some(v.to_string());
                    r
                }
                "fortran_order" => {
                    if let Some(r) = after.strip_prefix("False") {
                        fortran = Some(false);
                        r
                    } else if let Some(r) = after.strip_prefix("True") {
                        fortran = Some(true);
                        r
                    } else {
                        return Err(bad("fortran_order"));
                    }
                }
                "shape" => {
                    let inner = after.strip_prefix('(').ok_or_else(|| bad("shape"))?;
                    let close = inner.find(')').ok_or_else(|| bad("shape"))?;
                    let dims = inner[..close]
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.trim_end_matches('L').parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("shape"))?;
                    shape = Some(dims);
                    &inner[close + 1..]
                }
                _ => return Err(bad("unknown key")),
            };
            rest = rest.trim_start();
            rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
        }
        Ok(Self {
            descr: descr.ok_or_else(|| bad("missing descr"))?,
            fortran_order: fortran.ok_or_else(|| bad("missing fortran_order"))?,
            shape: shape.ok_or_else(|| bad("missing shape"))?,
        })
    }
}

fn take_quoted(s: &str) -> Option<(&str, &str)> {
    let q = s.chars().next().filter(|&c| c == '\'' || c == '"')?;
    let end = s[1..].find(q)? + 1;
    Some((&s[1..end], &s[end + 1..]))
}

/// Header bytes laid out exactly as numpy's `np.save` emits them.
fn header(dtype: Dtype, shape: &[usize]) -> Vec<u8> {
    let dims = match shape {
        [d] => format!("({d},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut dict = format!("{{'descr': '{}', 'fortran_order': False, 'shape': {dims}, }}", dtype.descr());
    if let Some(first) = shape.first() {
        let digits = first.to_string().len();
        dict.push_str(&" ".repeat(GROWTH_AXIS_MAX_DIGITS.saturating_sub(digits)));
    }
    let hlen = dict.len() + 1;
    let pad = ALIGN - (MAGIC.len() + 2 + 2 + hlen) % ALIGN;
    let total = hlen + pad;

    let mut out = Vec::with_capacity(10 + total);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(total as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.resize(10 + total - 1, b' ');
    out.push(b'\n');
    out
}

pub(crate) fn encode_f64(shape: &[usize], values: &[f64]) -> Vec<u8> {
    let mut out = header(Dtype::F8, shape);
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn encode_u8(shape: &[usize], values: &[u8]) -> Vec<u8> {
    let mut out = header(Dtype::U1, shape);
    out.extend_from_slice(values);
    out
}

pub(crate) fn encode_u32(shape: &[usize], values: &[u32]) -> Vec<u8> {
    let mut out = header(Dtype::U4, shape);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
