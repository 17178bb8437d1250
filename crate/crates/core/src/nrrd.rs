//! Reader and writer for the subset of NRRD used here: three dimensions,
//! `uint8`/`int16`/`float32` samples, `raw` or `ascii` encoding, little-endian.
//!
//! Header layout written by [`write_nrrd`]:
//!
//! ```text
//! NRRD0004
//! type: int16
//! dimension: 3
//! sizes: 17 13 5
//! spacings: 1.0 1.0 3.0
//! encoding: raw
//! endian: little
//!
//! <payload>
//! ```

use crate::error::{Error, Result};
use crate::volume::{Grid3, MaskVolume, Volume3D, VoxelData, VoxelType};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Raw,
    Ascii,
}

#[derive(Default)]
struct Header {
    voxel_type: Option<VoxelType>,
    dimension: Option<usize>,
    sizes: Option<Vec<usize>>,
    spacing: Option<[f64; 3]>,
    encoding: Option<Encoding>,
    big_endian: bool,
}

/// Parses an NRRD byte stream into a volume.
pub fn read_nrrd(bytes: &[u8]) -> Result<Volume3D> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut next_line = |pos: &mut usize| -> Option<(usize, String)> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |e| *pos + e);
        let text = String::from_utf8_lossy(&bytes[*pos..end])
            .trim_end_matches('\r')
            .to_string();
        *pos = (end + 1).min(bytes.len());
        line_no += 1;
        Some((line_no, text))
    };

    let (_, magic) = next_line(&mut pos).ok_or_else(|| parse_err(1, "", "empty stream"))?;
    let version_ok = magic
        .strip_prefix("NRRD000")
        .is_some_and(|v| v.len() == 1 && v.chars().all(|c| ('1'..='5').contains(&c)));
    if !version_ok {
        return Err(parse_err(1, &magic, "missing NRRD magic"));
    }

    let mut header = Header::default();
    let mut last_line = 1;
    // a header without a blank separator line has no payload at all
    while let Some((no, line)) = next_line(&mut pos) {
        last_line = no;
        if line.is_empty() {
            break;
        }
        if line.starts_with('#') || line.contains(":=") {
            continue;
        }
        let Some((key, value)) = line.split_once(": ") else {
            return Err(parse_err(no, &line, "expected `field: value`"));
        };
        parse_field(&mut header, key.trim(), value.trim()).map_err(|e| match e {
            FieldError::Parse(msg) => parse_err(no, &line, &msg),
            FieldError::Unsupported(msg) => Error::Unsupported(msg),
        })?;
    }

    let missing = |name: &str| parse_err(last_line, "", &format!("missing required field `{name}`"));
    let dimension = header.dimension.ok_or_else(|| missing("dimension"))?;
    if dimension != 3 {
        return Err(Error::Unsupported(format!(
            "dimension {dimension}, only 3 is supported"
        )));
    }
    let voxel_type = header.voxel_type.ok_or_else(|| missing("type"))?;
    let sizes: [usize; 3] = header
        .sizes
        .ok_or_else(|| missing("sizes"))?
        .try_into()
        .map_err(|_| parse_err(last_line, "", "`sizes` must list 3 axes"))?;
    let encoding = header.encoding.ok_or_else(|| missing("encoding"))?;
    if header.big_endian && voxel_type.byte_size() > 1 && encoding == Encoding::Raw {
        return Err(Error::Unsupported("big-endian payload".into()));
    }
    let grid =
        Grid3::new(sizes, header.spacing.unwrap_or([1.0; 3])).map_err(|e| parse_err(last_line, "", &e.to_string()))?;

    let payload = &bytes[pos.min(bytes.len())..];
    let data = match encoding {
        Encoding::Raw => decode_raw(payload, voxel_type, grid.len())?,
        Encoding::Ascii => decode_ascii(payload, voxel_type, grid.len())?,
    };
    Volume3D::new(grid, data)
}

/// Reads an NRRD file as a binary mask; every non-zero voxel is foreground.
pub fn read_mask_nrrd(bytes: &[u8]) -> Result<MaskVolume> {
    read_nrrd(bytes).map(|v| MaskVolume::from_volume(&v))
}

/// Serializes a volume as raw little-endian NRRD.
pub fn write_nrrd(vol: &Volume3D) -> Vec<u8> {
    let payload = match vol.data() {
        VoxelData::Uint8(v) => v.clone(),
        VoxelData::Int16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        VoxelData::Float32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
    };
    encode(vol.grid(), vol.data().voxel_type(), &payload)
}

/// Serializes a mask as a `uint8` NRRD with values 0/1.
pub fn write_mask_nrrd(mask: &MaskVolume) -> Vec<u8> {
    encode(mask.grid(), VoxelType::Uint8, mask.bits())
}

fn encode(grid: &Grid3, ty: VoxelType, payload: &[u8]) -> Vec<u8> {
    let [nx, ny, nz] = grid.sizes;
    let [sx, sy, sz] = grid.spacing;
    let type_name = match ty {
        VoxelType::Uint8 => "uint8",
        VoxelType::Int16 => "int16",
        VoxelType::Float32 => "float",
    };
    let mut out = Vec::with_capacity(payload.len() + 128);
    // writing into a Vec cannot fail
    let _ = write!(
        out,
        "NRRD0004\ntype: {type_name}\ndimension: 3\nsizes: {nx} {ny} {nz}\n\
         spacings: {sx:?} {sy:?} {sz:?}\nencoding: raw\nendian: little\n\n"
    );
    out.extend_from_slice(payload);
    out
}

enum FieldError {
    Parse(String),
    Unsupported(String),
}

fn parse_field(h: &mut Header, key: &str, value: &str) -> std::result::Result<(), FieldError> {
    let bad = |what: &str| FieldError::Parse(format!("invalid {what} `{value}`"));
    match key {
        "type" => {
            h.voxel_type = Some(match value {
                "uchar" | "unsigned char" | "uint8" | "uint8_t" => VoxelType::Uint8,
                "short" | "short int" | "signed short" | "signed short int" | "int16" | "int16_t" => VoxelType::Int16,
                "float" => VoxelType::Float32,
                other => return Err(FieldError::Unsupported(format!("voxel type `{other}`"))),
            })
        }
        "dimension" => h.dimension = Some(value.parse().map_err(|_| bad("dimension"))?),
        "sizes" => {
            let v: Vec<usize> = value
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("sizes"))?;
            h.sizes = Some(v);
        }
        "spacings" => {
            let v: Vec<f64> = value
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("spacings"))?;
            h.spacing = Some(v.try_into().map_err(|_| bad("spacings"))?);
        }
        "space directions" => h.spacing = Some(parse_space_directions(value).ok_or_else(|| bad("space directions"))?),
        "encoding" => {
            h.encoding = Some(match value {
                "raw" => Encoding::Raw,
                "ascii" | "text" | "txt" => Encoding::Ascii,
                other => return Err(FieldError::Unsupported(format!("encoding `{other}`"))),
            })
        }
        "endian" => {
            h.big_endian = match value {
                "little" => false,
                "big" => true,
                _ => return Err(bad("endian")),
            }
        }
        "data file" | "datafile" => return Err(FieldError::Unsupported("detached data files".into())),
        _ => {}
    }
    Ok(())
}

// Spacing is the length of each axis direction vector, e.g. `(1,0,0) (0,1,0) (0,0,3)`.
fn parse_space_directions(value: &str) -> Option<[f64; 3]> {
    let norms: Vec<f64> = value
        .split(')')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let comps: Vec<f64> = s
                .trim_start_matches('(')
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .ok()?;
            (comps.len() == 3).then(|| comps.iter().map(|c| c * c).sum::<f64>().sqrt())
        })
        .collect::<Option<_>>()?;
    norms.try_into().ok()
}

fn decode_raw(payload: &[u8], ty: VoxelType, count: usize) -> Result<VoxelData> {
    let width = ty.byte_size();
    if payload.len() != count * width {
        return Err(Error::Truncated {
            expected: count,
            found: payload.len() / width,
        });
    }
    Ok(match ty {
        VoxelType::Uint8 => VoxelData::Uint8(payload.to_vec()),
        VoxelType::Int16 => VoxelData::Int16(
            payload
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        VoxelType::Float32 => VoxelData::Float32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
    })
}

fn decode_ascii(payload: &[u8], ty: VoxelType, count: usize) -> Result<VoxelData> {
    let text = std::str::from_utf8(payload).map_err(|_| Error::Unsupported("non-UTF-8 ascii payload".into()))?;
    let tokens: Vec<&str> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.len() != count {
        return Err(Error::Truncated {
            expected: count,
            found: tokens.len(),
        });
    }
    let bad = |t: &str| Error::Unsupported(format!("ascii value `{t}` does not fit the declared type"));
    Ok(match ty {
        VoxelType::Uint8 => VoxelData::Uint8(
            tokens
                .iter()
                .map(|t| t.parse().map_err(|_| bad(t)))
                .collect::<Result<_>>()?,
        ),
        VoxelType::Int16 => VoxelData::Int16(
            tokens
                .iter()
                .map(|t| t.parse().map_err(|_| bad(t)))
                .collect::<Result<_>>()?,
        ),
        VoxelType::Float32 => VoxelData::Float32(
            tokens
                .iter()
                .map(|t| t.parse().map_err(|_| bad(t)))
                .collect::<Result<_>>()?,
        ),
    })
}

fn parse_err(line: usize, text: &str, msg: &str) -> Error {
    Error::Parse {
        line,
        text: text.to_string(),
        msg: msg.to_string(),
    }
}
