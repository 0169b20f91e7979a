//! UDFW binary weight files.
//!
//! Little-endian layout:
//!
//! ```text
//! "UDFW" | u32 version | u32 layer_count
//! version 2 only: u32 frequencies | u8 include_input
//! per layer: u32 in_dim | u32 out_dim | u8 activation (0 = Sine, 1 = SoftPlus)
//!            | f32 beta | out_dim*in_dim f32 weights (row-major) | out_dim f32 biases
//! 6 x f32 domain bounds (min xyz, max xyz)
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use super::mlp::{Activation, Encoding, Layer, MlpField};

pub const MAGIC: &[u8; 4] = b"UDFW";

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("cannot read weights file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes {0:?}, expected \"UDFW\"")]
    BadMagic([u8; 4]),
    #[error("unsupported UDFW version {0}")]
    UnsupportedVersion(u32),
    #[error("unexpected EOF {0}")]
    UnexpectedEof(String),
    #[error("weights contain no layers")]
    NoLayers,
    #[error("dimension chain broken at layer {layer}: expected input {expected}, found {found}")]
    DimensionChain { layer: usize, expected: usize, found: usize },
    #[error("parameter count mismatch at layer {layer}")]
    ParameterCount { layer: usize },
    #[error("unknown activation code {code} at layer {layer}")]
    UnknownActivation { layer: usize, code: u8 },
    #[error("invalid SoftPlus beta {beta} at layer {layer}")]
    InvalidBeta { layer: usize, beta: f32 },
    #[error("network must produce one output, found {0}")]
    OutputDim(usize),
    #[error("final layer must use SoftPlus so the output stays positive")]
    FinalActivation,
    #[error("{0} trailing bytes after domain bounds")]
    TrailingBytes(usize),
}

fn eof(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> WeightsError {
    let context = context.into();
    move |_| WeightsError::UnexpectedEof(context)
}

/// Parses an in-memory UDFW image.
pub fn parse(bytes: &[u8]) -> Result<MlpField, WeightsError> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    std::io::Read::read_exact(&mut r, &mut magic).map_err(eof("in header"))?;
    if &magic != MAGIC {
        return Err(WeightsError::BadMagic(magic));
    }
    let version = r.read_u32::<LittleEndian>().map_err(eof("in header"))?;
    if version != 1 && version != 2 {
        return Err(WeightsError::UnsupportedVersion(version));
    }
    let layer_count = r.read_u32::<LittleEndian>().map_err(eof("in header"))? as usize;
    let encoding = if version == 2 {
        let frequencies = r.read_u32::<LittleEndian>().map_err(eof("in encoding header"))?;
        let include_input = r.read_u8().map_err(eof("in encoding header"))? != 0;
        Encoding::Positional {
            frequencies,
            include_input,
        }
    } else {
        Encoding::Identity
    };
    let mut layers = Vec::with_capacity(layer_count.min(1024));
    let mut expected = encoding.output_dim();
    for k in 0..layer_count {
        let in_dim = r.read_u32::<LittleEndian>().map_err(eof(format!("at layer {k}")))? as usize;
        let out_dim = r.read_u32::<LittleEndian>().map_err(eof(format!("at layer {k}")))? as usize;
        if in_dim != expected {
            return Err(WeightsError::DimensionChain {
                layer: k,
                expected,
                found: in_dim,
            });
        }
        let code = r.read_u8().map_err(eof(format!("at layer {k}")))?;
        let beta = r.read_f32::<LittleEndian>().map_err(eof(format!("at layer {k}")))?;
        let activation = match code {
            0 => Activation::Sine,
            1 => Activation::SoftPlus { beta },
            code => return Err(WeightsError::UnknownActivation { layer: k, code }),
        };
        let count = in_dim
            .checked_mul(out_dim)
            .filter(|&c| c.saturating_add(out_dim).saturating_mul(4) <= r.len())
            .ok_or_else(|| WeightsError::UnexpectedEof(format!("at layer {k}")))?;
        let mut weights = vec![0f32; count];
        r.read_f32_into::<LittleEndian>(&mut weights).map_err(eof(format!("at layer {k}")))?;
        let mut bias = vec![0f32; out_dim];
        r.read_f32_into::<LittleEndian>(&mut bias).map_err(eof(format!("at layer {k}")))?;
        layers.push(Layer {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        });
        expected = out_dim;
    }
    let mut domain = [0f32; 6];
    r.read_f32_into::<LittleEndian>(&mut domain).map_err(eof("in domain bounds"))?;
    if !r.is_empty() {
        return Err(WeightsError::TrailingBytes(r.len()));
    }
    MlpField::new(encoding, layers, domain)
}

/// Serializes to the UDFW byte layout. Version 1 unless an encoding is set.
pub fn to_bytes(field: &MlpField) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let version = match field.encoding() {
        Encoding::Identity => 1,
        Encoding::Positional { .. } => 2,
    };
    // writes into a Vec cannot fail
    out.write_u32::<LittleEndian>(version).unwrap();
    out.write_u32::<LittleEndian>(field.layers().len() as u32).unwrap();
    if let Encoding::Positional {
        frequencies,
        include_input,
    } = field.encoding()
    {
        out.write_u32::<LittleEndian>(frequencies).unwrap();
        out.write_u8(include_input as u8).unwrap();
    }
    for layer in field.layers() {
        out.write_u32::<LittleEndian>(layer.in_dim as u32).unwrap();
        out.write_u32::<LittleEndian>(layer.out_dim as u32).unwrap();
        let (code, beta) = match layer.activation {
            Activation::Sine => (0u8, 0f32),
            Activation::SoftPlus { beta } => (1u8, beta),
        };
        out.write_u8(code).unwrap();
        out.write_f32::<LittleEndian>(beta).unwrap();
        for &w in layer.weights.iter().chain(&layer.bias) {
            out.write_f32::<LittleEndian>(w).unwrap();
        }
    }
    for b in field.domain() {
        out.write_f32::<LittleEndian>(b).unwrap();
    }
    out
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<MlpField, WeightsError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| WeightsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&bytes)
}

pub fn save_weights(field: &MlpField, path: impl AsRef<Path>) -> Result<(), WeightsError> {
    let path = path.as_ref();
    let io = |source| WeightsError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io)?;
    file.write_all(&to_bytes(field)).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_layer() -> MlpField {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layers = vec![
            Layer {
                in_dim: 3,
                out_dim: 8,
                weights: (0..24).map(|_| rng.random_range(-1.0..1.0)).collect(),
                bias: (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
                activation: Activation::Sine,
            },
            Layer {
                in_dim: 8,
                out_dim: 1,
                weights: (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
                bias: vec![0.1],
                activation: Activation::SoftPlus { beta: 100.0 },
            },
        ];
        MlpField::new(Encoding::Identity, layers, [-1., -1., -1., 1., 1., 1.]).unwrap()
    }

    #[test]
    fn two_layer_file_round_trips_bit_exactly() {
        let f = two_layer();
        let bytes = to_bytes(&f);
        assert_eq!(bytes.len(), 12 + (13 + 32 * 4) + (13 + 9 * 4) + 24);
        let g = parse(&bytes).unwrap();
        assert_eq!(g.layers().len(), 2);
        assert_eq!((g.layers()[0].in_dim, g.layers()[0].out_dim), (3, 8));
        assert_eq!(g.layers()[1].activation, Activation::SoftPlus { beta: 100.0 });
        assert_eq!(f, g);
        assert_eq!(to_bytes(&g), bytes);
    }

    #[test]
    fn truncation_names_the_layer() {
        let bytes = to_bytes(&two_layer());
        // cut inside the second layer's weights
        let cut = 12 + 13 + 32 * 4 + 20;
        let err = parse(&bytes[..cut]).unwrap_err();
        assert_eq!(err.to_string(), "unexpected EOF at layer 1");
        let err = parse(&bytes[..bytes.len() - 4]).unwrap_err();
        assert_eq!(err.to_string(), "unexpected EOF in domain bounds");
        assert!(matches!(parse(&bytes[..6]), Err(WeightsError::UnexpectedEof(_))));
    }

    #[test]
    fn corrupt_headers_are_described() {
        let mut bytes = to_bytes(&two_layer());
        bytes[0] = b'X';
        assert!(matches!(parse(&bytes), Err(WeightsError::BadMagic(_))));
        let mut bytes = to_bytes(&two_layer());
        bytes[12 + 8] = 7;
        assert!(matches!(parse(&bytes), Err(WeightsError::UnknownActivation { layer: 0, code: 7 })));
        let mut bytes = to_bytes(&two_layer());
        bytes[12] = 4;
        assert!(matches!(parse(&bytes), Err(WeightsError::DimensionChain { layer: 0, .. })));
        let mut bytes = to_bytes(&two_layer());
        bytes[4] = 9;
        assert!(matches!(parse(&bytes), Err(WeightsError::UnsupportedVersion(9))));
    }

    #[test]
    fn version_two_carries_the_encoding() {
        let encoding = Encoding::Positional {
            frequencies: 2,
            include_input: false,
        };
        let layers = vec![Layer {
            in_dim: 12,
            out_dim: 1,
            weights: (0..12).map(|i| i as f32 * 0.1).collect(),
            bias: vec![0.0],
            activation: Activation::SoftPlus { beta: 100.0 },
        }];
        let f = MlpField::new(encoding, layers, [-1., -1., -1., 1., 1., 1.]).unwrap();
        let bytes = to_bytes(&f);
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        let g = parse(&bytes).unwrap();
        assert_eq!(g.encoding(), encoding);
        let p = Point3::new(0.1, 0.2, 0.3);
        assert_eq!(f.forward(&p), g.forward(&p));
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load_weights("/nonexistent/net.udfw").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/net.udfw"));
    }
}
