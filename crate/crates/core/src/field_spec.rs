//! Text descriptions of fields, as accepted on the command line.
//!
//! ```text
//! analytic:sphere:R[:cx:cy:cz]
//! analytic:box:H | analytic:box:hx:hy:hz
//! analytic:plane:nx:ny:nz:offset
//! analytic:disk:R
//! analytic:torus:R:r
//! analytic:constant:c
//! mesh:PATH            (.obj or .ply)
//! mlp:PATH             (UDFW weights)
//! noisy:SEED:SPEC
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::field::{weights, Analytic, FieldError, MeshField, NoisyField, ScalarField, Shape};
use crate::io::{read_mesh, MeshIoError};
use crate::{Point3, Vector3};

#[derive(Debug, Error)]
pub enum FieldSpecError {
    #[error("unknown field scheme in {0:?} (expected analytic:, mesh:, mlp: or noisy:)")]
    UnknownScheme(String),
    #[error("invalid field spec {spec:?}: {reason}")]
    Invalid { spec: String, reason: String },
    #[error(transparent)]
    Mesh(#[from] MeshIoError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Weights(#[from] weights::WeightsError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Analytic(Shape),
    Mesh(PathBuf),
    Mlp(PathBuf),
    Noisy { seed: u64, inner: Box<FieldSpec> },
}

fn numbers(spec: &str, parts: &[&str]) -> Result<Vec<f64>, FieldSpecError> {
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FieldSpecError::Invalid {
                    spec: spec.into(),
                    reason: format!("{p:?} is not a finite number"),
                })
        })
        .collect()
}

fn parse_shape(spec: &str, rest: &str) -> Result<Shape, FieldSpecError> {
    let invalid = |reason: &str| FieldSpecError::Invalid {
        spec: spec.into(),
        reason: reason.into(),
    };
    let parts: Vec<&str> = rest.split(':').collect();
    let (name, args) = parts.split_first().ok_or_else(|| invalid("missing shape"))?;
    let v = numbers(spec, args)?;
    let positive = |x: f64, what: &str| if x > 0.0 { Ok(x) } else { Err(invalid(&format!("{what} must be positive"))) };
    Ok(match (*name, v.as_slice()) {
        ("sphere", [r]) => Shape::Sphere {
            center: Point3::origin(),
            radius: positive(*r, "radius")?,
        },
        ("sphere", [r, x, y, z]) => Shape::Sphere {
            center: Point3::new(*x, *y, *z),
            radius: positive(*r, "radius")?,
        },
        ("box", [h]) => Shape::Cuboid {
            center: Point3::origin(),
            half_extents: Vector3::repeat(positive(*h, "half extent")?),
        },
        ("box", [x, y, z]) => Shape::Cuboid {
            center: Point3::origin(),
            half_extents: Vector3::new(
                positive(*x, "half extent")?,
                positive(*y, "half extent")?,
                positive(*z, "half extent")?,
            ),
        },
        ("plane", [x, y, z, c]) => {
            let normal = Vector3::new(*x, *y, *z);
            if normal.norm() == 0.0 {
                return Err(invalid("plane normal must be non-zero"));
            }
            Shape::Plane { normal, offset: *c }
        }
        ("disk", [r]) => Shape::Disk {
            center: Point3::origin(),
            radius: positive(*r, "radius")?,
        },
        ("torus", [major, minor]) => Shape::Torus {
            center: Point3::origin(),
            major: positive(*major, "major radius")?,
            minor: positive(*minor, "minor radius")?,
        },
        ("constant", [c]) if *c >= 0.0 => Shape::Constant(*c),
        _ => return Err(invalid("unknown shape or wrong argument count")),
    })
}

impl FromStr for FieldSpec {
    type Err = FieldSpecError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let (scheme, rest) = spec
            .split_once(':')
            .ok_or_else(|| FieldSpecError::UnknownScheme(spec.into()))?;
        let missing_path = || FieldSpecError::Invalid {
            spec: spec.into(),
            reason: "missing path".into(),
        };
        match scheme {
            "analytic" => Ok(FieldSpec::Analytic(parse_shape(spec, rest)?)),
            "mesh" if !rest.is_empty() => Ok(FieldSpec::Mesh(rest.into())),
            "mlp" if !rest.is_empty() => Ok(FieldSpec::Mlp(rest.into())),
            "mesh" | "mlp" => Err(missing_path()),
            "noisy" => {
                let (seed, inner) = rest.split_once(':').ok_or_else(|| FieldSpecError::Invalid {
                    spec: spec.into(),
                    reason: "expected noisy:SEED:SPEC".into(),
                })?;
                let seed = seed.parse().map_err(|_| FieldSpecError::Invalid {
                    spec: spec.into(),
                    reason: format!("bad seed {seed:?}"),
                })?;
                Ok(FieldSpec::Noisy {
                    seed,
                    inner: Box::new(inner.parse()?),
                })
            }
            _ => Err(FieldSpecError::UnknownScheme(spec.into())),
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Analytic(shape) => write!(f, "analytic:{shape:?}"),
            FieldSpec::Mesh(p) => write!(f, "mesh:{}", p.display()),
            FieldSpec::Mlp(p) => write!(f, "mlp:{}", p.display()),
            FieldSpec::Noisy { seed, inner } => write!(f, "noisy:{seed}:{inner}"),
        }
    }
}

impl FieldSpec {
    /// Loads files and constructs the field.
    pub fn build(&self) -> Result<Box<dyn ScalarField>, FieldSpecError> {
        Ok(match self {
            FieldSpec::Analytic(shape) => Box::new(Analytic::new(shape.clone())),
            FieldSpec::Mesh(path) => Box::new(MeshField::new(&read_mesh(path)?)?),
            FieldSpec::Mlp(path) => Box::new(weights::load_weights(path)?),
            FieldSpec::Noisy { seed, inner } => Box::new(NoisyField::new(inner.build()?, *seed)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_scheme() {
        assert_eq!(
            "analytic:sphere:0.5".parse::<FieldSpec>().unwrap(),
            FieldSpec::Analytic(Shape::Sphere {
                center: Point3::origin(),
                radius: 0.5
            })
        );
        assert!(matches!("analytic:box:0.5".parse(), Ok(FieldSpec::Analytic(Shape::Cuboid { .. }))));
        assert!(matches!("analytic:plane:0:0:1:0.1".parse(), Ok(FieldSpec::Analytic(Shape::Plane { .. }))));
        assert!(matches!("analytic:torus:0.5:0.2".parse(), Ok(FieldSpec::Analytic(Shape::Torus { .. }))));
        assert_eq!("mesh:a/b.obj".parse::<FieldSpec>().unwrap(), FieldSpec::Mesh("a/b.obj".into()));
        assert_eq!("mlp:w.udfw".parse::<FieldSpec>().unwrap(), FieldSpec::Mlp("w.udfw".into()));
        match "noisy:7:analytic:disk:1".parse::<FieldSpec>().unwrap() {
            FieldSpec::Noisy { seed, inner } => {
                assert_eq!(seed, 7);
                assert!(matches!(*inner, FieldSpec::Analytic(Shape::Disk { .. })));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!("sdf:sphere".parse::<FieldSpec>(), Err(FieldSpecError::UnknownScheme(_))));
        assert!(matches!("sphere".parse::<FieldSpec>(), Err(FieldSpecError::UnknownScheme(_))));
        assert!(matches!("analytic:sphere:-1".parse::<FieldSpec>(), Err(FieldSpecError::Invalid { .. })));
        assert!(matches!("analytic:cone:1".parse::<FieldSpec>(), Err(FieldSpecError::Invalid { .. })));
        assert!(matches!("analytic:sphere:x".parse::<FieldSpec>(), Err(FieldSpecError::Invalid { .. })));
        assert!(matches!("mlp:".parse::<FieldSpec>(), Err(FieldSpecError::Invalid { .. })));
        assert!(matches!("noisy:x:analytic:sphere:1".parse::<FieldSpec>(), Err(FieldSpecError::Invalid { .. })));
    }

    #[test]
    fn missing_weights_name_the_path() {
        let err = "mlp:/no/such/garment.udfw".parse::<FieldSpec>().unwrap().build().err().unwrap();
        assert!(err.to_string().contains("/no/such/garment.udfw"), "{err}");
    }

    #[test]
    fn built_field_evaluates() {
        let f = "analytic:sphere:0.5".parse::<FieldSpec>().unwrap().build().unwrap();
        let (d, g) = f.eval_point(Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!((g - Vector3::x()).norm() < 1e-15);
    }
}
