use std::f64::consts::PI;

use super::weights::WeightsError;
use super::{FieldResponse, ScalarField};
use crate::{Point3, Vector3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    /// `sin(z)`; any frequency scaling is folded into the weights.
    Sine,
    /// `ln(1 + exp(beta * z)) / beta`.
    SoftPlus { beta: f32 },
}

impl Activation {
    fn apply(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Sine => (z.sin(), z.cos()),
            Activation::SoftPlus { beta } => {
                let beta = beta as f64;
                let t = beta * z;
                let value = (t.max(0.0) + (-t.abs()).exp().ln_1p()) / beta;
                let slope = if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                };
                (value, slope)
            }
        }
    }
}

/// Input encoding applied before the first layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Encoding {
    #[default]
    Identity,
    /// `[x?, sin(2^k π x), cos(2^k π x) for k in 0..frequencies]`, each term
    /// over the three coordinates.
    Positional { frequencies: u32, include_input: bool },
}

impl Encoding {
    pub fn output_dim(self) -> usize {
        match self {
            Encoding::Identity => 3,
            Encoding::Positional {
                frequencies,
                include_input,
            } => 6 * frequencies as usize + if include_input { 3 } else { 0 },
        }
    }

    /// Writes the encoding and its 3-column Jacobian (row-major, dim × 3).
    fn encode(self, x: &Point3, out: &mut Vec<f64>, jac: &mut Vec<[f64; 3]>) {
        out.clear();
        jac.clear();
        match self {
            Encoding::Identity => {
                for a in 0..3 {
                    out.push(x[a]);
                    let mut row = [0.0; 3];
                    row[a] = 1.0;
                    jac.push(row);
                }
            }
            Encoding::Positional {
                frequencies,
                include_input,
            } => {
                if include_input {
                    for a in 0..3 {
                        out.push(x[a]);
                        let mut row = [0.0; 3];
                        row[a] = 1.0;
                        jac.push(row);
                    }
                }
                for k in 0..frequencies {
                    let w = (1u64 << k) as f64 * PI;
                    for a in 0..3 {
                        out.push((w * x[a]).sin());
                        let mut row = [0.0; 3];
                        row[a] = w * (w * x[a]).cos();
                        jac.push(row);
                    }
                    for a in 0..3 {
                        out.push((w * x[a]).cos());
                        let mut row = [0.0; 3];
                        row[a] = -w * (w * x[a]).sin();
                        jac.push(row);
                    }
                }
            }
        }
    }
}

/// One dense layer. Weights are stored exactly as serialized.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim × in_dim`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub activation: Activation,
}

/// Multilayer perceptron mapping a 3D point to a positive distance.
#[derive(Clone, Debug)]
pub struct MlpField {
    encoding: Encoding,
    layers: Vec<Layer>,
    /// `[min_x, min_y, min_z, max_x, max_y, max_z]`
    domain: [f32; 6],
    // f64 copies used for evaluation
    weights64: Vec<Vec<f64>>,
    bias64: Vec<Vec<f64>>,
}

impl PartialEq for MlpField {
    fn eq(&self, other: &Self) -> bool {
        self.encoding == other.encoding && self.layers == other.layers && self.domain == other.domain
    }
}

impl MlpField {
    /// Validates the layer chain: input matches the encoding, consecutive
    /// dimensions agree, one output, SoftPlus last.
    pub fn new(encoding: Encoding, layers: Vec<Layer>, domain: [f32; 6]) -> Result<Self, WeightsError> {
        if layers.is_empty() {
            return Err(WeightsError::NoLayers);
        }
        let mut expected = encoding.output_dim();
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim != expected {
                return Err(WeightsError::DimensionChain {
                    layer: i,
                    expected,
                    found: layer.in_dim,
                });
            }
            if layer.weights.len() != layer.in_dim * layer.out_dim || layer.bias.len() != layer.out_dim {
                return Err(WeightsError::ParameterCount { layer: i });
            }
            if let Activation::SoftPlus { beta } = layer.activation {
                if !(beta.is_finite() && beta > 0.0) {
                    return Err(WeightsError::InvalidBeta { layer: i, beta });
                }
            }
            expected = layer.out_dim;
        }
        if expected != 1 {
            return Err(WeightsError::OutputDim(expected));
        }
        if !matches!(layers.last().unwrap().activation, Activation::SoftPlus { .. }) {
            return Err(WeightsError::FinalActivation);
        }
        let weights64 = layers
            .iter()
            .map(|l| l.weights.iter().map(|&w| w as f64).collect())
            .collect();
        let bias64 = layers
            .iter()
            .map(|l| l.bias.iter().map(|&w| w as f64).collect())
            .collect();
        Ok(Self {
            encoding,
            layers,
            domain,
            weights64,
            bias64,
        })
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn domain(&self) -> [f32; 6] {
        self.domain
    }

    /// Forward pass only.
    pub fn forward(&self, x: &Point3) -> f64 {
        let mut scratch = Scratch::default();
        self.run(x, &mut scratch, false).0
    }

    /// Output and exact input gradient by reverse-mode differentiation.
    pub fn forward_with_gradient(&self, x: &Point3) -> (f64, Vector3) {
        let mut scratch = Scratch::default();
        self.run(x, &mut scratch, true)
    }

    fn run(&self, x: &Point3, s: &mut Scratch, want_gradient: bool) -> (f64, Vector3) {
        self.encoding.encode(x, &mut s.input, &mut s.jacobian);
        s.slopes.resize(self.layers.len(), Vec::new());
        let mut current = std::mem::take(&mut s.input);
        for (l, layer) in self.layers.iter().enumerate() {
            let w = &self.weights64[l];
            let b = &self.bias64[l];
            let mut next = Vec::with_capacity(layer.out_dim);
            let slopes = &mut s.slopes[l];
            slopes.clear();
            for o in 0..layer.out_dim {
                let row = &w[o * layer.in_dim..(o + 1) * layer.in_dim];
                let z = row.iter().zip(&current).map(|(a, b)| a * b).sum::<f64>() + b[o];
                let (value, slope) = layer.activation.apply(z);
                next.push(value);
                slopes.push(slope);
            }
            current = next;
        }
        let output = current[0];
        if !want_gradient {
            return (output, Vector3::zeros());
        }
        // reverse pass: upstream holds d(output)/d(pre-activation) of layer l
        let mut upstream: Vec<f64> = s.slopes[self.layers.len() - 1].clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let w = &self.weights64[l];
            let mut down = vec![0.0; layer.in_dim];
            for (o, g) in upstream.iter().enumerate() {
                if *g == 0.0 {
                    continue;
                }
                let row = &w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (d, wi) in down.iter_mut().zip(row) {
                    *d += g * wi;
                }
            }
            if l > 0 {
                for (d, slope) in down.iter_mut().zip(&s.slopes[l - 1]) {
                    *d *= slope;
                }
            }
            upstream = down;
        }
        let mut grad = Vector3::zeros();
        for (g, row) in upstream.iter().zip(&s.jacobian) {
            for a in 0..3 {
                grad[a] += g * row[a];
            }
        }
        (output, grad)
    }
}

#[derive(Default)]
struct Scratch {
    input: Vec<f64>,
    jacobian: Vec<[f64; 3]>,
    slopes: Vec<Vec<f64>>,
}

impl ScalarField for MlpField {
    fn eval_unchecked(&self, points: &[Point3]) -> FieldResponse {
        let mut out = FieldResponse::with_capacity(points.len());
        let mut scratch = Scratch::default();
        for p in points {
            let (d, g) = self.run(p, &mut scratch, true);
            out.push(d, g);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_layers(rng: &mut ChaCha8Rng, dims: &[usize], first_scale: f32) -> Vec<Layer> {
        let mut layers = Vec::new();
        for (i, w) in dims.windows(2).enumerate() {
            let last = i == dims.len() - 2;
            let bound = if i == 0 { first_scale / w[0] as f32 } else { (6.0 / w[0] as f32).sqrt() };
            layers.push(Layer {
                in_dim: w[0],
                out_dim: w[1],
                weights: (0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)).collect(),
                bias: (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect(),
                activation: if last { Activation::SoftPlus { beta: 100.0 } } else { Activation::Sine },
            });
        }
        layers
    }

    #[test]
    fn zero_weights_give_softplus_of_bias() {
        let layers = vec![
            Layer {
                in_dim: 3,
                out_dim: 4,
                weights: vec![0.0; 12],
                bias: vec![0.0; 4],
                activation: Activation::Sine,
            },
            Layer {
                in_dim: 4,
                out_dim: 1,
                weights: vec![0.0; 4],
                bias: vec![0.02],
                activation: Activation::SoftPlus { beta: 100.0 },
            },
        ];
        let f = MlpField::new(Encoding::Identity, layers, [-1., -1., -1., 1., 1., 1.]).unwrap();
        let expected = (1.0 + (100.0 * 0.02f32 as f64).exp()).ln() / 100.0;
        for p in [Point3::origin(), Point3::new(0.3, -0.9, 0.5)] {
            let (d, g) = f.eval_point(p).unwrap();
            assert!((d - expected).abs() < 1e-15);
            assert_eq!(g, Vector3::zeros());
        }
    }

    fn finite_difference(f: &MlpField, p: &Point3, h: f64) -> Vector3 {
        Vector3::from_fn(|a, _| {
            let mut e = Vector3::zeros();
            e[a] = h;
            (f.forward(&(p + e)) - f.forward(&(p - e))) / (2.0 * h)
        })
    }

    fn worst_fd_error(f: &MlpField, points: &[Point3], h: f64) -> f64 {
        points
            .iter()
            .map(|p| (f.forward_with_gradient(p).1 - finite_difference(f, p, h)).amax())
            .fold(0.0, f64::max)
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        // gradient magnitudes of order one, like a fitted distance field
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layers = random_layers(&mut rng, &[3, 32, 32, 32, 1], 3.0);
        let f = MlpField::new(Encoding::Identity, layers, [-1., -1., -1., 1., 1., 1.]).unwrap();
        let worst = worst_fd_error(&f, &random_points(&mut rng, 1000), 1e-4);
        assert!(worst < 1e-4, "max component error {worst}");
    }

    #[test]
    fn high_frequency_gradient_error_is_second_order_in_h() {
        // with sin(30·x) first-layer frequencies the difference quotient
        // itself is off by O(h²)
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layers = random_layers(&mut rng, &[3, 32, 32, 32, 1], 30.0);
        let f = MlpField::new(Encoding::Identity, layers, [-1., -1., -1., 1., 1., 1.]).unwrap();
        let points = random_points(&mut rng, 1000);
        let coarse = worst_fd_error(&f, &points, 1e-4);
        let fine = worst_fd_error(&f, &points, 1e-5);
        assert!(fine < 1e-4, "max component error {fine}");
        assert!(coarse / fine > 50.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn positional_encoding_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let encoding = Encoding::Positional {
            frequencies: 4,
            include_input: true,
        };
        let mut layers = random_layers(&mut rng, &[encoding.output_dim(), 16, 1], 1.0);
        layers[0].activation = Activation::SoftPlus { beta: 10.0 };
        let f = MlpField::new(encoding, layers, [-1., -1., -1., 1., 1., 1.]).unwrap();
        for _ in 0..200 {
            let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (_, g) = f.forward_with_gradient(&p);
            assert!((g - finite_difference(&f, &p, 1e-4)).amax() < 1e-4);
        }
    }

    #[test]
    fn output_is_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = MlpField::new(Encoding::Identity, random_layers(&mut rng, &[3, 16, 16, 1], 30.0), [-1., -1., -1., 1., 1., 1.]).unwrap();
        for _ in 0..1000 {
            let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            assert!(f.forward(&p) > 0.0);
        }
    }

    #[test]
    fn broken_chain_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut layers = random_layers(&mut rng, &[3, 8, 1], 1.0);
        layers[1].in_dim = 7;
        layers[1].weights.pop();
        assert!(matches!(
            MlpField::new(Encoding::Identity, layers, [0.0; 6]),
            Err(WeightsError::DimensionChain { layer: 1, expected: 8, found: 7 })
        ));
        let mut layers = random_layers(&mut rng, &[3, 8, 1], 1.0);
        layers[1].activation = Activation::Sine;
        assert!(matches!(MlpField::new(Encoding::Identity, layers, [0.0; 6]), Err(WeightsError::FinalActivation)));
    }
}
