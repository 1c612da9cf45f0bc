use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{pattern_of_structure, SharingPattern};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::structure::StructureExpr;

use super::plan::Plan;

/// A multi-channel linear layer equivariant to the group of `structure`.
///
/// Every orbit of the sharing pattern carries its own `c_in × c_out` mixing matrix;
/// weights are stored orbit-major, `weights[(orbit · c_in + i) · c_out + o]`.
#[derive(Debug, Clone)]
pub struct EquivariantLayer<T> {
    structure: StructureExpr,
    c_in: usize,
    c_out: usize,
    weights: Vec<T>,
    bias: Option<Vec<T>>,
    plan: Plan,
}

/// Gradients of a scalar loss with respect to everything [`EquivariantLayer::apply`]
/// consumes.
#[derive(Debug, Clone)]
pub struct LayerGrads<T> {
    pub weights: Vec<T>,
    pub bias: Option<Vec<T>>,
    pub input: Matrix<T>,
}

impl<T: Real> EquivariantLayer<T> {
    pub fn new(
        structure: StructureExpr,
        c_in: usize,
        c_out: usize,
        weights: Vec<T>,
        bias: Option<Vec<T>>,
    ) -> Result<Self> {
        if c_in == 0 || c_out == 0 {
            return Err(Error::InvalidArgument(
                "channel counts must be positive".into(),
            ));
        }
        let plan = Plan::new(&structure);
        let expected = plan.num_orbits() * c_in * c_out;
        if weights.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: weights.len(),
            });
        }
        if let Some(b) = &bias {
            if b.len() != c_out {
                return Err(Error::LengthMismatch {
                    expected: c_out,
                    got: b.len(),
                });
            }
        }
        Ok(Self {
            structure,
            c_in,
            c_out,
            weights,
            bias,
            plan,
        })
    }

    pub fn zeros(structure: StructureExpr, c_in: usize, c_out: usize) -> Result<Self> {
        let k = Plan::new(&structure).num_orbits();
        Self::new(
            structure,
            c_in,
            c_out,
            vec![T::zero(); k * c_in * c_out],
            None,
        )
    }

    /// Uniform init in `[-s, s]`, `s = 1/√c_in`: each orbit's mixing matrix sees
    /// `c_in` inputs.
    pub fn random(
        structure: StructureExpr,
        c_in: usize,
        c_out: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let k = Plan::new(&structure).num_orbits();
        let s = 1.0 / (c_in as f64).sqrt();
        let weights = (0..k * c_in * c_out)
            .map(|_| T::from_f64_lossy(rng.random_range(-s..=s)))
            .collect();
        Self::new(structure, c_in, c_out, weights, None)
    }

    pub fn structure(&self) -> &StructureExpr {
        &self.structure
    }

    pub fn degree(&self) -> usize {
        self.plan.degree()
    }

    pub fn num_orbits(&self) -> usize {
        self.plan.num_orbits()
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.bias.as_deref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut [T]> {
        self.bias.as_deref_mut()
    }

    pub fn set_bias(&mut self, bias: Option<Vec<T>>) -> Result<()> {
        if let Some(b) = &bias {
            if b.len() != self.c_out {
                return Err(Error::LengthMismatch {
                    expected: self.c_out,
                    got: b.len(),
                });
            }
        }
        self.bias = bias;
        Ok(())
    }

    #[inline]
    fn weight(&self, orbit: usize, i: usize, o: usize) -> T {
        self.weights[(orbit * self.c_in + i) * self.c_out + o]
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<()> {
        if x.shape() != (self.degree(), self.c_in) {
            return Err(Error::ShapeMismatch(format!(
                "input is {:?}, layer expects {}x{}",
                x.shape(),
                self.degree(),
                self.c_in
            )));
        }
        Ok(())
    }

    /// Raw-ordered weights of channel pair `(i, o)`, optionally transposed.
    fn raw_weights(&self, i: usize, o: usize, transposed: bool) -> Vec<T> {
        let k = self.num_orbits();
        let mut raw = vec![T::zero(); k];
        for c in 0..k {
            let src = if transposed {
                self.plan.transpose_orbit(c)
            } else {
                c
            };
            raw[self.plan.raw_index(c)] = self.weight(src, i, o);
        }
        raw
    }

    /// Matrix-free forward pass: pooling and broadcasting over the structure tree.
    pub fn apply(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let n = self.degree();
        let cols: Vec<Vec<T>> = (0..self.c_in).map(|i| x.column(i)).collect();
        let mut out = Matrix::zeros(n, self.c_out);
        let mut acc = vec![T::zero(); n];
        for o in 0..self.c_out {
            acc.iter_mut().for_each(|v| *v = T::zero());
            for (i, col) in cols.iter().enumerate() {
                let w = self.raw_weights(i, o, false);
                if w.iter().all(|v| v.is_zero()) {
                    continue;
                }
                self.plan.apply_raw_into(col, &w, &mut acc);
            }
            let b = self.bias.as_ref().map_or(T::zero(), |b| b[o]);
            for (r, v) in acc.iter().enumerate() {
                out[(r, o)] = *v + b;
            }
        }
        Ok(out)
    }

    /// Reference forward pass: materializes every channel pair's `N × N` matrix.
    pub fn apply_dense(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let pattern = pattern_of_structure(&self.structure)?;
        self.apply_dense_with(&pattern, x)
    }

    pub fn apply_dense_with(&self, pattern: &SharingPattern, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let n = self.degree();
        let k = pattern.num_orbits();
        let mut out = Matrix::zeros(n, self.c_out);
        for i in 0..self.c_in {
            let xi = Matrix::from_vec(n, 1, x.column(i))?;
            for o in 0..self.c_out {
                let w: Vec<T> = (0..k).map(|c| self.weight(c, i, o)).collect();
                let y = pattern.materialize(&w)?.matmul(&xi)?;
                for r in 0..n {
                    out[(r, o)] = out[(r, o)] + y[(r, 0)];
                }
            }
        }
        if let Some(b) = &self.bias {
            for r in 0..n {
                for o in 0..self.c_out {
                    out[(r, o)] = out[(r, o)] + b[o];
                }
            }
        }
        Ok(out)
    }

    /// Reverse-mode gradients given `grad_out = ∂L/∂apply(x)`.
    pub fn backward(&self, x: &Matrix<T>, grad_out: &Matrix<T>) -> Result<LayerGrads<T>> {
        self.check_input(x)?;
        let n = self.degree();
        if grad_out.shape() != (n, self.c_out) {
            return Err(Error::ShapeMismatch(format!(
                "gradient is {:?}, expected {}x{}",
                grad_out.shape(),
                n,
                self.c_out
            )));
        }
        let k = self.num_orbits();
        let gcols: Vec<Vec<T>> = (0..self.c_out).map(|o| grad_out.column(o)).collect();
        let mut gw = vec![T::zero(); self.weights.len()];
        let mut unit = vec![T::zero(); k];
        let mut basis_x = vec![T::zero(); n];
        for i in 0..self.c_in {
            let xi = x.column(i);
            for c in 0..k {
                let r = self.plan.raw_index(c);
                unit[r] = T::one();
                basis_x.iter_mut().for_each(|v| *v = T::zero());
                self.plan.apply_raw_into(&xi, &unit, &mut basis_x);
                unit[r] = T::zero();
                for (o, g) in gcols.iter().enumerate() {
                    let dot = g
                        .iter()
                        .zip(&basis_x)
                        .fold(T::zero(), |acc, (a, b)| acc + *a * *b);
                    gw[(c * self.c_in + i) * self.c_out + o] = dot;
                }
            }
        }
        let gb = self.bias.as_ref().map(|_| {
            gcols
                .iter()
                .map(|g| g.iter().fold(T::zero(), |a, b| a + *b))
                .collect()
        });
        let mut gx = Matrix::zeros(n, self.c_in);
        let mut acc = vec![T::zero(); n];
        for i in 0..self.c_in {
            acc.iter_mut().for_each(|v| *v = T::zero());
            for (o, g) in gcols.iter().enumerate() {
                let wt = self.raw_weights(i, o, true);
                self.plan.apply_raw_into(g, &wt, &mut acc);
            }
            for (r, v) in acc.iter().enumerate() {
                gx[(r, i)] = *v;
            }
        }
        Ok(LayerGrads {
            weights: gw,
            bias: gb,
            input: gx,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
struct LayerFile<T> {
    structure: String,
    c_in: usize,
    c_out: usize,
    weights: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<T>>,
}

impl<T: Real + Serialize + for<'de> Deserialize<'de>> EquivariantLayer<T> {
    /// JSON container with the structure string, channel counts, orbit-major weights
    /// and optional bias. Floats are written as shortest round-trip decimals, so
    /// [`EquivariantLayer::from_json`] reloads them bit for bit.
    pub fn to_json(&self) -> String {
        let file = LayerFile {
            structure: self.structure.to_string(),
            c_in: self.c_in,
            c_out: self.c_out,
            weights: self.weights.clone(),
            bias: self.bias.clone(),
        };
        serde_json::to_string_pretty(&file).expect("layer serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LayerFile<T> =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let structure = StructureExpr::parse(&file.structure)?;
        Self::new(structure, file.c_in, file.c_out, file.weights, file.bias)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_x(n: usize, c: usize, rng: &mut impl Rng) -> Matrix<f64> {
        Matrix::from_fn(n, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_weights_on_set() {
        let l = EquivariantLayer::new(StructureExpr::Set(3), 1, 1, vec![1.0, 0.0], None).unwrap();
        let x = Matrix::from_vec(3, 1, vec![0.5, -2.0, 7.0]).unwrap();
        assert_eq!(l.apply(&x).unwrap(), x);
        assert_eq!(l.apply_dense(&x).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_zero() {
        let e = StructureExpr::parse("wr(S(2),C(3))").unwrap();
        let l = EquivariantLayer::<f64>::zeros(e, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_x(6, 2, &mut rng);
        assert!(l.apply(&x).unwrap().is_zero());
    }

    #[test]
    fn fast_matches_dense_on_wreath() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = StructureExpr::parse("wr(S(2),C(3))").unwrap();
        let l = EquivariantLayer::<f64>::random(e, 2, 2, &mut rng).unwrap();
        let x = random_x(6, 2, &mut rng);
        let fast = l.apply(&x).unwrap();
        let dense = l.apply_dense(&x).unwrap();
        assert!(fast.rel_diff(&dense) <= 1e-10);
    }

    #[test]
    fn bias_broadcasts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut l = EquivariantLayer::<f64>::zeros(StructureExpr::Cycle(4), 1, 2).unwrap();
        l.set_bias(Some(vec![1.5, -0.5])).unwrap();
        let y = l.apply(&random_x(4, 1, &mut rng)).unwrap();
        for r in 0..4 {
            assert_eq!(y.row(r), &[1.5, -0.5]);
        }
        assert!(l.set_bias(Some(vec![1.0])).is_err());
    }

    #[test]
    fn shape_errors() {
        let l = EquivariantLayer::<f64>::zeros(StructureExpr::Set(3), 2, 1).unwrap();
        assert!(matches!(
            l.apply(&Matrix::zeros(4, 2)),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(
            EquivariantLayer::<f64>::new(StructureExpr::Set(3), 1, 1, vec![1.0], None).is_err()
        );
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = StructureExpr::parse("prod(C(3),wr(S(2),S(2)))").unwrap();
        let mut l = EquivariantLayer::<f64>::random(e, 2, 3, &mut rng).unwrap();
        l.set_bias(Some(vec![0.1, 1.0 / 3.0, -2e-300])).unwrap();
        let back = EquivariantLayer::<f64>::from_json(&l.to_json()).unwrap();
        assert_eq!(back.structure(), l.structure());
        for (a, b) in l.weights().iter().zip(back.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in l.bias().unwrap().iter().zip(back.bias().unwrap()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn json_rejects_wrong_weight_count() {
        let text = r#"{"structure":"S(3)","c_in":1,"c_out":1,"weights":[1.0]}"#;
        assert!(EquivariantLayer::<f64>::from_json(text).is_err());
        assert!(EquivariantLayer::<f64>::from_json("not json").is_err());
    }

    #[test]
    fn f32_layer_runs() {
        let l = EquivariantLayer::<f32>::new(StructureExpr::Set(2), 1, 1, vec![2.0, 1.0], None)
            .unwrap();
        let x = Matrix::from_vec(2, 1, vec![1.0f32, 3.0]).unwrap();
        // W = [[2,1],[1,2]]
        assert_eq!(l.apply(&x).unwrap().into_vec(), vec![5.0, 7.0]);
    }
}
