use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::SharingPattern;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::perm::PermGroup;
use crate::scalar::Real;

use super::equivariant::EquivariantLayer;

/// Anything that maps `N × c_in` signals to `N × c_out` signals.
pub trait ChannelMap<T> {
    fn degree(&self) -> usize;
    fn c_in(&self) -> usize;
    fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>>;
}

impl<T: Real> ChannelMap<T> for EquivariantLayer<T> {
    fn degree(&self) -> usize {
        EquivariantLayer::degree(self)
    }

    fn c_in(&self) -> usize {
        EquivariantLayer::c_in(self)
    }

    fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.apply(x)
    }
}

/// A dense multi-channel layer tied by an arbitrary sharing pattern.
///
/// With a pattern whose orbits are all singletons this is an unconstrained linear map.
/// With a mutated pattern (see [`SharingPattern::split_orbit`]) it is the usual
/// negative control for equivariance checks.
#[derive(Debug, Clone)]
pub struct PatternLayer<T> {
    pattern: SharingPattern,
    c_in: usize,
    c_out: usize,
    weights: Vec<T>,
}

impl<T: Real> PatternLayer<T> {
    pub fn new(
        pattern: SharingPattern,
        c_in: usize,
        c_out: usize,
        weights: Vec<T>,
    ) -> Result<Self> {
        let expected = pattern.num_orbits() * c_in * c_out;
        if weights.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: weights.len(),
            });
        }
        Ok(Self {
            pattern,
            c_in,
            c_out,
            weights,
        })
    }

    pub fn random(pattern: SharingPattern, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        let weights = (0..pattern.num_orbits() * c_in * c_out)
            .map(|_| T::from_f64_lossy(rng.random_range(-1.0..1.0)))
            .collect();
        Self {
            pattern,
            c_in,
            c_out,
            weights,
        }
    }

    /// An unconstrained `N × N` map per channel pair.
    pub fn dense_random(n: usize, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Result<Self> {
        let labels: Vec<usize> = (0..n * n).collect();
        Ok(Self::random(
            SharingPattern::from_labels(n, &labels)?,
            c_in,
            c_out,
            rng,
        ))
    }

    pub fn pattern(&self) -> &SharingPattern {
        &self.pattern
    }
}

impl<T: Real> ChannelMap<T> for PatternLayer<T> {
    fn degree(&self) -> usize {
        self.pattern.n()
    }

    fn c_in(&self) -> usize {
        self.c_in
    }

    fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.pattern.n();
        if x.shape() != (n, self.c_in) {
            return Err(Error::ShapeMismatch(format!(
                "input is {:?}, layer expects {}x{}",
                x.shape(),
                n,
                self.c_in
            )));
        }
        let mut out = Matrix::zeros(n, self.c_out);
        for r in 0..n {
            for c in 0..n {
                let orbit = self.pattern.get(r, c);
                let xr = x.row(c);
                for (i, xv) in xr.iter().enumerate() {
                    let base = (orbit * self.c_in + i) * self.c_out;
                    for o in 0..self.c_out {
                        out[(r, o)] = out[(r, o)] + self.weights[base + o] * *xv;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Maps applied in sequence with a rectifier between consecutive stages.
pub struct Stack<'a, T> {
    stages: Vec<&'a dyn ChannelMap<T>>,
}

impl<'a, T: Real> Stack<'a, T> {
    pub fn new(stages: Vec<&'a dyn ChannelMap<T>>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidArgument("empty stack".into()));
        }
        let n = stages[0].degree();
        if stages.iter().any(|s| s.degree() != n) {
            return Err(Error::InvalidArgument("stages disagree on degree".into()));
        }
        Ok(Self { stages })
    }
}

impl<T: Real> ChannelMap<T> for Stack<'_, T> {
    fn degree(&self) -> usize {
        self.stages[0].degree()
    }

    fn c_in(&self) -> usize {
        self.stages[0].c_in()
    }

    fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut h = self.stages[0].forward(x)?;
        for s in &self.stages[1..] {
            h = s.forward(&h.map(|v| v.max(T::zero())))?;
        }
        Ok(h)
    }
}

pub const EQUIVARIANCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorResidual {
    pub generator: String,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceReport {
    pub trials: usize,
    pub tolerance: f64,
    pub generators: Vec<GeneratorResidual>,
}

impl EquivarianceReport {
    pub fn max_residual(&self) -> f64 {
        self.generators
            .iter()
            .fold(0.0, |m, g| m.max(g.max_residual))
    }

    /// Vacuously true when the group has no non-identity generator.
    pub fn passed(&self) -> bool {
        self.generators
            .iter()
            .all(|g| g.max_residual <= self.tolerance)
    }

    pub fn failing(&self) -> impl Iterator<Item = &GeneratorResidual> {
        self.generators
            .iter()
            .filter(|g| g.max_residual > self.tolerance)
    }
}

impl std::fmt::Display for EquivarianceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "equivariance trials={} tol={:e} max_residual={:e} {}",
            self.trials,
            self.tolerance,
            self.max_residual(),
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        for g in &self.generators {
            writeln!(f, "  {} residual={:e}", g.generator, g.max_residual)?;
        }
        Ok(())
    }
}

fn rel_residual<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> f64 {
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        let (x, y) = (
            x.to_f64().unwrap_or(f64::NAN),
            y.to_f64().unwrap_or(f64::NAN),
        );
        diff = diff.max((x - y).abs());
        scale = scale.max(y.abs());
    }
    if diff.is_nan() {
        return f64::INFINITY;
    }
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Compares `f(g·x)` with `g·f(x)` for every generator `g` over `trials` random inputs.
pub fn check_equivariance<T: Real>(
    map: &dyn ChannelMap<T>,
    group: &PermGroup,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<EquivarianceReport> {
    if group.degree() != map.degree() {
        return Err(Error::DegreeMismatch {
            left: group.degree(),
            right: map.degree(),
        });
    }
    let (n, c) = (map.degree(), map.c_in());
    let gens: Vec<_> = group
        .generators()
        .iter()
        .filter(|g| !g.is_identity())
        .collect();
    let mut worst = vec![0.0f64; gens.len()];
    for _ in 0..trials {
        let x = Matrix::from_fn(n, c, |_, _| T::from_f64_lossy(rng.random_range(-1.0..1.0)));
        let fx = map.forward(&x)?;
        for (g, w) in gens.iter().zip(worst.iter_mut()) {
            let lhs = map.forward(&g.permute_rows(&x))?;
            let rhs = g.permute_rows(&fx);
            *w = w.max(rel_residual(&lhs, &rhs));
        }
    }
    Ok(EquivarianceReport {
        trials,
        tolerance: EQUIVARIANCE_TOLERANCE,
        generators: gens
            .iter()
            .zip(worst)
            .map(|(g, max_residual)| GeneratorResidual {
                generator: g.to_string(),
                max_residual,
            })
            .collect(),
    })
}

/// [`check_equivariance`] against the layer's own group, seeded for reproducibility.
pub fn equivariance_check<T: Real>(
    layer: &EquivariantLayer<T>,
    trials: usize,
    seed: u64,
) -> Result<EquivarianceReport> {
    let group = layer.structure().group()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    check_equivariance(layer, &group, trials, &mut rng)
}
