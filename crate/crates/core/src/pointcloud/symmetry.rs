use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::layer::{EquivarianceReport, GeneratorResidual, EQUIVARIANCE_TOLERANCE};
use crate::matrix::Matrix;
use crate::perm::Permutation;
use crate::scalar::Real;

use super::voxel::{check_perm, VoxelizedCloud};

/// Moves row `i` of `x` to row `sigma[i]`.
pub fn move_rows<T: Clone>(x: &Matrix<T>, sigma: &[usize]) -> Result<Matrix<T>> {
    check_perm(sigma, x.rows())?;
    let mut src = vec![0; sigma.len()];
    for (i, &j) in sigma.iter().enumerate() {
        src[j] = i;
    }
    Ok(x.gather_rows(&src))
}

/// A random permutation that only exchanges points sharing a voxel.
pub fn within_voxel_permutation(vox: &VoxelizedCloud, rng: &mut impl Rng) -> Vec<usize> {
    let mut members = vec![Vec::new(); vox.num_voxels()];
    for (i, &v) in vox.assignment().iter().enumerate() {
        members[v].push(i);
    }
    let mut sigma = vec![0; vox.num_points()];
    for m in members {
        let mut t = m.clone();
        t.shuffle(rng);
        for (a, b) in m.into_iter().zip(t) {
            sigma[a] = b;
        }
    }
    sigma
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

/// Checks `f(τσ · input) = τσ · f(input)` for random within-voxel permutations `σ`
/// and random cyclic grid shifts `τ`.
pub fn hierarchy_check<T: Real>(
    f: impl Fn(&VoxelizedCloud, &Matrix<T>) -> Result<Matrix<T>>,
    vox: &VoxelizedCloud,
    x: &Matrix<T>,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<EquivarianceReport> {
    let d = vox.resolution() as i64;
    let y = f(vox, x)?;
    let mut generators = Vec::with_capacity(trials);
    for _ in 0..trials {
        let sigma = within_voxel_permutation(vox, rng);
        let shift = [
            rng.random_range(0..d),
            rng.random_range(0..d),
            rng.random_range(0..d),
        ];
        let moved = vox.permuted(&sigma)?.shifted(shift);
        let lhs = f(&moved, &move_rows(x, &sigma)?)?;
        let rhs = move_rows(&y, &sigma)?;
        generators.push(GeneratorResidual {
            generator: format!("shift({},{},{})+within-voxel", shift[0], shift[1], shift[2]),
            max_residual: rel_residual(&lhs, &rhs),
        });
    }
    Ok(EquivarianceReport {
        trials,
        tolerance: EQUIVARIANCE_TOLERANCE,
        generators,
    })
}

/// Checks `f(σ · x) = σ · f(x)` for uniformly random point permutations.
pub fn point_permutation_check<T: Real>(
    f: impl Fn(&Matrix<T>) -> Result<Matrix<T>>,
    x: &Matrix<T>,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<EquivarianceReport> {
    let y = f(x)?;
    let mut generators = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut sigma: Vec<usize> = (0..x.rows()).collect();
        sigma.shuffle(rng);
        let lhs = f(&move_rows(x, &sigma)?)?;
        let rhs = move_rows(&y, &sigma)?;
        generators.push(GeneratorResidual {
            generator: Permutation::new(sigma)?.to_string(),
            max_residual: rel_residual(&lhs, &rhs),
        });
    }
    Ok(EquivarianceReport {
        trials,
        tolerance: EQUIVARIANCE_TOLERANCE,
        generators,
    })
}
