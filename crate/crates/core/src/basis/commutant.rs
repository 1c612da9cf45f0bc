//! Exact commutant of a permutation group: the nullspace of the stacked linear system
//! `Π(g) W − W Π(g) = 0` over all generators, solved by Gaussian elimination over a
//! field. This is the independent oracle for the orbit patterns.

use std::collections::BTreeMap;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::perm::PermGroup;
use crate::scalar::Field;

use super::SharingPattern;

/// Largest degree accepted by [`commutant_basis`] by default (`N²` unknowns).
pub const DEFAULT_COMMUTANT_MAX_DEGREE: usize = 64;

pub type SparseRow<F> = Vec<(usize, F)>;

/// Basis of all matrices commuting with every generator.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutantBasis<F> {
    n: usize,
    bases: Vec<Matrix<F>>,
}

impl<F: Field> CommutantBasis<F> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.bases.len()
    }

    pub fn bases(&self) -> &[Matrix<F>] {
        &self.bases
    }

    /// Exact check that every basis matrix commutes with every generator.
    pub fn commutes_with(&self, group: &PermGroup) -> bool {
        group.generators().iter().all(|g| {
            let pm: Matrix<F> = g.to_matrix();
            self.bases
                .iter()
                .all(|b| pm.matmul(b).expect("square") == b.matmul(&pm).expect("square"))
        })
    }

    /// Rank of the bases stacked as vectors; equals `size()` when independent.
    pub fn rank(&self) -> usize {
        let rows: Vec<SparseRow<F>> = self
            .bases
            .iter()
            .map(|b| {
                b.as_slice()
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(k, v)| (k, v.clone()))
                    .collect()
            })
            .collect();
        Echelon::from_rows(rows).rank()
    }
}

/// Exact rational commutant basis, guarded by [`DEFAULT_COMMUTANT_MAX_DEGREE`].
pub fn commutant_basis(group: &PermGroup) -> Result<CommutantBasis<BigRational>> {
    commutant_basis_with_limit(group, DEFAULT_COMMUTANT_MAX_DEGREE)
}

pub fn commutant_basis_with_limit<F: Field>(
    group: &PermGroup,
    max_degree: usize,
) -> Result<CommutantBasis<F>> {
    let n = group.degree();
    if n > max_degree {
        return Err(Error::DegreeTooLarge {
            degree: n,
            limit: max_degree,
        });
    }
    let mut equations = Vec::new();
    for g in group.generators() {
        let pm: Matrix<F> = g.to_matrix();
        // (ΠW − WΠ)[i][j] = Σ_k Π[i][k] W[k][j] − Σ_k W[i][k] Π[k][j]
        for i in 0..n {
            for j in 0..n {
                let mut row: BTreeMap<usize, F> = BTreeMap::new();
                for k in 0..n {
                    let a = &pm[(i, k)];
                    if !a.is_zero() {
                        accumulate(&mut row, k * n + j, a.clone());
                    }
                    let b = &pm[(k, j)];
                    if !b.is_zero() {
                        accumulate(&mut row, i * n + k, -b.clone());
                    }
                }
                let row: SparseRow<F> = row.into_iter().filter(|(_, v)| !v.is_zero()).collect();
                if !row.is_empty() {
                    equations.push(row);
                }
            }
        }
    }
    let bases = nullspace(equations, n * n)
        .into_iter()
        .map(|v| Matrix::from_vec(n, n, v).expect("n² entries"))
        .collect();
    Ok(CommutantBasis { n, bases })
}

fn accumulate<F: Field>(row: &mut BTreeMap<usize, F>, col: usize, v: F) {
    match row.remove(&col) {
        Some(old) => {
            row.insert(col, old + v);
        }
        None => {
            row.insert(col, v);
        }
    }
}

/// `matrix − Σ_o mean_o · 1_o`: what is left after projecting onto the span of the
/// orbit indicators. Zero iff `matrix` is constant on every orbit.
pub fn projection_residual<F: Field>(pattern: &SharingPattern, matrix: &Matrix<F>) -> Matrix<F> {
    let k = pattern.num_orbits();
    let mut sums = vec![F::zero(); k];
    let mut counts = vec![F::zero(); k];
    let n = pattern.n();
    for i in 0..n {
        for j in 0..n {
            let o = pattern.get(i, j);
            sums[o] = sums[o].clone() + matrix[(i, j)].clone();
            counts[o] = counts[o].clone() + F::one();
        }
    }
    let means: Vec<F> = sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| if c.is_zero() { F::zero() } else { s / c })
        .collect();
    Matrix::from_fn(n, n, |i, j| {
        matrix[(i, j)].clone() - means[pattern.get(i, j)].clone()
    })
}

/// Nullspace of a sparse system by incremental row echelon form followed by full
/// back-substitution. One basis vector per free column.
pub fn nullspace<F: Field>(rows: Vec<SparseRow<F>>, ncols: usize) -> Vec<Vec<F>> {
    let mut ech = Echelon::from_rows(rows);
    ech.reduce_fully();
    let pivots = &ech.pivots;
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains_key(c)) {
        let mut v = vec![F::zero(); ncols];
        v[free] = F::one();
        for (&pc, row) in pivots {
            if let Some((_, val)) = row.iter().find(|(c, _)| *c == free) {
                v[pc] = -val.clone();
            }
        }
        basis.push(v);
    }
    basis
}

struct Echelon<F> {
    /// pivot column -> row whose leading entry is 1 at that column
    pivots: BTreeMap<usize, SparseRow<F>>,
}

impl<F: Field> Echelon<F> {
    fn from_rows(rows: Vec<SparseRow<F>>) -> Self {
        let mut ech = Self {
            pivots: BTreeMap::new(),
        };
        for r in rows {
            ech.insert(r);
        }
        ech
    }

    fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn insert(&mut self, mut row: SparseRow<F>) {
        row.sort_by_key(|(c, _)| *c);
        loop {
            let Some((lead, v)) = row.first().cloned() else {
                return;
            };
            match self.pivots.get(&lead) {
                Some(p) => row = axpy(&row, &v, p),
                None => {
                    let row = row.into_iter().map(|(c, x)| (c, x / v.clone())).collect();
                    self.pivots.insert(lead, row);
                    return;
                }
            }
        }
    }

    /// Clears every pivot column from every other pivot row.
    fn reduce_fully(&mut self) {
        let cols: Vec<usize> = self.pivots.keys().rev().copied().collect();
        for c in cols {
            let mut row = self.pivots.remove(&c).expect("pivot present");
            loop {
                let hit = row
                    .iter()
                    .skip(1)
                    .find(|(col, _)| self.pivots.contains_key(col))
                    .cloned();
                match hit {
                    Some((col, v)) => row = axpy(&row, &v, &self.pivots[&col]),
                    None => break,
                }
            }
            self.pivots.insert(c, row);
        }
    }
}

/// `row − scale · pivot`, both sorted by column; exact zeros are dropped.
fn axpy<F: Field>(row: &SparseRow<F>, scale: &F, pivot: &SparseRow<F>) -> SparseRow<F> {
    let mut out = Vec::with_capacity(row.len() + pivot.len());
    let (mut a, mut b) = (0, 0);
    while a < row.len() || b < pivot.len() {
        let next = match (row.get(a), pivot.get(b)) {
            (Some((ca, va)), Some((cb, vb))) if ca == cb => {
                a += 1;
                b += 1;
                (*ca, va.clone() - scale.clone() * vb.clone())
            }
            (Some((ca, va)), Some((cb, _))) if ca < cb => {
                a += 1;
                (*ca, va.clone())
            }
            (Some((ca, va)), None) => {
                a += 1;
                (*ca, va.clone())
            }
            (_, Some((cb, vb))) => {
                b += 1;
                (*cb, -(scale.clone() * vb.clone()))
            }
            (None, None) => unreachable!(),
        };
        if !next.1.is_zero() {
            out.push(next);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use num_traits::Zero;

    fn r(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    #[test]
    fn nullspace_of_small_dense_system() {
        // x + y + z = 0, x - y = 0  →  one direction (1, 1, -2)
        let rows = vec![
            vec![(0, r(1)), (1, r(1)), (2, r(1))],
            vec![(0, r(1)), (1, r(-1))],
        ];
        let ns = nullspace(rows, 3);
        assert_eq!(ns.len(), 1);
        let v = &ns[0];
        assert!((v[0].clone() + v[1].clone() + v[2].clone()).is_zero());
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn nullspace_of_empty_system_is_standard_basis() {
        let ns = nullspace::<BigRational>(vec![], 3);
        assert_eq!(ns.len(), 3);
    }

    #[test]
    fn commutant_sizes() {
        assert_eq!(
            commutant_basis(&PermGroup::symmetric(4).unwrap())
                .unwrap()
                .size(),
            2
        );
        assert_eq!(
            commutant_basis(&PermGroup::trivial(2).unwrap())
                .unwrap()
                .size(),
            4
        );
        let s2 = PermGroup::symmetric(2).unwrap();
        let s3 = PermGroup::symmetric(3).unwrap();
        let w = PermGroup::wreath_product(&s2, &s3).unwrap();
        assert_eq!(commutant_basis(&w).unwrap().size(), 3);
    }

    #[test]
    fn commutant_over_rational64() {
        let c4 = PermGroup::cyclic(4).unwrap();
        let b = commutant_basis_with_limit::<Rational64>(&c4, 8).unwrap();
        assert_eq!(b.size(), 4);
        assert!(b.commutes_with(&c4));
        assert_eq!(b.rank(), 4);
    }

    #[test]
    fn degree_guard() {
        let big = PermGroup::symmetric(65).unwrap();
        assert_eq!(
            commutant_basis(&big).unwrap_err(),
            Error::DegreeTooLarge {
                degree: 65,
                limit: 64
            }
        );
    }

    #[test]
    fn residual_zero_on_orbit_constant_matrix() {
        let s3 = PermGroup::symmetric(3).unwrap();
        let pat = super::super::orbit_pattern(&s3);
        let m = pat.materialize(&[r(5), r(-2)]).unwrap();
        assert!(projection_residual(&pat, &m).is_zero());
        let mut broken = m.clone();
        broken[(0, 1)] = r(9);
        assert!(!projection_residual(&pat, &broken).is_zero());
    }
}
