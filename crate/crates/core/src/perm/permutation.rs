use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// A bijection on `0..n`, stored as the image of every point: `images[i]` is where
/// `i` is sent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::InvalidDegree(0));
        }
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || seen[i] {
                return Err(Error::NotAPermutation(format!("{images:?}")));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDegree(0));
        }
        Ok(Self {
            images: (0..n).collect(),
        })
    }

    /// Builds a permutation from a point map without validating bijectivity.
    /// Callers construct `f` from group actions, which are bijective by construction.
    pub(crate) fn from_fn(n: usize, f: impl Fn(usize) -> usize) -> Self {
        let p = Self {
            images: (0..n).map(f).collect(),
        };
        debug_assert!(Self::new(p.images.clone()).is_ok());
        p
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.images.len()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `p ∘ q`: apply `q` first, then `self`.
    pub fn compose(&self, q: &Permutation) -> Result<Permutation> {
        if self.degree() != q.degree() {
            return Err(Error::DegreeMismatch {
                left: self.degree(),
                right: q.degree(),
            });
        }
        Ok(Self {
            images: q.images.iter().map(|&j| self.images[j]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.degree()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j] = i;
        }
        Self { images: inv }
    }

    pub fn fixed_points(&self) -> usize {
        self.images
            .iter()
            .enumerate()
            .filter(|(i, j)| i == *j)
            .count()
    }

    /// Permutation matrix with `M[i][j] = 1` iff `self` sends basis vector `j` to `i`.
    ///
    /// With this orientation `M(p) M(q) = M(p ∘ q)`, and `(M x)[p(j)] = x[j]`.
    pub fn to_matrix<T: Scalar>(&self) -> Matrix<T> {
        let n = self.degree();
        Matrix::from_fn(n, n, |i, j| {
            if self.images[j] == i {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// Applies the permutation to the rows of `x` without building the matrix:
    /// row `j` of the input lands on row `self(j)`.
    pub fn permute_rows<T: Clone>(&self, x: &Matrix<T>) -> Matrix<T> {
        x.gather_rows(self.inverse().images())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.images)
    }
}
