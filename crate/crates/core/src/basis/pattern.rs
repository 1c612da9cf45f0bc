use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Partition of the entries of an `n × n` matrix into orbits of tied weights.
///
/// Orbit ids are canonical: scanning row-major, ids first appear in increasing order.
/// Two patterns describing the same partition are therefore equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharingPattern {
    n: usize,
    orbit_id: Vec<u32>,
    num_orbits: usize,
}

impl SharingPattern {
    /// Canonicalizes arbitrary labels. `raw` is row-major of length `n²`.
    pub fn from_labels(n: usize, raw: &[usize]) -> Result<Self> {
        if raw.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                got: raw.len(),
            });
        }
        let range = raw.iter().copied().max().map_or(0, |m| m + 1);
        Ok(Self::from_key_fn(n, range, |i, j| raw[i * n + j]))
    }

    /// Builds a canonical pattern from a key function whose values lie in `0..range`.
    pub(crate) fn from_key_fn(n: usize, range: usize, key: impl Fn(usize, usize) -> usize) -> Self {
        let mut remap = vec![u32::MAX; range];
        let mut next = 0u32;
        let mut orbit_id = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let k = key(i, j);
                if remap[k] == u32::MAX {
                    remap[k] = next;
                    next += 1;
                }
                orbit_id.push(remap[k]);
            }
        }
        Self {
            n,
            orbit_id,
            num_orbits: next as usize,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn num_orbits(&self) -> usize {
        self.num_orbits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.orbit_id[i * self.n + j] as usize
    }

    pub fn ids(&self) -> &[u32] {
        &self.orbit_id
    }

    /// Orbit label of every point, taken from the diagonal and renumbered from 0.
    /// Two points share a label iff the group maps one to the other.
    pub fn point_orbits(&self) -> (Vec<usize>, usize) {
        let mut remap = vec![usize::MAX; self.num_orbits];
        let mut next = 0;
        let labels = (0..self.n)
            .map(|i| {
                let d = self.get(i, i);
                if remap[d] == usize::MAX {
                    remap[d] = next;
                    next += 1;
                }
                remap[d]
            })
            .collect();
        (labels, next)
    }

    /// Number of entries in each orbit.
    pub fn orbit_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_orbits];
        for &id in &self.orbit_id {
            sizes[id as usize] += 1;
        }
        sizes
    }

    /// The pattern with orbit `target` split in two: its first entry in row-major
    /// order keeps the old id, every other entry gets a fresh one.
    pub fn split_orbit(&self, target: usize) -> Result<Self> {
        if target >= self.num_orbits {
            return Err(Error::InvalidArgument(format!("no orbit {target}")));
        }
        let mut first = true;
        let fresh = self.num_orbits;
        let raw: Vec<usize> = self
            .orbit_id
            .iter()
            .map(|&id| {
                let id = id as usize;
                if id == target {
                    if first {
                        first = false;
                        id
                    } else {
                        fresh
                    }
                } else {
                    id
                }
            })
            .collect();
        Self::from_labels(self.n, &raw)
    }

    /// `W[i][j] = weights[orbit_id[i][j]]`.
    pub fn materialize<T: Scalar>(&self, weights: &[T]) -> Result<Matrix<T>> {
        if weights.len() != self.num_orbits {
            return Err(Error::LengthMismatch {
                expected: self.num_orbits,
                got: weights.len(),
            });
        }
        Ok(Matrix::from_fn(self.n, self.n, |i, j| {
            weights[self.get(i, j)].clone()
        }))
    }

    /// 0/1 indicator matrix of one orbit.
    pub fn indicator<T: Scalar>(&self, orbit: usize) -> Matrix<T> {
        Matrix::from_fn(self.n, self.n, |i, j| {
            if self.get(i, j) == orbit {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n * self.n * 3);
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{}", self.get(i, j)).expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    /// Plain (P2) graymap with one pixel per matrix entry and gray level = orbit id.
    pub fn to_pgm(&self) -> String {
        let maxval = self.num_orbits.saturating_sub(1).max(1);
        let mut out = format!("P2\n{} {}\n{}\n", self.n, self.n, maxval);
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    out.push(' ');
                }
                write!(out, "{}", self.get(i, j)).expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    pub fn summary(&self, structure: &str) -> String {
        format!(
            "structure={structure} N={} orbits={}",
            self.n, self.num_orbits
        )
    }

    /// Parses the CSV export back.
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows: Vec<Vec<usize>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<usize>()
                            .map_err(|e| Error::Format(format!("bad orbit id {v:?}: {e}")))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Format("pattern CSV is not square".into()));
        }
        let flat: Vec<usize> = rows.into_iter().flatten().collect();
        Self::from_labels(n, &flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_relabel() {
        let p = SharingPattern::from_labels(2, &[7, 3, 3, 7]).unwrap();
        assert_eq!(p.ids(), &[0, 1, 1, 0]);
        assert_eq!(p.num_orbits(), 2);
    }

    #[test]
    fn materialize_basics() {
        let p = SharingPattern::from_labels(2, &[0, 1, 1, 0]).unwrap();
        let w = p.materialize(&[1i64, 0]).unwrap();
        assert_eq!(w, Matrix::identity(2));
        assert!(p.materialize(&[0.0f64, 0.0]).unwrap().is_zero());
        assert_eq!(
            p.materialize(&[1i64]),
            Err(Error::LengthMismatch {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn exports() {
        let p = SharingPattern::from_labels(2, &[0, 1, 1, 0]).unwrap();
        assert_eq!(p.to_csv(), "0,1\n1,0\n");
        assert_eq!(p.to_pgm(), "P2\n2 2\n1\n0 1\n1 0\n");
        assert_eq!(p.summary("S(2)"), "structure=S(2) N=2 orbits=2");
        assert_eq!(SharingPattern::from_csv(&p.to_csv()).unwrap(), p);
    }

    #[test]
    fn split_adds_one_orbit() {
        let p = SharingPattern::from_labels(3, &[0, 1, 1, 1, 0, 1, 1, 1, 0]).unwrap();
        let s = p.split_orbit(0).unwrap();
        assert_eq!(s.num_orbits(), 3);
        assert_eq!(s.get(0, 0), 0);
        assert_ne!(s.get(1, 1), s.get(0, 0));
    }

    #[test]
    fn point_orbits_from_diagonal() {
        let p = SharingPattern::from_labels(3, &[0, 1, 2, 3, 4, 5, 6, 7, 4]).unwrap();
        assert_eq!(p.point_orbits(), (vec![0, 1, 1], 2));
    }
}
