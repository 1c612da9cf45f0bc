use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

use super::cloud::PointCloud;

/// Points assigned to the cells of a periodic `D × D × D` grid.
///
/// Voxel `(x, y, z)` has linear index `(x·D + y)·D + z`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelizedCloud {
    resolution: usize,
    assignment: Vec<usize>,
    rel_coords: Vec<[f64; 3]>,
    occupancy: Vec<usize>,
}

impl VoxelizedCloud {
    /// Builds a grid from explicit voxel memberships; relative coordinates are zero.
    pub fn from_assignment(resolution: usize, assignment: Vec<usize>) -> Result<Self> {
        let rel = vec![[0.0; 3]; assignment.len()];
        Self::from_parts(resolution, assignment, rel)
    }

    fn from_parts(
        resolution: usize,
        assignment: Vec<usize>,
        rel_coords: Vec<[f64; 3]>,
    ) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidArgument(
                "resolution must be at least 1".into(),
            ));
        }
        let cells = resolution.pow(3);
        let mut occupancy = vec![0; cells];
        for &v in &assignment {
            if v >= cells {
                return Err(Error::InvalidArgument(format!(
                    "voxel {v} outside a grid of {cells} cells"
                )));
            }
            occupancy[v] += 1;
        }
        Ok(Self {
            resolution,
            assignment,
            rel_coords,
            occupancy,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn num_voxels(&self) -> usize {
        self.occupancy.len()
    }

    pub fn num_points(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn rel_coords(&self) -> &[[f64; 3]] {
        &self.rel_coords
    }

    pub fn occupancy(&self) -> &[usize] {
        &self.occupancy
    }

    pub fn voxel_index(&self, x: usize, y: usize, z: usize) -> usize {
        let d = self.resolution;
        (x * d + y) * d + z
    }

    pub fn voxel_coords(&self, v: usize) -> [usize; 3] {
        let d = self.resolution;
        [v / (d * d), (v / d) % d, v % d]
    }

    /// Relabels every voxel by a cyclic shift of the grid.
    pub fn shifted(&self, shift: [i64; 3]) -> Self {
        let d = self.resolution as i64;
        let map = |v: usize| {
            let c = self.voxel_coords(v);
            let s: Vec<usize> = (0..3)
                .map(|a| (c[a] as i64 + shift[a]).rem_euclid(d) as usize)
                .collect();
            self.voxel_index(s[0], s[1], s[2])
        };
        let assignment = self.assignment.iter().map(|&v| map(v)).collect();
        let mut occupancy = vec![0; self.occupancy.len()];
        for (v, &n) in self.occupancy.iter().enumerate() {
            occupancy[map(v)] = n;
        }
        Self {
            resolution: self.resolution,
            assignment,
            rel_coords: self.rel_coords.clone(),
            occupancy,
        }
    }

    /// Moves point `i` to position `sigma[i]`.
    pub fn permuted(&self, sigma: &[usize]) -> Result<Self> {
        let n = self.num_points();
        check_perm(sigma, n)?;
        let mut assignment = vec![0; n];
        let mut rel = vec![[0.0; 3]; n];
        for (i, &j) in sigma.iter().enumerate() {
            assignment[j] = self.assignment[i];
            rel[j] = self.rel_coords[i];
        }
        Ok(Self {
            resolution: self.resolution,
            assignment,
            rel_coords: rel,
            occupancy: self.occupancy.clone(),
        })
    }

    fn check_rows<T: Clone>(&self, x: &Matrix<T>, rows: usize, what: &str) -> Result<()> {
        if x.rows() != rows {
            return Err(Error::ShapeMismatch(format!(
                "{what} has {} rows, expected {rows}",
                x.rows()
            )));
        }
        Ok(())
    }

    /// Per-voxel mean of the point rows; empty voxels pool to zero.
    pub fn mean_pool<T: Real>(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_rows(x, self.num_points(), "point signal")?;
        let mut g = Matrix::zeros(self.num_voxels(), x.cols());
        for (i, &v) in self.assignment.iter().enumerate() {
            for (dst, src) in g.row_mut(v).iter_mut().zip(x.row(i)) {
                *dst = *dst + *src;
            }
        }
        for (v, &n) in self.occupancy.iter().enumerate() {
            if n > 1 {
                let inv = T::one() / T::from_f64_lossy(n as f64);
                g.row_mut(v).iter_mut().for_each(|e| *e = *e * inv);
            }
        }
        Ok(g)
    }

    /// Adjoint of [`Self::mean_pool`]: each point receives its voxel's gradient over the count.
    pub fn mean_pool_adjoint<T: Real>(&self, grid_grad: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_rows(grid_grad, self.num_voxels(), "grid gradient")?;
        let mut out = grid_grad.gather_rows(&self.assignment);
        for (i, &v) in self.assignment.iter().enumerate() {
            let n = self.occupancy[v];
            if n > 1 {
                let inv = T::one() / T::from_f64_lossy(n as f64);
                out.row_mut(i).iter_mut().for_each(|e| *e = *e * inv);
            }
        }
        Ok(out)
    }

    /// Copies each voxel's row to its points.
    pub fn broadcast<T: Real>(&self, grid: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_rows(grid, self.num_voxels(), "grid signal")?;
        Ok(grid.gather_rows(&self.assignment))
    }

    /// Adjoint of [`Self::broadcast`]: per-voxel sum.
    pub fn broadcast_adjoint<T: Real>(&self, point_grad: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_rows(point_grad, self.num_points(), "point gradient")?;
        let mut g = Matrix::zeros(self.num_voxels(), point_grad.cols());
        for (i, &v) in self.assignment.iter().enumerate() {
            for (dst, src) in g.row_mut(v).iter_mut().zip(point_grad.row(i)) {
                *dst = *dst + *src;
            }
        }
        Ok(g)
    }
}

pub(crate) fn check_perm(sigma: &[usize], n: usize) -> Result<()> {
    if sigma.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: sigma.len(),
        });
    }
    let mut seen = vec![false; n];
    for &j in sigma {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::NotAPermutation(format!("{sigma:?}")));
        }
    }
    Ok(())
}

/// Scales the bounding box onto `[0, D)³` and assigns each point to its cell.
///
/// Points on the upper face land in the last cell. An axis on which all points agree
/// gets a one-unit extent starting half a cell below them, so those points sit at the
/// center of cell 0 with relative coordinate 0.
pub fn voxelize(cloud: &PointCloud, resolution: usize) -> Result<VoxelizedCloud> {
    if resolution == 0 {
        return Err(Error::InvalidArgument(
            "resolution must be at least 1".into(),
        ));
    }
    let coords = cloud.coords();
    if coords.is_empty() {
        return Err(Error::InvalidArgument("empty point cloud".into()));
    }
    let d = resolution as f64;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in coords {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent: Vec<f64> = (0..3).map(|a| hi[a] - lo[a]).collect();
    let mut assignment = Vec::with_capacity(coords.len());
    let mut rel = Vec::with_capacity(coords.len());
    for p in coords {
        let mut cell = [0usize; 3];
        let mut r = [0.0; 3];
        for a in 0..3 {
            let s = if extent[a] > 0.0 {
                (p[a] - lo[a]) / extent[a] * d
            } else {
                0.5
            };
            cell[a] = (s.floor().max(0.0) as usize).min(resolution - 1);
            r[a] = s - (cell[a] as f64 + 0.5);
        }
        assignment.push((cell[0] * resolution + cell[1]) * resolution + cell[2]);
        rel.push(r);
    }
    VoxelizedCloud::from_parts(resolution, assignment, rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(coords: Vec<[f64; 3]>) -> PointCloud {
        let n = coords.len();
        PointCloud::new(coords, Matrix::zeros(n, 1), None).unwrap()
    }

    #[test]
    fn single_point() {
        let v = voxelize(&cloud(vec![[3.0, -1.0, 2.0]]), 4).unwrap();
        assert_eq!(v.assignment(), &[0]);
        assert_eq!(v.rel_coords(), &[[0.0; 3]]);
    }

    #[test]
    fn cube_corners_fill_two_cubed() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        let v = voxelize(&cloud(pts), 2).unwrap();
        let mut a = v.assignment().to_vec();
        a.sort();
        assert_eq!(a, (0..8).collect::<Vec<_>>());
        assert!(v.occupancy().iter().all(|&n| n == 1));
        for r in v.rel_coords() {
            assert!(r.iter().all(|c| (c.abs() - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn identical_points_share_a_voxel() {
        let v = voxelize(&cloud(vec![[1.0, 1.0, 1.0]; 5]), 3).unwrap();
        assert!(v.assignment().iter().all(|&a| a == 0));
        assert!(v.rel_coords().iter().all(|r| *r == [0.0; 3]));
        assert_eq!(v.occupancy()[0], 5);
    }

    #[test]
    fn rel_coords_in_range() {
        let pts: Vec<[f64; 3]> = (0..50)
            .map(|i| {
                let t = i as f64;
                [(t * 0.37).sin(), (t * 1.3).cos() * 4.0, t * 0.01]
            })
            .collect();
        let v = voxelize(&cloud(pts), 3).unwrap();
        for r in v.rel_coords() {
            assert!(r.iter().all(|c| (-0.5..=0.5).contains(c)));
        }
        assert_eq!(v.occupancy().iter().sum::<usize>(), 50);
    }

    #[test]
    fn empty_voxels_pool_to_zero() {
        let v = VoxelizedCloud::from_assignment(2, vec![0, 0, 3]).unwrap();
        let x = Matrix::from_vec(3, 1, vec![1.0, 3.0, 5.0]).unwrap();
        let g = v.mean_pool(&x).unwrap();
        assert_eq!(g.column(0), vec![2.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn shift_wraps() {
        let v = VoxelizedCloud::from_assignment(3, vec![v_idx(2, 0, 1)]).unwrap();
        let s = v.shifted([1, -1, 0]);
        assert_eq!(s.assignment(), &[v_idx(0, 2, 1)]);
        assert_eq!(s.occupancy()[v_idx(0, 2, 1)], 1);
    }

    fn v_idx(x: usize, y: usize, z: usize) -> usize {
        (x * 3 + y) * 3 + z
    }

    #[test]
    fn bad_inputs() {
        assert!(VoxelizedCloud::from_assignment(2, vec![8]).is_err());
        assert!(voxelize(&cloud(vec![[0.0; 3]]), 0).is_err());
        let v = VoxelizedCloud::from_assignment(2, vec![0, 1]).unwrap();
        assert!(v.permuted(&[0, 0]).is_err());
        assert!(v.mean_pool(&Matrix::<f64>::zeros(3, 1)).is_err());
    }
}
