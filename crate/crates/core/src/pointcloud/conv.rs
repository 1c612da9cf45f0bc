use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// A `K³ × C × C'` kernel for periodic 3-D cross-correlation.
///
/// Tap `t = (a·K + b)·K + c` looks at offset `(a − r, b − r, c − r)` with `r = K / 2`;
/// coefficients live at `(t · C + i) · C' + o`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel3<T> {
    width: usize,
    c_in: usize,
    c_out: usize,
    data: Vec<T>,
}

impl<T: Real> Kernel3<T> {
    pub fn new(width: usize, c_in: usize, c_out: usize, data: Vec<T>) -> Result<Self> {
        if width.is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!("width {width} is not odd")));
        }
        let expected = width.pow(3) * c_in * c_out;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            c_in,
            c_out,
            data,
        })
    }

    pub fn zeros(width: usize, c_in: usize, c_out: usize) -> Result<Self> {
        Self::new(
            width,
            c_in,
            c_out,
            vec![T::zero(); width.pow(3) * c_in * c_out],
        )
    }

    /// Center tap set to `map` (`C × C'`), all other taps zero.
    pub fn delta(width: usize, map: &Matrix<T>) -> Result<Self> {
        let mut k = Self::zeros(width, map.rows(), map.cols())?;
        let center = k.taps() / 2;
        for i in 0..map.rows() {
            for o in 0..map.cols() {
                *k.at_mut(center, i, o) = map[(i, o)];
            }
        }
        Ok(k)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn taps(&self) -> usize {
        self.width.pow(3)
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, tap: usize, i: usize, o: usize) -> T {
        self.data[(tap * self.c_in + i) * self.c_out + o]
    }

    #[inline]
    pub fn at_mut(&mut self, tap: usize, i: usize, o: usize) -> &mut T {
        &mut self.data[(tap * self.c_in + i) * self.c_out + o]
    }

    fn check(&self, grid: &Matrix<T>, d: usize, channels: usize) -> Result<()> {
        if self.width > d {
            return Err(Error::InvalidKernel(format!(
                "width {} exceeds grid resolution {d}",
                self.width
            )));
        }
        if grid.shape() != (d.pow(3), channels) {
            return Err(Error::ShapeMismatch(format!(
                "grid is {:?}, expected {}x{channels}",
                grid.shape(),
                d.pow(3)
            )));
        }
        Ok(())
    }

    /// `table[v · taps + t]` = voxel reached from `v` by tap `t`, wrapping around.
    fn neighbors(&self, d: usize) -> Vec<usize> {
        let (k, r) = (self.width, (self.width / 2) as i64);
        let di = d as i64;
        let taps = self.taps();
        let mut table = Vec::with_capacity(d.pow(3) * taps);
        for v in 0..d.pow(3) {
            let c = [(v / (d * d)) as i64, ((v / d) % d) as i64, (v % d) as i64];
            for t in 0..taps {
                let off = [
                    (t / (k * k)) as i64 - r,
                    ((t / k) % k) as i64 - r,
                    (t % k) as i64 - r,
                ];
                let w: Vec<usize> = (0..3)
                    .map(|a| (c[a] + off[a]).rem_euclid(di) as usize)
                    .collect();
                table.push((w[0] * d + w[1]) * d + w[2]);
            }
        }
        table
    }
}

/// `out[v, o] = Σ_t Σ_i k[t, i, o] · grid[v + offset(t), i]` on a periodic `D³` grid.
pub fn conv3d_periodic<T: Real>(
    kernel: &Kernel3<T>,
    grid: &Matrix<T>,
    d: usize,
) -> Result<Matrix<T>> {
    kernel.check(grid, d, kernel.c_in)?;
    let taps = kernel.taps();
    let nbr = kernel.neighbors(d);
    let mut out = Matrix::zeros(d.pow(3), kernel.c_out);
    for v in 0..d.pow(3) {
        let row = out.row_mut(v);
        for t in 0..taps {
            let src = grid.row(nbr[v * taps + t]);
            for (i, x) in src.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                let base = (t * kernel.c_in + i) * kernel.c_out;
                for (o, y) in row.iter_mut().enumerate() {
                    *y = *y + kernel.data[base + o] * *x;
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`conv3d_periodic`] in the grid argument.
pub fn conv3d_periodic_adjoint<T: Real>(
    kernel: &Kernel3<T>,
    grad_out: &Matrix<T>,
    d: usize,
) -> Result<Matrix<T>> {
    kernel.check(grad_out, d, kernel.c_out)?;
    let taps = kernel.taps();
    let nbr = kernel.neighbors(d);
    let mut g = Matrix::zeros(d.pow(3), kernel.c_in);
    for v in 0..d.pow(3) {
        let gy = grad_out.row(v);
        for t in 0..taps {
            let dst = g.row_mut(nbr[v * taps + t]);
            for (i, gx) in dst.iter_mut().enumerate() {
                let base = (t * kernel.c_in + i) * kernel.c_out;
                let s = gy
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (o, y)| acc + kernel.data[base + o] * *y);
                *gx = *gx + s;
            }
        }
    }
    Ok(g)
}

/// Gradient of `⟨grad_out, conv3d_periodic(k, grid)⟩` with respect to `k`.
pub fn conv3d_kernel_grad<T: Real>(
    kernel: &Kernel3<T>,
    grid: &Matrix<T>,
    grad_out: &Matrix<T>,
    d: usize,
) -> Result<Vec<T>> {
    kernel.check(grid, d, kernel.c_in)?;
    kernel.check(grad_out, d, kernel.c_out)?;
    let taps = kernel.taps();
    let nbr = kernel.neighbors(d);
    let mut gk = vec![T::zero(); kernel.data.len()];
    for v in 0..d.pow(3) {
        let gy = grad_out.row(v);
        for t in 0..taps {
            let src = grid.row(nbr[v * taps + t]);
            for (i, x) in src.iter().enumerate() {
                let base = (t * kernel.c_in + i) * kernel.c_out;
                for (o, y) in gy.iter().enumerate() {
                    gk[base + o] = gk[base + o] + *x * *y;
                }
            }
        }
    }
    Ok(gk)
}

pub(crate) fn random_kernel<T: Real>(
    width: usize,
    c_in: usize,
    c_out: usize,
    scale: f64,
    rng: &mut impl Rng,
) -> Kernel3<T> {
    let data = (0..width.pow(3) * c_in * c_out)
        .map(|_| T::from_f64_lossy(rng.random_range(-scale..=scale)))
        .collect();
    Kernel3 {
        width,
        c_in,
        c_out,
        data,
    }
}
