use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

use super::conv::{
    conv3d_kernel_grad, conv3d_periodic, conv3d_periodic_adjoint, random_kernel, Kernel3,
};
use super::voxel::VoxelizedCloud;

fn uniform<T: Real>(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Matrix<T> {
    let s = 1.0 / (fan_in.max(1) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| {
        T::from_f64_lossy(rng.random_range(-s..=s))
    })
}

fn check_input<T: Clone>(x: &Matrix<T>, vox: Option<&VoxelizedCloud>, c_in: usize) -> Result<()> {
    if x.cols() != c_in {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channels, layer expects {c_in}",
            x.cols()
        )));
    }
    if let Some(v) = vox {
        if v.num_points() != x.rows() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} points, voxelization has {}",
                x.rows(),
                v.num_points()
            )));
        }
    }
    Ok(())
}

fn check_grad<T: Clone>(gy: &Matrix<T>, rows: usize, c_out: usize) -> Result<()> {
    if gy.shape() != (rows, c_out) {
        return Err(Error::ShapeMismatch(format!(
            "output gradient is {:?}, expected {rows}x{c_out}",
            gy.shape()
        )));
    }
    Ok(())
}

fn add_into<T: Real>(acc: &mut Matrix<T>, other: &Matrix<T>) {
    for (a, b) in acc.as_mut_slice().iter_mut().zip(other.as_slice()) {
        *a = *a + *b;
    }
}

/// `φ(X) = X W₁ + Πᵀ (W₃ ∗ mean-pool(X))`: a pointwise map plus a periodic convolution
/// over per-voxel means, broadcast back to the points.
#[derive(Debug, Clone, PartialEq)]
pub struct WreathPCLayer<T> {
    pub w1: Matrix<T>,
    pub w3: Kernel3<T>,
}

impl<T: Real> WreathPCLayer<T> {
    pub fn new(w1: Matrix<T>, w3: Kernel3<T>) -> Result<Self> {
        if (w1.rows(), w1.cols()) != (w3.c_in(), w3.c_out()) {
            return Err(Error::ShapeMismatch(format!(
                "pointwise map is {:?}, kernel maps {} to {}",
                w1.shape(),
                w3.c_in(),
                w3.c_out()
            )));
        }
        Ok(Self { w1, w3 })
    }

    pub fn random(c_in: usize, c_out: usize, width: usize, rng: &mut impl Rng) -> Result<Self> {
        let w1 = uniform(c_in, c_out, c_in, rng);
        let fan = width.pow(3) * c_in;
        if width.is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!("width {width} is not odd")));
        }
        Self::new(
            w1,
            random_kernel(width, c_in, c_out, 1.0 / (fan as f64).sqrt(), rng),
        )
    }

    pub fn c_in(&self) -> usize {
        self.w1.rows()
    }

    pub fn c_out(&self) -> usize {
        self.w1.cols()
    }

    pub fn forward(&self, vox: &VoxelizedCloud, x: &Matrix<T>) -> Result<Matrix<T>> {
        check_input(x, Some(vox), self.c_in())?;
        let pooled = vox.mean_pool(x)?;
        let grid = conv3d_periodic(&self.w3, &pooled, vox.resolution())?;
        let mut y = x.matmul(&self.w1)?;
        add_into(&mut y, &vox.broadcast(&grid)?);
        Ok(y)
    }

    pub fn backward(
        &self,
        vox: &VoxelizedCloud,
        x: &Matrix<T>,
        gy: &Matrix<T>,
    ) -> Result<ParamGrads<T>> {
        check_input(x, Some(vox), self.c_in())?;
        check_grad(gy, x.rows(), self.c_out())?;
        let d = vox.resolution();
        let pooled = vox.mean_pool(x)?;
        let g_grid = vox.broadcast_adjoint(gy)?;
        let gw1 = x.transpose().matmul(gy)?;
        let gw3 = conv3d_kernel_grad(&self.w3, &pooled, &g_grid, d)?;
        let g_pool = conv3d_periodic_adjoint(&self.w3, &g_grid, d)?;
        let mut gx = gy.matmul(&self.w1.transpose())?;
        add_into(&mut gx, &vox.mean_pool_adjoint(&g_pool)?);
        Ok(ParamGrads {
            params: vec![gw1.into_vec(), gw3],
            input: gx,
        })
    }
}

/// `φ(X) = X W₁ + Πᵀ mean-pool(X) W₂`: shares information within a voxel only.
#[derive(Debug, Clone, PartialEq)]
pub struct SetPCLayer<T> {
    pub w1: Matrix<T>,
    pub w2: Matrix<T>,
}

impl<T: Real> SetPCLayer<T> {
    pub fn new(w1: Matrix<T>, w2: Matrix<T>) -> Result<Self> {
        if w1.shape() != w2.shape() {
            return Err(Error::ShapeMismatch(format!(
                "pointwise map is {:?}, pooled map is {:?}",
                w1.shape(),
                w2.shape()
            )));
        }
        Ok(Self { w1, w2 })
    }

    pub fn random(c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            w1: uniform(c_in, c_out, c_in, rng),
            w2: uniform(c_in, c_out, c_in, rng),
        }
    }

    pub fn c_in(&self) -> usize {
        self.w1.rows()
    }

    pub fn c_out(&self) -> usize {
        self.w1.cols()
    }

    pub fn forward(&self, vox: &VoxelizedCloud, x: &Matrix<T>) -> Result<Matrix<T>> {
        check_input(x, Some(vox), self.c_in())?;
        let pooled = vox.mean_pool(x)?.matmul(&self.w2)?;
        let mut y = x.matmul(&self.w1)?;
        add_into(&mut y, &vox.broadcast(&pooled)?);
        Ok(y)
    }

    pub fn backward(
        &self,
        vox: &VoxelizedCloud,
        x: &Matrix<T>,
        gy: &Matrix<T>,
    ) -> Result<ParamGrads<T>> {
        check_input(x, Some(vox), self.c_in())?;
        check_grad(gy, x.rows(), self.c_out())?;
        let pooled = vox.mean_pool(x)?;
        let g_grid = vox.broadcast_adjoint(gy)?;
        let gw1 = x.transpose().matmul(gy)?;
        let gw2 = pooled.transpose().matmul(&g_grid)?;
        let mut gx = gy.matmul(&self.w1.transpose())?;
        let g_pool = g_grid.matmul(&self.w2.transpose())?;
        add_into(&mut gx, &vox.mean_pool_adjoint(&g_pool)?);
        Ok(ParamGrads {
            params: vec![gw1.into_vec(), gw2.into_vec()],
            input: gx,
        })
    }
}

/// Soft pooling into `L` learned latent classes.
///
/// `Π̃ = softmax(X W₃ᴸ)` row-wise, then output channel `o` is
/// `Σ_i Π̃ W₄[:, :, i, o] (Π̃ᵀ X[:, i]) / n`. `W₄` is stored at `((l·L + m)·C + i)·C' + o`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnPCLayer<T> {
    pub w3l: Matrix<T>,
    pub w4: Vec<T>,
    c_out: usize,
}

struct AttnForward<T> {
    assign: Matrix<T>,
    pooled: Matrix<T>,
    mixed: Matrix<T>,
}

impl<T: Real> AttnPCLayer<T> {
    pub fn new(w3l: Matrix<T>, w4: Vec<T>, c_out: usize) -> Result<Self> {
        let (c, l) = w3l.shape();
        if l == 0 || c_out == 0 {
            return Err(Error::InvalidArgument(
                "latent and output counts must be positive".into(),
            ));
        }
        if w4.len() != l * l * c * c_out {
            return Err(Error::LengthMismatch {
                expected: l * l * c * c_out,
                got: w4.len(),
            });
        }
        Ok(Self { w3l, w4, c_out })
    }

    pub fn random(c_in: usize, c_out: usize, latents: usize, rng: &mut impl Rng) -> Result<Self> {
        let w3l = uniform(c_in, latents, c_in, rng);
        let w4 = uniform::<T>(latents * latents * c_in, c_out, latents * c_in, rng).into_vec();
        Self::new(w3l, w4, c_out)
    }

    pub fn c_in(&self) -> usize {
        self.w3l.rows()
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn latents(&self) -> usize {
        self.w3l.cols()
    }

    #[inline]
    fn w4_index(&self, l: usize, m: usize, i: usize, o: usize) -> usize {
        ((l * self.latents() + m) * self.c_in() + i) * self.c_out + o
    }

    /// Row-stochastic soft assignment `Π̃` (`n × L`).
    pub fn assignment(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        check_input(x, None, self.c_in())?;
        let mut p = x.matmul(&self.w3l)?;
        for r in 0..p.rows() {
            let row = p.row_mut(r);
            let m = row.iter().fold(T::neg_infinity(), |a, b| a.max(*b));
            let mut s = T::zero();
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s = s + *v;
            }
            row.iter_mut().for_each(|v| *v = *v / s);
        }
        Ok(p)
    }

    fn run(&self, x: &Matrix<T>) -> Result<AttnForward<T>> {
        let assign = self.assignment(x)?;
        let pooled = assign.transpose().matmul(x)?;
        let (l, c) = (self.latents(), self.c_in());
        let inv_n = T::one() / T::from_f64_lossy(x.rows().max(1) as f64);
        let mut mixed = Matrix::zeros(l, self.c_out);
        for a in 0..l {
            for m in 0..l {
                for i in 0..c {
                    let s = pooled[(m, i)] * inv_n;
                    for o in 0..self.c_out {
                        mixed[(a, o)] = mixed[(a, o)] + self.w4[self.w4_index(a, m, i, o)] * s;
                    }
                }
            }
        }
        Ok(AttnForward {
            assign,
            pooled,
            mixed,
        })
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let f = self.run(x)?;
        f.assign.matmul(&f.mixed)
    }

    pub fn backward(&self, x: &Matrix<T>, gy: &Matrix<T>) -> Result<ParamGrads<T>> {
        check_grad(gy, x.rows(), self.c_out)?;
        let f = self.run(x)?;
        let (l, c) = (self.latents(), self.c_in());
        let inv_n = T::one() / T::from_f64_lossy(x.rows().max(1) as f64);
        let g_mixed = f.assign.transpose().matmul(gy)?;
        let mut g_assign = gy.matmul(&f.mixed.transpose())?;
        let mut gw4 = vec![T::zero(); self.w4.len()];
        let mut g_pooled = Matrix::zeros(l, c);
        for a in 0..l {
            for m in 0..l {
                for i in 0..c {
                    let s = f.pooled[(m, i)] * inv_n;
                    let mut acc = T::zero();
                    for o in 0..self.c_out {
                        let idx = self.w4_index(a, m, i, o);
                        gw4[idx] = g_mixed[(a, o)] * s;
                        acc = acc + self.w4[idx] * g_mixed[(a, o)];
                    }
                    g_pooled[(m, i)] = g_pooled[(m, i)] + acc * inv_n;
                }
            }
        }
        add_into(&mut g_assign, &x.matmul(&g_pooled.transpose())?);
        let mut gx = f.assign.matmul(&g_pooled)?;
        let mut g_logits = Matrix::zeros(x.rows(), l);
        for r in 0..x.rows() {
            let p = f.assign.row(r);
            let g = g_assign.row(r);
            let dot = p.iter().zip(g).fold(T::zero(), |a, (pi, gi)| a + *pi * *gi);
            for k in 0..l {
                g_logits[(r, k)] = p[k] * (g[k] - dot);
            }
        }
        let gw3l = x.transpose().matmul(&g_logits)?;
        add_into(&mut gx, &g_logits.matmul(&self.w3l.transpose())?);
        Ok(ParamGrads {
            params: vec![gw3l.into_vec(), gw4],
            input: gx,
        })
    }
}

/// Gradients for a layer's parameter tensors (in [`Block::params`] order) and its input.
#[derive(Debug, Clone)]
pub struct ParamGrads<T> {
    pub params: Vec<Vec<T>>,
    pub input: Matrix<T>,
}

/// One stage of a segmentation network.
#[derive(Debug, Clone, PartialEq)]
pub enum Block<T> {
    Wreath(WreathPCLayer<T>),
    Set(SetPCLayer<T>),
    Attn(AttnPCLayer<T>),
}

impl<T: Real> Block<T> {
    pub fn c_in(&self) -> usize {
        match self {
            Block::Wreath(l) => l.c_in(),
            Block::Set(l) => l.c_in(),
            Block::Attn(l) => l.c_in(),
        }
    }

    pub fn c_out(&self) -> usize {
        match self {
            Block::Wreath(l) => l.c_out(),
            Block::Set(l) => l.c_out(),
            Block::Attn(l) => l.c_out(),
        }
    }

    pub fn forward(&self, vox: &VoxelizedCloud, x: &Matrix<T>) -> Result<Matrix<T>> {
        match self {
            Block::Wreath(l) => l.forward(vox, x),
            Block::Set(l) => l.forward(vox, x),
            Block::Attn(l) => l.forward(x),
        }
    }

    pub fn backward(
        &self,
        vox: &VoxelizedCloud,
        x: &Matrix<T>,
        gy: &Matrix<T>,
    ) -> Result<ParamGrads<T>> {
        match self {
            Block::Wreath(l) => l.backward(vox, x, gy),
            Block::Set(l) => l.backward(vox, x, gy),
            Block::Attn(l) => l.backward(x, gy),
        }
    }

    pub fn param_names(&self) -> [&'static str; 2] {
        match self {
            Block::Wreath(_) => ["w1", "w3"],
            Block::Set(_) => ["w1", "w2"],
            Block::Attn(_) => ["w3l", "w4"],
        }
    }

    pub fn params(&self) -> [&[T]; 2] {
        match self {
            Block::Wreath(l) => [l.w1.as_slice(), l.w3.data()],
            Block::Set(l) => [l.w1.as_slice(), l.w2.as_slice()],
            Block::Attn(l) => [l.w3l.as_slice(), &l.w4],
        }
    }

    pub fn params_mut(&mut self) -> [&mut [T]; 2] {
        match self {
            Block::Wreath(l) => [l.w1.as_mut_slice(), l.w3.data_mut()],
            Block::Set(l) => [l.w1.as_mut_slice(), l.w2.as_mut_slice()],
            Block::Attn(l) => [l.w3l.as_mut_slice(), &mut l.w4],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_x(n: usize, c: usize, rng: &mut impl Rng) -> Matrix<f64> {
        Matrix::from_fn(n, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_kernel_identity_w1_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let vox =
            VoxelizedCloud::from_assignment(3, (0..10).map(|i| (i * 7) % 27).collect()).unwrap();
        let x = rand_x(10, 3, &mut rng);
        let l = WreathPCLayer::new(Matrix::identity(3), Kernel3::zeros(3, 3, 3).unwrap()).unwrap();
        assert_eq!(l.forward(&vox, &x).unwrap(), x);
    }

    #[test]
    fn singleton_voxels_collapse_to_pointwise_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vox = VoxelizedCloud::from_assignment(2, vec![3, 0, 7, 5]).unwrap();
        let l = WreathPCLayer::<f64>::random(2, 3, 1, &mut rng).unwrap();
        let x = rand_x(4, 2, &mut rng);
        let w30 = Matrix::from_vec(2, 3, l.w3.data().to_vec()).unwrap();
        let expect = x.matmul(&l.w1.add(&w30).unwrap()).unwrap();
        assert!(l.forward(&vox, &x).unwrap().max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn unit_kernel_reproduces_set_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vox =
            VoxelizedCloud::from_assignment(3, (0..20).map(|i| (i * 5) % 11).collect()).unwrap();
        let set = SetPCLayer::<f64>::random(2, 2, &mut rng);
        let wr = WreathPCLayer::new(set.w1.clone(), Kernel3::delta(1, &set.w2).unwrap()).unwrap();
        let x = rand_x(20, 2, &mut rng);
        let a = set.forward(&vox, &x).unwrap();
        let b = wr.forward(&vox, &x).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn duplicating_points_keeps_voxel_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = vec![0, 0, 4, 6];
        let x = rand_x(4, 2, &mut rng);
        let v1 = VoxelizedCloud::from_assignment(2, a.clone()).unwrap();
        let mut a3 = Vec::new();
        let mut rows = Vec::new();
        for _ in 0..3 {
            a3.extend(&a);
            rows.extend((0..4).collect::<Vec<_>>());
        }
        let v3 = VoxelizedCloud::from_assignment(2, a3).unwrap();
        let x3 = x.gather_rows(&rows);
        let p1 = v1.mean_pool(&x).unwrap();
        let p3 = v3.mean_pool(&x3).unwrap();
        assert!(p1.max_abs_diff(&p3) < 1e-12);
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = AttnPCLayer::<f64>::random(3, 2, 4, &mut rng).unwrap();
        let p = l.assignment(&rand_x(9, 3, &mut rng)).unwrap();
        for r in 0..9 {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_latent_broadcasts_global_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = AttnPCLayer::<f64>::random(2, 2, 1, &mut rng).unwrap();
        let x = rand_x(6, 2, &mut rng);
        let y = l.forward(&x).unwrap();
        let mean: Vec<f64> = (0..2)
            .map(|i| x.column(i).iter().sum::<f64>() / 6.0)
            .collect();
        for o in 0..2 {
            let e = (0..2).map(|i| l.w4[i * 2 + o] * mean[i]).sum::<f64>();
            for r in 0..6 {
                assert!((y[(r, o)] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_mixing_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut l = AttnPCLayer::<f64>::random(2, 3, 2, &mut rng).unwrap();
        l.w4.iter_mut().for_each(|w| *w = 0.0);
        assert!(l.forward(&rand_x(5, 2, &mut rng)).unwrap().is_zero());
    }

    #[test]
    fn attention_commutes_with_row_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = AttnPCLayer::<f64>::random(3, 2, 3, &mut rng).unwrap();
        let x = rand_x(8, 3, &mut rng);
        let src = [3, 0, 7, 1, 6, 2, 5, 4];
        let a = l.forward(&x.gather_rows(&src)).unwrap();
        let b = l.forward(&x).unwrap().gather_rows(&src);
        assert!(a.rel_diff(&b) < 1e-12);
    }

    #[test]
    fn shape_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let vox = VoxelizedCloud::from_assignment(1, vec![0, 0]).unwrap();
        let l = WreathPCLayer::<f64>::random(2, 2, 1, &mut rng).unwrap();
        assert!(l.forward(&vox, &rand_x(3, 2, &mut rng)).is_err());
        assert!(l.forward(&vox, &rand_x(2, 3, &mut rng)).is_err());
        assert!(
            WreathPCLayer::new(Matrix::<f64>::zeros(2, 2), Kernel3::zeros(1, 2, 3).unwrap())
                .is_err()
        );
    }
}
