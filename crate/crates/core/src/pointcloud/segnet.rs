use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

use super::conv::Kernel3;
use super::layers::{AttnPCLayer, Block, ParamGrads, SetPCLayer, WreathPCLayer};
use super::voxel::VoxelizedCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    /// Pointwise plus periodic convolution over voxel means.
    Wreath,
    /// Pointwise plus within-voxel pooling, no interaction between voxels.
    Set,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegNetConfig {
    pub c_in: usize,
    pub hidden: usize,
    pub classes: usize,
    /// Number of voxel layers; at least 1.
    pub blocks: usize,
    pub kernel: usize,
    /// Latent classes of an attention block inserted after the first voxel layer; 0 for none.
    pub attention: usize,
    pub kind: LayerKind,
}

/// Blocks applied in sequence. Each block adds its input back when the channel
/// counts match, and every block but the last is followed by a rectifier.
#[derive(Debug, Clone, PartialEq)]
pub struct SegNet<T> {
    blocks: Vec<Block<T>>,
}

struct Trace<T> {
    inputs: Vec<Matrix<T>>,
    pre: Vec<Matrix<T>>,
}

impl<T: Real> SegNet<T> {
    pub fn new(blocks: Vec<Block<T>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument(
                "network needs at least one block".into(),
            ));
        }
        for w in blocks.windows(2) {
            if w[0].c_out() != w[1].c_in() {
                return Err(Error::ShapeMismatch(format!(
                    "block emits {} channels, next block expects {}",
                    w[0].c_out(),
                    w[1].c_in()
                )));
            }
        }
        Ok(Self { blocks })
    }

    pub fn random(config: &SegNetConfig, rng: &mut impl Rng) -> Result<Self> {
        if config.blocks == 0 {
            return Err(Error::InvalidArgument(
                "network needs at least one block".into(),
            ));
        }
        let mut dims = vec![config.c_in];
        dims.extend(std::iter::repeat_n(config.hidden, config.blocks - 1));
        dims.push(config.classes);
        let mut blocks = Vec::new();
        for (k, pair) in dims.windows(2).enumerate() {
            if k == 1.min(config.blocks - 1) && config.attention > 0 {
                let c = pair[0];
                blocks.push(Block::Attn(AttnPCLayer::random(
                    c,
                    c,
                    config.attention,
                    rng,
                )?));
            }
            blocks.push(match config.kind {
                LayerKind::Wreath => {
                    Block::Wreath(WreathPCLayer::random(pair[0], pair[1], config.kernel, rng)?)
                }
                LayerKind::Set => Block::Set(SetPCLayer::random(pair[0], pair[1], rng)),
            });
        }
        Self::new(blocks)
    }

    pub fn blocks(&self) -> &[Block<T>] {
        &self.blocks
    }

    pub fn c_in(&self) -> usize {
        self.blocks[0].c_in()
    }

    pub fn classes(&self) -> usize {
        self.blocks[self.blocks.len() - 1].c_out()
    }

    fn run(&self, vox: &VoxelizedCloud, x: &Matrix<T>) -> Result<(Matrix<T>, Trace<T>)> {
        let mut trace = Trace {
            inputs: Vec::with_capacity(self.blocks.len()),
            pre: Vec::with_capacity(self.blocks.len()),
        };
        let mut h = x.clone();
        let last = self.blocks.len() - 1;
        for (k, b) in self.blocks.iter().enumerate() {
            let mut z = b.forward(vox, &h)?;
            if b.c_in() == b.c_out() {
                z = z.add(&h)?;
            }
            trace.inputs.push(h);
            if k == last {
                return Ok((z, trace));
            }
            h = z.map(|v| v.max(T::zero()));
            trace.pre.push(z);
        }
        unreachable!("network has at least one block")
    }

    /// Per-point class logits.
    pub fn forward(&self, vox: &VoxelizedCloud, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.run(vox, x).map(|(y, _)| y)
    }

    pub fn predict(&self, vox: &VoxelizedCloud, x: &Matrix<T>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.forward(vox, x)?))
    }

    /// Gradients of every parameter tensor (in [`Self::params`] order) and of the input.
    pub fn backward(
        &self,
        vox: &VoxelizedCloud,
        x: &Matrix<T>,
        g_logits: &Matrix<T>,
    ) -> Result<ParamGrads<T>> {
        let (_, trace) = self.run(vox, x)?;
        let mut per_block = Vec::with_capacity(self.blocks.len());
        let mut g = g_logits.clone();
        for (k, b) in self.blocks.iter().enumerate().rev() {
            if k < self.blocks.len() - 1 {
                let z = &trace.pre[k];
                for (gv, zv) in g.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if *zv <= T::zero() {
                        *gv = T::zero();
                    }
                }
            }
            let grads = b.backward(vox, &trace.inputs[k], &g)?;
            let mut gh = grads.input;
            if b.c_in() == b.c_out() {
                gh = gh.add(&g)?;
            }
            per_block.push(grads.params);
            g = gh;
        }
        per_block.reverse();
        Ok(ParamGrads {
            params: per_block.into_iter().flatten().collect(),
            input: g,
        })
    }

    pub fn param_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(k, b)| b.param_names().map(|n| format!("block{k}.{n}")))
            .collect()
    }

    pub fn params(&self) -> Vec<&[T]> {
        self.blocks.iter().flat_map(|b| b.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.blocks
            .iter_mut()
            .flat_map(|b| b.params_mut())
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

pub fn argmax_rows<T: Real>(m: &Matrix<T>) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            m.row(r)
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |best, (i, v)| {
                    if *v > best.1 {
                        (i, *v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum BlockFile {
    Wreath {
        c_in: usize,
        c_out: usize,
        width: usize,
        w1: Vec<f64>,
        w3: Vec<f64>,
    },
    Set {
        c_in: usize,
        c_out: usize,
        w1: Vec<f64>,
        w2: Vec<f64>,
    },
    Attn {
        c_in: usize,
        c_out: usize,
        latents: usize,
        w3l: Vec<f64>,
        w4: Vec<f64>,
    },
}

impl SegNet<f64> {
    pub fn to_json(&self) -> String {
        let blocks: Vec<BlockFile> = self
            .blocks
            .iter()
            .map(|b| match b {
                Block::Wreath(l) => BlockFile::Wreath {
                    c_in: l.c_in(),
                    c_out: l.c_out(),
                    width: l.w3.width(),
                    w1: l.w1.as_slice().to_vec(),
                    w3: l.w3.data().to_vec(),
                },
                Block::Set(l) => BlockFile::Set {
                    c_in: l.c_in(),
                    c_out: l.c_out(),
                    w1: l.w1.as_slice().to_vec(),
                    w2: l.w2.as_slice().to_vec(),
                },
                Block::Attn(l) => BlockFile::Attn {
                    c_in: l.c_in(),
                    c_out: l.c_out(),
                    latents: l.latents(),
                    w3l: l.w3l.as_slice().to_vec(),
                    w4: l.w4.clone(),
                },
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "blocks": blocks }))
            .expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct NetFile {
            blocks: Vec<BlockFile>,
        }
        let file: NetFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let blocks = file
            .blocks
            .into_iter()
            .map(|b| {
                Ok(match b {
                    BlockFile::Wreath {
                        c_in,
                        c_out,
                        width,
                        w1,
                        w3,
                    } => Block::Wreath(WreathPCLayer::new(
                        Matrix::from_vec(c_in, c_out, w1)?,
                        Kernel3::new(width, c_in, c_out, w3)?,
                    )?),
                    BlockFile::Set {
                        c_in,
                        c_out,
                        w1,
                        w2,
                    } => Block::Set(SetPCLayer::new(
                        Matrix::from_vec(c_in, c_out, w1)?,
                        Matrix::from_vec(c_in, c_out, w2)?,
                    )?),
                    BlockFile::Attn {
                        c_in,
                        c_out,
                        latents,
                        w3l,
                        w4,
                    } => Block::Attn(AttnPCLayer::new(
                        Matrix::from_vec(c_in, latents, w3l)?,
                        w4,
                        c_out,
                    )?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(attention: usize, kind: LayerKind) -> SegNetConfig {
        SegNetConfig {
            c_in: 3,
            hidden: 4,
            classes: 2,
            blocks: 2,
            kernel: 1,
            attention,
            kind,
        }
    }

    #[test]
    fn layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = SegNet::<f64>::random(&config(2, LayerKind::Wreath), &mut rng).unwrap();
        let kinds: Vec<_> = net
            .blocks()
            .iter()
            .map(|b| (matches!(b, Block::Attn(_)), b.c_in(), b.c_out()))
            .collect();
        assert_eq!(kinds, vec![(false, 3, 4), (true, 4, 4), (false, 4, 2)]);
        assert_eq!(net.param_names().len(), 6);
        let single = SegNetConfig {
            blocks: 1,
            ..config(2, LayerKind::Set)
        };
        let net = SegNet::<f64>::random(&single, &mut rng).unwrap();
        assert_eq!(net.blocks().len(), 2);
        assert!(matches!(net.blocks()[0], Block::Attn(_)));
    }

    #[test]
    fn zero_net_gives_zero_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SegNetConfig {
            c_in: 2,
            classes: 3,
            ..config(0, LayerKind::Wreath)
        };
        let mut net = SegNet::<f64>::random(&cfg, &mut rng).unwrap();
        for p in net.params_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        let vox = VoxelizedCloud::from_assignment(2, vec![0, 1, 1, 5]).unwrap();
        let x = Matrix::from_fn(4, 2, |r, c| (r + c) as f64);
        assert!(net.forward(&vox, &x).unwrap().is_zero());
    }

    #[test]
    fn channel_chain_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Block::Set(SetPCLayer::<f64>::random(2, 3, &mut rng));
        let b = Block::Set(SetPCLayer::<f64>::random(2, 3, &mut rng));
        assert!(SegNet::new(vec![a, b]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SegNetConfig {
            kernel: 3,
            ..config(2, LayerKind::Wreath)
        };
        let net = SegNet::<f64>::random(&cfg, &mut rng).unwrap();
        assert_eq!(SegNet::from_json(&net.to_json()).unwrap(), net);
    }
}
