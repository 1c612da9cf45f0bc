use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pointcloud::{argmax_rows, voxelize, PointCloud, SegNet, VoxelizedCloud};
use crate::scalar::Real;

use super::loss::loss_ce;

/// A voxelized cloud with its features and per-point labels.
#[derive(Debug, Clone)]
pub struct Sample<T> {
    pub vox: VoxelizedCloud,
    pub features: Matrix<T>,
    pub labels: Vec<usize>,
}

impl<T: Real> Sample<T> {
    pub fn from_cloud(cloud: &PointCloud, resolution: usize) -> Result<Self> {
        let labels = cloud
            .labels()
            .ok_or_else(|| Error::InvalidArgument("training cloud has no labels".into()))?
            .to_vec();
        Ok(Self {
            vox: voxelize(cloud, resolution)?,
            features: cloud.features().map(|v| T::from_f64_lossy(*v)),
            labels,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// One row per epoch; row 0 evaluates the untrained network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainTrace {
    pub fn initial_loss(&self) -> Option<f64> {
        self.rows.first().map(|r| r.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.loss)
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.rows.last().map(|r| r.accuracy)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,accuracy\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.loss, r.accuracy));
        }
        s
    }
}

/// Mean loss over samples and accuracy over all points.
pub fn evaluate<T: Real>(net: &SegNet<T>, data: &[Sample<T>]) -> Result<(f64, f64)> {
    let (mut loss, mut hits, mut total) = (0.0, 0usize, 0usize);
    for s in data {
        let logits = net.forward(&s.vox, &s.features)?;
        loss += loss_ce(&logits, &s.labels)?.0.to_f64().unwrap_or(f64::NAN);
        hits += argmax_rows(&logits)
            .iter()
            .zip(&s.labels)
            .filter(|(p, l)| p == l)
            .count();
        total += s.labels.len();
    }
    let n = data.len().max(1) as f64;
    Ok((loss / n, hits as f64 / total.max(1) as f64))
}

/// Plain stochastic gradient descent, one sample per step, sample order reshuffled each
/// epoch from `seed`.
pub fn sgd_train<T: Real>(
    net: &mut SegNet<T>,
    data: &[Sample<T>],
    config: &TrainConfig,
) -> Result<TrainTrace> {
    if !(config.lr >= 0.0 && config.lr.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate {} must be non-negative",
            config.lr
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let lr = T::from_f64_lossy(config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = TrainTrace::default();
    let record = |trace: &mut TrainTrace, net: &SegNet<T>, epoch: usize| -> Result<()> {
        let (loss, accuracy) = evaluate(net, data)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        trace.rows.push(TraceRow {
            epoch,
            loss,
            accuracy,
        });
        Ok(())
    };
    record(&mut trace, net, 0)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let s = &data[i];
            let (loss, g) = loss_ce(&net.forward(&s.vox, &s.features)?, &s.labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    loss: loss.to_f64().unwrap_or(f64::NAN),
                });
            }
            let grads = net.backward(&s.vox, &s.features, &g)?.params;
            for (p, gp) in net.params_mut().into_iter().zip(&grads) {
                for (w, d) in p.iter_mut().zip(gp) {
                    *w = *w - lr * *d;
                }
            }
        }
        record(&mut trace, net, epoch)?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::{synthetic_blobs, BlobConfig, LayerKind, SegNetConfig};

    fn setup(seed: u64) -> (SegNet<f64>, Vec<Sample<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = BlobConfig {
            blobs: 3,
            points_per_blob: 10,
            noise: 0.5,
            spread: 0.1,
        };
        let data = (0..2)
            .map(|_| Sample::from_cloud(&synthetic_blobs(&cfg, &mut rng).unwrap(), 3).unwrap())
            .collect();
        let net = SegNet::random(
            &SegNetConfig {
                c_in: 4,
                hidden: 6,
                classes: 3,
                blocks: 2,
                kernel: 3,
                attention: 0,
                kind: LayerKind::Wreath,
            },
            &mut rng,
        )
        .unwrap();
        (net, data)
    }

    #[test]
    fn zero_lr_keeps_loss() {
        let (mut net, data) = setup(0);
        let t = sgd_train(
            &mut net,
            &data,
            &TrainConfig {
                epochs: 3,
                lr: 0.0,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!(t.rows.iter().all(|r| r.loss == t.rows[0].loss));
    }

    #[test]
    fn training_lowers_loss_and_is_deterministic() {
        let cfg = TrainConfig {
            epochs: 20,
            lr: 0.1,
            seed: 7,
        };
        let (mut a, data) = setup(1);
        let mut b = a.clone();
        let ta = sgd_train(&mut a, &data, &cfg).unwrap();
        let tb = sgd_train(&mut b, &data, &cfg).unwrap();
        assert_eq!(ta.to_csv(), tb.to_csv());
        assert!(ta.final_loss().unwrap() < ta.initial_loss().unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let (mut net, data) = setup(2);
        let err = sgd_train(
            &mut net,
            &data,
            &TrainConfig {
                epochs: 50,
                lr: 1e6,
                seed: 0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }), "{err}");
    }

    #[test]
    fn rejects_bad_config() {
        let (mut net, data) = setup(3);
        assert!(sgd_train(
            &mut net,
            &data,
            &TrainConfig {
                epochs: 1,
                lr: -1.0,
                seed: 0
            }
        )
        .is_err());
        assert!(sgd_train(
            &mut net,
            &[],
            &TrainConfig {
                epochs: 1,
                lr: 0.1,
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn csv_header() {
        let t = TrainTrace {
            rows: vec![TraceRow {
                epoch: 0,
                loss: 1.5,
                accuracy: 0.25,
            }],
        };
        assert_eq!(t.to_csv(), "epoch,loss,accuracy\n0,1.5,0.25\n");
    }
}
