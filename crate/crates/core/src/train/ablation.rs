use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::pointcloud::{synthetic_blobs, BlobConfig, LayerKind, SegNet, SegNetConfig};

use super::sgd::{evaluate, sgd_train, Sample, TrainConfig};

/// Wreath layers against within-voxel set layers, same data, depth, width and budget.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub seeds: Vec<u64>,
    pub blobs: BlobConfig,
    pub resolution: usize,
    pub train_clouds: usize,
    pub test_clouds: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub kernel: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            blobs: BlobConfig {
                blobs: 4,
                points_per_blob: 24,
                noise: 1.5,
                spread: 0.12,
            },
            resolution: 6,
            train_clouds: 6,
            test_clouds: 4,
            hidden: 8,
            blocks: 2,
            kernel: 3,
            epochs: 60,
            lr: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRun {
    pub seed: u64,
    pub wreath_accuracy: f64,
    pub set_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOutcome {
    pub runs: Vec<AblationRun>,
}

impl AblationOutcome {
    pub fn wreath_wins(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.wreath_accuracy > r.set_accuracy)
            .count()
    }

    pub fn majority(&self) -> bool {
        2 * self.wreath_wins() > self.runs.len()
    }

    pub fn mean(&self) -> (f64, f64) {
        let n = self.runs.len().max(1) as f64;
        let w = self.runs.iter().map(|r| r.wreath_accuracy).sum::<f64>() / n;
        let s = self.runs.iter().map(|r| r.set_accuracy).sum::<f64>() / n;
        (w, s)
    }
}

/// Trains both variants per seed and reports held-out per-point accuracy.
pub fn run_ablation(config: &AblationConfig) -> Result<AblationOutcome> {
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut clouds = |count: usize| -> Result<Vec<Sample<f64>>> {
            (0..count)
                .map(|_| {
                    Sample::from_cloud(
                        &synthetic_blobs(&config.blobs, &mut rng)?,
                        config.resolution,
                    )
                })
                .collect()
        };
        let train = clouds(config.train_clouds)?;
        let test = clouds(config.test_clouds)?;
        let net_config = |kind| SegNetConfig {
            c_in: config.blobs.blobs + 1,
            hidden: config.hidden,
            classes: config.blobs.blobs,
            blocks: config.blocks,
            kernel: config.kernel,
            attention: 0,
            kind,
        };
        let train_cfg = TrainConfig {
            epochs: config.epochs,
            lr: config.lr,
            seed,
        };
        let mut acc = [0.0; 2];
        for (slot, kind) in [LayerKind::Wreath, LayerKind::Set].into_iter().enumerate() {
            let mut init = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000));
            let mut net = SegNet::random(&net_config(kind), &mut init)?;
            sgd_train(&mut net, &train, &train_cfg)?;
            acc[slot] = evaluate(&net, &test)?.1;
        }
        runs.push(AblationRun {
            seed,
            wreath_accuracy: acc[0],
            set_accuracy: acc[1],
        });
    }
    Ok(AblationOutcome { runs })
}
