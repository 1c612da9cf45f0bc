use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wreathlin::pointcloud::{
    hierarchy_check, synthetic_blobs, voxelize, BlobConfig, LayerKind, SegNet, SegNetConfig,
};
use wreathlin::train::{sgd_train, Sample, TrainConfig};

fn blobs() -> BlobConfig {
    BlobConfig {
        blobs: 3,
        points_per_blob: 12,
        noise: 0.8,
        spread: 0.1,
    }
}

fn net(attention: usize, rng: &mut ChaCha8Rng) -> SegNet<f64> {
    let cfg = SegNetConfig {
        c_in: 4,
        hidden: 6,
        classes: 3,
        blocks: 2,
        kernel: 3,
        attention,
        kind: LayerKind::Wreath,
    };
    SegNet::random(&cfg, rng).unwrap()
}

#[test]
fn segnet_keeps_logits_attached_to_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cloud = synthetic_blobs(&blobs(), &mut rng).unwrap();
    let vox = voxelize(&cloud, 4).unwrap();
    for attention in [0, 2] {
        let net = net(attention, &mut rng);
        let r = hierarchy_check(
            |v, x| net.forward(v, x),
            &vox,
            cloud.features(),
            10,
            &mut rng,
        )
        .unwrap();
        assert!(r.passed(), "{r}");
    }
}

#[test]
fn toy_training_beats_initial_loss_and_stays_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<Sample<f64>> = (0..2)
        .map(|_| Sample::from_cloud(&synthetic_blobs(&blobs(), &mut rng).unwrap(), 3).unwrap())
        .collect();
    for attention in [0, 1] {
        let mut model = net(attention, &mut rng);
        let trace = sgd_train(
            &mut model,
            &data,
            &TrainConfig {
                epochs: 200,
                lr: 0.05,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!(trace.rows.len(), 201);
        assert!(trace.final_loss().unwrap() < trace.initial_loss().unwrap());
        assert!(trace.final_loss().unwrap() < (3f64).ln());
        let s = &data[0];
        let r =
            hierarchy_check(|v, x| model.forward(v, x), &s.vox, &s.features, 5, &mut rng).unwrap();
        assert!(r.passed(), "{r}");
    }
}

#[test]
fn unlabeled_cloud_is_not_a_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = synthetic_blobs(&blobs(), &mut rng).unwrap();
    let unlabeled =
        wreathlin::pointcloud::PointCloud::new(c.coords().to_vec(), c.features().clone(), None)
            .unwrap();
    assert!(Sample::<f64>::from_cloud(&unlabeled, 2).is_err());
}
