use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Points in 3-D with per-point features and optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<[f64; 3]>,
    features: Matrix<f64>,
    labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(
        coords: Vec<[f64; 3]>,
        features: Matrix<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("coordinates must be finite".into()));
        }
        if features.rows() != coords.len() {
            return Err(Error::LengthMismatch {
                expected: coords.len(),
                got: features.rows(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != coords.len() {
                return Err(Error::LengthMismatch {
                    expected: coords.len(),
                    got: l.len(),
                });
            }
        }
        Ok(Self {
            coords,
            features,
            labels,
        })
    }

    pub fn n_points(&self) -> usize {
        self.coords.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn features(&self) -> &Matrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Reads `#cols n_features has_label` followed by `x y z f1 … fC [label]` lines.
    /// Blank lines and further `#` lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::Format("empty point-cloud file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || {
            Error::Format(format!(
                "line {hline}: expected `#cols n_features has_label`"
            ))
        };
        if fields.len() != 3 || fields[0] != "#cols" {
            return Err(bad_header());
        }
        let n_features: usize = fields[1].parse().map_err(|_| bad_header())?;
        let has_label = match fields[2] {
            "0" => false,
            "1" => true,
            _ => return Err(bad_header()),
        };
        let width = 3 + n_features + usize::from(has_label);
        let mut coords = Vec::new();
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for (ln, line) in lines {
            if line.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != width {
                return Err(Error::Format(format!(
                    "line {ln}: expected {width} columns, found {}",
                    tok.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Format(format!("line {ln}: bad number `{s}`")))
            };
            coords.push([num(tok[0])?, num(tok[1])?, num(tok[2])?]);
            for t in &tok[3..3 + n_features] {
                feats.push(num(t)?);
            }
            if has_label {
                let t = tok[width - 1];
                labels.push(
                    t.parse()
                        .map_err(|_| Error::Format(format!("line {ln}: bad label `{t}`")))?,
                );
            }
        }
        let n = coords.len();
        let features = Matrix::from_vec(n, n_features, feats)?;
        Self::new(coords, features, has_label.then_some(labels))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "#cols {} {}\n",
            self.num_features(),
            u8::from(self.labels.is_some())
        );
        for (i, p) in self.coords.iter().enumerate() {
            let _ = write!(s, "{} {} {}", p[0], p[1], p[2]);
            for f in self.features.row(i) {
                let _ = write!(s, " {f}");
            }
            if let Some(l) = &self.labels {
                let _ = write!(s, " {}", l[i]);
            }
            s.push('\n');
        }
        s
    }
}

/// One class id per line, in point order.
pub fn format_predictions(pred: &[usize]) -> String {
    pred.iter().map(|p| format!("{p}\n")).collect()
}

/// Parameters of the clustered-blob generator.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobConfig {
    pub blobs: usize,
    pub points_per_blob: usize,
    /// Standard deviation of the noise added to the one-hot features.
    pub noise: f64,
    /// Spatial standard deviation of each blob inside the unit cube.
    pub spread: f64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            blobs: 4,
            points_per_blob: 32,
            noise: 1.0,
            spread: 0.12,
        }
    }
}

/// Gaussian blobs with centers uniform in the unit cube; each point's label is its blob
/// id and its features are a noisy one-hot of that id followed by a constant 1.
pub fn synthetic_blobs(config: &BlobConfig, rng: &mut impl Rng) -> Result<PointCloud> {
    if config.blobs == 0 || config.points_per_blob == 0 {
        return Err(Error::InvalidArgument(
            "need at least one blob and one point".into(),
        ));
    }
    let spatial = Normal::new(0.0, config.spread)
        .map_err(|e| Error::InvalidArgument(format!("spread: {e}")))?;
    let feature = Normal::new(0.0, config.noise)
        .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
    let centers: Vec<[f64; 3]> = (0..config.blobs)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    let n = config.blobs * config.points_per_blob;
    let c = config.blobs + 1;
    let mut coords = Vec::with_capacity(n);
    let mut feats = Vec::with_capacity(n * c);
    let mut labels = Vec::with_capacity(n);
    for (b, center) in centers.iter().enumerate() {
        for _ in 0..config.points_per_blob {
            coords.push([
                center[0] + spatial.sample(rng),
                center[1] + spatial.sample(rng),
                center[2] + spatial.sample(rng),
            ]);
            for k in 0..config.blobs {
                let hot = if k == b { 1.0 } else { 0.0 };
                feats.push(hot + feature.sample(rng));
            }
            feats.push(1.0);
            labels.push(b);
        }
    }
    PointCloud::new(coords, Matrix::from_vec(n, c, feats)?, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn text_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = synthetic_blobs(&BlobConfig::default(), &mut rng).unwrap();
        let back = PointCloud::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn parse_without_labels() {
        let c = PointCloud::parse("#cols 1 0\n0 0 0 2.5\n\n1 2 3 -1\n").unwrap();
        assert_eq!(c.n_points(), 2);
        assert_eq!(c.features().column(0), vec![2.5, -1.0]);
        assert!(c.labels().is_none());
    }

    #[test]
    fn parse_errors() {
        assert!(PointCloud::parse("").is_err());
        assert!(PointCloud::parse("#cols 1\n").is_err());
        assert!(PointCloud::parse("#cols 1 1\n0 0 0 1\n").is_err());
        assert!(PointCloud::parse("#cols 0 0\n0 x 0\n").is_err());
        assert!(PointCloud::parse("#cols 0 0\n0 nan 0\n").is_err());
    }

    #[test]
    fn generator_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = BlobConfig {
            blobs: 3,
            points_per_blob: 5,
            noise: 0.0,
            spread: 0.1,
        };
        let c = synthetic_blobs(&cfg, &mut rng).unwrap();
        assert_eq!(c.n_points(), 15);
        assert_eq!(c.num_features(), 4);
        let l = c.labels().unwrap();
        assert_eq!(c.features()[(7, l[7])], 1.0);
        assert_eq!(c.features()[(7, 3)], 1.0);
    }

    #[test]
    fn predictions_format() {
        assert_eq!(format_predictions(&[2, 0, 1]), "2\n0\n1\n");
    }
}
