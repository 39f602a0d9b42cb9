//! The shared scoring interface and the textual metric descriptors that
//! select a scorer.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use crate::baselines::{self, SsimConfig};
use crate::connectivity::{self, ConnectivityKernel, DogProfile, GaussianProfile, DEFAULT_TRUNCATION};
use crate::corpus::LoadedPair;
use crate::error::{Error, Result};
use crate::geometry::GrayImage;
use crate::regression::{self, TileJacobian, TrainingConfig};

/// Whether larger scores mean more different or more similar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Distance,
    Similarity,
}

impl Orientation {
    /// `+1` for distances, `−1` for similarities.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Distance => 1.0,
            Orientation::Similarity => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Orientation::Distance => "distance",
            Orientation::Similarity => "similarity",
        }
    }
}

pub trait PairScorer: Send + Sync {
    fn label(&self) -> String;
    fn orientation(&self) -> Orientation;
    fn score(&self, reference: &GrayImage, degraded: &GrayImage) -> Result<f64>;
}

/// A model that must be fitted to rated pairs before it can score.
pub trait Trainer: Send + Sync {
    fn label(&self) -> String;
    fn fit(&self, pairs: &[LoadedPair], seed: u64) -> Result<Arc<dyn PairScorer>>;
}

pub struct EuclideanScorer;

impl PairScorer for EuclideanScorer {
    fn label(&self) -> String {
        "euclid".into()
    }
    fn orientation(&self) -> Orientation {
        Orientation::Distance
    }
    fn score(&self, reference: &GrayImage, degraded: &GrayImage) -> Result<f64> {
        baselines::euclidean_metric(reference, degraded)
    }
}

pub struct SsimScorer(pub SsimConfig);

impl PairScorer for SsimScorer {
    fn label(&self) -> String {
        "ssim".into()
    }
    fn orientation(&self) -> Orientation {
        Orientation::Similarity
    }
    fn score(&self, reference: &GrayImage, degraded: &GrayImage) -> Result<f64> {
        baselines::ssim(reference, degraded, &self.0)
    }
}

pub struct KernelScorer {
    pub label: String,
    pub kernel: ConnectivityKernel,
}

impl PairScorer for KernelScorer {
    fn label(&self) -> String {
        self.label.clone()
    }
    fn orientation(&self) -> Orientation {
        Orientation::Distance
    }
    fn score(&self, reference: &GrayImage, degraded: &GrayImage) -> Result<f64> {
        connectivity::score_pair(reference, degraded, &self.kernel)
    }
}

pub struct JacobianScorer {
    pub label: String,
    pub jacobian: TileJacobian,
    pub crop: bool,
}

impl PairScorer for JacobianScorer {
    fn label(&self) -> String {
        self.label.clone()
    }
    fn orientation(&self) -> Orientation {
        Orientation::Distance
    }
    fn score(&self, reference: &GrayImage, degraded: &GrayImage) -> Result<f64> {
        regression::tiled_distance_with(reference, degraded, &self.jacobian, self.crop)
    }
}

/// Fits a tile Jacobian; the seed passed to `fit` overrides `config.seed`.
pub struct JacobianTrainer {
    pub label: String,
    pub config: TrainingConfig,
}

impl Trainer for JacobianTrainer {
    fn label(&self) -> String {
        self.label.clone()
    }
    fn fit(&self, pairs: &[LoadedPair], seed: u64) -> Result<Arc<dyn PairScorer>> {
        let cfg = TrainingConfig {
            seed,
            ..self.config.clone()
        };
        let (jacobian, _) = regression::train_jacobian(pairs, &cfg)?;
        Ok(Arc::new(JacobianScorer {
            label: self.label.clone(),
            jacobian,
            crop: cfg.crop,
        }))
    }
}

/// Parsed metric descriptor.
///
/// Grammar: `euclid | ssim | gauss:<sigma> | dog:<center>,<surround>,<alpha>
/// | jacobian:<path> | train[:<iterations>]`.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Euclid,
    Ssim,
    Gauss { sigma: f64 },
    Dog { center: f64, surround: f64, alpha: f64 },
    Jacobian { path: PathBuf },
    Train { iterations: usize },
}

impl MetricSpec {
    pub fn is_trained(&self) -> bool {
        matches!(self, MetricSpec::Train { .. })
    }

    pub fn scorer(&self) -> Result<Arc<dyn PairScorer>> {
        let label = self.to_string();
        Ok(match self {
            MetricSpec::Euclid => Arc::new(EuclideanScorer),
            MetricSpec::Ssim => Arc::new(SsimScorer(SsimConfig::default())),
            MetricSpec::Gauss { sigma } => Arc::new(KernelScorer {
                label,
                kernel: connectivity::build_kernel(GaussianProfile::new(*sigma)?, DEFAULT_TRUNCATION)?,
            }),
            MetricSpec::Dog {
                center,
                surround,
                alpha,
            } => Arc::new(KernelScorer {
                label,
                kernel: connectivity::build_kernel(DogProfile::new(*center, *surround, *alpha)?, DEFAULT_TRUNCATION)?,
            }),
            MetricSpec::Jacobian { path } => Arc::new(JacobianScorer {
                label,
                jacobian: regression::load_jacobian(path)?,
                crop: false,
            }),
            MetricSpec::Train { .. } => {
                return Err(Error::InvalidParameter(format!("`{self}` must be trained before scoring")));
            }
        })
    }

    pub fn trainer(&self) -> Option<Arc<dyn Trainer>> {
        match self {
            MetricSpec::Train { iterations } => Some(Arc::new(JacobianTrainer {
                label: self.to_string(),
                config: TrainingConfig {
                    iterations: *iterations,
                    ..TrainingConfig::default()
                },
            })),
            _ => None,
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSpec::Euclid => write!(f, "euclid"),
            MetricSpec::Ssim => write!(f, "ssim"),
            MetricSpec::Gauss { sigma } => write!(f, "gauss:{sigma}"),
            MetricSpec::Dog {
                center,
                surround,
                alpha,
            } => write!(f, "dog:{center},{surround},{alpha}"),
            MetricSpec::Jacobian { path } => write!(f, "jacobian:{}", path.display()),
            MetricSpec::Train { iterations } => write!(f, "train:{iterations}"),
        }
    }
}

fn parse_num(text: &str, what: &str, spec: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidParameter(format!("metric `{spec}`: {what} `{text}` is not a finite number")))
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let spec = match (head, arg) {
            ("euclid", None) => MetricSpec::Euclid,
            ("ssim", None) => MetricSpec::Ssim,
            ("gauss", Some(a)) => {
                let sigma = parse_num(a, "sigma", s)?;
                GaussianProfile::new(sigma)?;
                MetricSpec::Gauss { sigma }
            }
            ("dog", Some(a)) => {
                let parts: Vec<&str> = a.split(',').collect();
                let [c, su, al] = parts[..] else {
                    return Err(Error::InvalidParameter(format!(
                        "metric `{s}`: dog needs three values <center>,<surround>,<alpha>"
                    )));
                };
                let (center, surround, alpha) = (parse_num(c, "center", s)?, parse_num(su, "surround", s)?, parse_num(al, "alpha", s)?);
                DogProfile::new(center, surround, alpha)?;
                MetricSpec::Dog {
                    center,
                    surround,
                    alpha,
                }
            }
            ("jacobian", Some(a)) if !a.is_empty() => MetricSpec::Jacobian { path: PathBuf::from(a) },
            ("train", None) => MetricSpec::Train {
                iterations: TrainingConfig::default().iterations,
            },
            ("train", Some(a)) => MetricSpec::Train {
                iterations: a
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("metric `{s}`: iterations `{a}` is not an integer")))?,
            },
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown metric `{s}` (expected euclid, ssim, gauss:<sigma>, dog:<c>,<s>,<alpha>, jacobian:<path> or train[:<iters>])"
                )))
            }
        };
        Ok(spec)
    }
}

/// Parses a comma-separated list where `dog:` arguments keep their commas.
pub fn parse_metric_list(list: &str) -> Result<Vec<MetricSpec>> {
    let mut out: Vec<String> = Vec::new();
    for token in list.split(',') {
        let continues_dog = out
            .last()
            .is_some_and(|prev| prev.starts_with("dog:") && prev.matches(',').count() < 2);
        if continues_dog {
            let last = out.last_mut().expect("checked non-empty");
            last.push(',');
            last.push_str(token);
        } else {
            out.push(token.to_string());
        }
    }
    if out.iter().all(|t| t.trim().is_empty()) {
        return Err(Error::InvalidParameter("empty metric list".into()));
    }
    out.iter().map(|t| t.parse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for text in ["euclid", "ssim", "gauss:2", "gauss:0.9", "dog:3.6,5.2,0.7", "jacobian:out/j.txt", "train:500"] {
            let spec: MetricSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
            assert_eq!(spec.to_string().parse::<MetricSpec>().unwrap(), spec);
        }
        assert_eq!("train".parse::<MetricSpec>().unwrap(), MetricSpec::Train { iterations: 10_000 });
        assert_eq!(" gauss:2.0 ".parse::<MetricSpec>().unwrap(), MetricSpec::Gauss { sigma: 2.0 });
    }

    #[test]
    fn parse_rejections() {
        for bad in ["", "gauss", "gauss:-1", "gauss:x", "dog:1,2", "dog:1,2,3,4", "dog:1,2,-0.5", "jacobian:", "euclid:3", "cosine", "train:x"] {
            assert!(bad.parse::<MetricSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn metric_lists_keep_dog_commas() {
        let list = parse_metric_list("gauss:2.0,dog:3.6,5.2,0.7,euclid,ssim").unwrap();
        assert_eq!(list.len(), 4);
        assert_eq!(
            list[1],
            MetricSpec::Dog {
                center: 3.6,
                surround: 5.2,
                alpha: 0.7
            }
        );
        assert!(parse_metric_list("").is_err());
    }

    #[test]
    fn scorers_behave() {
        let a = GrayImage::from_fn(16, 16, |x, y| ((x * 13 + y * 29) % 256) as f64).unwrap();
        for spec in ["euclid", "gauss:2", "dog:3.6,5.2,0.7"] {
            let s = spec.parse::<MetricSpec>().unwrap().scorer().unwrap();
            assert_eq!(s.score(&a, &a).unwrap(), 0.0);
            assert_eq!(s.orientation(), Orientation::Distance);
        }
        let s = MetricSpec::Ssim.scorer().unwrap();
        assert_eq!(s.score(&a, &a).unwrap(), 1.0);
        assert_eq!(s.orientation().sign(), -1.0);
        assert!(MetricSpec::Train { iterations: 1 }.scorer().is_err());
        assert!(MetricSpec::Train { iterations: 1 }.trainer().is_some());
        assert!(MetricSpec::Euclid.trainer().is_none());
    }
}
