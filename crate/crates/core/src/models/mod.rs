//! The three hierarchical models: data simulation and the bound
//! (model, data, prior) log-posterior on the unconstrained scale.

mod density;
mod io;
mod simulate;

pub use density::{BoundTarget, LogDensity, BETA_PRIOR_SD_FACTOR, SIGMA2_PRIOR_A, SIGMA2_PRIOR_B};
pub use io::{write_dataset_csv, DatasetMetadata};
pub use simulate::{
    simulate_model1, simulate_model2, simulate_model3, standardize, DEFAULT_AGES,
    DEFAULT_SCHOOL_SIGMAS,
};

use serde::{Deserialize, Serialize};

use crate::Real;

/// Serialized as the model number; JSON accepts `1` or `"1"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "ModelNumber")]
pub enum ModelKind {
    /// Eight-schools style: known per-group standard errors.
    M1,
    /// Longitudinal random intercepts with a common slope.
    M2,
    /// Multiple outcomes with random slopes and random subject effects.
    M3,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelNumber {
    Int(u64),
    Text(String),
}

impl TryFrom<ModelNumber> for ModelKind {
    type Error = String;

    fn try_from(v: ModelNumber) -> std::result::Result<Self, String> {
        let n = match &v {
            ModelNumber::Int(n) => u8::try_from(*n).ok(),
            ModelNumber::Text(s) => s.trim().parse().ok(),
        };
        n.and_then(Self::from_number)
            .ok_or_else(|| "model must be 1, 2 or 3".to_string())
    }
}

impl From<ModelKind> for u8 {
    fn from(m: ModelKind) -> u8 {
        m.number()
    }
}

impl ModelKind {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(ModelKind::M1),
            2 => Some(ModelKind::M2),
            3 => Some(ModelKind::M3),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            ModelKind::M1 => 1,
            ModelKind::M2 => 2,
            ModelKind::M3 => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Model1Data<T: Real> {
    pub ybar: Vec<T>,
    pub sigma: Vec<T>,
    /// Generating group effects, kept for debugging only.
    #[serde(default)]
    pub theta_true: Vec<T>,
}

impl<T: Real> Model1Data<T> {
    pub fn groups(&self) -> usize {
        self.ybar.len()
    }
}

/// Row-major `n × J` outcomes, with the `J` centered ages shared by all subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Model2Data<T: Real> {
    pub y: Vec<T>,
    pub x: Vec<T>,
    pub n: usize,
    pub j: usize,
}

/// Row-major `n × J` outcomes, with one standardized covariate per subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Model3Data<T: Real> {
    pub y: Vec<T>,
    pub x: Vec<T>,
    pub n: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum Dataset<T: Real> {
    M1(Model1Data<T>),
    M2(Model2Data<T>),
    M3(Model3Data<T>),
}

impl<T: Real> Dataset<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Dataset::M1(_) => ModelKind::M1,
            Dataset::M2(_) => ModelKind::M2,
            Dataset::M3(_) => ModelKind::M3,
        }
    }

    /// FNV-1a over the bit patterns of every stored value.
    pub fn content_hash(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut feed = |x: u64| {
            for byte in x.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        let feed_all = |xs: &[T], feed: &mut dyn FnMut(u64)| {
            feed(xs.len() as u64);
            for x in xs {
                feed(x.as_f64().to_bits());
            }
        };
        match self {
            Dataset::M1(d) => {
                feed(1);
                feed_all(&d.ybar, &mut feed);
                feed_all(&d.sigma, &mut feed);
            }
            Dataset::M2(d) => {
                feed(2);
                feed_all(&d.y, &mut feed);
                feed_all(&d.x, &mut feed);
            }
            Dataset::M3(d) => {
                feed(3);
                feed_all(&d.y, &mut feed);
                feed_all(&d.x, &mut feed);
            }
        }
        h
    }
}

/// A simulated dataset together with what generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SimulatedDataset<T: Real> {
    pub data: Dataset<T>,
    pub truth: TrueParams<T>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrueParams<T: Real> {
    pub tau: Vec<T>,
    pub beta0: Option<T>,
    pub beta1: Option<T>,
    pub sigma: Option<T>,
}
