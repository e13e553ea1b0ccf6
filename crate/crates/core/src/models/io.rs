use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Dataset, ModelKind, SimulatedDataset, TrueParams};
use crate::error::Result;
use crate::Real;

/// JSON sidecar describing a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DatasetMetadata<T: Real> {
    pub model: ModelKind,
    pub truth: TrueParams<T>,
    pub seed: u64,
}

impl<T: Real> From<&SimulatedDataset<T>> for DatasetMetadata<T> {
    fn from(s: &SimulatedDataset<T>) -> Self {
        Self {
            model: s.data.kind(),
            truth: s.truth.clone(),
            seed: s.seed,
        }
    }
}

/// Appends `dataset` in long format with columns `dataset_id,i,j,y,x`
/// (1-based indices). Set `header` for the first dataset in a file.
///
/// Model 1 rows use `i = 1`, `j` the group, `y = ȳ_j` and `x = σ_j`.
/// Model 2 rows carry the age in `x`; model 3 rows the subject covariate.
pub fn write_dataset_csv<T: Real, W: Write>(
    out: W,
    dataset_id: usize,
    dataset: &Dataset<T>,
    header: bool,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        w.write_record(["dataset_id", "i", "j", "y", "x"])?;
    }
    let mut row = |i: usize, j: usize, y: T, x: T| {
        w.write_record([
            dataset_id.to_string(),
            i.to_string(),
            j.to_string(),
            y.as_f64().to_string(),
            x.as_f64().to_string(),
        ])
    };
    match dataset {
        Dataset::M1(d) => {
            for (k, (&y, &s)) in d.ybar.iter().zip(&d.sigma).enumerate() {
                row(1, k + 1, y, s)?;
            }
        }
        Dataset::M2(d) => {
            for i in 0..d.n {
                for k in 0..d.j {
                    row(i + 1, k + 1, d.y[i * d.j + k], d.x[k])?;
                }
            }
        }
        Dataset::M3(d) => {
            for i in 0..d.n {
                for k in 0..d.j {
                    row(i + 1, k + 1, d.y[i * d.j + k], d.x[i])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
