//! JSON files for trained readouts.
//!
//! ```json
//! {
//!   "schema": "polyres.readout",
//!   "version": 1,
//!   "degree": 2,
//!   "n": 10,
//!   "l": 3,
//!   "ordering": "bias,lin,quad-lex-upper,cubic-lex-upper",
//!   "weights": [ ... l * feature_dim(n, degree) values, row-major ... ]
//! }
//! ```
//!
//! `weights` holds `l` rows of `feature_dim(n, degree)` values; row `i` maps the feature vector to output component `i`.
//! Features are `[1; r_j; r_j r_k (j <= k); r_j r_k r_l (j <= k <= l)]` in
//! lexicographic order, truncated at `degree`.

use std::fs;
use std::path::Path;

use polyres_core::readout::{feature_dim, FEATURE_ORDERING};
use polyres_core::{Matrix, PolyDegree, PolyReadout};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const READOUT_SCHEMA: &str = "polyres.readout";
pub const READOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutFile {
    pub schema: String,
    pub version: u32,
    pub degree: PolyDegree,
    pub n: usize,
    pub l: usize,
    pub ordering: String,
    pub weights: Vec<f64>,
}

impl From<&PolyReadout> for ReadoutFile {
    fn from(r: &PolyReadout) -> Self {
        Self {
            schema: READOUT_SCHEMA.into(),
            version: READOUT_VERSION,
            degree: r.degree(),
            n: r.n(),
            l: r.l(),
            ordering: FEATURE_ORDERING.into(),
            weights: r.weights().transpose().as_slice().to_vec(),
        }
    }
}

impl ReadoutFile {
    pub fn into_readout(self) -> Result<PolyReadout> {
        let bad = |m: String| HarnessError::Config(format!("readout file: {m}"));
        if self.schema != READOUT_SCHEMA || self.version != READOUT_VERSION {
            return Err(bad(format!(
                "unsupported schema {} v{}",
                self.schema, self.version
            )));
        }
        if self.ordering != FEATURE_ORDERING {
            return Err(bad(format!("unknown feature ordering {:?}", self.ordering)));
        }
        let d = feature_dim(self.n, self.degree);
        if self.weights.len() != self.l * d {
            return Err(bad(format!(
                "expected {} weights, found {}",
                self.l * d,
                self.weights.len()
            )));
        }
        let w = Matrix::new(self.l, d, self.weights)?.transpose();
        Ok(PolyReadout::from_weights(self.degree, self.n, w)?)
    }
}

pub fn save_readout(readout: &PolyReadout, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&ReadoutFile::from(readout)).expect("readout serializes");
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

pub fn load_readout(path: &Path) -> Result<PolyReadout> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let file: ReadoutFile = serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.into(),
        source,
    })?;
    file.into_readout()
}
