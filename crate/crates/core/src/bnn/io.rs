//! Versioned JSON form of a trained posterior.

use serde::{Deserialize, Serialize};

use super::{MeanFieldPosterior, MlpArchitecture, TrainingMetadata};
use crate::error::{Error, Result};

pub const POSTERIOR_FORMAT: &str = "ibnn.posterior";
pub const POSTERIOR_VERSION: u32 = 1;

/// On-disk posterior. Floats are written in shortest round-trip form, so
/// reading a document back reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorDocument {
    pub format: String,
    pub version: u32,
    pub architecture: MlpArchitecture,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_var: Option<f64>,
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
    pub metadata: TrainingMetadata,
}

impl From<&MeanFieldPosterior> for PosteriorDocument {
    fn from(p: &MeanFieldPosterior) -> Self {
        Self {
            format: POSTERIOR_FORMAT.to_string(),
            version: POSTERIOR_VERSION,
            architecture: p.architecture.clone(),
            noise_var: p.noise_var,
            mean: p.mean.clone(),
            log_var: p.log_var.clone(),
            metadata: p.metadata.clone(),
        }
    }
}

impl TryFrom<PosteriorDocument> for MeanFieldPosterior {
    type Error = Error;

    fn try_from(doc: PosteriorDocument) -> Result<Self> {
        if doc.format != POSTERIOR_FORMAT || doc.version != POSTERIOR_VERSION {
            return Err(Error::Format(format!(
                "expected {POSTERIOR_FORMAT} v{POSTERIOR_VERSION}, got {} v{}",
                doc.format, doc.version
            )));
        }
        MeanFieldPosterior::new(doc.architecture, doc.mean, doc.log_var, doc.noise_var, doc.metadata)
    }
}

impl MeanFieldPosterior {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PosteriorDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<PosteriorDocument>(s)?.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::{Activation, Head};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn json_round_trip_is_exact(
            mean in proptest::collection::vec(-1e6f64..1e6, 9),
            log_var in proptest::collection::vec(-40f64..5.0, 9),
            noise in 1e-9f64..10.0,
            elbo in -1e9f64..1e9,
        ) {
            let arch = MlpArchitecture::new(vec![2, 2, 1], Activation::Relu, Head::GaussianRegression).unwrap();
            let post = MeanFieldPosterior::new(
                arch,
                mean,
                log_var,
                Some(noise),
                TrainingMetadata { seed: 7, final_elbo: elbo, epochs: 3, elbo_history: vec![elbo, elbo / 3.0] },
            ).unwrap();
            let json = post.to_json().unwrap();
            let back = MeanFieldPosterior::from_json(&json).unwrap();
            prop_assert_eq!(&back, &post);
            prop_assert_eq!(back.to_json().unwrap(), json);
        }
    }

    #[test]
    fn rejects_wrong_version_and_unknown_keys() {
        let arch = MlpArchitecture::new(vec![1, 2], Activation::Relu, Head::CategoricalSoftmax).unwrap();
        let p = arch.param_count();
        let post = MeanFieldPosterior::new(
            arch,
            vec![0.0; p],
            vec![0.0; p],
            None,
            TrainingMetadata {
                seed: 0,
                final_elbo: 0.0,
                epochs: 0,
                elbo_history: vec![],
            },
        )
        .unwrap();
        let json = post.to_json().unwrap();
        let bumped = json.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(MeanFieldPosterior::from_json(&bumped), Err(Error::Format(_))));
        let extra = json.replacen('{', "{\"surprise\": 1,", 1);
        assert!(MeanFieldPosterior::from_json(&extra).is_err());
    }
}
