//! Imprecise BNNs: train one posterior per (prior, likelihood) pair and reason
//! with the resulting finite set of predictive distributions.

mod credible;
mod predictive;
mod region;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnn::{train_vi, Dataset, GaussianPriorSpec, Head, MeanFieldPosterior, MlpArchitecture, PosteriorDocument, TrainConfig};
use crate::error::{Error, Result};
use crate::prob::{derive_seed, kl_diag_gaussians};

pub use credible::{credible_set, imprecise_credible_set, imprecise_credible_set_of, mass_of, CredibleLabelSet};
pub use predictive::{
    bonferroni_alpha, hdr_1d, ihdr, ihdr_box, predictive_au_eu, predictive_credal_set, PredictiveCredalSet, RegionBox,
    DEFAULT_N_MC,
};
pub use region::{
    empirical_shortest_hdr, gaussian_hdr, grid_density_hdr, normal_quantile, HdrMethod, Interval, Region1D,
    KDE_GRID_POINTS, MIN_HDR_SAMPLES,
};

/// Largest number of priors or likelihoods in one elicitation set.
pub const MAX_SET_SIZE: usize = 8;
/// Largest number of trained posteriors.
pub const MAX_POSTERIORS: usize = 64;
/// Pairwise KL below which a trained set is flagged as collapsed.
pub const DEGENERACY_KL: f64 = 1e-3;

fn check_set_size(kind: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(format!("{kind} set is empty")));
    }
    if n > MAX_SET_SIZE {
        return Err(Error::InvalidArgument(format!(
            "{kind} set has {n} members, at most {MAX_SET_SIZE} allowed"
        )));
    }
    Ok(())
}

/// Finite set of plausible weight priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GaussianPriorSpec>", into = "Vec<GaussianPriorSpec>")]
pub struct PriorSet {
    members: Vec<GaussianPriorSpec>,
}

impl TryFrom<Vec<GaussianPriorSpec>> for PriorSet {
    type Error = Error;

    fn try_from(members: Vec<GaussianPriorSpec>) -> Result<Self> {
        Self::new(members)
    }
}

impl From<PriorSet> for Vec<GaussianPriorSpec> {
    fn from(s: PriorSet) -> Self {
        s.members
    }
}

impl PriorSet {
    pub fn new(members: Vec<GaussianPriorSpec>) -> Result<Self> {
        check_set_size("prior", members.len())?;
        for (i, p) in members.iter().enumerate() {
            p.validate()?;
            if let Some(j) = members[..i].iter().position(|q| q.same_as(p)) {
                return Err(Error::InvalidArgument(format!("priors {j} and {i} coincide")));
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[GaussianPriorSpec] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// One likelihood: a network architecture plus, for regression heads, a fixed
/// observation noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodSpec {
    pub architecture: MlpArchitecture,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_var: Option<f64>,
}

impl LikelihoodSpec {
    pub fn regression(architecture: MlpArchitecture, noise_var: f64) -> Self {
        Self {
            architecture,
            noise_var: Some(noise_var),
        }
    }

    pub fn classification(architecture: MlpArchitecture) -> Self {
        Self {
            architecture,
            noise_var: None,
        }
    }

    fn validate(&self) -> Result<()> {
        match (self.architecture.head(), self.noise_var) {
            (Head::GaussianRegression, Some(v)) if v.is_finite() && v > 0.0 => Ok(()),
            (Head::GaussianRegression, _) => Err(Error::InvalidArgument(
                "regression likelihoods need a positive noise_var".into(),
            )),
            (Head::CategoricalSoftmax, None) => Ok(()),
            (Head::CategoricalSoftmax, Some(_)) => Err(Error::InvalidArgument(
                "categorical likelihoods take no noise_var".into(),
            )),
        }
    }
}

/// Finite set of plausible likelihoods sharing input width, output width and
/// head type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LikelihoodSpec>", into = "Vec<LikelihoodSpec>")]
pub struct LikelihoodSet {
    members: Vec<LikelihoodSpec>,
}

impl TryFrom<Vec<LikelihoodSpec>> for LikelihoodSet {
    type Error = Error;

    fn try_from(members: Vec<LikelihoodSpec>) -> Result<Self> {
        Self::new(members)
    }
}

impl From<LikelihoodSet> for Vec<LikelihoodSpec> {
    fn from(s: LikelihoodSet) -> Self {
        s.members
    }
}

impl LikelihoodSet {
    pub fn new(members: Vec<LikelihoodSpec>) -> Result<Self> {
        check_set_size("likelihood", members.len())?;
        let first = &members[0].architecture;
        for (i, l) in members.iter().enumerate() {
            l.validate()?;
            let a = &l.architecture;
            if a.input_dim() != first.input_dim() || a.output_dim() != first.output_dim() || a.head() != first.head() {
                return Err(Error::InvalidArgument(format!(
                    "likelihood {i} disagrees with likelihood 0 on input width, output width or head"
                )));
            }
            if let Some(j) = members[..i].iter().position(|m| m == l) {
                return Err(Error::InvalidArgument(format!("likelihoods {j} and {i} coincide")));
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[LikelihoodSpec] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn head(&self) -> Head {
        self.members[0].architecture.head()
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].architecture.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.members[0].architecture.output_dim()
    }
}

/// Seed used to train the member built from prior `i` and likelihood `j`.
pub fn member_seed(seed: u64, prior_index: usize, likelihood_index: usize) -> u64 {
    derive_seed(seed, &[prior_index as u64, likelihood_index as u64])
}

/// A trained posterior and the elicitation pair it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMember {
    pub prior_index: usize,
    pub likelihood_index: usize,
    pub posterior: MeanFieldPosterior,
}

/// Raised when all trained posteriors are practically the same distribution,
/// in which case the set understates epistemic uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyWarning {
    pub max_pairwise_kl: f64,
    pub threshold: f64,
}

/// Posteriors for every (prior, likelihood) pair, prior-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorCredalSet {
    members: Vec<PosteriorMember>,
    degeneracy: Option<DegeneracyWarning>,
}

impl PosteriorCredalSet {
    /// Wraps already trained members and runs the degeneracy check.
    pub fn new(members: Vec<PosteriorMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("posterior set is empty".into()));
        }
        if members.len() > MAX_POSTERIORS {
            return Err(Error::InvalidArgument(format!(
                "{} posteriors exceed the cap of {MAX_POSTERIORS}",
                members.len()
            )));
        }
        let a0 = members[0].posterior.architecture();
        if members.iter().any(|m| {
            let a = m.posterior.architecture();
            a.input_dim() != a0.input_dim() || a.output_dim() != a0.output_dim() || a.head() != a0.head()
        }) {
            return Err(Error::InvalidArgument(
                "posteriors disagree on input width, output width or head".into(),
            ));
        }
        let posteriors: Vec<&MeanFieldPosterior> = members.iter().map(|m| &m.posterior).collect();
        let degeneracy = check_degeneracy(&posteriors)?;
        if let Some(w) = degeneracy {
            log::warn!(
                "all {} posteriors lie within KL {:.3e} of each other; epistemic uncertainty is likely underestimated",
                members.len(),
                w.max_pairwise_kl
            );
        }
        Ok(Self { members, degeneracy })
    }

    pub fn members(&self) -> &[PosteriorMember] {
        &self.members
    }

    pub fn posteriors(&self) -> impl Iterator<Item = &MeanFieldPosterior> {
        self.members.iter().map(|m| &m.posterior)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn degeneracy(&self) -> Option<DegeneracyWarning> {
        self.degeneracy
    }

    pub fn head(&self) -> Head {
        self.members[0].posterior.architecture().head()
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].posterior.architecture().input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.members[0].posterior.architecture().output_dim()
    }
}

/// Flags a set of two or more posteriors whose pairwise KL divergences (both
/// directions) all fall below [`DEGENERACY_KL`]. Posteriors over different
/// architectures are never considered degenerate.
pub fn check_degeneracy(posteriors: &[&MeanFieldPosterior]) -> Result<Option<DegeneracyWarning>> {
    if posteriors.len() < 2 {
        return Ok(None);
    }
    let arch = posteriors[0].architecture();
    if posteriors.iter().any(|p| p.architecture() != arch) {
        return Ok(None);
    }
    let gaussians = posteriors.iter().map(|p| p.as_gaussian()).collect::<Result<Vec<_>>>()?;
    let mut max_kl = 0.0f64;
    for (i, a) in gaussians.iter().enumerate() {
        for (j, b) in gaussians.iter().enumerate() {
            if i != j {
                max_kl = max_kl.max(kl_diag_gaussians(a, b)?);
                if max_kl >= DEGENERACY_KL {
                    return Ok(None);
                }
            }
        }
    }
    Ok(Some(DegeneracyWarning {
        max_pairwise_kl: max_kl,
        threshold: DEGENERACY_KL,
    }))
}

/// Trains one posterior per (prior, likelihood) pair, in parallel.
///
/// Member `(i, j)` uses `cfg` with its seed replaced by
/// [`member_seed`]`(cfg.seed, i, j)` and, for regression, its likelihood
/// noise variance replaced by likelihood `j`'s.
pub fn train_ibnn(
    priors: &PriorSet,
    likelihoods: &LikelihoodSet,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<PosteriorCredalSet> {
    let n = priors.len() * likelihoods.len();
    if n > MAX_POSTERIORS {
        return Err(Error::InvalidArgument(format!(
            "{n} prior/likelihood pairs exceed the cap of {MAX_POSTERIORS}"
        )));
    }
    cfg.validate()?;
    let pairs: Vec<(usize, usize)> = (0..priors.len())
        .flat_map(|i| (0..likelihoods.len()).map(move |j| (i, j)))
        .collect();
    let members = pairs
        .par_iter()
        .map(|&(i, j)| {
            let lik = &likelihoods.members()[j];
            let mut member_cfg = cfg.clone();
            member_cfg.seed = member_seed(cfg.seed, i, j);
            if let Some(v) = lik.noise_var {
                member_cfg.likelihood_noise_var = v;
            }
            log::debug!("training member prior={i} likelihood={j} seed={}", member_cfg.seed);
            let posterior = train_vi(&lik.architecture, &priors.members()[i], data, &member_cfg).map_err(|e| match e {
                Error::Diverged { epoch } => Error::MemberDiverged {
                    prior: i,
                    likelihood: j,
                    epoch,
                },
                other => other,
            })?;
            Ok(PosteriorMember {
                prior_index: i,
                likelihood_index: j,
                posterior,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PosteriorCredalSet::new(members)
}

pub const BUNDLE_FORMAT: &str = "ibnn.posterior_set";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleMember {
    prior_index: usize,
    likelihood_index: usize,
    posterior: PosteriorDocument,
}

/// JSON bundle of member posteriors with their provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Bundle {
    format: String,
    version: u32,
    members: Vec<BundleMember>,
}

impl PosteriorCredalSet {
    pub fn to_json(&self) -> Result<String> {
        let bundle = Bundle {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            members: self
                .members
                .iter()
                .map(|m| BundleMember {
                    prior_index: m.prior_index,
                    likelihood_index: m.likelihood_index,
                    posterior: PosteriorDocument::from(&m.posterior),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&bundle)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let bundle: Bundle = serde_json::from_str(s)?;
        if bundle.format != BUNDLE_FORMAT || bundle.version != BUNDLE_VERSION {
            return Err(Error::Format(format!(
                "expected {BUNDLE_FORMAT} v{BUNDLE_VERSION}, got {} v{}",
                bundle.format, bundle.version
            )));
        }
        let members = bundle
            .members
            .into_iter()
            .map(|m| {
                Ok(PosteriorMember {
                    prior_index: m.prior_index,
                    likelihood_index: m.likelihood_index,
                    posterior: m.posterior.try_into()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }
}
