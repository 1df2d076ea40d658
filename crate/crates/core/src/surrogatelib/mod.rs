//! Seeded generators for the nine SurrogateLIB problem families.
//!
//! A recipe fixes everything: the data seed `F` drives problem data and the
//! training seed `G` drives predictor fabrication, so equal recipes give
//! byte-identical files.

mod fabricate;
mod families;

pub use fabricate::{fabricate_predictor, score_bounds, FabricateSpec};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::formulator::{embed_predictor, EmbedOptions, EmbeddingResult, FormulationError, ReluFormulation};
use crate::mip::{ConsId, MipModel, ModelError, ModelStats, VarId};
use crate::predictor::{Predictor, PredictorError};

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

fn invalid(msg: impl Into<String>) -> SurrogateError {
    SurrogateError::InvalidRecipe(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Adversarial,
    Auto,
    City,
    Function,
    Palatable,
    Tree,
    Water,
    Wine,
    Workload,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::Adversarial,
        Family::Auto,
        Family::City,
        Family::Function,
        Family::Palatable,
        Family::Tree,
        Family::Water,
        Family::Wine,
        Family::Workload,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Adversarial => "adversarial",
            Family::Auto => "auto",
            Family::City => "city",
            Family::Function => "function",
            Family::Palatable => "palatable",
            Family::Tree => "tree",
            Family::Water => "water",
            Family::Wine => "wine",
            Family::Workload => "workload",
        }
    }

    /// Number of problem parameters in the `B` field.
    pub fn param_count(self) -> usize {
        match self {
            Family::Auto | Family::Palatable | Family::Workload => 0,
            Family::Wine => 2,
            _ => 1,
        }
    }

    /// Desk-scale defaults for `B`.
    pub fn default_params(self) -> Vec<usize> {
        match self {
            Family::Adversarial => vec![4],
            Family::City => vec![1],
            Family::Function => vec![2],
            Family::Tree => vec![3],
            Family::Water => vec![3],
            Family::Wine => vec![2, 3],
            Family::Auto | Family::Palatable | Family::Workload => vec![],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = SurrogateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredictorKind {
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "dt")]
    Dt,
    #[serde(rename = "gbdt")]
    Gbdt,
    #[serde(rename = "rf")]
    Rf,
    #[serde(rename = "mlp-sos")]
    MlpSos,
    #[serde(rename = "mlp-bigm")]
    MlpBigm,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 6] = [
        PredictorKind::Linear,
        PredictorKind::Dt,
        PredictorKind::Gbdt,
        PredictorKind::Rf,
        PredictorKind::MlpSos,
        PredictorKind::MlpBigm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::Linear => "linear",
            PredictorKind::Dt => "dt",
            PredictorKind::Gbdt => "gbdt",
            PredictorKind::Rf => "rf",
            PredictorKind::MlpSos => "mlp-sos",
            PredictorKind::MlpBigm => "mlp-bigm",
        }
    }

    pub fn relu_formulation(self) -> ReluFormulation {
        match self {
            PredictorKind::MlpSos => ReluFormulation::Sos1,
            _ => ReluFormulation::Bigm,
        }
    }

    /// Desk-scale defaults for `D`.
    pub fn default_params(self) -> Vec<usize> {
        match self {
            PredictorKind::Linear => vec![],
            PredictorKind::Dt => vec![3],
            PredictorKind::Gbdt | PredictorKind::Rf => vec![3, 2],
            PredictorKind::MlpSos | PredictorKind::MlpBigm => vec![1, 4],
        }
    }

    pub(crate) fn check_params(self, p: &[usize]) -> Result<(), SurrogateError> {
        let ok = match self {
            PredictorKind::Linear => p.is_empty(),
            PredictorKind::Dt => p.len() == 1 && p[0] >= 1,
            PredictorKind::Gbdt => p.len() == 2 && p[1] >= 1,
            PredictorKind::Rf => p.len() == 2 && p[0] >= 1 && p[1] >= 1,
            PredictorKind::MlpSos | PredictorKind::MlpBigm => p.len() == 2 && p[0] >= 1 && p[1] >= 1,
        };
        if ok {
            Ok(())
        } else {
            let want = match self {
                PredictorKind::Linear => "no parameters",
                PredictorKind::Dt => "depth >= 1",
                PredictorKind::Gbdt => "estimators and depth >= 1",
                PredictorKind::Rf => "estimators >= 1 and depth >= 1",
                _ => "layers >= 1 and layer size >= 1",
            };
            Err(invalid(format!("{} expects {want}, got {p:?}", self.as_str())))
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictorKind {
    type Err = SurrogateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PredictorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown predictor kind `{s}`")))
    }
}

/// Tag for fabricated predictors.
pub const SYNTH: &str = "synth";

/// Everything that determines one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecipe {
    pub family: Family,
    pub params: Vec<usize>,
    pub predictor: PredictorKind,
    pub predictor_params: Vec<usize>,
    pub framework: String,
    pub data_seed: u64,
    pub train_seed: u64,
}

impl InstanceRecipe {
    /// Recipe with default `B` and `D`, tagged as fabricated.
    pub fn new(family: Family, predictor: PredictorKind, data_seed: u64, train_seed: u64) -> Self {
        InstanceRecipe {
            family,
            params: family.default_params(),
            predictor,
            predictor_params: predictor.default_params(),
            framework: SYNTH.into(),
            data_seed,
            train_seed,
        }
    }

    pub fn with_params(mut self, params: Vec<usize>) -> Self {
        self.params = params;
        self
    }

    pub fn with_predictor_params(mut self, params: Vec<usize>) -> Self {
        self.predictor_params = params;
        self
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        let want = self.family.param_count();
        if self.params.len() != want {
            return Err(invalid(format!(
                "{} takes {want} problem parameter(s), got {:?}",
                self.family, self.params
            )));
        }
        if self.params.iter().any(|&p| p == 0) {
            return Err(invalid("problem parameters must be positive"));
        }
        if self.family == Family::Wine && self.params[1] < self.params[0] {
            return Err(invalid(format!(
                "wine needs at least as many vendors as blends, got n = {}, m = {}",
                self.params[0], self.params[1]
            )));
        }
        self.predictor.check_params(&self.predictor_params)?;
        if self.framework != SYNTH {
            return Err(invalid(format!(
                "framework `{}` needs exported predictors; generated instances use `{SYNTH}`",
                self.framework
            )));
        }
        Ok(())
    }
}

fn join(v: &[usize]) -> Option<String> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-"))
    }
}

/// `A_B_C_D_E_F_G.mps`, skipping empty `B` and `D`.
pub fn instance_name(r: &InstanceRecipe) -> String {
    let mut parts = vec![r.family.as_str().to_string()];
    parts.extend(join(&r.params));
    parts.push(r.predictor.as_str().to_string());
    parts.extend(join(&r.predictor_params));
    parts.push(r.framework.clone());
    parts.push(r.data_seed.to_string());
    parts.push(r.train_seed.to_string());
    format!("{}.mps", parts.join("_"))
}

/// One predictor embedded into the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub label: String,
    /// Index into [`Instance::predictors`].
    pub predictor: usize,
    pub opts: EmbedOptions,
    pub embedding: EmbeddingResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub label: String,
    pub predictor: usize,
    pub formulation: ReluFormulation,
    pub epsilon: f64,
    pub input_vars: Vec<String>,
    pub score_vars: Vec<String>,
    pub output_vars: Vec<String>,
    pub aux_vars: usize,
    pub constraints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub recipe: InstanceRecipe,
    pub counts: ModelStats,
    /// Constraints outside every embedding.
    pub problem_constraints: usize,
    /// Sampled problem data.
    pub data: Value,
    /// Interchange JSON of every distinct predictor.
    pub predictors: Vec<Value>,
    pub embeddings: Vec<EmbeddingRecord>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub model: MipModel,
    pub predictors: Vec<Predictor>,
    pub blocks: Vec<Block>,
    pub manifest: Manifest,
}

impl Instance {
    /// Ids of every constraint added by an embedding.
    pub fn embedding_constraints(&self) -> Vec<ConsId> {
        self.blocks.iter().flat_map(|b| b.embedding.constraints.iter().copied()).collect()
    }
}

/// Generation state shared by the family builders.
pub(crate) struct Gen<'r> {
    recipe: &'r InstanceRecipe,
    pub model: MipModel,
    pub data: ChaCha8Rng,
    pub record: Map<String, Value>,
    predictors: Vec<Predictor>,
    blocks: Vec<Block>,
}

impl<'r> Gen<'r> {
    fn new(recipe: &'r InstanceRecipe) -> Self {
        Gen {
            recipe,
            model: MipModel::new(),
            data: ChaCha8Rng::seed_from_u64(recipe.data_seed),
            record: Map::new(),
            predictors: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn param(&self, i: usize) -> usize {
        self.recipe.params[i]
    }

    pub fn note(&mut self, key: &str, v: impl Serialize) {
        self.record.insert(key.into(), serde_json::to_value(v).expect("data serializes"));
    }

    /// Fabricate the next predictor. Its stream depends only on `G` and its position.
    pub fn predictor(&mut self, spec: &FabricateSpec) -> Result<usize, SurrogateError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.recipe.train_seed);
        rng.set_stream(self.predictors.len() as u64 + 1);
        let p = fabricate::fabricate_with(self.recipe.predictor, &self.recipe.predictor_params, spec, &mut rng)?;
        self.predictors.push(p);
        Ok(self.predictors.len() - 1)
    }

    pub fn predictor_ref(&self, k: usize) -> &Predictor {
        &self.predictors[k]
    }

    pub fn embed(
        &mut self,
        label: &str,
        predictor: usize,
        inputs: &[VarId],
        outputs: Option<&[VarId]>,
    ) -> Result<&EmbeddingResult, SurrogateError> {
        let opts = EmbedOptions::default()
            .with_formulation(self.recipe.predictor.relu_formulation())
            .with_prefix(label);
        let embedding = embed_predictor(&mut self.model, &self.predictors[predictor], inputs, outputs, &opts)?;
        self.blocks.push(Block { label: label.into(), predictor, opts, embedding });
        Ok(&self.blocks.last().expect("just pushed").embedding)
    }

    fn finish(self) -> Instance {
        let name = instance_name(self.recipe);
        let names = |vs: &[VarId]| vs.iter().map(|&v| self.model.var(v).name.clone()).collect::<Vec<_>>();
        let embeddings: Vec<EmbeddingRecord> = self
            .blocks
            .iter()
            .map(|b| EmbeddingRecord {
                label: b.label.clone(),
                predictor: b.predictor,
                formulation: b.opts.relu_formulation,
                epsilon: b.opts.epsilon,
                input_vars: names(&b.embedding.input_vars),
                score_vars: names(&b.embedding.score_vars),
                output_vars: names(&b.embedding.output_vars),
                aux_vars: b.embedding.aux_vars.len(),
                constraints: b.embedding.constraints.iter().map(|&c| self.model.constraint_name(c).to_string()).collect(),
            })
            .collect();
        let counts = self.model.stats();
        let embedded: usize = embeddings.iter().map(|e| e.constraints.len()).sum();
        let predictors = self
            .predictors
            .iter()
            .map(|p| serde_json::from_str(&p.to_json()).expect("predictor JSON parses"))
            .collect();
        let manifest = Manifest {
            name: name.clone(),
            recipe: self.recipe.clone(),
            counts,
            problem_constraints: counts.constraints() - embedded,
            data: Value::Object(self.record),
            predictors,
            embeddings,
        };
        Instance { name, model: self.model, predictors: self.predictors, blocks: self.blocks, manifest }
    }
}

/// Build the instance described by `recipe`.
pub fn generate_instance(recipe: &InstanceRecipe) -> Result<Instance, SurrogateError> {
    recipe.validate()?;
    let mut g = Gen::new(recipe);
    match recipe.family {
        Family::Adversarial => families::adversarial(&mut g)?,
        Family::Auto => families::auto(&mut g)?,
        Family::City => families::city(&mut g)?,
        Family::Function => families::function(&mut g)?,
        Family::Palatable => families::palatable(&mut g)?,
        Family::Tree => families::tree_planting(&mut g)?,
        Family::Water => families::water(&mut g)?,
        Family::Wine => families::wine(&mut g)?,
        Family::Workload => families::workload(&mut g)?,
    }
    Ok(g.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_follow_the_scheme() {
        let r = InstanceRecipe::new(Family::Water, PredictorKind::Gbdt, 0, 1)
            .with_params(vec![5])
            .with_predictor_params(vec![3, 2]);
        assert_eq!(instance_name(&r), "water_5_gbdt_3-2_synth_0_1.mps");
        let r = InstanceRecipe::new(Family::Auto, PredictorKind::Linear, 1, 0);
        assert_eq!(instance_name(&r), "auto_linear_synth_1_0.mps");
        let r = InstanceRecipe::new(Family::Wine, PredictorKind::MlpSos, 0, 0)
            .with_predictor_params(vec![2, 16]);
        assert_eq!(instance_name(&r), "wine_2-3_mlp-sos_2-16_synth_0_0.mps");
    }

    #[test]
    fn parse_names() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        for k in PredictorKind::ALL {
            assert_eq!(k.as_str().parse::<PredictorKind>().unwrap(), k);
        }
        assert!("svm".parse::<PredictorKind>().is_err());
    }

    #[test]
    fn recipe_validation() {
        let ok = InstanceRecipe::new(Family::Wine, PredictorKind::Dt, 0, 0);
        assert!(ok.validate().is_ok());
        assert!(ok.clone().with_params(vec![3, 2]).validate().is_err());
        assert!(ok.clone().with_params(vec![3]).validate().is_err());
        assert!(ok.clone().with_predictor_params(vec![]).validate().is_err());
        let mut tagged = ok;
        tagged.framework = "sk".into();
        assert!(tagged.validate().is_err());
        let auto = InstanceRecipe::new(Family::Auto, PredictorKind::Linear, 0, 0).with_params(vec![2]);
        assert!(auto.validate().is_err());
    }
}
