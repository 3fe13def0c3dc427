//! End-to-end fit: additive screening, group-lasso partition, then jointly
//! trained constrained subnetworks. Also prediction, component curves and
//! model persistence.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{expand, BasisSpec, GroupId};
use crate::dataget::Dataset;
use crate::error::{Result, SdamiError};
use crate::grouplasso::{
    select_lambda2_cv, CvTable, EffectPartition, GroupLassoConfig, GroupLassoProblem,
};
use crate::net::{train_joint, ConstraintSpec, Mlp, OptimizerConfig, TrainReport, ARCH_DEFAULT};
use crate::spam::{default_path, lambda1_path_cp, AdditiveFit, CpTable, SpamConfig};
use crate::util::{derive_seed, mean};

pub const MODEL_SCHEMA: &str = "sdami-model";
pub const MODEL_VERSION: u64 = 1;
pub const MIN_SAMPLES: usize = 30;

/// Seed stream tags.
const TAG_CV: u64 = 1;
const TAG_TRAIN: u64 = 2;
const TAG_INIT: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub hidden_layers: Vec<usize>,
    pub kappa_main: f64,
    pub kappa_interaction: f64,
    pub optimizer: OptimizerConfig,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden_layers: ARCH_DEFAULT.to_vec(),
            kappa_main: 5.0,
            kappa_interaction: 5.0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub basis: BasisSpec,
    pub spam: SpamConfig,
    pub group_lasso: GroupLassoConfig,
    pub net: NetConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        self.net.optimizer.validate()?;
        if self.net.hidden_layers.contains(&0) {
            return Err(SdamiError::InvalidArgument(
                "hidden layer widths must be positive".into(),
            ));
        }
        if !(self.net.kappa_main > 0.0) || !(self.net.kappa_interaction > 0.0) {
            return Err(SdamiError::InvalidArgument(
                "kappa values must be > 0".into(),
            ));
        }
        if self.group_lasso.folds < 2 {
            return Err(SdamiError::InvalidArgument(
                "group lasso folds must be >= 2".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Hex SHA-256 of a value's JSON serialization.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// One trained component with its input standardization and constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Subnetwork {
    pub net: Mlp,
    pub input_center: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub constraint: ConstraintSpec,
}

impl Subnetwork {
    fn standardized(&self, group: GroupId, x: ArrayView2<f64>) -> Array2<f64> {
        let vars = group.variables();
        Array2::from_shape_fn((x.nrows(), vars.len()), |(i, c)| {
            (x[[i, vars[c]]] - self.input_center[c]) / self.input_scale[c]
        })
    }

    /// Raw component output on the full design `x`.
    pub fn evaluate(&self, group: GroupId, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.net.forward(self.standardized(group, x).view())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub screened: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdamiModel {
    pub intercept: f64,
    pub components: BTreeMap<GroupId, Subnetwork>,
    pub provenance: Provenance,
}

impl SdamiModel {
    pub fn main_nets(&self) -> impl Iterator<Item = (usize, &Subnetwork)> {
        self.components.iter().filter_map(|(g, s)| match g {
            GroupId::Main(j) => Some((*j, s)),
            GroupId::Pair(..) => None,
        })
    }

    pub fn interaction_nets(&self) -> impl Iterator<Item = ((usize, usize), &Subnetwork)> {
        self.components.iter().filter_map(|(g, s)| match g {
            GroupId::Pair(a, b) => Some(((*a, *b), s)),
            GroupId::Main(_) => None,
        })
    }

    pub fn main_set(&self) -> BTreeSet<usize> {
        self.main_nets().map(|(j, _)| j).collect()
    }

    pub fn interaction_groups(&self) -> Vec<(usize, usize)> {
        self.interaction_nets().map(|(p, _)| p).collect()
    }

    /// Variables referenced by any component.
    pub fn selected_variables(&self) -> BTreeSet<usize> {
        self.components.keys().flat_map(|g| g.variables()).collect()
    }

    pub fn is_intercept_only(&self) -> bool {
        self.components.is_empty()
    }

    /// `intercept + Σ components`.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if let Some(&max) = self.selected_variables().iter().next_back() {
            if x.ncols() <= max {
                return Err(SdamiError::DimensionMismatch(format!(
                    "model references column {} but input has {} columns",
                    max + 1,
                    x.ncols()
                )));
            }
        }
        let mut out = Array1::from_elem(x.nrows(), self.intercept);
        for (g, sub) in &self.components {
            out += &sub.evaluate(*g, x)?;
        }
        Ok(out)
    }

    /// One component on a grid, centered to mean zero over the grid points.
    pub fn component_curve(&self, group: GroupId, grid: &Grid) -> Result<ComponentCurve> {
        let sub = self
            .components
            .get(&group)
            .ok_or_else(|| SdamiError::InactiveGroup(group.to_string()))?;
        let points = grid.points();
        let width = group.variables().len();
        if points.first().map(|p| p.len()) != Some(width) {
            return Err(SdamiError::DimensionMismatch(format!(
                "grid of dimension {} for group {group} with {width} variables",
                points.first().map(|p| p.len()).unwrap_or(0)
            )));
        }
        let z = Array2::from_shape_fn((points.len(), width), |(i, c)| {
            (points[i][c] - sub.input_center[c]) / sub.input_scale[c]
        });
        let mut values = sub.net.forward(z.view())?;
        let m = mean(values.view());
        values.mapv_inplace(|v| v - m);
        Ok(ComponentCurve {
            group,
            points,
            values: values.to_vec(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile::from_model(self);
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<SdamiModel> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SdamiError::CorruptModel(e.to_string()))?;
        match value.get("schema").and_then(|s| s.as_str()) {
            Some(MODEL_SCHEMA) => {}
            _ => {
                return Err(SdamiError::CorruptModel(format!(
                    "missing schema id {MODEL_SCHEMA:?}"
                )))
            }
        }
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| SdamiError::CorruptModel("missing version".into()))?;
        if version != MODEL_VERSION {
            return Err(SdamiError::Version {
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| SdamiError::CorruptModel(e.to_string()))?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| SdamiError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SdamiModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SdamiError::io(path, e))?;
        SdamiModel::from_json(&text)
    }
}

/// Evaluation grid for a component.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Line(Vec<f64>),
    /// Cartesian product, first axis varying slowest.
    Surface(Vec<f64>, Vec<f64>),
}

impl Grid {
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            Grid::Line(xs) => xs.iter().map(|&x| vec![x]).collect(),
            Grid::Surface(xs, ys) => xs
                .iter()
                .flat_map(|&x| ys.iter().map(move |&y| vec![x, y]))
                .collect(),
        }
    }

    /// `count` equispaced points over `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentCurve {
    pub group: GroupId,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub screen_s: f64,
    pub partition_s: f64,
    pub train_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub software_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub n: usize,
    pub k: usize,
    pub screened: Vec<usize>,
    pub main_set: Vec<usize>,
    pub interaction_groups: Vec<(usize, usize)>,
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    pub cp_table: CpTable,
    pub cv_table: Option<CvTable>,
    pub screen_converged: bool,
    pub partition_converged: bool,
    pub partition_kkt_residual: f64,
    pub component_norms: BTreeMap<String, f64>,
    pub train: Option<TrainReport>,
    pub train_mse: f64,
    /// Wall-clock timings, kept apart from the reproducible fields.
    pub timings: StageTimings,
}

/// Stages 1 and 2 only.
#[derive(Debug, Clone)]
pub struct Selection {
    pub screen: AdditiveFit,
    pub cp_table: CpTable,
    pub partition: EffectPartition,
    pub cv_table: Option<CvTable>,
    pub screen_s: f64,
    pub partition_s: f64,
}

impl Selection {
    pub fn screened(&self) -> &BTreeSet<usize> {
        &self.screen.active_set
    }
}

fn check_data(data: &Dataset) -> Result<()> {
    data.validate()?;
    if data.n() < MIN_SAMPLES {
        return Err(SdamiError::InvalidArgument(format!(
            "at least {MIN_SAMPLES} samples are needed (got {})",
            data.n()
        )));
    }
    Ok(())
}

/// Stage 1 alone: screening with Cp-selected penalty.
pub fn screen(data: &Dataset, config: &PipelineConfig) -> Result<(AdditiveFit, CpTable)> {
    let groups: Vec<GroupId> = (0..data.k()).map(GroupId::Main).collect();
    let expansion = expand(data.x.view(), &config.basis, &groups)?;
    let path = default_path(&expansion, &data.y, &config.spam)?;
    lambda1_path_cp(&expansion, &data.y, &path, &config.spam)
}

/// Stage 2 alone on a given screened set.
pub fn partition(
    data: &Dataset,
    screened: &BTreeSet<usize>,
    config: &PipelineConfig,
    seed: u64,
) -> Result<(EffectPartition, Option<CvTable>)> {
    if screened.is_empty() {
        return Ok((EffectPartition::empty(0.0), None));
    }
    let problem = GroupLassoProblem::from_data(data.x.view(), &data.y, screened, &config.basis)?;
    let path = problem.default_path(&config.group_lasso);
    let (part, table) = select_lambda2_cv(
        &problem,
        config.group_lasso.folds,
        &path,
        derive_seed(seed, TAG_CV),
        &config.group_lasso,
    )?;
    Ok((part, Some(table)))
}

/// Stages 1 and 2: screened set and effect partition.
pub fn screen_and_partition(
    data: &Dataset,
    config: &PipelineConfig,
    seed: u64,
) -> Result<Selection> {
    check_data(data)?;
    config.validate()?;
    let t0 = Instant::now();
    let (screen_fit, cp_table) = screen(data, config).map_err(|e| e.in_stage("screening"))?;
    let screen_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let (part, cv_table) = partition(data, &screen_fit.active_set, config, seed)
        .map_err(|e| e.in_stage("partition"))?;
    Ok(Selection {
        screen: screen_fit,
        cp_table,
        partition: part,
        cv_table,
        screen_s,
        partition_s: t1.elapsed().as_secs_f64(),
    })
}

fn column_stats(x: ArrayView2<f64>, vars: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut center = Vec::with_capacity(vars.len());
    let mut scale = Vec::with_capacity(vars.len());
    for &j in vars {
        let col = x.column(j);
        let m = mean(col);
        let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64).sqrt();
        center.push(m);
        scale.push(if sd > 0.0 { sd } else { 1.0 });
    }
    (center, scale)
}

/// Stage 3: train one subnetwork per active group with bound `κ‖f̂_g‖ₙ`.
pub fn train_components(
    data: &Dataset,
    partition: &EffectPartition,
    config: &NetConfig,
    seed: u64,
) -> Result<(f64, BTreeMap<GroupId, Subnetwork>, Option<TrainReport>)> {
    let intercept = mean(data.y.view());
    let groups: Vec<GroupId> = partition
        .active_groups()
        .into_iter()
        .filter(|g| partition.component_norms.get(g).copied().unwrap_or(0.0) > 0.0)
        .collect();
    if groups.is_empty() {
        return Ok((intercept, BTreeMap::new(), None));
    }
    let mut nets = Vec::with_capacity(groups.len());
    let mut inputs = Vec::with_capacity(groups.len());
    let mut bounds = Vec::with_capacity(groups.len());
    let mut meta = Vec::with_capacity(groups.len());
    for (i, g) in groups.iter().enumerate() {
        let vars = g.variables();
        let (center, scale) = column_stats(data.x.view(), &vars);
        let kappa = if g.is_pair() {
            config.kappa_interaction
        } else {
            config.kappa_main
        };
        let constraint = ConstraintSpec::new(kappa, partition.component_norms[g])?;
        let z = Array2::from_shape_fn((data.n(), vars.len()), |(r, c)| {
            (data.x[[r, vars[c]]] - center[c]) / scale[c]
        });
        nets.push(Mlp::with_hidden(
            vars.len(),
            &config.hidden_layers,
            derive_seed(seed, TAG_INIT + i as u64),
        )?);
        inputs.push(z);
        bounds.push(constraint.bound());
        meta.push((center, scale, constraint));
    }
    let views: Vec<ArrayView2<f64>> = inputs.iter().map(|a| a.view()).collect();
    let report = train_joint(
        &mut nets,
        &views,
        &bounds,
        intercept,
        data.y.view(),
        &config.optimizer,
        derive_seed(seed, TAG_TRAIN),
    )?;
    let components = groups
        .into_iter()
        .zip(nets.into_iter().zip(meta))
        .map(|(g, (net, (input_center, input_scale, constraint)))| {
            (
                g,
                Subnetwork {
                    net,
                    input_center,
                    input_scale,
                    constraint,
                },
            )
        })
        .collect();
    Ok((intercept, components, Some(report)))
}

/// Full three-stage fit.
pub fn fit(data: &Dataset, config: &PipelineConfig, seed: u64) -> Result<(SdamiModel, FitReport)> {
    let sel = screen_and_partition(data, config, seed)?;
    let t2 = Instant::now();
    let (intercept, components, train) = train_components(data, &sel.partition, &config.net, seed)
        .map_err(|e| e.in_stage("training"))?;
    let train_s = t2.elapsed().as_secs_f64();
    let config_hash = config.hash();
    let lambda2 = sel.cv_table.as_ref().map(|_| sel.partition.lambda2);
    let model = SdamiModel {
        intercept,
        components,
        provenance: Provenance {
            lambda1: Some(sel.screen.lambda1),
            lambda2,
            seed,
            config_hash: config_hash.clone(),
            screened: sel.screened().iter().copied().collect(),
        },
    };
    let pred = model.predict(data.x.view())?;
    let d = &data.y - &pred;
    let train_mse = d.dot(&d) / data.n() as f64;
    let report = FitReport {
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config_hash,
        config: config.clone(),
        n: data.n(),
        k: data.k(),
        screened: sel.screened().iter().copied().collect(),
        main_set: model.main_set().into_iter().collect(),
        interaction_groups: model.interaction_groups(),
        lambda1: sel.screen.lambda1,
        lambda2,
        screen_converged: sel.screen.converged,
        partition_converged: sel.partition.converged,
        partition_kkt_residual: sel.partition.kkt_residual,
        component_norms: sel
            .partition
            .component_norms
            .iter()
            .filter(|(_, v)| **v > 0.0)
            .map(|(g, v)| (g.to_string(), *v))
            .collect(),
        cp_table: sel.cp_table,
        cv_table: sel.cv_table,
        train,
        train_mse,
        timings: StageTimings {
            screen_s: sel.screen_s,
            partition_s: sel.partition_s,
            train_s,
        },
    };
    Ok((model, report))
}

// ---- model file layout ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema: String,
    version: u64,
    intercept: f64,
    components: Vec<ComponentFile>,
    provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentFile {
    /// Zero-based column indices: one for a main effect, two for a pair.
    variables: Vec<usize>,
    layer_dims: Vec<usize>,
    /// Per layer, row-major `(out, in)`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    input_center: Vec<f64>,
    input_scale: Vec<f64>,
    kappa: f64,
    norm_scale: f64,
    bound: f64,
}

impl ModelFile {
    fn from_model(model: &SdamiModel) -> ModelFile {
        let components = model
            .components
            .iter()
            .map(|(g, s)| ComponentFile {
                variables: g.variables(),
                layer_dims: s.net.layer_dims.clone(),
                weights: s
                    .net
                    .weights
                    .iter()
                    .map(|w| w.iter().copied().collect())
                    .collect(),
                biases: s.net.biases.iter().map(|b| b.to_vec()).collect(),
                input_center: s.input_center.clone(),
                input_scale: s.input_scale.clone(),
                kappa: s.constraint.kappa,
                norm_scale: s.constraint.norm_scale,
                bound: s.constraint.bound(),
            })
            .collect();
        ModelFile {
            schema: MODEL_SCHEMA.to_string(),
            version: MODEL_VERSION,
            intercept: model.intercept,
            components,
            provenance: model.provenance.clone(),
        }
    }

    fn into_model(self) -> Result<SdamiModel> {
        let corrupt = |m: String| SdamiError::CorruptModel(m);
        let mut components = BTreeMap::new();
        for c in self.components {
            let group = match c.variables[..] {
                [j] => GroupId::Main(j),
                [a, b] if a != b => GroupId::pair(a, b),
                _ => {
                    return Err(corrupt(format!(
                        "invalid component variables {:?}",
                        c.variables
                    )))
                }
            };
            let width = c.variables.len();
            if c.layer_dims.len() < 2
                || c.layer_dims[0] != width
                || c.weights.len() != c.layer_dims.len() - 1
                || c.biases.len() != c.weights.len()
                || c.input_center.len() != width
                || c.input_scale.len() != width
            {
                return Err(corrupt(format!(
                    "component {group} has inconsistent shapes"
                )));
            }
            let mut weights = Vec::new();
            let mut biases = Vec::new();
            for (l, (w, b)) in c.weights.into_iter().zip(c.biases).enumerate() {
                let (out, inp) = (c.layer_dims[l + 1], c.layer_dims[l]);
                weights
                    .push(Array2::from_shape_vec((out, inp), w).map_err(|_| {
                        corrupt(format!("component {group} layer {l} weight size"))
                    })?);
                if b.len() != out {
                    return Err(corrupt(format!("component {group} layer {l} bias size")));
                }
                biases.push(Array1::from(b));
            }
            let net = Mlp::from_parts(weights, biases).map_err(|e| corrupt(e.to_string()))?;
            if !net.is_finite() {
                return Err(corrupt(format!(
                    "component {group} has non-finite parameters"
                )));
            }
            let constraint =
                ConstraintSpec::new(c.kappa, c.norm_scale).map_err(|e| corrupt(e.to_string()))?;
            if components
                .insert(
                    group,
                    Subnetwork {
                        net,
                        input_center: c.input_center,
                        input_scale: c.input_scale,
                        constraint,
                    },
                )
                .is_some()
            {
                return Err(corrupt(format!("duplicate component {group}")));
            }
        }
        Ok(SdamiModel {
            intercept: self.intercept,
            components,
            provenance: self.provenance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_main_model() -> SdamiModel {
        let net = Mlp::from_parts(vec![array![[2.0]]], vec![array![0.5]]).unwrap();
        let mut components = BTreeMap::new();
        components.insert(
            GroupId::Main(1),
            Subnetwork {
                net,
                input_center: vec![0.0],
                input_scale: vec![1.0],
                constraint: ConstraintSpec::new(5.0, 1.0).unwrap(),
            },
        );
        SdamiModel {
            intercept: 3.0,
            components,
            provenance: Provenance {
                lambda1: Some(0.1),
                lambda2: Some(0.01),
                seed: 1,
                config_hash: "x".into(),
                screened: vec![1],
            },
        }
    }

    #[test]
    fn intercept_only_predicts_constant() {
        let mut m = one_main_model();
        m.components.clear();
        let p = m.predict(array![[1.0, 2.0], [3.0, 4.0]].view()).unwrap();
        assert_eq!(p, array![3.0, 3.0]);
    }

    #[test]
    fn prediction_is_intercept_plus_net() {
        let m = one_main_model();
        let p = m.predict(array![[9.0, 1.0], [9.0, -1.0]].view()).unwrap();
        assert_eq!(p, array![5.5, 1.5]);
        assert!(matches!(
            m.predict(array![[1.0]].view()),
            Err(SdamiError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut m = one_main_model();
        m.intercept = 0.1 + 0.2;
        let text = m.to_json().unwrap();
        let back = SdamiModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn bad_files_are_rejected() {
        let text = one_main_model().to_json().unwrap();
        assert!(matches!(
            SdamiModel::from_json(&text[..text.len() / 2]),
            Err(SdamiError::CorruptModel(_))
        ));
        let v2 = text.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(
            SdamiModel::from_json(&v2),
            Err(SdamiError::Version {
                found: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn curve_of_zero_first_layer_is_flat() {
        let mut m = one_main_model();
        m.components.get_mut(&GroupId::Main(1)).unwrap().net.weights[0].fill(0.0);
        let c = m
            .component_curve(GroupId::Main(1), &Grid::Line(Grid::linspace(-1.0, 1.0, 5)))
            .unwrap();
        assert!(c.values.iter().all(|v| *v == 0.0));
        let one = m
            .component_curve(GroupId::Main(1), &Grid::Line(vec![0.3]))
            .unwrap();
        assert_eq!(one.values.len(), 1);
        assert!(matches!(
            m.component_curve(GroupId::Main(0), &Grid::Line(vec![0.0])),
            Err(SdamiError::InactiveGroup(_))
        ));
    }

    #[test]
    fn config_hash_tracks_changes() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.net.kappa_main = 4.0;
        assert_ne!(a.hash(), b.hash());
    }
}
