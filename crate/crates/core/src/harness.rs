//! Experiment orchestration: seeded end-to-end runs, the random baseline,
//! Q-sweeps, multi-dataset stability studies, and report/plot-data export.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitcore::{Bitstring, SampleMultiset, MAX_WIDTH};
use crate::error::{Error, Result};
use crate::gan::{self, EpochLosses, GanConfig, GanPreset, Mlp};
use crate::metrics::{
    aggregate_stats, classify_behaviour, kl_divergence, minimum_value, utility,
    validity_metrics, BatchStats, Behaviour, ClassifierTolerances, GeneralizationReport,
    QualityReport,
};
use crate::tasks::{
    build_space, draw_training_set, enumerate_space, reweight, synth_universe, AssetUniverse,
    CostOracle, EqualWeightRisk, SolutionSpace, SpaceKind, TrainingSet, MAX_ENUMERABLE,
};
use crate::tnbm::{init_mps_from_histogram, train_dmrg, MpsModel, TnbmTrainConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Where the asset universe comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum UniverseSource {
    Synthetic { seed: u64 },
    Files { mu: PathBuf, covariance: PathBuf },
}

/// Problem instance: validity constraint plus cost-oracle inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub width: usize,
    pub space: SpaceKind,
    pub universe: UniverseSource,
    /// Target return carried into the universe (unused by the default
    /// equal-weight risk cost, kept for config compatibility).
    pub target_return: Option<f64>,
}

/// Model selection; run-level n_epochs and the training seed are injected by
/// the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Tnbm {
        max_bond: usize,
        learning_rate: f64,
        svd_cutoff: f64,
    },
    Gan {
        preset: GanPreset,
        #[serde(default)]
        saturating_gen_loss: bool,
    },
    Random,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Tnbm { .. } => "tnbm",
            ModelSpec::Gan { .. } => "gan",
            ModelSpec::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub dataset: u64,
    pub training: u64,
    pub sampling: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub task: TaskConfig,
    /// Seen portion of the solution space.
    pub eps: f64,
    pub reweight: bool,
    pub model: ModelSpec,
    pub n_epochs: usize,
    pub q: u64,
    /// Independent query batches for robustness statistics.
    pub n_query_batches: usize,
    /// Batches entering the aggregate Minimum Value.
    pub mv_batches: usize,
    /// Utility percentile, in percent.
    pub utility_t: f64,
    /// Critical cost threshold; defaults to the minimum training cost.
    pub critical_cost: Option<f64>,
    pub seeds: Seeds,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Desk-scale default: small enough that a full run takes seconds.
    pub fn desk_default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            task: TaskConfig {
                width: 12,
                space: SpaceKind::Cardinality { k: 6 },
                universe: UniverseSource::Synthetic { seed: 0 },
                target_return: None,
            },
            eps: 0.05,
            reweight: false,
            model: ModelSpec::Tnbm {
                max_bond: 7,
                learning_rate: 3e-3,
                svd_cutoff: 1e-2,
            },
            n_epochs: 100,
            q: 10_000,
            n_query_batches: 15,
            mv_batches: 5,
            utility_t: 5.0,
            critical_cost: None,
            seeds: Seeds {
                dataset: 0,
                training: 0,
                sampling: 0,
            },
            output_dir: PathBuf::from("out"),
        }
    }

    /// Reference-scale preset: N=20, k=10, eps=0.01, Q=1e5.
    pub fn reference_scale() -> Self {
        Self {
            task: TaskConfig {
                width: 20,
                space: SpaceKind::Cardinality { k: 10 },
                universe: UniverseSource::Synthetic { seed: 0 },
                target_return: None,
            },
            eps: 0.01,
            q: 100_000,
            ..Self::desk_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.n_query_batches < 1 {
            return Err(Error::Config("n_query_batches must be >= 1".into()));
        }
        if self.mv_batches < 1 || self.mv_batches > self.n_query_batches {
            return Err(Error::Config(
                "mv_batches must be in 1..=n_query_batches".into(),
            ));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::Config(format!("eps = {} out of (0, 1]", self.eps)));
        }
        if self.q == 0 {
            return Err(Error::Config("q must be >= 1".into()));
        }
        if !(self.utility_t > 0.0 && self.utility_t <= 100.0) {
            return Err(Error::Config("utility_t out of (0, 100]".into()));
        }
        build_space(self.task.width, self.task.space)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Deterministic run identifier derived from the instance and seeds.
    pub fn run_id(&self) -> String {
        let kind = match self.task.space {
            SpaceKind::Cardinality { k } => format!("card{k}"),
            SpaceKind::Parity { even } => format!("parity{}", if even { "e" } else { "o" }),
            SpaceKind::BarsAndStripes { rows, cols } => format!("bas{rows}x{cols}"),
        };
        format!(
            "{}-n{}-{}-eps{}-d{}-t{}-s{}",
            self.model.name(),
            self.task.width,
            kind,
            self.eps,
            self.seeds.dataset,
            self.seeds.training,
            self.seeds.sampling
        )
    }

    pub fn universe(&self) -> Result<AssetUniverse> {
        let mut u = match &self.task.universe {
            UniverseSource::Synthetic { seed } => synth_universe(self.task.width, *seed)?,
            UniverseSource::Files { mu, covariance } => AssetUniverse::load_csv(mu, covariance)?,
        };
        if u.n_assets != self.task.width {
            return Err(Error::Config(format!(
                "universe has {} assets, task width is {}",
                u.n_assets, self.task.width
            )));
        }
        if let Some(rho) = self.task.target_return {
            u.target_return = rho;
        }
        Ok(u)
    }
}

/// Q i.i.d. uniform bitstrings over the full search space.
pub fn random_baseline_sample(width: usize, q: u64, seed: u64) -> Result<SampleMultiset> {
    if !(1..=MAX_WIDTH).contains(&width) {
        return Err(Error::InvalidParam(format!("width {width} out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SampleMultiset::new(width);
    let bound = 1u32 << width;
    for _ in 0..q {
        out.insert(Bitstring::new(width, rng.gen_range(0..bound)))?;
    }
    Ok(out)
}

/// A model frozen after training, ready to answer queries.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Tnbm(MpsModel),
    Gan(Mlp),
    Random { width: usize },
}

impl TrainedModel {
    pub fn sample(&self, q: u64, seed: u64) -> Result<SampleMultiset> {
        match self {
            TrainedModel::Tnbm(m) => m.sample(q, seed),
            TrainedModel::Gan(g) => gan::gan_sample(g, q, seed),
            TrainedModel::Random { width } => random_baseline_sample(*width, q, seed),
        }
    }

    /// Exact model distribution over all 2^N encodings, when available.
    pub fn exact_distribution(&self) -> Option<Result<Vec<f64>>> {
        match self {
            TrainedModel::Tnbm(m) if m.n_sites() <= 24 => Some(m.full_distribution()),
            TrainedModel::Random { width } if *width <= 24 => {
                let p = 1.0 / (1u64 << width) as f64;
                Some(Ok(vec![p; 1 << width]))
            }
            _ => None,
        }
    }

    pub fn param_count(&self) -> Option<usize> {
        match self {
            TrainedModel::Tnbm(m) => Some(m.param_count()),
            TrainedModel::Gan(g) => Some(g.param_count()),
            TrainedModel::Random { .. } => None,
        }
    }
}

/// Per-epoch training losses, shape depending on the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum LossHistory {
    Tnbm { nll: Vec<f64> },
    Gan { epochs: Vec<EpochLosses> },
    None,
}

impl LossHistory {
    /// "Best run" comparisons use the final training loss: NLL for the Born
    /// machine, generator BCE for the GAN (discriminator loss stays recorded).
    pub fn final_loss(&self) -> Option<f64> {
        match self {
            LossHistory::Tnbm { nll } => nll.last().copied(),
            LossHistory::Gan { epochs } => epochs.last().map(|e| e.gen),
            LossHistory::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub batch_id: usize,
    pub generalization: GeneralizationReport,
    /// None when the batch has no unseen-valid samples.
    pub quality: Option<QualityReport>,
    pub label: Behaviour,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub schema_version: u32,
    pub run_id: String,
    pub config: ExperimentConfig,
    pub code_version: String,
    pub started_at_unix: u64,
    pub finished_at_unix: u64,
    pub t: u64,
    pub s_size: u64,
    pub model_params: Option<usize>,
    pub loss_history: LossHistory,
    pub batches: Vec<BatchReport>,
    /// Aggregate quality values: MV over the first mv_batches batches,
    /// mean U and mean count-below-critical across all batches.
    pub aggregate_quality: Option<QualityReport>,
    pub stats: BTreeMap<String, BatchStats>,
    /// Label of the pooled queries across all batches.
    pub behaviour: Option<Behaviour>,
    pub kl_train: Option<f64>,
    pub kl_target: Option<f64>,
    pub failure: Option<String>,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn merge_multiset(dst: &mut SampleMultiset, src: &SampleMultiset) -> Result<()> {
    for (x, n) in src.iter() {
        dst.insert_n(x, n)?;
    }
    Ok(())
}

/// Dense reference distributions over all 2^N encodings: the target (uniform
/// over the solution space) and the training distribution.
fn reference_distributions(
    space: &SolutionSpace,
    train: &TrainingSet,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let width = space.width();
    if width > 24 || space.size() > MAX_ENUMERABLE {
        return Err(Error::SpaceTooLarge(space.size()));
    }
    let mut target = vec![0.0; 1 << width];
    let p = 1.0 / space.size() as f64;
    for x in enumerate_space(space)? {
        target[x.encoding() as usize] = p;
    }
    let mut train_ref = vec![0.0; 1 << width];
    for (x, w) in train.distribution() {
        train_ref[x.encoding() as usize] = w;
    }
    Ok((target, train_ref))
}

fn train_model(
    cfg: &ExperimentConfig,
    train: &TrainingSet,
) -> Result<(TrainedModel, LossHistory)> {
    match &cfg.model {
        ModelSpec::Tnbm {
            max_bond,
            learning_rate,
            svd_cutoff,
        } => {
            let tcfg = TnbmTrainConfig {
                max_bond: *max_bond,
                learning_rate: *learning_rate,
                n_epochs: cfg.n_epochs,
                svd_cutoff: *svd_cutoff,
                seed: cfg.seeds.training,
            };
            let m0 = init_mps_from_histogram(train, tcfg.max_bond)?;
            let (m, nll) = train_dmrg(m0, train, &tcfg)?;
            Ok((TrainedModel::Tnbm(m), LossHistory::Tnbm { nll }))
        }
        ModelSpec::Gan {
            preset,
            saturating_gen_loss,
        } => {
            let gcfg = GanConfig {
                saturating_gen_loss: *saturating_gen_loss,
                ..GanConfig::preset(*preset, cfg.n_epochs, cfg.seeds.training)
            };
            let (g0, d0) = gan::init_gan(&gcfg, cfg.task.width, cfg.seeds.training)?;
            let (g, _, epochs) = gan::gan_train(g0, d0, train, &gcfg)?;
            Ok((TrainedModel::Gan(g), LossHistory::Gan { epochs }))
        }
        ModelSpec::Random => Ok((
            TrainedModel::Random {
                width: cfg.task.width,
            },
            LossHistory::None,
        )),
    }
}

fn quality_for_batches(
    batches: &[SampleMultiset],
    train: &TrainingSet,
    space: &SolutionSpace,
    oracle: &dyn CostOracle,
    t_percent: f64,
    c_prime: f64,
) -> Result<Option<QualityReport>> {
    let (mv, mv_train) = match minimum_value(batches, train, space, oracle) {
        Ok(v) => v,
        Err(Error::NoValidSamples { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut pooled = SampleMultiset::new(space.width());
    for b in batches {
        merge_multiset(&mut pooled, b)?;
    }
    let (u, u_train) = utility(&pooled, train, space, oracle, t_percent)?;
    let n_below =
        crate::metrics::count_below_threshold(&pooled, train, space, oracle, c_prime)?;
    Ok(Some(QualityReport {
        mv,
        mv_train,
        u,
        u_train,
        t_percent,
        n_below_critical: n_below,
        c_prime,
    }))
}

/// Everything `run_experiment` produces before persistence.
struct PipelineOutput {
    t: u64,
    s_size: u64,
    model_params: Option<usize>,
    loss_history: LossHistory,
    batches: Vec<BatchReport>,
    aggregate_quality: Option<QualityReport>,
    stats: BTreeMap<String, BatchStats>,
    behaviour: Option<Behaviour>,
    kl_train: Option<f64>,
    kl_target: Option<f64>,
}

fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    let space = build_space(cfg.task.width, cfg.task.space)?;
    let universe = cfg.universe()?;
    let oracle = EqualWeightRisk::new(universe);

    let mut train = draw_training_set(&space, cfg.eps, cfg.seeds.dataset)?;
    if cfg.reweight {
        train = reweight(&train, &oracle)?;
    }

    let (model, loss_history) = train_model(cfg, &train)?;

    // independent query batches from a sub-seed stream
    let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.seeds.sampling);
    let mut query_batches = Vec::with_capacity(cfg.n_query_batches);
    for _ in 0..cfg.n_query_batches {
        query_batches.push(model.sample(cfg.q, seed_rng.gen())?);
    }

    // critical cost defaults to the best seen (minimum training) cost
    let c_prime = match cfg.critical_cost {
        Some(c) => c,
        None => {
            let mut best = f64::INFINITY;
            for x in train.samples().keys() {
                best = best.min(oracle.cost(x)?);
            }
            best
        }
    };

    let tol = ClassifierTolerances::default();
    let mut batches = Vec::with_capacity(cfg.n_query_batches);
    for (i, batch) in query_batches.iter().enumerate() {
        let generalization = validity_metrics(&train, &space, batch)?;
        let quality = quality_for_batches(
            std::slice::from_ref(batch),
            &train,
            &space,
            &oracle,
            cfg.utility_t,
            c_prime,
        )?;
        let label = classify_behaviour(&generalization, &tol);
        batches.push(BatchReport {
            batch_id: i,
            generalization,
            quality,
            label,
        });
    }

    // aggregate quality: MV over the first mv_batches batches (the reference
    // protocol's B), U and the critical count pooled over all batches
    let aggregate_quality = {
        let mv_slice = &query_batches[..cfg.mv_batches];
        match quality_for_batches(mv_slice, &train, &space, &oracle, cfg.utility_t, c_prime)? {
            Some(mut qr) => {
                if let Some(full) = quality_for_batches(
                    &query_batches,
                    &train,
                    &space,
                    &oracle,
                    cfg.utility_t,
                    c_prime,
                )? {
                    qr.u = full.u;
                    qr.n_below_critical = full.n_below_critical;
                }
                Some(qr)
            }
            None => None,
        }
    };

    let mut stats = BTreeMap::new();
    let collect = |f: &dyn Fn(&BatchReport) -> Option<f64>| -> Vec<f64> {
        batches.iter().filter_map(f).collect()
    };
    let metric_views: [(&str, Box<dyn Fn(&BatchReport) -> Option<f64>>); 6] = [
        ("E", Box::new(|b: &BatchReport| Some(b.generalization.e))),
        ("F", Box::new(|b: &BatchReport| b.generalization.f)),
        ("R", Box::new(|b: &BatchReport| Some(b.generalization.r))),
        ("C", Box::new(|b: &BatchReport| b.generalization.c)),
        ("MV", Box::new(|b: &BatchReport| b.quality.map(|q| q.mv))),
        ("U", Box::new(|b: &BatchReport| b.quality.map(|q| q.u))),
    ];
    for (name, view) in &metric_views {
        let values = collect(view.as_ref());
        if values.len() == batches.len() {
            if let Ok(s) = aggregate_stats(&values) {
                stats.insert(name.to_string(), s);
            }
        }
    }

    // behaviour of the pooled queries
    let mut pooled = SampleMultiset::new(space.width());
    for b in &query_batches {
        merge_multiset(&mut pooled, b)?;
    }
    let pooled_report = validity_metrics(&train, &space, &pooled)?;
    let behaviour = Some(classify_behaviour(&pooled_report, &tol));

    // KLs when the model exposes exact probabilities and the space enumerates
    let (kl_train, kl_target) = match model.exact_distribution() {
        Some(dist) if space.size() <= MAX_ENUMERABLE && space.width() <= 24 => {
            let dist = dist?;
            let (target, train_ref) = reference_distributions(&space, &train)?;
            (
                Some(kl_divergence(&train_ref, &dist)?),
                Some(kl_divergence(&target, &dist)?),
            )
        }
        _ => (None, None),
    };

    Ok(PipelineOutput {
        t: train.len(),
        s_size: space.size(),
        model_params: model.param_count(),
        loss_history,
        batches,
        aggregate_quality,
        stats,
        behaviour,
        kl_train,
        kl_target,
    })
}

/// Full seeded pipeline: dataset -> train -> sample -> evaluate -> persist.
/// On failure a partial artifact with a failure marker is still written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifact> {
    cfg.validate()?;
    let started = unix_now();
    let run_id = cfg.run_id();
    let result = run_pipeline(cfg);
    let mut artifact = RunArtifact {
        schema_version: SCHEMA_VERSION,
        run_id: run_id.clone(),
        config: cfg.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at_unix: started,
        finished_at_unix: unix_now(),
        t: 0,
        s_size: 0,
        model_params: None,
        loss_history: LossHistory::None,
        batches: Vec::new(),
        aggregate_quality: None,
        stats: BTreeMap::new(),
        behaviour: None,
        kl_train: None,
        kl_target: None,
        failure: None,
    };
    match result {
        Ok(out) => {
            artifact.t = out.t;
            artifact.s_size = out.s_size;
            artifact.model_params = out.model_params;
            artifact.loss_history = out.loss_history;
            artifact.batches = out.batches;
            artifact.aggregate_quality = out.aggregate_quality;
            artifact.stats = out.stats;
            artifact.behaviour = out.behaviour;
            artifact.kl_train = out.kl_train;
            artifact.kl_target = out.kl_target;
            persist_artifact(&artifact)?;
            Ok(artifact)
        }
        Err(e) => {
            artifact.failure = Some(format!("{run_id}: {e}"));
            // best-effort persistence of the failure marker
            let _ = persist_artifact(&artifact);
            Err(e)
        }
    }
}

fn run_dir(artifact: &RunArtifact) -> PathBuf {
    artifact.config.output_dir.join(&artifact.run_id)
}

fn persist_artifact(artifact: &RunArtifact) -> Result<()> {
    let dir = run_dir(artifact);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(
        dir.join("artifact.json"),
        serde_json::to_string_pretty(artifact)?,
    )?;
    Ok(())
}

pub fn load_artifact(path: &Path) -> Result<RunArtifact> {
    let artifact: RunArtifact = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(artifact)
}

/// One row of a Q-sweep trend table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub q: u64,
    pub e: f64,
    pub f: Option<f64>,
    pub r: f64,
    pub c: Option<f64>,
    pub mv: Option<f64>,
    pub u: Option<f64>,
    pub ub: f64,
    pub c_bar: Option<f64>,
}

/// Trains once, then evaluates metrics on cumulative query draws: each larger
/// Q extends the previous one, so coverage monotonicity is testable.
pub fn sweep_q(cfg: &ExperimentConfig, q_values: &[u64]) -> Result<Vec<TrendRow>> {
    cfg.validate()?;
    if q_values.is_empty() || q_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam(
            "q_values must be ascending and nonempty".into(),
        ));
    }
    let space = build_space(cfg.task.width, cfg.task.space)?;
    let oracle = EqualWeightRisk::new(cfg.universe()?);
    let mut train = draw_training_set(&space, cfg.eps, cfg.seeds.dataset)?;
    if cfg.reweight {
        train = reweight(&train, &oracle)?;
    }
    let (model, _) = train_model(cfg, &train)?;

    let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.seeds.sampling);
    let mut cumulative = SampleMultiset::new(space.width());
    let mut rows = Vec::with_capacity(q_values.len());
    let mut drawn = 0u64;
    for &q in q_values {
        let delta = model.sample(q - drawn, seed_rng.gen())?;
        merge_multiset(&mut cumulative, &delta)?;
        drawn = q;
        let rep = validity_metrics(&train, &space, &cumulative)?;
        let quality = quality_for_batches(
            std::slice::from_ref(&cumulative),
            &train,
            &space,
            &oracle,
            cfg.utility_t,
            f64::NEG_INFINITY,
        )?;
        rows.push(TrendRow {
            q,
            e: rep.e,
            f: rep.f,
            r: rep.r,
            c: rep.c,
            mv: quality.map(|x| x.mv),
            u: quality.map(|x| x.u),
            ub: rep.references.ub,
            c_bar: rep.references.c_bar,
        });
    }
    Ok(rows)
}

/// One dataset's aggregate metric values in a stability study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub dataset_seed: u64,
    pub t: u64,
    pub s_size: u64,
    pub e: f64,
    pub f: Option<f64>,
    pub r: f64,
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub rows: Vec<DatasetRow>,
    /// Across-dataset BatchStats per metric (E, F, R, C where defined).
    pub stats: BTreeMap<String, BatchStats>,
}

/// Repeats the full pipeline with fresh dataset seeds on the same instance.
pub fn sweep_datasets(cfg: &ExperimentConfig, n_datasets: usize) -> Result<StabilityTable> {
    cfg.validate()?;
    if n_datasets < 2 {
        return Err(Error::InvalidParam("n_datasets must be >= 2".into()));
    }
    let mut rows = Vec::with_capacity(n_datasets);
    for i in 0..n_datasets {
        let mut sub = cfg.clone();
        sub.seeds.dataset = cfg.seeds.dataset.wrapping_add(i as u64);
        let space = build_space(sub.task.width, sub.task.space)?;
        let oracle = EqualWeightRisk::new(sub.universe()?);
        let mut train = draw_training_set(&space, sub.eps, sub.seeds.dataset)?;
        if sub.reweight {
            train = reweight(&train, &oracle)?;
        }
        let (model, _) = train_model(&sub, &train)?;
        let mut seed_rng = ChaCha8Rng::seed_from_u64(sub.seeds.sampling);
        let mut pooled = SampleMultiset::new(space.width());
        for _ in 0..sub.n_query_batches {
            merge_multiset(&mut pooled, &model.sample(sub.q, seed_rng.gen())?)?;
        }
        let rep = validity_metrics(&train, &space, &pooled)?;
        rows.push(DatasetRow {
            dataset_seed: sub.seeds.dataset,
            t: train.len(),
            s_size: space.size(),
            e: rep.e,
            f: rep.f,
            r: rep.r,
            c: rep.c,
        });
    }
    let mut stats = BTreeMap::new();
    let views: [(&str, Box<dyn Fn(&DatasetRow) -> Option<f64>>); 4] = [
        ("E", Box::new(|r: &DatasetRow| Some(r.e))),
        ("F", Box::new(|r: &DatasetRow| r.f)),
        ("R", Box::new(|r: &DatasetRow| Some(r.r))),
        ("C", Box::new(|r: &DatasetRow| r.c)),
    ];
    for (name, view) in &views {
        let values: Vec<f64> = rows.iter().filter_map(|r| view(r)).collect();
        if values.len() == rows.len() {
            if let Ok(s) = aggregate_stats(&values) {
                stats.insert(name.to_string(), s);
            }
        }
    }
    Ok(StabilityTable { rows, stats })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => "nan".to_string(),
    }
}

const METRICS_HEADER: &str = "run_id,batch_id,Q,T,S_size,E,F,R,R_tilde,C,D,UB,C_bar,C_over_C_bar,MV,MV_train,U,U_train,n_below_critical,label";

fn metrics_row(
    run_id: &str,
    batch_id: &str,
    q: u64,
    t: u64,
    s_size: u64,
    g: &GeneralizationReport,
    quality: Option<&QualityReport>,
    label: Behaviour,
) -> String {
    format!(
        "{run_id},{batch_id},{q},{t},{s_size},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{label}",
        g.e,
        fmt_opt(g.f),
        g.r,
        fmt_opt(g.r_tilde),
        fmt_opt(g.c),
        g.d,
        g.references.ub,
        fmt_opt(g.references.c_bar),
        fmt_opt(g.references.c_over_c_bar),
        fmt_opt(quality.map(|x| x.mv)),
        fmt_opt(quality.map(|x| x.mv_train)),
        fmt_opt(quality.map(|x| x.u)),
        fmt_opt(quality.map(|x| x.u_train)),
        quality
            .map(|x| x.n_below_critical.to_string())
            .unwrap_or_else(|| "nan".to_string()),
    )
}

/// Mean of per-batch reports for the aggregate CSV row. Undefined values stay
/// undefined if any batch left them undefined.
fn mean_report(batches: &[BatchReport]) -> GeneralizationReport {
    let n = batches.len() as f64;
    let mean_of = |f: &dyn Fn(&BatchReport) -> f64| -> f64 {
        batches.iter().map(f).sum::<f64>() / n
    };
    let mean_opt = |f: &dyn Fn(&BatchReport) -> Option<f64>| -> Option<f64> {
        let vals: Vec<f64> = batches.iter().filter_map(f).collect();
        if vals.len() == batches.len() {
            Some(vals.iter().sum::<f64>() / n)
        } else {
            None
        }
    };
    let mut rep = batches[0].generalization;
    rep.e = mean_of(&|b| b.generalization.e);
    rep.f = mean_opt(&|b| b.generalization.f);
    rep.r = mean_of(&|b| b.generalization.r);
    rep.r_tilde = mean_opt(&|b| b.generalization.r_tilde);
    rep.c = mean_opt(&|b| b.generalization.c);
    rep.d = mean_of(&|b| b.generalization.d);
    rep.c_q = mean_of(&|b| b.generalization.c_q);
    rep.references.c_over_c_bar = mean_opt(&|b| b.generalization.references.c_over_c_bar);
    rep
}

/// Writes the metrics CSV, run manifest, and plot-data CSVs next to the
/// artifact. Exports are pure functions of the artifact, so re-export is
/// byte-identical.
pub fn export_report(artifact: &RunArtifact) -> Result<Vec<PathBuf>> {
    let dir = run_dir(artifact);
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();

    // (a) metrics CSV: one row per batch plus one aggregate row
    let mut csv = String::from(METRICS_HEADER);
    csv.push('\n');
    for b in &artifact.batches {
        csv.push_str(&metrics_row(
            &artifact.run_id,
            &b.batch_id.to_string(),
            b.generalization.counts.q,
            artifact.t,
            artifact.s_size,
            &b.generalization,
            b.quality.as_ref(),
            b.label,
        ));
        csv.push('\n');
    }
    if !artifact.batches.is_empty() {
        let agg = mean_report(&artifact.batches);
        let label = artifact.behaviour.unwrap_or(Behaviour::Indeterminate);
        csv.push_str(&metrics_row(
            &artifact.run_id,
            "aggregate",
            agg.counts.q,
            artifact.t,
            artifact.s_size,
            &agg,
            artifact.aggregate_quality.as_ref(),
            label,
        ));
        csv.push('\n');
    }
    let metrics_path = dir.join("metrics.csv");
    std::fs::write(&metrics_path, csv)?;
    written.push(metrics_path);

    // (b) run manifest
    let manifest_path = dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(artifact)?)?;
    written.push(manifest_path);

    // (c) plot data
    written.extend(export_plot_data(artifact, &dir)?);
    Ok(written)
}

const HISTOGRAM_BINS: usize = 30;

fn export_plot_data(artifact: &RunArtifact, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let cfg = &artifact.config;

    // loss history
    let loss_path = dir.join("loss_history.csv");
    let mut loss_csv = String::new();
    match &artifact.loss_history {
        LossHistory::Tnbm { nll } => {
            loss_csv.push_str("epoch,nll\n");
            for (i, v) in nll.iter().enumerate() {
                loss_csv.push_str(&format!("{i},{v}\n"));
            }
        }
        LossHistory::Gan { epochs } => {
            loss_csv.push_str("epoch,disc_loss,gen_loss\n");
            for (i, e) in epochs.iter().enumerate() {
                loss_csv.push_str(&format!("{i},{},{}\n", e.disc, e.gen));
            }
        }
        LossHistory::None => {
            loss_csv.push_str("epoch,loss\n");
        }
    }
    std::fs::write(&loss_path, loss_csv)?;
    written.push(loss_path);

    if artifact.failure.is_some() || artifact.batches.is_empty() {
        return Ok(written);
    }

    // regenerate the pooled query set deterministically from the config
    let space = build_space(cfg.task.width, cfg.task.space)?;
    let oracle = EqualWeightRisk::new(cfg.universe()?);
    let mut train = draw_training_set(&space, cfg.eps, cfg.seeds.dataset)?;
    if cfg.reweight {
        train = reweight(&train, &oracle)?;
    }
    let (model, _) = train_model(cfg, &train)?;
    let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.seeds.sampling);
    let mut pooled = SampleMultiset::new(space.width());
    for _ in 0..cfg.n_query_batches {
        merge_multiset(&mut pooled, &model.sample(cfg.q, seed_rng.gen())?)?;
    }

    // cardinality histogram of queries
    let card_path = dir.join("cardinality_histogram.csv");
    let mut counts = vec![0u64; space.width() + 1];
    for (x, n) in pooled.iter() {
        counts[x.hamming_weight() as usize] += n;
    }
    let total = pooled.total() as f64;
    let mut card_csv = String::from("hamming_weight,fraction\n");
    for (w, &n) in counts.iter().enumerate() {
        card_csv.push_str(&format!("{w},{}\n", n as f64 / total));
    }
    std::fs::write(&card_path, card_csv)?;
    written.push(card_path);

    // risk histogram: unseen-valid queries vs training samples, each series
    // normalized to sum 1, with the utility cutoff cost per series
    let (_, g_sol) = crate::bitcore::partition_queries(&pooled, train.samples(), &space)?;
    let mut sol_costs = Vec::new();
    for (x, n) in g_sol.iter() {
        sol_costs.push((oracle.cost(x)?, n));
    }
    let mut train_costs = Vec::new();
    for x in train.samples().keys() {
        train_costs.push((oracle.cost(x)?, 1u64));
    }
    if !sol_costs.is_empty() {
        let lo = sol_costs
            .iter()
            .chain(&train_costs)
            .map(|&(c, _)| c)
            .fold(f64::INFINITY, f64::min);
        let hi = sol_costs
            .iter()
            .chain(&train_costs)
            .map(|&(c, _)| c)
            .fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        let bin_of = |c: f64| -> usize {
            (((c - lo) / span) * HISTOGRAM_BINS as f64)
                .floor()
                .min((HISTOGRAM_BINS - 1) as f64) as usize
        };
        let mut hist_sol = vec![0u64; HISTOGRAM_BINS];
        let mut hist_train = vec![0u64; HISTOGRAM_BINS];
        for &(c, n) in &sol_costs {
            hist_sol[bin_of(c)] += n;
        }
        for &(c, n) in &train_costs {
            hist_train[bin_of(c)] += n;
        }
        let sol_total: u64 = hist_sol.iter().sum();
        let train_total: u64 = hist_train.iter().sum();
        let mut risk_csv = String::from("bin_lo,bin_hi,g_sol,train\n");
        for i in 0..HISTOGRAM_BINS {
            let b_lo = lo + span * i as f64 / HISTOGRAM_BINS as f64;
            let b_hi = lo + span * (i + 1) as f64 / HISTOGRAM_BINS as f64;
            risk_csv.push_str(&format!(
                "{b_lo},{b_hi},{},{}\n",
                hist_sol[i] as f64 / sol_total as f64,
                hist_train[i] as f64 / train_total as f64
            ));
        }
        let risk_path = dir.join("risk_histogram.csv");
        std::fs::write(&risk_path, risk_csv)?;
        written.push(risk_path);

        // utility cutoffs: the cost delimiting the best t% of each series
        let cutoff = |costs: &[(f64, u64)]| -> f64 {
            let mut sorted: Vec<(f64, u64)> = costs.to_vec();
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let total: u64 = sorted.iter().map(|&(_, n)| n).sum();
            let take = (((cfg.utility_t / 100.0) * total as f64).ceil() as u64).max(1);
            let mut left = take;
            let mut last = sorted[0].0;
            for &(c, n) in &sorted {
                last = c;
                let use_n = n.min(left);
                left -= use_n;
                if left == 0 {
                    break;
                }
            }
            last
        };
        let cut_path = dir.join("utility_cutoffs.csv");
        std::fs::write(
            &cut_path,
            format!(
                "series,cutoff\ng_sol,{}\ntrain,{}\n",
                cutoff(&sol_costs),
                cutoff(&train_costs)
            ),
        )?;
        written.push(cut_path);
    }
    Ok(written)
}

/// Writes a Q-sweep trend table as CSV.
pub fn export_trend_csv(rows: &[TrendRow], path: &Path) -> Result<()> {
    let mut csv = String::from("Q,E,F,R,C,MV,U,UB,C_bar\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.q,
            r.e,
            fmt_opt(r.f),
            r.r,
            fmt_opt(r.c),
            fmt_opt(r.mv),
            fmt_opt(r.u),
            r.ub,
            fmt_opt(r.c_bar)
        ));
    }
    std::fs::write(path, csv)?;
    Ok(())
}

/// Writes a dataset-stability table as CSV.
pub fn export_stability_csv(table: &StabilityTable, path: &Path) -> Result<()> {
    let mut csv = String::from("dataset_seed,T,S_size,E,F,R,C\n");
    for r in &table.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.dataset_seed,
            r.t,
            r.s_size,
            r.e,
            fmt_opt(r.f),
            r.r,
            fmt_opt(r.c)
        ));
    }
    csv.push_str("metric,mean,rel_pct_error\n");
    for (name, s) in &table.stats {
        csv.push_str(&format!("{name},{},{}\n", s.mean, s.rel_pct_error));
    }
    std::fs::write(path, csv)?;
    Ok(())
}
