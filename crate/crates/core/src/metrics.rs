//! Pre-generalization, validity-based, and quality-based generalization
//! metrics, reference baselines, and the behaviour classifier.
//!
//! All numerators and denominators are exact integer counts, and R is formed
//! as the product E*F so that identity holds exactly in floating point.
//! Undefined values (F with no unseen queries, C and the normalized
//! rate with an exhaustive training set) are explicit `None`, never 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bitcore::{partition_queries, SampleMultiset};
use crate::error::{Error, Result};
use crate::tasks::{CostOracle, SolutionSpace, TrainingSet};

/// Raw integer counts behind a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportCounts {
    /// Total queries Q.
    pub q: u64,
    /// Unseen queries |G_new| (with multiplicity).
    pub g_new: u64,
    /// Unseen valid queries |G_sol| (with multiplicity).
    pub g_sol: u64,
    /// Unique unseen valid queries |g_sol|.
    pub g_sol_unique: u64,
    /// Unique queries |d_gen|.
    pub d_gen_unique: u64,
    /// Training-set size T.
    pub t: u64,
    /// Solution-space size |S|.
    pub s_size: u64,
}

/// Coverage reference values for the report's query budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRefs {
    /// Budget-limited upper bound min(Q, |S|) / |S|.
    pub ub: f64,
    /// Ideal expected coverage of a perfect sampler; undefined when T = |S|.
    pub c_bar: Option<f64>,
    /// C / C-bar, when both are defined.
    pub c_over_c_bar: Option<f64>,
}

/// All pre-generalization and validity-based metric values for one query batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    /// Exploration: fraction of queries outside the training set.
    pub e: f64,
    /// Fidelity: fraction of unseen queries that are valid; undefined when
    /// nothing unseen was generated.
    pub f: Option<f64>,
    /// Rate: fraction of all queries that are unseen and valid.
    pub r: f64,
    /// Rate normalized by the unseen portion, R / (1 - eps); undefined at eps = 1.
    pub r_tilde: Option<f64>,
    /// Coverage of the unseen solution space; undefined when T = |S|.
    pub c: Option<f64>,
    /// Data-copying, 1 - E.
    pub d: f64,
    /// Unique-rate variant |g_sol| / Q, for very large solution spaces.
    pub c_q: f64,
    pub counts: ReportCounts,
    pub references: CoverageRefs,
}

/// Quality-based metric values for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// Mean over batches of the lowest unseen-valid cost.
    pub mv: f64,
    /// Minimum training-set cost.
    pub mv_train: f64,
    /// Mean cost of the best t% unseen-valid samples.
    pub u: f64,
    /// Mean cost of the best t% training samples.
    pub u_train: f64,
    /// Percentile threshold t, in percent.
    pub t_percent: f64,
    /// Unique unseen-valid bitstrings with cost strictly below `c_prime`.
    pub n_below_critical: u64,
    pub c_prime: f64,
}

/// Mean and relative percentage error of a metric across batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub mean: f64,
    /// 100 * population stddev / mean.
    pub rel_pct_error: f64,
}

/// Computes E, F, R, R-tilde, C, D and the coverage references for one batch.
pub fn validity_metrics(
    train: &TrainingSet,
    space: &SolutionSpace,
    queries: &SampleMultiset,
) -> Result<GeneralizationReport> {
    let q = queries.total();
    if q == 0 {
        return Err(Error::EmptyQuerySet);
    }
    let (g_new, g_sol) = partition_queries(queries, train.samples(), space)?;
    let counts = ReportCounts {
        q,
        g_new: g_new.total(),
        g_sol: g_sol.total(),
        g_sol_unique: g_sol.unique_len(),
        d_gen_unique: queries.unique_len(),
        t: train.len(),
        s_size: space.size(),
    };

    let e = counts.g_new as f64 / q as f64;
    let f = if counts.g_new > 0 {
        Some(counts.g_sol as f64 / counts.g_new as f64)
    } else {
        None
    };
    // computed as the product so the identity R = E*F is exact in floating
    // point, not just mathematically
    let r = match f {
        Some(f) => e * f,
        None => 0.0,
    };
    let eps = train.seen_portion();
    let r_tilde = if eps < 1.0 { Some(r / (1.0 - eps)) } else { None };
    let c = if counts.t < counts.s_size {
        Some(counts.g_sol_unique as f64 / (counts.s_size - counts.t) as f64)
    } else {
        None
    };
    let c_q = counts.g_sol_unique as f64 / q as f64;

    let references = if counts.t < counts.s_size {
        let (ub, c_bar) = coverage_references(counts.s_size, counts.t, q)?;
        let c_over = c.map(|c| coverage_ratio(c, c_bar)).transpose()?;
        CoverageRefs {
            ub,
            c_bar: Some(c_bar),
            c_over_c_bar: c_over,
        }
    } else {
        CoverageRefs {
            ub: (q.min(counts.s_size)) as f64 / counts.s_size as f64,
            c_bar: None,
            c_over_c_bar: None,
        }
    };

    Ok(GeneralizationReport {
        e,
        f,
        r,
        r_tilde,
        c,
        d: 1.0 - e,
        c_q,
        counts,
        references,
    })
}

/// Coverage upper bound UB and ideal expected coverage C-bar for a query budget.
pub fn coverage_references(s_size: u64, t: u64, q: u64) -> Result<(f64, f64)> {
    if t >= s_size {
        return Err(Error::InvalidParam(format!(
            "coverage references need T < |S|, got T = {t}, |S| = {s_size}"
        )));
    }
    if q == 0 {
        return Err(Error::InvalidParam("coverage references need Q >= 1".into()));
    }
    let ub = q.min(s_size) as f64 / s_size as f64;
    // 1 - (1 - 1/(|S|-T))^Q, via log1p for stability at large Q
    let p = 1.0 / (s_size - t) as f64;
    let c_bar = -((q as f64) * (-p).ln_1p()).exp_m1();
    Ok((ub, c_bar))
}

/// Ratio of realized coverage to the ideal expected coverage.
pub fn coverage_ratio(c: f64, c_bar: f64) -> Result<f64> {
    if c_bar <= 0.0 {
        return Err(Error::InvalidParam("coverage ratio needs C-bar > 0".into()));
    }
    Ok(c / c_bar)
}

fn sol_costs(
    queries: &SampleMultiset,
    train: &TrainingSet,
    space: &SolutionSpace,
    cost: &dyn CostOracle,
) -> Result<Vec<(f64, u32, u64)>> {
    let (_, g_sol) = partition_queries(queries, train.samples(), space)?;
    let mut out = Vec::with_capacity(g_sol.unique_len() as usize);
    for (x, n) in g_sol.iter() {
        out.push((cost.cost(x)?, x.encoding(), n));
    }
    // ties at a cost cutoff resolve by lowest encoding first
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(out)
}

fn train_costs(train: &TrainingSet, cost: &dyn CostOracle) -> Result<Vec<f64>> {
    let mut costs = train
        .samples()
        .keys()
        .map(|x| cost.cost(x))
        .collect::<Result<Vec<f64>>>()?;
    costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(costs)
}

/// Minimum Value: mean over batches of the lowest unseen-valid cost, plus the
/// training-set minimum for comparison.
pub fn minimum_value(
    batches: &[SampleMultiset],
    train: &TrainingSet,
    space: &SolutionSpace,
    cost: &dyn CostOracle,
) -> Result<(f64, f64)> {
    if batches.is_empty() {
        return Err(Error::InvalidParam("minimum_value needs B >= 1".into()));
    }
    let mut acc = 0.0;
    for (b, batch) in batches.iter().enumerate() {
        let costs = sol_costs(batch, train, space, cost)?;
        let min = costs.first().ok_or(Error::NoValidSamples { batch: b })?.0;
        acc += min;
    }
    let mv = acc / batches.len() as f64;
    let mv_train = train_costs(train, cost)?[0];
    Ok((mv, mv_train))
}

fn best_fraction_mean(sorted: &[(f64, u64)], total: u64, t_percent: f64) -> f64 {
    // ceil(t% of total), at least 1, multiset counts respected
    let take = (((t_percent / 100.0) * total as f64).ceil() as u64).max(1);
    let mut left = take;
    let mut acc = 0.0;
    for &(c, n) in sorted {
        let use_n = n.min(left);
        acc += c * use_n as f64;
        left -= use_n;
        if left == 0 {
            break;
        }
    }
    acc / take as f64
}

/// Utility: mean cost of the best t% of unseen-valid queries, and the same
/// statistic over the training samples.
pub fn utility(
    queries: &SampleMultiset,
    train: &TrainingSet,
    space: &SolutionSpace,
    cost: &dyn CostOracle,
    t_percent: f64,
) -> Result<(f64, f64)> {
    if !(t_percent > 0.0 && t_percent <= 100.0) {
        return Err(Error::InvalidParam(format!(
            "utility percentile t = {t_percent} out of range (0, 100]"
        )));
    }
    let costs = sol_costs(queries, train, space, cost)?;
    if costs.is_empty() {
        return Err(Error::NoValidSamples { batch: 0 });
    }
    let total: u64 = costs.iter().map(|&(_, _, n)| n).sum();
    let sorted: Vec<(f64, u64)> = costs.iter().map(|&(c, _, n)| (c, n)).collect();
    let u = best_fraction_mean(&sorted, total, t_percent);

    // U_train is a property of the raw training samples, uniform weights
    let tc = train_costs(train, cost)?;
    let train_sorted: Vec<(f64, u64)> = tc.iter().map(|&c| (c, 1)).collect();
    let u_train = best_fraction_mean(&train_sorted, tc.len() as u64, t_percent);
    Ok((u, u_train))
}

/// Number of unique unseen-valid bitstrings with cost strictly below `c_prime`.
pub fn count_below_threshold(
    queries: &SampleMultiset,
    train: &TrainingSet,
    space: &SolutionSpace,
    cost: &dyn CostOracle,
    c_prime: f64,
) -> Result<u64> {
    let costs = sol_costs(queries, train, space, cost)?;
    Ok(costs.iter().filter(|&&(c, _, _)| c < c_prime).count() as u64)
}

/// KL(reference || model) over a shared indexing of the search space, with a
/// probability floor on the model side so empirical-frequency and exact model
/// distributions stay comparable.
pub const KL_MODEL_FLOOR: f64 = 1e-12;

pub fn kl_divergence(reference: &[f64], model: &[f64]) -> Result<f64> {
    if reference.len() != model.len() {
        return Err(Error::MalformedDistribution(format!(
            "length mismatch: {} vs {}",
            reference.len(),
            model.len()
        )));
    }
    let ref_sum: f64 = reference.iter().sum();
    if (ref_sum - 1.0).abs() > 1e-9 {
        return Err(Error::MalformedDistribution(format!(
            "reference sums to {ref_sum}"
        )));
    }
    if reference.iter().any(|&p| p < 0.0) || model.iter().any(|&p| p < 0.0) {
        return Err(Error::MalformedDistribution("negative probability".into()));
    }
    let mut kl = 0.0;
    for (&p, &q) in reference.iter().zip(model) {
        if p > 0.0 {
            kl += p * (p / q.max(KL_MODEL_FLOOR)).ln();
        }
    }
    Ok(kl)
}

/// Mean and relative percentage error (population stddev over mean).
pub fn aggregate_stats(values: &[f64]) -> Result<BatchStats> {
    if values.len() < 2 {
        return Err(Error::InvalidParam("aggregate_stats needs >= 2 values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::InvalidParam(
            "relative error undefined for zero mean".into(),
        ));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(BatchStats {
        mean,
        rel_pct_error: 100.0 * var.sqrt() / mean,
    })
}

/// Cheat-sheet behaviour labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behaviour {
    PerfectGeneralization,
    PerfectMemorization,
    AnomalousPreGeneralization,
    ModeCollapseUnseenValid,
    ModeCollapseUnseenInvalid,
    ModeCollapseSeen,
    Healthy,
    Indeterminate,
}

impl fmt::Display for Behaviour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Behaviour::PerfectGeneralization => "perfect_generalization",
            Behaviour::PerfectMemorization => "perfect_memorization",
            Behaviour::AnomalousPreGeneralization => "anomalous_pre_generalization",
            Behaviour::ModeCollapseUnseenValid => "mode_collapse_unseen_valid",
            Behaviour::ModeCollapseUnseenInvalid => "mode_collapse_unseen_invalid",
            Behaviour::ModeCollapseSeen => "mode_collapse_seen",
            Behaviour::Healthy => "healthy",
            Behaviour::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

/// Tolerances for matching the qualitative cheat-sheet rows.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassifierTolerances {
    /// "approximately 1" means >= this.
    pub approx_one: f64,
    /// C is "approximately 0" when <= this multiple of 1/(|S|-T).
    pub c_zero_multiple: f64,
    /// |d_gen| << T when <= max(this floor, frac * T).
    pub d_gen_small_floor: u64,
    pub d_gen_small_frac: f64,
}

impl Default for ClassifierTolerances {
    fn default() -> Self {
        Self {
            approx_one: 0.99,
            c_zero_multiple: 10.0,
            d_gen_small_floor: 3,
            d_gen_small_frac: 0.01,
        }
    }
}

/// Matches a report against the behaviour cheat sheet.
pub fn classify_behaviour(report: &GeneralizationReport, tol: &ClassifierTolerances) -> Behaviour {
    let counts = &report.counts;
    let d_gen_small = (tol.d_gen_small_floor as f64).max(tol.d_gen_small_frac * counts.t as f64);
    let few_unique = (counts.d_gen_unique as f64) <= d_gen_small;
    let approx_zero = 1.0 - tol.approx_one;

    if report.e <= approx_zero {
        // nothing (or almost nothing) unseen: memorization vs seen mode collapse
        return if few_unique {
            Behaviour::ModeCollapseSeen
        } else {
            Behaviour::PerfectMemorization
        };
    }

    if report.e >= tol.approx_one {
        let f = match report.f {
            Some(f) => f,
            None => return Behaviour::Indeterminate,
        };
        let c_near_zero = match report.c {
            Some(c) => {
                let unit = 1.0 / (counts.s_size - counts.t) as f64;
                c <= tol.c_zero_multiple * unit
            }
            None => true,
        };
        if f >= tol.approx_one && report.r >= tol.approx_one {
            if report.c.is_some_and(|c| c >= tol.approx_one) {
                return Behaviour::PerfectGeneralization;
            }
            if c_near_zero {
                return Behaviour::ModeCollapseUnseenValid;
            }
            return Behaviour::Healthy;
        }
        if f <= approx_zero {
            return if few_unique {
                Behaviour::ModeCollapseUnseenInvalid
            } else {
                Behaviour::AnomalousPreGeneralization
            };
        }
        return Behaviour::Healthy;
    }

    match report.f {
        Some(f) if f > 0.0 => Behaviour::Healthy,
        _ => Behaviour::Indeterminate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcore::{multiset_from_samples, Bitstring};
    use crate::tasks::{build_space, enumerate_space, SpaceKind, TrainingSet};
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn card4_train() -> (SolutionSpace, TrainingSet) {
        let space = build_space(4, SpaceKind::Cardinality { k: 2 }).unwrap();
        let samples =
            multiset_from_samples([Bitstring::new(4, 0b0011), Bitstring::new(4, 0b0101)]).unwrap();
        let eps = 2.0 / 6.0;
        let ts = TrainingSet::from_parts(samples, eps, None, space).unwrap();
        (space, ts)
    }

    #[test]
    fn validity_metrics_hand_example() {
        let (space, ts) = card4_train();
        let mut queries = SampleMultiset::new(4);
        queries.insert_n(Bitstring::new(4, 0b0011), 2).unwrap();
        queries.insert_n(Bitstring::new(4, 0b0110), 3).unwrap();
        queries.insert_n(Bitstring::new(4, 0b1010), 1).unwrap();
        queries.insert_n(Bitstring::new(4, 0b1111), 2).unwrap();
        queries.insert_n(Bitstring::new(4, 0b0000), 2).unwrap();
        let rep = validity_metrics(&ts, &space, &queries).unwrap();
        assert_eq!(rep.e, 0.8);
        assert_eq!(rep.f, Some(0.5));
        assert_eq!(rep.r, 0.4);
        assert_eq!(rep.c, Some(0.5));
        assert_eq!(rep.r, rep.e * rep.f.unwrap());
        assert_eq!(rep.d, 1.0 - rep.e);
    }

    #[test]
    fn memorization_row() {
        let (space, ts) = card4_train();
        let rep = validity_metrics(&ts, &space, ts.samples()).unwrap();
        assert_eq!(rep.e, 0.0);
        assert_eq!(rep.f, None);
        assert_eq!(rep.r, 0.0);
        assert_eq!(rep.c, Some(0.0));
    }

    #[test]
    fn perfect_generalization_row() {
        let (space, ts) = card4_train();
        let rest = multiset_from_samples(
            enumerate_space(&space)
                .unwrap()
                .into_iter()
                .filter(|&x| !ts.samples().contains(x)),
        )
        .unwrap();
        let rep = validity_metrics(&ts, &space, &rest).unwrap();
        assert_eq!(rep.e, 1.0);
        assert_eq!(rep.f, Some(1.0));
        assert_eq!(rep.r, 1.0);
        assert_eq!(rep.c, Some(1.0));
    }

    #[test]
    fn coverage_references_paper_values() {
        let (ub, c_bar) = coverage_references(184756, 1848, 100_000).unwrap();
        assert!((ub - 0.5412).abs() < 1e-4, "UB = {ub}");
        assert!((c_bar - 0.4211).abs() < 2e-4, "C-bar = {c_bar}");
        let ratio = coverage_ratio(0.409, c_bar).unwrap();
        assert!((ratio - 0.971).abs() < 1e-3, "ratio = {ratio}");
        assert!((coverage_ratio(0.006, 0.42115).unwrap() - 0.0142).abs() < 5e-4);
        assert_relative_eq!(coverage_ratio(0.3, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn coverage_references_limits() {
        let (_, c_bar) = coverage_references(100, 10, 10_000_000).unwrap();
        assert!((c_bar - 1.0).abs() < 1e-12);
        let (_, c_bar) = coverage_references(100, 10, 1).unwrap();
        assert_relative_eq!(c_bar, 1.0 / 90.0, epsilon = 1e-12);
        assert!(coverage_references(10, 10, 5).is_err());
    }

    struct MapCost(BTreeMap<u32, f64>);
    impl CostOracle for MapCost {
        fn cost(&self, x: Bitstring) -> crate::error::Result<f64> {
            Ok(self.0[&x.encoding()])
        }
    }

    fn card4_cost() -> MapCost {
        let space = build_space(4, SpaceKind::Cardinality { k: 2 }).unwrap();
        let mut map = BTreeMap::new();
        for (i, x) in enumerate_space(&space).unwrap().into_iter().enumerate() {
            map.insert(x.encoding(), 0.1 + 0.05 * i as f64);
        }
        MapCost(map)
    }

    #[test]
    fn minimum_value_examples() {
        let (space, ts) = card4_train();
        let cost = card4_cost();
        // 0011 and 0101 are in train; unseen valid are 0110 (0.2), 1001 (0.25), 1010 (0.3), 1100 (0.35)
        let b1 = multiset_from_samples([Bitstring::new(4, 0b1010), Bitstring::new(4, 0b1100)])
            .unwrap();
        let (mv, mv_train) = minimum_value(&[b1.clone()], &ts, &space, &cost).unwrap();
        assert_relative_eq!(mv, 0.3);
        assert_relative_eq!(mv_train, 0.1);

        let b2 = multiset_from_samples([Bitstring::new(4, 0b1001)]).unwrap();
        let (mv, _) = minimum_value(&[b1, b2], &ts, &space, &cost).unwrap();
        assert_relative_eq!(mv, (0.3 + 0.25) / 2.0);

        let invalid_only = multiset_from_samples([Bitstring::new(4, 0b1111)]).unwrap();
        assert!(matches!(
            minimum_value(&[invalid_only], &ts, &space, &cost),
            Err(Error::NoValidSamples { batch: 0 })
        ));
    }

    #[test]
    fn utility_examples() {
        // g_sol costs {0.2, 0.4, 0.6, 0.25}, t=50 -> mean of the two lowest
        let space = build_space(4, SpaceKind::Cardinality { k: 2 }).unwrap();
        let train = multiset_from_samples([Bitstring::new(4, 0b0011)]).unwrap();
        let ts = TrainingSet::from_parts(train, 1.0 / 6.0, None, space).unwrap();
        let mut map = BTreeMap::new();
        map.insert(0b0011, 0.9);
        map.insert(0b0101, 0.2);
        map.insert(0b0110, 0.4);
        map.insert(0b1001, 0.6);
        map.insert(0b1010, 0.25);
        map.insert(0b1100, 0.99);
        let cost = MapCost(map);
        let queries = multiset_from_samples([
            Bitstring::new(4, 0b0101),
            Bitstring::new(4, 0b0110),
            Bitstring::new(4, 0b1001),
            Bitstring::new(4, 0b1010),
        ])
        .unwrap();
        let (u, _) = utility(&queries, &ts, &space, &cost, 50.0).unwrap();
        assert_relative_eq!(u, 0.225, epsilon = 1e-12);

        // t = 100 is the plain mean
        let (u, _) = utility(&queries, &ts, &space, &cost, 100.0).unwrap();
        assert_relative_eq!(u, (0.2 + 0.4 + 0.6 + 0.25) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn count_below_threshold_examples() {
        let (space, ts) = card4_train();
        let cost = card4_cost();
        let queries = multiset_from_samples([
            Bitstring::new(4, 0b0110),
            Bitstring::new(4, 0b1010),
            Bitstring::new(4, 0b1100),
        ])
        .unwrap();
        assert_eq!(
            count_below_threshold(&queries, &ts, &space, &cost, f64::NEG_INFINITY).unwrap(),
            0
        );
        // costs 0.2, 0.3, 0.35 against c' = 0.31
        assert_eq!(
            count_below_threshold(&queries, &ts, &space, &cost, 0.31).unwrap(),
            2
        );
    }

    #[test]
    fn kl_examples() {
        let p = vec![0.5, 0.5];
        assert_relative_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let q = vec![0.25, 0.75];
        let expected = 0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert_relative_eq!(kl_divergence(&p, &q).unwrap(), expected, epsilon = 1e-12);
        assert!((kl_divergence(&p, &q).unwrap() - 0.14384).abs() < 1e-5);
        assert!(kl_divergence(&[0.5, 0.4], &p).is_err());
    }

    #[test]
    fn aggregate_stats_examples() {
        let s = aggregate_stats(&[1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(s.mean, 1.0);
        assert_relative_eq!(s.rel_pct_error, 0.0);
        let s = aggregate_stats(&[1.0, 3.0]).unwrap();
        assert_relative_eq!(s.mean, 2.0);
        assert_relative_eq!(s.rel_pct_error, 50.0);
        assert!(aggregate_stats(&[1.0]).is_err());
    }

    fn report_with(
        e: f64,
        f: Option<f64>,
        r: f64,
        c: Option<f64>,
        d_gen: u64,
        t: u64,
        s: u64,
    ) -> GeneralizationReport {
        GeneralizationReport {
            e,
            f,
            r,
            r_tilde: None,
            c,
            d: 1.0 - e,
            c_q: 0.0,
            counts: ReportCounts {
                q: 1000,
                g_new: (e * 1000.0) as u64,
                g_sol: (r * 1000.0) as u64,
                g_sol_unique: c.map(|c| (c * (s - t) as f64) as u64).unwrap_or(0),
                d_gen_unique: d_gen,
                t,
                s_size: s,
            },
            references: CoverageRefs {
                ub: 1.0,
                c_bar: None,
                c_over_c_bar: None,
            },
        }
    }

    #[test]
    fn classifier_cheat_sheet_rows() {
        let tol = ClassifierTolerances::default();
        let t = 100u64;
        let s = 1000u64;
        assert_eq!(
            classify_behaviour(&report_with(1.0, Some(1.0), 1.0, Some(1.0), 900, t, s), &tol),
            Behaviour::PerfectGeneralization
        );
        assert_eq!(
            classify_behaviour(&report_with(0.0, None, 0.0, Some(0.0), 100, t, s), &tol),
            Behaviour::PerfectMemorization
        );
        assert_eq!(
            classify_behaviour(&report_with(0.995, Some(0.0), 0.0, Some(0.0), 100, t, s), &tol),
            Behaviour::AnomalousPreGeneralization
        );
        assert_eq!(
            classify_behaviour(
                &report_with(1.0, Some(1.0), 1.0, Some(1.0 / 900.0), 1, t, s),
                &tol
            ),
            Behaviour::ModeCollapseUnseenValid
        );
        assert_eq!(
            classify_behaviour(&report_with(0.995, Some(0.0), 0.0, Some(0.0), 1, t, s), &tol),
            Behaviour::ModeCollapseUnseenInvalid
        );
        assert_eq!(
            classify_behaviour(&report_with(0.0, None, 0.0, Some(0.0), 1, t, s), &tol),
            Behaviour::ModeCollapseSeen
        );
        // healthy mid-range values (TNBM-like row)
        assert_eq!(
            classify_behaviour(
                &report_with(0.99, Some(0.95), 0.94, Some(0.4), 500, t, s),
                &tol
            ),
            Behaviour::Healthy
        );
    }
}
