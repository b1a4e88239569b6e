//! Constrained solution spaces, cost oracles, and training-set construction.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitcore::{Bitstring, SampleMultiset, MAX_WIDTH};
use crate::error::{Error, Result};
use crate::util::standard_normal;

/// Largest solution space we will enumerate explicitly.
pub const MAX_ENUMERABLE: u64 = 1 << 24;

/// Validity constraint defining the solution space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    /// Fixed Hamming weight `k`.
    Cardinality { k: usize },
    /// Fixed parity of the Hamming weight.
    Parity { even: bool },
    /// Bars-and-stripes patterns on a `rows` x `cols` grid; position `r*cols + c`
    /// holds cell (r, c).
    BarsAndStripes { rows: usize, cols: usize },
}

/// A validity predicate together with the exact size of its support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionSpace {
    width: usize,
    kind: SpaceKind,
    size: u64,
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Builds a solution space with its exact size precomputed.
pub fn build_space(width: usize, kind: SpaceKind) -> Result<SolutionSpace> {
    if !(1..=MAX_WIDTH).contains(&width) {
        return Err(Error::InvalidParam(format!(
            "width {width} out of range 1..={MAX_WIDTH}"
        )));
    }
    let size = match kind {
        SpaceKind::Cardinality { k } => {
            if k > width {
                return Err(Error::InvalidParam(format!("k = {k} exceeds N = {width}")));
            }
            binomial(width as u64, k as u64)
        }
        SpaceKind::Parity { .. } => {
            if width < 1 {
                return Err(Error::InvalidParam("parity needs N >= 1".into()));
            }
            1u64 << (width - 1)
        }
        SpaceKind::BarsAndStripes { rows, cols } => {
            if rows == 0 || cols == 0 || rows * cols != width {
                return Err(Error::InvalidParam(format!(
                    "bars-and-stripes needs rows*cols = N, got {rows}x{cols} vs N = {width}"
                )));
            }
            (1u64 << rows) + (1u64 << cols) - 2
        }
    };
    Ok(SolutionSpace { width, kind, size })
}

impl SolutionSpace {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Exact |S|.
    pub fn size(&self) -> u64 {
        self.size
    }

    /// Whether `x` satisfies the validity constraint.
    pub fn contains(&self, x: Bitstring) -> bool {
        if x.width() != self.width {
            return false;
        }
        match self.kind {
            SpaceKind::Cardinality { k } => x.hamming_weight() as usize == k,
            SpaceKind::Parity { even } => (x.hamming_weight() % 2 == 0) == even,
            SpaceKind::BarsAndStripes { rows, cols } => {
                let row_uniform = (0..rows).all(|r| {
                    let first = x.bit(r * cols);
                    (1..cols).all(|c| x.bit(r * cols + c) == first)
                });
                if row_uniform {
                    return true;
                }
                (0..cols).all(|c| {
                    let first = x.bit(c);
                    (1..rows).all(|r| x.bit(r * cols + c) == first)
                })
            }
        }
    }
}

/// Enumerates the solution space, sorted by integer encoding.
pub fn enumerate_space(space: &SolutionSpace) -> Result<Vec<Bitstring>> {
    if space.size > MAX_ENUMERABLE {
        return Err(Error::SpaceTooLarge(space.size));
    }
    let width = space.width;
    let out = match space.kind {
        SpaceKind::Cardinality { k } => {
            if k == 0 {
                vec![Bitstring::new(width, 0)]
            } else {
                // Gosper's hack walks fixed-popcount encodings in increasing order.
                let mut out = Vec::with_capacity(space.size as usize);
                let limit = if width == 32 { u32::MAX } else { (1u32 << width) - 1 };
                let mut v: u32 = (1u32 << k) - 1;
                while v <= limit {
                    out.push(Bitstring::new(width, v));
                    let c = v & v.wrapping_neg();
                    let r = v + c;
                    if r > limit || c == 0 {
                        break;
                    }
                    v = (((r ^ v) >> 2) / c) | r;
                }
                out
            }
        }
        SpaceKind::Parity { even } => {
            let want_even = even;
            let mut out = Vec::with_capacity(space.size as usize);
            for y in 0u32..(1u32 << (width - 1)) {
                let base = y << 1;
                let parity_even = base.count_ones() % 2 == 0;
                let x = if parity_even == want_even { base } else { base | 1 };
                out.push(Bitstring::new(width, x));
            }
            out
        }
        SpaceKind::BarsAndStripes { rows, cols } => {
            let mut set = std::collections::BTreeSet::new();
            for mask in 0u32..(1u32 << rows) {
                let mut bits = 0u32;
                for r in 0..rows {
                    if (mask >> r) & 1 == 1 {
                        for c in 0..cols {
                            bits |= 1 << (r * cols + c);
                        }
                    }
                }
                set.insert(bits);
            }
            for mask in 0u32..(1u32 << cols) {
                let mut bits = 0u32;
                for c in 0..cols {
                    if (mask >> c) & 1 == 1 {
                        for r in 0..rows {
                            bits |= 1 << (r * cols + c);
                        }
                    }
                }
                set.insert(bits);
            }
            set.into_iter().map(|b| Bitstring::new(width, b)).collect()
        }
    };
    debug_assert_eq!(out.len() as u64, space.size);
    Ok(out)
}

/// Asset universe for the portfolio cost oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetUniverse {
    pub n_assets: usize,
    pub mean_returns: Vec<f64>,
    /// Row-major N x N covariance, symmetric PSD.
    pub covariance: Vec<Vec<f64>>,
    /// Target return; carried for config compatibility, unused by the
    /// equal-weight risk cost.
    pub target_return: f64,
}

impl AssetUniverse {
    /// Numerical PSD check: symmetric and all eigenvalues >= -1e-10.
    pub fn is_psd(&self) -> bool {
        let n = self.n_assets;
        for i in 0..n {
            for j in 0..n {
                if (self.covariance[i][j] - self.covariance[j][i]).abs() > 1e-12 {
                    return false;
                }
            }
        }
        let m = DMatrix::from_fn(n, n, |i, j| self.covariance[i][j]);
        m.symmetric_eigen().eigenvalues.iter().all(|&e| e >= -1e-10)
    }

    pub fn save_csv(&self, mu_path: &Path, cov_path: &Path) -> Result<()> {
        let mut mu = String::from("asset,mu\n");
        for (i, m) in self.mean_returns.iter().enumerate() {
            mu.push_str(&format!("{i},{m}\n"));
        }
        std::fs::File::create(mu_path)?.write_all(mu.as_bytes())?;
        let mut cov = String::new();
        for row in &self.covariance {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            cov.push_str(&cells.join(","));
            cov.push('\n');
        }
        std::fs::File::create(cov_path)?.write_all(cov.as_bytes())?;
        Ok(())
    }

    pub fn load_csv(mu_path: &Path, cov_path: &Path) -> Result<Self> {
        let mu_file = BufReader::new(std::fs::File::open(mu_path)?);
        let mut mean_returns = Vec::new();
        for (idx, line) in mu_file.lines().enumerate() {
            let line = line?;
            if idx == 0 {
                if line.trim() != "asset,mu" {
                    return Err(Error::Parse(format!(
                        "expected universe header 'asset,mu', got {line:?}"
                    )));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mu = line
                .split(',')
                .nth(1)
                .ok_or_else(|| Error::Parse(format!("bad universe row {line:?}")))?;
            mean_returns.push(
                mu.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad mu value: {e}")))?,
            );
        }
        let n = mean_returns.len();
        let cov_file = BufReader::new(std::fs::File::open(cov_path)?);
        let mut covariance = Vec::new();
        for line in cov_file.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Parse(format!("bad covariance value: {e}")))?;
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "covariance row has {} values, expected {n}",
                    row.len()
                )));
            }
            covariance.push(row);
        }
        if covariance.len() != n {
            return Err(Error::Parse(format!(
                "covariance has {} rows, expected {n}",
                covariance.len()
            )));
        }
        Ok(Self {
            n_assets: n,
            mean_returns,
            covariance,
            target_return: DEFAULT_TARGET_RETURN,
        })
    }
}

pub const DEFAULT_TARGET_RETURN: f64 = 0.002;

// Fixed generation constants so synthetic universes are reproducible.
const SYNTH_FACTORS: usize = 3;
const SYNTH_FACTOR_SCALE: f64 = 0.01;
const SYNTH_DIAG_JITTER: f64 = 1e-6;
const SYNTH_MU_LO: f64 = -0.001;
const SYNTH_MU_HI: f64 = 0.004;

/// Deterministic synthetic asset universe: factor-model covariance plus
/// diagonal jitter, so PSD holds by construction.
pub fn synth_universe(n: usize, seed: u64) -> Result<AssetUniverse> {
    if n < 2 {
        return Err(Error::InvalidParam(format!("universe needs N >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_returns: Vec<f64> = (0..n).map(|_| rng.gen_range(SYNTH_MU_LO..SYNTH_MU_HI)).collect();
    let factors: Vec<Vec<f64>> = (0..SYNTH_FACTORS)
        .map(|_| (0..n).map(|_| SYNTH_FACTOR_SCALE * standard_normal(&mut rng)).collect())
        .collect();
    let mut covariance = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for f in &factors {
                s += f[i] * f[j];
            }
            covariance[i][j] = s;
        }
        covariance[i][i] += SYNTH_DIAG_JITTER;
    }
    Ok(AssetUniverse {
        n_assets: n,
        mean_returns,
        covariance,
        target_return: DEFAULT_TARGET_RETURN,
    })
}

/// Maps a valid bitstring to a scalar cost.
pub trait CostOracle {
    fn cost(&self, x: Bitstring) -> Result<f64>;
}

/// Equal-weight portfolio risk sqrt(w' Sigma w) with w_i = 1/k on selected assets.
#[derive(Debug, Clone)]
pub struct EqualWeightRisk {
    universe: AssetUniverse,
}

impl EqualWeightRisk {
    pub fn new(universe: AssetUniverse) -> Self {
        Self { universe }
    }

    pub fn universe(&self) -> &AssetUniverse {
        &self.universe
    }
}

impl CostOracle for EqualWeightRisk {
    fn cost(&self, x: Bitstring) -> Result<f64> {
        risk_cost(&self.universe, x)
    }
}

/// Equal-weight risk of the portfolio encoded by `x`.
pub fn risk_cost(u: &AssetUniverse, x: Bitstring) -> Result<f64> {
    let k = x.hamming_weight() as usize;
    if k == 0 {
        return Err(Error::UndefinedCost);
    }
    let w = 1.0 / k as f64;
    let selected: Vec<usize> = (0..x.width()).filter(|&i| x.bit(i) == 1).collect();
    let mut var = 0.0;
    for &i in &selected {
        for &j in &selected {
            var += w * w * u.covariance[i][j];
        }
    }
    Ok(var.max(0.0).sqrt())
}

/// A drawn training set: T unique valid bitstrings, optionally cost-reweighted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingSet {
    samples: SampleMultiset,
    seen_portion: f64,
    weights: Option<BTreeMap<u32, f64>>,
    space: SolutionSpace,
}

impl TrainingSet {
    pub fn samples(&self) -> &SampleMultiset {
        &self.samples
    }

    /// Number of unique training samples T.
    pub fn len(&self) -> u64 {
        self.samples.unique_len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn seen_portion(&self) -> f64 {
        self.seen_portion
    }

    pub fn space(&self) -> &SolutionSpace {
        &self.space
    }

    pub fn is_reweighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Sampling probability of `x` under the training distribution:
    /// uniform 1/T when unweighted, softmax weight otherwise.
    pub fn weight_of(&self, x: Bitstring) -> f64 {
        match &self.weights {
            Some(w) => w.get(&x.encoding()).copied().unwrap_or(0.0),
            None => {
                if self.samples.contains(x) {
                    1.0 / self.len() as f64
                } else {
                    0.0
                }
            }
        }
    }

    /// `(bitstring, probability)` pairs of the training distribution.
    pub fn distribution(&self) -> Vec<(Bitstring, f64)> {
        self.samples.keys().map(|x| (x, self.weight_of(x))).collect()
    }

    /// Builds a training set from explicit unique samples (e.g. loaded from disk).
    pub fn from_parts(
        samples: SampleMultiset,
        seen_portion: f64,
        weights: Option<BTreeMap<u32, f64>>,
        space: SolutionSpace,
    ) -> Result<Self> {
        for (x, _) in samples.iter() {
            if !space.contains(x) {
                return Err(Error::InvalidTrainingSet(x.to_string()));
            }
        }
        if let Some(w) = &weights {
            let total: f64 = w.values().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::MalformedDistribution(format!(
                    "training weights sum to {total}"
                )));
            }
        }
        Ok(Self {
            samples,
            seen_portion,
            weights,
            space,
        })
    }
}

/// Draws T = round(eps * |S|) unique bitstrings uniformly without replacement.
pub fn draw_training_set(space: &SolutionSpace, eps: f64, seed: u64) -> Result<TrainingSet> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParam(format!("eps = {eps} out of range (0, 1]")));
    }
    let t = ((eps * space.size() as f64).round() as u64).max(1);
    let mut pool = enumerate_space(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = pool.len();
    let t = (t as usize).min(len);
    // partial Fisher-Yates
    for i in 0..t {
        let j = rng.gen_range(i..len);
        pool.swap(i, j);
    }
    let mut samples = SampleMultiset::new(space.width());
    for &x in &pool[..t] {
        samples.insert(x)?;
    }
    Ok(TrainingSet {
        samples,
        seen_portion: eps,
        weights: None,
        space: *space,
    })
}

/// Attaches softmax cost weights: w(x) = exp(-beta c(x)) / sum, with
/// 1/beta the population standard deviation of the training costs.
/// Degenerate zero std falls back to uniform weights.
pub fn reweight(ts: &TrainingSet, cost: &dyn CostOracle) -> Result<TrainingSet> {
    if ts.is_reweighted() {
        return Err(Error::InvalidParam("training set already reweighted".into()));
    }
    let keys: Vec<Bitstring> = ts.samples.keys().collect();
    let costs: Vec<f64> = keys
        .iter()
        .map(|&x| cost.cost(x))
        .collect::<Result<Vec<f64>>>()?;
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParam("non-finite training cost".into()));
    }
    let t = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / t;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / t;
    let std = var.sqrt();

    let mut weights = BTreeMap::new();
    if std == 0.0 {
        for &x in &keys {
            weights.insert(x.encoding(), 1.0 / t);
        }
    } else {
        let beta = 1.0 / std;
        let c_min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
        let unnorm: Vec<f64> = costs.iter().map(|c| (-beta * (c - c_min)).exp()).collect();
        let z: f64 = unnorm.iter().sum();
        for (&x, &u) in keys.iter().zip(&unnorm) {
            weights.insert(x.encoding(), u / z);
        }
    }
    Ok(TrainingSet {
        samples: ts.samples.clone(),
        seen_portion: ts.seen_portion,
        weights: Some(weights),
        space: ts.space,
    })
}

/// Writes a dataset file: one bitstring per line, optional cost and weight columns.
pub fn save_dataset(path: &Path, ts: &TrainingSet, cost: Option<&dyn CostOracle>) -> Result<()> {
    let mut out = String::new();
    for x in ts.samples.keys() {
        out.push_str(&x.to_string());
        if let Some(oracle) = cost {
            out.push_str(&format!(",{}", oracle.cost(x)?));
            if ts.is_reweighted() {
                out.push_str(&format!(",{}", ts.weight_of(x)));
            }
        }
        out.push('\n');
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a dataset file back into samples plus optional cost/weight columns.
pub fn load_dataset(
    path: &Path,
) -> Result<(SampleMultiset, Option<BTreeMap<u32, f64>>, Option<BTreeMap<u32, f64>>)> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut samples: Option<SampleMultiset> = None;
    let mut costs = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for line in file.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let x: Bitstring = parts.next().unwrap().parse()?;
        let ms = samples.get_or_insert_with(|| SampleMultiset::new(x.width()));
        ms.insert(x)?;
        if let Some(c) = parts.next() {
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad cost value: {e}")))?;
            costs.insert(x.encoding(), c);
        }
        if let Some(w) = parts.next() {
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad weight value: {e}")))?;
            weights.insert(x.encoding(), w);
        }
    }
    let samples = samples.ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    Ok((
        samples,
        if costs.is_empty() { None } else { Some(costs) },
        if weights.is_empty() { None } else { Some(weights) },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn space_sizes() {
        assert_eq!(
            build_space(4, SpaceKind::Cardinality { k: 2 }).unwrap().size(),
            6
        );
        assert_eq!(
            build_space(20, SpaceKind::Cardinality { k: 10 }).unwrap().size(),
            184756
        );
        assert_eq!(
            build_space(9, SpaceKind::BarsAndStripes { rows: 3, cols: 3 })
                .unwrap()
                .size(),
            14
        );
        assert_eq!(
            build_space(3, SpaceKind::Parity { even: true }).unwrap().size(),
            4
        );
    }

    #[test]
    fn space_rejects_bad_params() {
        assert!(build_space(4, SpaceKind::Cardinality { k: 5 }).is_err());
        assert!(build_space(6, SpaceKind::BarsAndStripes { rows: 2, cols: 2 }).is_err());
    }

    #[test]
    fn enumerate_matches_examples() {
        let space = build_space(4, SpaceKind::Cardinality { k: 2 }).unwrap();
        let got: Vec<String> = enumerate_space(&space)
            .unwrap()
            .iter()
            .map(|x| x.to_string())
            .collect();
        assert_eq!(got, ["0011", "0101", "0110", "1001", "1010", "1100"]);

        let space = build_space(3, SpaceKind::Parity { even: true }).unwrap();
        let got: Vec<String> = enumerate_space(&space)
            .unwrap()
            .iter()
            .map(|x| x.to_string())
            .collect();
        assert_eq!(got, ["000", "011", "101", "110"]);

        let space = build_space(20, SpaceKind::Cardinality { k: 10 }).unwrap();
        assert_eq!(enumerate_space(&space).unwrap().len(), 184756);
    }

    #[test]
    fn brute_force_count_matches_size() {
        let spaces = [
            build_space(10, SpaceKind::Cardinality { k: 4 }).unwrap(),
            build_space(11, SpaceKind::Parity { even: false }).unwrap(),
            build_space(12, SpaceKind::BarsAndStripes { rows: 3, cols: 4 }).unwrap(),
            build_space(16, SpaceKind::Cardinality { k: 8 }).unwrap(),
        ];
        for space in spaces {
            let n = space.width();
            let count = (0u32..1 << n)
                .filter(|&b| space.contains(Bitstring::new(n, b)))
                .count() as u64;
            assert_eq!(count, space.size());
        }
    }

    #[test]
    fn enumeration_is_sorted_valid_and_distinct() {
        for space in [
            build_space(9, SpaceKind::BarsAndStripes { rows: 3, cols: 3 }).unwrap(),
            build_space(8, SpaceKind::Cardinality { k: 3 }).unwrap(),
            build_space(7, SpaceKind::Parity { even: true }).unwrap(),
        ] {
            let all = enumerate_space(&space).unwrap();
            assert_eq!(all.len() as u64, space.size());
            for w in all.windows(2) {
                assert!(w[0].encoding() < w[1].encoding());
            }
            assert!(all.iter().all(|&x| space.contains(x)));
        }
    }

    #[test]
    fn synth_universe_is_deterministic_and_psd() {
        let a = synth_universe(4, 7).unwrap();
        let b = synth_universe(4, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.is_psd());
        let u = synth_universe(20, 1).unwrap();
        assert_eq!(u.target_return, 0.002);
        assert!(u.is_psd());
    }

    #[test]
    fn risk_cost_closed_forms() {
        let identity = AssetUniverse {
            n_assets: 4,
            mean_returns: vec![0.0; 4],
            covariance: (0..4)
                .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            target_return: 0.002,
        };
        let x = Bitstring::new(4, 0b0101);
        assert_relative_eq!(
            risk_cost(&identity, x).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );

        // sigma scales as sqrt of the covariance scale
        let mut scaled = identity.clone();
        for row in &mut scaled.covariance {
            for v in row.iter_mut() {
                *v *= 4.0;
            }
        }
        assert_relative_eq!(
            risk_cost(&scaled, x).unwrap(),
            2.0 * risk_cost(&identity, x).unwrap(),
            epsilon = 1e-12
        );

        // single asset
        let single = Bitstring::new(4, 0b0100);
        assert_relative_eq!(risk_cost(&identity, single).unwrap(), 1.0, epsilon = 1e-12);

        assert!(matches!(
            risk_cost(&identity, Bitstring::new(4, 0)),
            Err(Error::UndefinedCost)
        ));
    }

    #[test]
    fn draw_training_set_basics() {
        let space = build_space(20, SpaceKind::Cardinality { k: 10 }).unwrap();
        let ts = draw_training_set(&space, 0.01, 3).unwrap();
        assert_eq!(ts.len(), 1848);
        assert!(ts.samples().keys().all(|x| space.contains(x)));

        let again = draw_training_set(&space, 0.01, 3).unwrap();
        assert_eq!(ts.samples(), again.samples());

        let small = build_space(4, SpaceKind::Cardinality { k: 2 }).unwrap();
        let full = draw_training_set(&small, 1.0, 0).unwrap();
        assert_eq!(full.len(), 6);

        assert!(draw_training_set(&small, 0.0, 0).is_err());
        assert!(draw_training_set(&small, 1.5, 0).is_err());
    }

    struct FixedCost(BTreeMap<u32, f64>);
    impl CostOracle for FixedCost {
        fn cost(&self, x: Bitstring) -> Result<f64> {
            Ok(self.0[&x.encoding()])
        }
    }

    fn two_sample_ts(costs: [f64; 2]) -> (TrainingSet, FixedCost) {
        let space = build_space(2, SpaceKind::Cardinality { k: 1 }).unwrap();
        let mut samples = SampleMultiset::new(2);
        samples.insert(Bitstring::new(2, 0b01)).unwrap();
        samples.insert(Bitstring::new(2, 0b10)).unwrap();
        let ts = TrainingSet::from_parts(samples, 1.0, None, space).unwrap();
        let mut map = BTreeMap::new();
        map.insert(0b01, costs[0]);
        map.insert(0b10, costs[1]);
        (ts, FixedCost(map))
    }

    #[test]
    fn reweight_degenerate_std_is_uniform() {
        let (ts, oracle) = two_sample_ts([1.0, 1.0]);
        let rw = reweight(&ts, &oracle).unwrap();
        assert_relative_eq!(rw.weight_of(Bitstring::new(2, 0b01)), 0.5, epsilon = 1e-12);
        assert_relative_eq!(rw.weight_of(Bitstring::new(2, 0b10)), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn reweight_closed_form() {
        // costs {0, 2}: population std = 1, beta = 1
        let (ts, oracle) = two_sample_ts([0.0, 2.0]);
        let rw = reweight(&ts, &oracle).unwrap();
        let z = 1.0 + (-2.0f64).exp();
        assert_relative_eq!(
            rw.weight_of(Bitstring::new(2, 0b01)),
            1.0 / z,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            rw.weight_of(Bitstring::new(2, 0b10)),
            (-2.0f64).exp() / z,
            epsilon = 1e-12
        );
        // lowest cost carries the max weight
        assert!(
            rw.weight_of(Bitstring::new(2, 0b01)) > rw.weight_of(Bitstring::new(2, 0b10))
        );
        let sum: f64 = rw.distribution().iter().map(|(_, p)| p).sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reweight_is_shift_invariant() {
        let (ts, oracle) = two_sample_ts([0.3, 1.7]);
        let (_, shifted) = two_sample_ts([0.3 + 5.0, 1.7 + 5.0]);
        let a = reweight(&ts, &oracle).unwrap();
        let b = reweight(&ts, &shifted).unwrap();
        for x in [Bitstring::new(2, 0b01), Bitstring::new(2, 0b10)] {
            assert_relative_eq!(a.weight_of(x), b.weight_of(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn overlap_matches_hypergeometric_expectation() {
        // 100 draws at N=12, k=6, eps=0.1; disjoint pairs are independent
        let space = build_space(12, SpaceKind::Cardinality { k: 6 }).unwrap();
        let s = space.size() as f64;
        let draws: Vec<TrainingSet> = (0..100)
            .map(|seed| draw_training_set(&space, 0.1, seed).unwrap())
            .collect();
        let t = draws[0].len() as f64;
        let mu = t * t / s;
        let var = t * (t / s) * (1.0 - t / s) * ((s - t) / (s - 1.0));
        let pairs = 50usize;
        let mut mean = 0.0;
        for i in 0..pairs {
            let a = &draws[2 * i];
            let b = &draws[2 * i + 1];
            let overlap = a
                .samples()
                .keys()
                .filter(|&x| b.samples().contains(x))
                .count() as f64;
            mean += overlap;
        }
        mean /= pairs as f64;
        let sigma_mean = (var / pairs as f64).sqrt();
        assert!(
            (mean - mu).abs() < 5.0 * sigma_mean,
            "overlap mean {mean} vs expected {mu} (sigma_mean {sigma_mean})"
        );
    }

    #[test]
    fn dataset_round_trip() {
        let space = build_space(6, SpaceKind::Cardinality { k: 3 }).unwrap();
        let ts = draw_training_set(&space, 0.3, 11).unwrap();
        let u = synth_universe(6, 0).unwrap();
        let oracle = EqualWeightRisk::new(u);
        let rw = reweight(&ts, &oracle).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        save_dataset(&path, &rw, Some(&oracle)).unwrap();
        let (samples, costs, weights) = load_dataset(&path).unwrap();
        assert_eq!(&samples, rw.samples());
        let costs = costs.unwrap();
        let weights = weights.unwrap();
        for x in samples.keys() {
            assert_relative_eq!(costs[&x.encoding()], oracle.cost(x).unwrap(), epsilon = 1e-12);
            assert_relative_eq!(weights[&x.encoding()], rw.weight_of(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn universe_csv_round_trip() {
        let u = synth_universe(5, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mu = dir.path().join("universe.csv");
        let cov = dir.path().join("covariance.csv");
        u.save_csv(&mu, &cov).unwrap();
        let back = AssetUniverse::load_csv(&mu, &cov).unwrap();
        assert_eq!(u, back);
    }
}
