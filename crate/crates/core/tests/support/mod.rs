//! Shared brute-force oracle for integration tests: every metric value must
//! match an independent enumeration oracle exactly on randomized small
//! instances. Instances use integer-valued costs so floating sums are exact.

use std::collections::{BTreeMap, HashSet};

use genbench::bitcore::{multiset_from_samples, Bitstring, SampleMultiset};
use genbench::metrics::{count_below_threshold, minimum_value, utility, validity_metrics};
use genbench::tasks::{build_space, enumerate_space, CostOracle, SpaceKind, TrainingSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Validity re-derived from the raw encoding, independent of SolutionSpace.
fn oracle_valid(kind: SpaceKind, width: usize, enc: u32) -> bool {
    let bit = |i: usize| (enc >> i) & 1;
    let weight: u32 = (0..width).map(|i| bit(i)).sum();
    match kind {
        SpaceKind::Cardinality { k } => weight as usize == k,
        SpaceKind::Parity { even } => (weight % 2 == 0) == even,
        SpaceKind::BarsAndStripes { rows, cols } => {
            let rows_uniform =
                (0..rows).all(|r| (0..cols).all(|c| bit(r * cols + c) == bit(r * cols)));
            let cols_uniform = (0..cols).all(|c| (0..rows).all(|r| bit(r * cols + c) == bit(c)));
            rows_uniform || cols_uniform
        }
    }
}

struct MapCost(BTreeMap<u32, f64>);
impl CostOracle for MapCost {
    fn cost(&self, x: Bitstring) -> genbench::Result<f64> {
        Ok(self.0[&x.encoding()])
    }
}

fn random_kind(width: usize, rng: &mut ChaCha8Rng) -> SpaceKind {
    let mut options = vec![
        SpaceKind::Cardinality {
            k: rng.gen_range(1..width),
        },
        SpaceKind::Parity { even: rng.gen() },
    ];
    let factorizations: Vec<(usize, usize)> = (2..width)
        .filter(|r| width % r == 0)
        .map(|r| (r, width / r))
        .collect();
    if !factorizations.is_empty() {
        let (rows, cols) = factorizations[rng.gen_range(0..factorizations.len())];
        options.push(SpaceKind::BarsAndStripes { rows, cols });
    }
    options[rng.gen_range(0..options.len())]
}

/// Runs `n_instances` randomized instances (N in 3..=10) and asserts that all
/// validity counts and metric values match the enumeration oracle exactly,
/// and that the identity R = E*F and the coverage bound hold.
pub fn check_randomized_instances(n_instances: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for instance in 0..n_instances {
        let width = rng.gen_range(3..=10usize);
        let kind = random_kind(width, &mut rng);
        let space = build_space(width, kind).unwrap();
        let solutions = enumerate_space(&space).unwrap();
        let s_size = solutions.len() as u64;

        // random training subset of the solution space
        let t = rng.gen_range(1..=solutions.len());
        let mut pool = solutions.clone();
        for i in 0..t {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        let train_samples = multiset_from_samples(pool[..t].iter().copied()).unwrap();
        let eps = t as f64 / s_size as f64;
        let train = TrainingSet::from_parts(train_samples, eps, None, space).unwrap();
        let train_set: HashSet<u32> = pool[..t].iter().map(|x| x.encoding()).collect();

        // random query multiset over the full search space
        let n_queries = rng.gen_range(1..400u64);
        let mut queries = SampleMultiset::new(width);
        let mut remaining = n_queries;
        while remaining > 0 {
            let mult = rng.gen_range(1..=remaining.min(5));
            let enc = rng.gen_range(0..(1u32 << width));
            queries.insert_n(Bitstring::new(width, enc), mult).unwrap();
            remaining -= mult;
        }

        // integer-valued costs keep every floating sum exact
        let mut cost_map = BTreeMap::new();
        for enc in 0..(1u32 << width) {
            cost_map.insert(enc, rng.gen_range(0..10) as f64);
        }
        let oracle = MapCost(cost_map.clone());

        // ---- enumeration oracle ----
        let mut o_g_new = 0u64;
        let mut o_g_sol = 0u64;
        let mut o_sol_unique: Vec<u32> = Vec::new();
        for (x, n) in queries.iter() {
            let enc = x.encoding();
            if !train_set.contains(&enc) {
                o_g_new += n;
                if oracle_valid(kind, width, enc) {
                    o_g_sol += n;
                    o_sol_unique.push(enc);
                }
            }
        }
        let q = queries.total();

        let rep = validity_metrics(&train, &space, &queries).unwrap();
        assert_eq!(rep.counts.q, q, "instance {instance}");
        assert_eq!(rep.counts.g_new, o_g_new, "instance {instance}");
        assert_eq!(rep.counts.g_sol, o_g_sol, "instance {instance}");
        assert_eq!(
            rep.counts.g_sol_unique,
            o_sol_unique.len() as u64,
            "instance {instance}"
        );
        assert_eq!(rep.counts.t, t as u64);
        assert_eq!(rep.counts.s_size, s_size);

        // exact divisions of the same integers must agree bitwise
        assert_eq!(rep.e, o_g_new as f64 / q as f64);
        match rep.f {
            Some(f) => assert_eq!(f, o_g_sol as f64 / o_g_new as f64),
            None => {
                assert_eq!(o_g_new, 0);
                assert_eq!(rep.r, 0.0);
            }
        }
        // R is the product E*F; agree with the direct ratio to an ulp
        let direct_r = o_g_sol as f64 / q as f64;
        assert!(
            (rep.r - direct_r).abs() <= 1e-15 * direct_r.max(1.0),
            "instance {instance}: R = {} vs {direct_r}",
            rep.r
        );
        match rep.c {
            Some(c) => {
                assert!((t as u64) < s_size);
                assert_eq!(c, o_sol_unique.len() as f64 / (s_size - t as u64) as f64);
            }
            None => assert_eq!(t as u64, s_size),
        }

        // identity and bound suite
        if let Some(f) = rep.f {
            assert_eq!(rep.r, rep.e * f, "instance {instance}: R != E*F");
        }
        if let Some(c) = rep.c {
            let bound = rep.e * q as f64 / (s_size - t as u64) as f64;
            assert!(
                c <= bound + 1e-12,
                "instance {instance}: C = {c} above bound {bound}"
            );
        }

        // ---- quality metrics vs expansion oracle ----
        if o_g_sol > 0 {
            let mut expanded: Vec<(f64, u32)> = Vec::new();
            for (x, n) in queries.iter() {
                let enc = x.encoding();
                if !train_set.contains(&enc) && oracle_valid(kind, width, enc) {
                    for _ in 0..n {
                        expanded.push((cost_map[&enc], enc));
                    }
                }
            }
            expanded.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

            let (mv, mv_train) =
                minimum_value(std::slice::from_ref(&queries), &train, &space, &oracle).unwrap();
            assert_eq!(mv, expanded[0].0, "instance {instance}: MV");
            let o_mv_train = pool[..t]
                .iter()
                .map(|x| cost_map[&x.encoding()])
                .fold(f64::INFINITY, f64::min);
            assert_eq!(mv_train, o_mv_train, "instance {instance}: MV_train");

            let t_percent = *[5.0, 25.0, 50.0, 100.0]
                .iter()
                .nth(rng.gen_range(0..4))
                .unwrap();
            let take = (((t_percent / 100.0) * expanded.len() as f64).ceil() as usize).max(1);
            let o_u: f64 = expanded[..take].iter().map(|&(c, _)| c).sum::<f64>() / take as f64;
            let (u, u_train) = utility(&queries, &train, &space, &oracle, t_percent).unwrap();
            assert_eq!(u, o_u, "instance {instance}: U at t={t_percent}");

            let mut train_costs: Vec<f64> =
                pool[..t].iter().map(|x| cost_map[&x.encoding()]).collect();
            train_costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let take_t = (((t_percent / 100.0) * t as f64).ceil() as usize).max(1);
            let o_u_train: f64 = train_costs[..take_t].iter().sum::<f64>() / take_t as f64;
            assert_eq!(u_train, o_u_train, "instance {instance}: U_train");

            let c_prime = rng.gen_range(0..11) as f64 - 0.5;
            let o_below = o_sol_unique
                .iter()
                .collect::<HashSet<_>>()
                .iter()
                .filter(|&&&enc| cost_map[&enc] < c_prime)
                .count() as u64;
            let below =
                count_below_threshold(&queries, &train, &space, &oracle, c_prime).unwrap();
            assert_eq!(below, o_below, "instance {instance}: count below {c_prime}");
        }
    }
}
