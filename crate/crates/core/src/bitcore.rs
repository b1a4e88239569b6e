//! Fixed-width bitstrings and multiset bookkeeping.
//!
//! Bit 0 is the least-significant position. Text form is always
//! most-significant-first, so `Bitstring::new(4, 0b0011)` prints as `"0011"`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::SolutionSpace;

/// Maximum supported width; keeps exhaustive enumeration of {0,1}^N feasible.
pub const MAX_WIDTH: usize = 30;

/// A fixed-width binary pattern, the atomic sample of every distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bitstring {
    width: usize,
    bits: u32,
}

impl Bitstring {
    /// Panics if `width` is out of range or `bits` has set bits above position `width - 1`.
    pub fn new(width: usize, bits: u32) -> Self {
        assert!(
            (1..=MAX_WIDTH).contains(&width),
            "width {width} out of range 1..={MAX_WIDTH}"
        );
        assert!(
            width == 32 || bits >> width == 0,
            "encoding {bits:#b} exceeds width {width}"
        );
        Self { width, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Canonical unsigned-integer encoding.
    pub fn encoding(&self) -> u32 {
        self.bits
    }

    /// Value of position `i` (bit 0 is least significant).
    pub fn bit(&self, i: usize) -> u8 {
        debug_assert!(i < self.width);
        ((self.bits >> i) & 1) as u8
    }

    /// Number of set bits.
    pub fn hamming_weight(&self) -> u32 {
        self.bits.count_ones()
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width).rev() {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let width = s.len();
        if !(1..=MAX_WIDTH).contains(&width) {
            return Err(Error::Parse(format!(
                "bitstring length {width} out of range 1..={MAX_WIDTH}"
            )));
        }
        let mut bits = 0u32;
        for (offset, ch) in s.chars().enumerate() {
            let i = width - 1 - offset;
            match ch {
                '0' => {}
                '1' => bits |= 1 << i,
                _ => return Err(Error::Parse(format!("invalid character {ch:?} in bitstring"))),
            }
        }
        Ok(Self { width, bits })
    }
}

/// Number of set bits in `x`.
pub fn hamming_weight(x: Bitstring) -> u32 {
    x.hamming_weight()
}

/// A multiset of same-width bitstrings with exact integer counts.
///
/// Counts are never stored as frequencies so that metric numerators stay exact.
/// Zero-count entries are removed eagerly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMultiset {
    width: usize,
    counts: BTreeMap<u32, u64>,
    total: u64,
}

impl SampleMultiset {
    pub fn new(width: usize) -> Self {
        assert!((1..=MAX_WIDTH).contains(&width));
        Self {
            width,
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Total count Q (with multiplicity).
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct bitstrings.
    pub fn unique_len(&self) -> u64 {
        self.counts.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, x: Bitstring) -> u64 {
        if x.width() != self.width {
            return 0;
        }
        self.counts.get(&x.encoding()).copied().unwrap_or(0)
    }

    pub fn contains(&self, x: Bitstring) -> bool {
        self.count(x) > 0
    }

    pub fn insert(&mut self, x: Bitstring) -> Result<()> {
        self.insert_n(x, 1)
    }

    pub fn insert_n(&mut self, x: Bitstring, n: u64) -> Result<()> {
        if x.width() != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                got: x.width(),
            });
        }
        if n > 0 {
            *self.counts.entry(x.encoding()).or_insert(0) += n;
            self.total += n;
        }
        Ok(())
    }

    /// Iterate `(bitstring, count)` pairs in encoding order.
    pub fn iter(&self) -> impl Iterator<Item = (Bitstring, u64)> + '_ {
        self.counts
            .iter()
            .map(|(&bits, &n)| (Bitstring::new(self.width, bits), n))
    }

    /// Iterate distinct bitstrings in encoding order.
    pub fn keys(&self) -> impl Iterator<Item = Bitstring> + '_ {
        self.counts.keys().map(|&bits| Bitstring::new(self.width, bits))
    }
}

/// Collects a sequence of bitstrings into a multiset.
pub fn multiset_from_samples<I>(samples: I) -> Result<SampleMultiset>
where
    I: IntoIterator<Item = Bitstring>,
{
    let mut it = samples.into_iter().peekable();
    let width = match it.peek() {
        Some(first) => first.width(),
        None => {
            // empty sequence: width is arbitrary but must be valid
            return Ok(SampleMultiset::new(1));
        }
    };
    let mut ms = SampleMultiset::new(width);
    for x in it {
        ms.insert(x)?;
    }
    Ok(ms)
}

/// Splits a query multiset into the unseen part and the unseen-valid part.
///
/// `g_new` holds every query absent from `train` (counts preserved); `g_sol`
/// restricts `g_new` to the solution space. The training set is checked for
/// validity up front.
pub fn partition_queries(
    queries: &SampleMultiset,
    train: &SampleMultiset,
    space: &SolutionSpace,
) -> Result<(SampleMultiset, SampleMultiset)> {
    if queries.width() != train.width() {
        return Err(Error::WidthMismatch {
            expected: queries.width(),
            got: train.width(),
        });
    }
    if queries.width() != space.width() {
        return Err(Error::WidthMismatch {
            expected: space.width(),
            got: queries.width(),
        });
    }
    for (x, _) in train.iter() {
        if !space.contains(x) {
            return Err(Error::InvalidTrainingSet(x.to_string()));
        }
    }
    let mut g_new = SampleMultiset::new(queries.width());
    let mut g_sol = SampleMultiset::new(queries.width());
    for (x, n) in queries.iter() {
        if !train.contains(x) {
            g_new.insert_n(x, n)?;
            if space.contains(x) {
                g_sol.insert_n(x, n)?;
            }
        }
    }
    Ok((g_new, g_sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{build_space, SpaceKind};
    use proptest::prelude::*;

    #[test]
    fn hamming_weight_examples() {
        assert_eq!(hamming_weight(Bitstring::new(4, 0b0000)), 0);
        assert_eq!(hamming_weight(Bitstring::new(4, 0b1111)), 4);
        assert_eq!(hamming_weight(Bitstring::new(20, 0b10101010101010101010)), 10);
    }

    #[test]
    fn text_form_is_msb_first() {
        let x = Bitstring::new(4, 0b0011);
        assert_eq!(x.to_string(), "0011");
        assert_eq!("0011".parse::<Bitstring>().unwrap(), x);
        assert_eq!(x.bit(0), 1);
        assert_eq!(x.bit(3), 0);
    }

    #[test]
    fn multiset_from_samples_counts() {
        let ms = multiset_from_samples([]).unwrap();
        assert_eq!(ms.total(), 0);

        let ms = multiset_from_samples([
            Bitstring::new(2, 0b01),
            Bitstring::new(2, 0b01),
            Bitstring::new(2, 0b10),
        ])
        .unwrap();
        assert_eq!(ms.total(), 3);
        assert_eq!(ms.count(Bitstring::new(2, 0b01)), 2);
        assert_eq!(ms.count(Bitstring::new(2, 0b10)), 1);

        // {00, 00, 11} has unique keys {00, 11}
        let ms = multiset_from_samples([
            Bitstring::new(2, 0b00),
            Bitstring::new(2, 0b00),
            Bitstring::new(2, 0b11),
        ])
        .unwrap();
        assert_eq!(ms.unique_len(), 2);
    }

    #[test]
    fn multiset_rejects_mixed_widths() {
        let err = multiset_from_samples([Bitstring::new(2, 0b01), Bitstring::new(3, 0b001)]);
        assert!(matches!(err, Err(Error::WidthMismatch { .. })));
    }

    #[test]
    fn partition_memorization_is_empty() {
        let space = build_space(4, SpaceKind::Cardinality { k: 2 }).unwrap();
        let train = multiset_from_samples([Bitstring::new(4, 0b0011), Bitstring::new(4, 0b0101)])
            .unwrap();
        let (g_new, g_sol) = partition_queries(&train, &train, &space).unwrap();
        assert!(g_new.is_empty());
        assert!(g_sol.is_empty());
    }

    #[test]
    fn partition_hand_enumeration() {
        let space = build_space(4, SpaceKind::Cardinality { k: 2 }).unwrap();
        let train = multiset_from_samples([Bitstring::new(4, 0b0011), Bitstring::new(4, 0b0101)])
            .unwrap();
        let mut queries = SampleMultiset::new(4);
        queries.insert_n(Bitstring::new(4, 0b0011), 2).unwrap();
        queries.insert_n(Bitstring::new(4, 0b0110), 3).unwrap();
        queries.insert_n(Bitstring::new(4, 0b1010), 1).unwrap();
        queries.insert_n(Bitstring::new(4, 0b1111), 2).unwrap();
        queries.insert_n(Bitstring::new(4, 0b0000), 2).unwrap();
        let (g_new, g_sol) = partition_queries(&queries, &train, &space).unwrap();
        assert_eq!(g_new.total(), 8);
        assert_eq!(g_sol.total(), 4);
        let sol_keys: Vec<String> = g_sol.keys().map(|x| x.to_string()).collect();
        assert_eq!(sol_keys, ["0110", "1010"]);
    }

    #[test]
    fn partition_empty_train_returns_all() {
        let space = build_space(4, SpaceKind::Cardinality { k: 2 }).unwrap();
        let train = SampleMultiset::new(4);
        let queries =
            multiset_from_samples([Bitstring::new(4, 0b0110), Bitstring::new(4, 0b0000)]).unwrap();
        let (g_new, _) = partition_queries(&queries, &train, &space).unwrap();
        assert_eq!(g_new, queries);
    }

    #[test]
    fn partition_rejects_invalid_train() {
        let space = build_space(4, SpaceKind::Cardinality { k: 2 }).unwrap();
        let train = multiset_from_samples([Bitstring::new(4, 0b0111)]).unwrap();
        let queries = multiset_from_samples([Bitstring::new(4, 0b0011)]).unwrap();
        assert!(matches!(
            partition_queries(&queries, &train, &space),
            Err(Error::InvalidTrainingSet(_))
        ));
    }

    proptest! {
        #[test]
        fn encoding_round_trip(width in 1usize..=12, bits in 0u32..4096) {
            let bits = bits & ((1u32 << width) - 1);
            let x = Bitstring::new(width, bits);
            let back: Bitstring = x.to_string().parse().unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn partition_is_nested(
            width in 2usize..=8,
            k in 1usize..=4,
            train_bits in proptest::collection::btree_set(0u32..256, 0..6),
            query_bits in proptest::collection::vec(0u32..256, 1..40),
        ) {
            let k = k.min(width);
            let space = build_space(width, SpaceKind::Cardinality { k }).unwrap();
            let mask = (1u32 << width) - 1;
            let train = multiset_from_samples(
                train_bits.iter().map(|&b| b & mask)
                    .filter(|&b| b.count_ones() as usize == k)
                    .map(|b| Bitstring::new(width, b)),
            ).unwrap();
            let train = if train.width() == width { train } else { SampleMultiset::new(width) };
            let queries = multiset_from_samples(
                query_bits.iter().map(|&b| Bitstring::new(width, b & mask)),
            ).unwrap();
            let (g_new, g_sol) = partition_queries(&queries, &train, &space).unwrap();
            prop_assert!(g_sol.total() <= g_new.total());
            prop_assert!(g_new.total() <= queries.total());
            for (x, _) in g_sol.iter() {
                prop_assert!(space.contains(x));
                prop_assert!(!train.contains(x));
            }
        }
    }
}
