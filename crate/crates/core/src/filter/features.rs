use crate::error::{Error, Result};
use crate::util::Fnv1a;

pub const DEFAULT_HASH_BITS: u32 = 20;

const TITLE_TAG: u8 = b't';
const CATEGORY_TAG: u8 = b'c';

/// Sorted, de-duplicated active feature indices; every active value is 1.
pub type SparseFeatures = Vec<u32>;

/// Hashing-trick feature space over article titles and categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHasher {
    dim: usize,
    seed: u64,
}

impl FeatureHasher {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if !dim.is_power_of_two() || dim > 1 << 31 {
            return Err(Error::param(format!("hash_dim must be a power of two ≤ 2^31, got {dim}")));
        }
        Ok(FeatureHasher { dim, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// FNV-1a over `seed (u64 LE) ‖ tag ‖ UTF-8 text`, masked to the table size.
    pub fn index(&self, tag: u8, text: &str) -> u32 {
        let mut h = Fnv1a::default();
        h.update(&self.seed.to_le_bytes());
        h.update(&[tag]);
        h.update(text.as_bytes());
        (h.finish() & (self.dim as u64 - 1)) as u32
    }

    /// Lowercased title tokens (split on non-alphanumeric runs) plus each
    /// lowercased, trimmed category string.
    pub fn featurize(&self, title: &str, categories: &[String]) -> SparseFeatures {
        let title = title.to_lowercase();
        let mut out: Vec<u32> = title_tokens(&title)
            .map(|t| self.index(TITLE_TAG, t))
            .chain(
                categories
                    .iter()
                    .map(|c| c.trim().to_lowercase())
                    .filter(|c| !c.is_empty())
                    .map(|c| self.index(CATEGORY_TAG, &c)),
            )
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn title_tokens(title: &str) -> impl Iterator<Item = &str> {
    title.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty())
}

pub fn featurize(title: &str, categories: &[String], hash_dim: usize, hash_seed: u64) -> Result<SparseFeatures> {
    Ok(FeatureHasher::new(hash_dim, hash_seed)?.featurize(title, categories))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_inputs_give_no_features() {
        assert!(featurize("", &[], 1 << 20, 0).unwrap().is_empty());
        assert!(featurize("  --  ", &["  ".into()], 1 << 20, 0).unwrap().is_empty());
    }

    #[test]
    fn deterministic_and_collapses_duplicates() {
        let a = featurize("Paris, paris!", &["France".into(), "france ".into()], 1 << 20, 3).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a, featurize("Paris, paris!", &["France".into(), "france ".into()], 1 << 20, 3).unwrap());
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(FeatureHasher::new(1000, 0).is_err());
    }

    #[test]
    fn title_token_and_category_do_not_share_a_slot() {
        let h = FeatureHasher::new(1 << 20, 0).unwrap();
        assert_ne!(h.featurize("science", &[]), h.featurize("", &["science".into()]));
    }
}
