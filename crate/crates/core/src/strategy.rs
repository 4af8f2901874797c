//! Transition-enumeration strategies.
//!
//! Both strategies first prefer a transition that leads to an already visited
//! state. Ties are then broken sequentially (a fixed permutation of thread
//! ids) or randomly (seeded, and derived statelessly from the state
//! fingerprint so a run is reproducible and repeated queries agree).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::lts::Fingerprint;
use crate::program::ThreadId;

/// How to order candidate threads at a scheduling point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrategyConfig {
    /// Thread ids in a fixed preference order; must be a permutation of
    /// `0..n` for the program being explored. `Sequential(vec![2,0,1])`
    /// prefers thread 2, then 0, then 1.
    Sequential(Vec<ThreadId>),
    /// Uniform choice driven by a reproducible seed.
    Random { seed: u64 },
}

impl StrategyConfig {
    pub fn identity(n: usize) -> Self {
        StrategyConfig::Sequential((0..n).collect())
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            StrategyConfig::Sequential(_) => None,
            StrategyConfig::Random { seed } => Some(*seed),
        }
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyConfig::Sequential(perm) if perm.is_empty() => write!(f, "seq"),
            StrategyConfig::Sequential(perm) => {
                write!(f, "seq:")?;
                for (i, t) in perm.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
            StrategyConfig::Random { seed } => write!(f, "rand:{seed}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("cannot parse strategy {0:?}: expected seq[:i,j,..] or rand:<seed>")]
    Unparseable(String),
    #[error("permutation {perm:?} is not a bijection on 0..{threads}")]
    BadPermutation { perm: Vec<ThreadId>, threads: usize },
}

impl FromStr for StrategyConfig {
    type Err = StrategyError;

    /// Accepts `seq` (identity, resolved at run start), `seq:2,0,1`, and
    /// `rand:<seed>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "seq" {
            return Ok(StrategyConfig::Sequential(Vec::new()));
        }
        if let Some(rest) = s.strip_prefix("seq:") {
            let perm = rest
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| StrategyError::Unparseable(s.to_string()))?;
            return Ok(StrategyConfig::Sequential(perm));
        }
        if let Some(rest) = s.strip_prefix("rand:") {
            let seed = rest
                .trim()
                .parse::<u64>()
                .map_err(|_| StrategyError::Unparseable(s.to_string()))?;
            return Ok(StrategyConfig::Random { seed });
        }
        Err(StrategyError::Unparseable(s.to_string()))
    }
}

/// Small reproducible generator (splitmix64).
#[derive(Debug, Clone)]
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }
}

/// A strategy resolved against a concrete thread count. Holds the preference
/// order used for deterministic picks (for the random strategy, a seeded
/// shuffle fixed for the whole run).
#[derive(Debug, Clone)]
pub struct Chooser {
    order: Vec<ThreadId>,
    rand_seed: Option<u64>,
}

impl Chooser {
    pub fn new(cfg: &StrategyConfig, threads: usize) -> Result<Self, StrategyError> {
        match cfg {
            StrategyConfig::Sequential(perm) => {
                let perm = if perm.is_empty() {
                    (0..threads).collect()
                } else {
                    perm.clone()
                };
                let mut seen = vec![false; threads];
                let ok = perm.len() == threads
                    && perm.iter().all(|&t| {
                        if t < threads && !seen[t] {
                            seen[t] = true;
                            true
                        } else {
                            false
                        }
                    });
                if !ok {
                    return Err(StrategyError::BadPermutation { perm, threads });
                }
                Ok(Chooser {
                    order: perm,
                    rand_seed: None,
                })
            }
            StrategyConfig::Random { seed } => {
                let mut order: Vec<ThreadId> = (0..threads).collect();
                let mut rng = SplitMix64(seed.wrapping_mul(0xa24baed4963ee407).wrapping_add(1));
                for i in (1..order.len()).rev() {
                    let j = rng.below(i as u64 + 1) as usize;
                    order.swap(i, j);
                }
                Ok(Chooser {
                    order,
                    rand_seed: Some(*seed),
                })
            }
        }
    }

    /// The run's fixed preference order over all thread ids.
    pub fn order(&self) -> &[ThreadId] {
        &self.order
    }

    /// First member of `set` under the run's fixed order. Used where the
    /// algorithms need one deterministic representative (safe-set singletons,
    /// initial backtrack threads).
    pub fn first_by_order(&self, set: &BTreeSet<ThreadId>) -> Option<ThreadId> {
        self.order.iter().copied().find(|t| set.contains(t))
    }

    /// Pick one of `candidates` (nonempty), preferring `visited_leading`
    /// members when any exist. The random strategy derives its draw from the
    /// seed and the state fingerprint, so identical queries agree.
    pub fn pick(
        &self,
        candidates: &BTreeSet<ThreadId>,
        visited_leading: &BTreeSet<ThreadId>,
        at: Fingerprint,
    ) -> ThreadId {
        assert!(!candidates.is_empty(), "pick from empty candidate set");
        let pool: &BTreeSet<ThreadId> = if visited_leading.is_empty() {
            candidates
        } else {
            visited_leading
        };
        match self.rand_seed {
            None => self
                .first_by_order(pool)
                .expect("candidates within thread range"),
            Some(seed) => {
                let mut rng = SplitMix64(
                    seed ^ (at.0 as u64) ^ ((at.0 >> 64) as u64).wrapping_mul(0x9e3779b97f4a7c15),
                );
                let idx = rng.below(pool.len() as u64) as usize;
                *pool.iter().nth(idx).expect("index within pool")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_strategy_tokens() {
        assert_eq!(
            "seq:2,0,1".parse::<StrategyConfig>().unwrap(),
            StrategyConfig::Sequential(vec![2, 0, 1])
        );
        assert_eq!(
            "rand:42".parse::<StrategyConfig>().unwrap(),
            StrategyConfig::Random { seed: 42 }
        );
        assert_eq!(
            "seq".parse::<StrategyConfig>().unwrap(),
            StrategyConfig::Sequential(vec![])
        );
        assert!("banana".parse::<StrategyConfig>().is_err());
        assert!("rand:x".parse::<StrategyConfig>().is_err());
    }

    #[test]
    fn rejects_non_bijective_permutations() {
        let cfg = StrategyConfig::Sequential(vec![0, 0, 1]);
        assert!(Chooser::new(&cfg, 3).is_err());
        let cfg = StrategyConfig::Sequential(vec![0, 1]);
        assert!(Chooser::new(&cfg, 3).is_err());
        let cfg = StrategyConfig::Sequential(vec![0, 1, 3]);
        assert!(Chooser::new(&cfg, 3).is_err());
    }

    #[test]
    fn sequential_pick_respects_permutation() {
        let cfg = StrategyConfig::Sequential(vec![2, 0, 1]);
        let chooser = Chooser::new(&cfg, 3).unwrap();
        let candidates = BTreeSet::from([0, 1, 2]);
        let none_visited = BTreeSet::new();
        assert_eq!(chooser.pick(&candidates, &none_visited, Fingerprint(7)), 2);
    }

    #[test]
    fn visited_first_overrides_order() {
        let cfg = StrategyConfig::Sequential(vec![2, 0, 1]);
        let chooser = Chooser::new(&cfg, 3).unwrap();
        let candidates = BTreeSet::from([0, 1, 2]);
        let visited = BTreeSet::from([1]);
        assert_eq!(chooser.pick(&candidates, &visited, Fingerprint(7)), 1);
        // Random mode also honors visited-first.
        let chooser = Chooser::new(&StrategyConfig::Random { seed: 3 }, 3).unwrap();
        assert_eq!(chooser.pick(&candidates, &visited, Fingerprint(7)), 1);
    }

    #[test]
    fn random_pick_is_reproducible() {
        let chooser = Chooser::new(&StrategyConfig::Random { seed: 99 }, 4).unwrap();
        let candidates = BTreeSet::from([0, 1, 2, 3]);
        let empty = BTreeSet::new();
        let a = chooser.pick(&candidates, &empty, Fingerprint(12345));
        let b = chooser.pick(&candidates, &empty, Fingerprint(12345));
        assert_eq!(a, b);
        let again = Chooser::new(&StrategyConfig::Random { seed: 99 }, 4).unwrap();
        assert_eq!(again.order(), chooser.order());
    }

    #[test]
    fn display_round_trips() {
        for text in ["seq:2,0,1", "rand:7"] {
            let cfg: StrategyConfig = text.parse().unwrap();
            assert_eq!(cfg.to_string(), text);
        }
    }
}
