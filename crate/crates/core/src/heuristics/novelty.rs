use std::collections::HashMap;

use crate::task::{FactId, State};

/// Seen facts and fact pairs of one partition. The pair table is a
/// triangular bit matrix allocated on first use.
#[derive(Debug)]
struct Partition {
    facts: State,
    pairs: Vec<u64>,
}

/// Width-2 novelty tables keyed by partition, persistent across a search.
#[derive(Debug)]
pub struct NoveltyStore {
    num_facts: usize,
    partitions: HashMap<(u32, u32), Partition>,
    bytes: usize,
}

fn pair_index(i: FactId, j: FactId) -> usize {
    debug_assert!(i < j);
    j * (j - 1) / 2 + i
}

impl NoveltyStore {
    pub fn new(num_facts: usize) -> Self {
        NoveltyStore {
            num_facts,
            partitions: HashMap::new(),
            bytes: 0,
        }
    }

    /// 1 if `s` has a fact unseen in the partition, else 2 if it has an unseen
    /// pair, else 3. Records the facts and pairs of `s` either way.
    pub fn evaluate(&mut self, key: (u32, u32), s: &State) -> u8 {
        let n = self.num_facts;
        let part = self.partitions.entry(key).or_insert_with(|| Partition {
            facts: State::empty(n),
            pairs: Vec::new(),
        });
        if part.pairs.is_empty() && n >= 2 {
            part.pairs = vec![0u64; (n * (n - 1) / 2).div_ceil(64)];
            self.bytes += part.pairs.len() * 8 + part.facts.heap_bytes();
        }
        let facts: Vec<FactId> = s.iter().collect();
        let mut new_fact = false;
        for &f in &facts {
            if !part.facts.contains(f) {
                part.facts.insert(f);
                new_fact = true;
            }
        }
        let mut new_pair = false;
        for (k, &j) in facts.iter().enumerate() {
            for &i in &facts[..k] {
                let idx = pair_index(i, j);
                let (w, bit) = (idx >> 6, 1u64 << (idx & 63));
                if part.pairs[w] & bit == 0 {
                    part.pairs[w] |= bit;
                    new_pair = true;
                }
            }
        }
        if new_fact {
            1
        } else if new_pair {
            2
        } else {
            3
        }
    }

    pub fn num_partitions(&self) -> usize {
        self.partitions.len()
    }

    /// Approximate heap footprint of the tables.
    pub fn heap_bytes(&self) -> usize {
        self.bytes
    }
}
