//! The sparse binary entity space: vectors in `{0,1}^N` with exactly `C`
//! active components.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub n_dims: usize,
    pub cardinality: usize,
}

impl SpaceConfig {
    pub fn new(n_dims: usize, cardinality: usize) -> Result<Self> {
        if n_dims == 0 || cardinality == 0 || cardinality >= n_dims {
            return Err(Error::Config(format!(
                "space needs 0 < cardinality < dims, got dims={n_dims} cardinality={cardinality}"
            )));
        }
        Ok(SpaceConfig {
            n_dims,
            cardinality,
        })
    }

    /// Number of entity vectors, `N choose C`, as a float (it overflows
    /// integers for realistic spaces).
    pub fn n_entities(&self) -> f64 {
        binomial(self.n_dims, self.cardinality)
    }

    pub fn validate(&self) -> Result<()> {
        SpaceConfig::new(self.n_dims, self.cardinality).map(|_| ())
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// An entity: the strictly increasing list of its active dimensions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityVector {
    active: Vec<u32>,
}

impl EntityVector {
    pub fn from_active(mut active: Vec<u32>, config: &SpaceConfig) -> Result<Self> {
        active.sort_unstable();
        active.dedup();
        if active.len() != config.cardinality {
            return Err(Error::Data(format!(
                "entity has {} distinct active dimensions, expected {}",
                active.len(),
                config.cardinality
            )));
        }
        if active.last().is_some_and(|&d| d as usize >= config.n_dims) {
            return Err(Error::Data("entity dimension out of range".into()));
        }
        Ok(EntityVector { active })
    }

    /// Build from indices already known to be sorted, distinct and in range.
    pub(crate) fn from_sorted_unchecked(active: Vec<u32>) -> Self {
        debug_assert!(active.windows(2).all(|w| w[0] < w[1]));
        EntityVector { active }
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn cardinality(&self) -> usize {
        self.active.len()
    }

    pub fn contains(&self, dim: usize) -> bool {
        self.active.binary_search(&(dim as u32)).is_ok()
    }

    /// Switch `off` off and `on` on, keeping the indices sorted.
    pub fn swap(&mut self, off: usize, on: usize) {
        let pos = self
            .active
            .binary_search(&(off as u32))
            .expect("swapped-off dimension must be active");
        self.active.remove(pos);
        let ins = self
            .active
            .binary_search(&(on as u32))
            .expect_err("swapped-on dimension must be inactive");
        self.active.insert(ins, on as u32);
    }

    pub fn to_dense(&self, n_dims: usize) -> Vec<f64> {
        let mut v = vec![0.0; n_dims];
        for &i in &self.active {
            v[i as usize] = 1.0;
        }
        v
    }

    /// Sum of `weights` over the active dimensions.
    #[inline]
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.active.iter().map(|&i| weights[i as usize]).sum()
    }

    /// The `rank`-th inactive dimension in increasing order.
    pub fn nth_inactive(&self, rank: usize) -> usize {
        // Each active index at or below the candidate shifts it up by one.
        let mut dim = rank;
        for &a in &self.active {
            if (a as usize) <= dim {
                dim += 1;
            } else {
                break;
            }
        }
        dim
    }
}

/// All `C`-subsets of `N` dimensions in lexicographic order.
pub fn enumerate_entities(config: &SpaceConfig) -> Vec<EntityVector> {
    let (n, c) = (config.n_dims, config.cardinality);
    let mut out = Vec::with_capacity(config.n_entities() as usize);
    let mut idx: Vec<u32> = (0..c as u32).collect();
    loop {
        out.push(EntityVector::from_sorted_unchecked(idx.clone()));
        // advance to the next combination
        let mut i = c;
        while i > 0 && idx[i - 1] as usize == n - c + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..c {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
