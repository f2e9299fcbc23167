//! Generating lexicalised graphs from a trained model.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::cardinality::{resample_situation_in_place, uniform_entity};
use crate::corpus::{GraphShape, PredicateId};
use crate::error::{Error, Result};
use crate::model::{Model, Situation};
use crate::rng::{stream_rng, Stream};

/// Run one persistent particle with the given link structure for `burnin`
/// sweeps, then emit `count` lexicalisations, one sweep apart. Each node's
/// predicate is drawn from `P(c | x)`.
pub fn sample_lexicalisations(
    model: &Model,
    shape: &GraphShape,
    burnin: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<PredicateId>>> {
    if shape.n_nodes == 0 {
        return Err(Error::Data("graph shape has no nodes".into()));
    }
    crate::corpus::validate_links(shape.n_nodes, &shape.links, model.labels.len())?;
    let mut rng = stream_rng(seed, Stream::Sample, [0, 0, 0]);
    let (n, c) = (model.n_dims(), model.cardinality());
    let mut s = Situation {
        entities: (0..shape.n_nodes).map(|_| uniform_entity(n, c, &mut rng)).collect(),
        links: shape.links.clone(),
    };
    if burnin > 0 {
        resample_situation_in_place(&mut s, model, burnin, &mut rng);
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        resample_situation_in_place(&mut s, model, 1, &mut rng);
        let nodes = s
            .entities
            .iter()
            .map(|x| {
                let dist = WeightedIndex::new(model.predicate_choice(x))
                    .map_err(|e| Error::NonFinite(format!("predicate choice: {e}")))?;
                Ok(PredicateId(dist.sample(&mut rng) as u32))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(nodes);
    }
    Ok(out)
}
