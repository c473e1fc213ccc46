use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Zipf};

use crate::error::{Error, Result};
use crate::model::{GeoPoint, SpatioTextualObject, TermDict, TermId, TermSet};

/// Synthetic geo-tagged messages: Gaussian city clusters over a uniform
/// background, with Zipf-distributed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectGen {
    pub count: usize,
    /// Side of the square world, in trace units.
    pub extent: f64,
    pub clusters: usize,
    /// Standard deviation of a cluster, in trace units.
    pub cluster_spread: f64,
    /// Fraction of objects placed uniformly.
    pub background: f64,
    pub vocab: usize,
    pub zipf_s: f64,
    pub min_terms: usize,
    pub max_terms: usize,
    pub first_id: u64,
}

impl Default for ObjectGen {
    fn default() -> Self {
        ObjectGen {
            count: 10_000,
            extent: 1000.0,
            clusters: 20,
            cluster_spread: 25.0,
            background: 0.2,
            vocab: 2000,
            zipf_s: 1.0,
            min_terms: 3,
            max_terms: 6,
            first_id: 0,
        }
    }
}

/// Name of the term with frequency rank `r` (0 is the most common).
pub fn term_name(r: usize) -> String {
    format!("t{r}")
}

pub fn synthesize_objects(cfg: &ObjectGen, dict: &mut TermDict, seed: u64) -> Result<Vec<SpatioTextualObject>> {
    if cfg.vocab == 0 || cfg.min_terms == 0 || cfg.min_terms > cfg.max_terms || cfg.max_terms > cfg.vocab {
        return Err(Error::invalid("term count range does not fit the vocabulary"));
    }
    if !(cfg.extent > 0.0) || !(0.0..=1.0).contains(&cfg.background) {
        return Err(Error::invalid("bad extent or background fraction"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<TermId> = (0..cfg.vocab).map(|r| dict.intern(&term_name(r))).collect();
    let zipf = Zipf::new(cfg.vocab as f64, cfg.zipf_s).map_err(|e| Error::invalid(e.to_string()))?;
    let spread = Normal::new(0.0, cfg.cluster_spread.max(f64::MIN_POSITIVE)).map_err(|e| Error::invalid(e.to_string()))?;
    let centers: Vec<GeoPoint> = (0..cfg.clusters.max(1))
        .map(|_| GeoPoint::new(rng.random_range(0.0..cfg.extent), rng.random_range(0.0..cfg.extent)))
        .collect();

    let mut out = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let loc = if cfg.clusters == 0 || rng.random_bool(cfg.background) {
            GeoPoint::new(rng.random_range(0.0..cfg.extent), rng.random_range(0.0..cfg.extent))
        } else {
            let c = centers[rng.random_range(0..centers.len())];
            GeoPoint::new(
                (c.x + spread.sample(&mut rng)).clamp(0.0, cfg.extent),
                (c.y + spread.sample(&mut rng)).clamp(0.0, cfg.extent),
            )
        };
        let k = rng.random_range(cfg.min_terms..=cfg.max_terms);
        let mut terms = Vec::with_capacity(k);
        while terms.len() < k {
            let r = zipf.sample(&mut rng) as usize - 1;
            let t = ids[r.min(cfg.vocab - 1)];
            if !terms.contains(&t) {
                terms.push(t);
            }
        }
        out.push(SpatioTextualObject::new(cfg.first_id + i as u64, loc, TermSet::new(terms))?.with_timestamp(i as u64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objects_are_deterministic_and_in_range() {
        let cfg = ObjectGen { count: 500, ..Default::default() };
        let mut d1 = TermDict::new();
        let mut d2 = TermDict::new();
        let a = synthesize_objects(&cfg, &mut d1, 3).unwrap();
        let b = synthesize_objects(&cfg, &mut d2, 3).unwrap();
        assert_eq!(a, b);
        for o in &a {
            assert!((3..=6).contains(&o.terms.len()));
            assert!(o.loc.x >= 0.0 && o.loc.x <= 1000.0 && o.loc.y >= 0.0 && o.loc.y <= 1000.0);
        }
        let c = synthesize_objects(&cfg, &mut d1, 4).unwrap();
        assert_ne!(a, c);
    }
}
