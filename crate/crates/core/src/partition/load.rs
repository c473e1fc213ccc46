//! Load estimation for hypothetical partition units.
//!
//! A unit is either a whole space region or one term subset of a region. Unit
//! loads are additive: a worker's estimated load is the sum over its units.

use std::collections::{HashMap, HashSet};

use super::sample::WorkloadSample;
use crate::model::{worker_load, CostModel, SpatioTextualObject, StsQuery, TermId, TermSet, WorkerLoadSample};

fn cosine(a: &HashMap<TermId, f64>, b: &HashMap<TermId, f64>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().filter_map(|(t, x)| large.get(t).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

fn freq_vector<'a>(sets: impl Iterator<Item = &'a TermSet>) -> HashMap<TermId, f64> {
    let mut v = HashMap::new();
    for s in sets {
        for t in s.iter() {
            *v.entry(t).or_insert(0.0) += 1.0;
        }
    }
    v
}

/// Cosine similarity of raw term-frequency vectors of objects and of queries.
/// All query terms count, not only index terms. Returns 1 when either side is empty.
pub fn text_similarity(objects: &[SpatioTextualObject], queries: &[StsQuery]) -> f64 {
    let ov = freq_vector(objects.iter().map(|o| &o.terms));
    let qterms: Vec<TermSet> = queries.iter().map(|q| q.expr.terms()).collect();
    cosine(&ov, &freq_vector(qterms.iter()))
}

pub(crate) fn sample_similarity(s: &WorkloadSample, objs: &[u32], qrys: &[u32]) -> f64 {
    let ov = freq_vector(objs.iter().map(|&i| &s.objects[i as usize].terms));
    let qv = freq_vector(qrys.iter().map(|&i| &s.queries[i as usize].terms));
    cosine(&ov, &qv)
}

/// Def. 1 over a unit's request counts.
pub fn estimate_partition_load(counts: &WorkerLoadSample, costs: &CostModel) -> f64 {
    worker_load(counts, costs)
}

fn query_counts(s: &WorkloadSample, qrys: impl Iterator<Item = u32>) -> (f64, f64) {
    let (mut ins, mut del) = (0.0, 0.0);
    for i in qrys {
        let q = &s.queries[i as usize];
        if q.inserted {
            ins += 1.0;
        }
        if q.deleted {
            del += 1.0;
        }
    }
    (ins, del)
}

/// Counts for a space unit: every object in the region, every overlapping query.
pub(crate) fn space_counts(s: &WorkloadSample, objs: &[u32], qrys: &[u32]) -> WorkerLoadSample {
    let (n_inserts, n_deletes) = query_counts(s, qrys.iter().copied());
    WorkerLoadSample { n_objects: objs.len() as f64, n_inserts, n_deletes }
}

/// Counts for the term subset `part` of a region. A query belongs when one of
/// its index terms is in `part`; an object belongs when it carries a term that
/// is both in `part` and an index term of some member query, which is exactly
/// what the dispatcher's live-term map lets through.
pub(crate) fn text_counts(s: &WorkloadSample, objs: &[u32], qrys: &[u32], part: &TermSet) -> WorkerLoadSample {
    let mut live: HashSet<TermId> = HashSet::new();
    let members: Vec<u32> = qrys
        .iter()
        .copied()
        .filter(|&i| {
            let q = &s.queries[i as usize];
            let mut hit = false;
            for t in q.index.iter() {
                if part.contains(t) {
                    live.insert(t);
                    hit = true;
                }
            }
            hit
        })
        .collect();
    let n_objects = objs
        .iter()
        .filter(|&&i| s.objects[i as usize].terms.iter().any(|t| live.contains(&t)))
        .count() as f64;
    let (n_inserts, n_deletes) = query_counts(s, members.into_iter());
    WorkerLoadSample { n_objects, n_inserts, n_deletes }
}

/// Per-term load used to balance text splits: the Def. 1 terms restricted to
/// the objects and queries carrying that term. Terms no query indexes attract
/// no objects.
pub(crate) fn term_loads(
    s: &WorkloadSample,
    objs: &[u32],
    qrys: &[u32],
    universe: &TermSet,
    costs: &CostModel,
) -> Vec<(TermId, f64)> {
    let mut nq: HashMap<TermId, (f64, f64)> = HashMap::new();
    for &i in qrys {
        let q = &s.queries[i as usize];
        for t in q.index.iter().filter(|&t| universe.contains(t)) {
            let e = nq.entry(t).or_insert((0.0, 0.0));
            if q.inserted {
                e.0 += 1.0;
            }
            if q.deleted {
                e.1 += 1.0;
            }
        }
    }
    let mut no: HashMap<TermId, f64> = HashMap::new();
    for &i in objs {
        for t in s.objects[i as usize].terms.iter() {
            if nq.contains_key(&t) {
                *no.entry(t).or_insert(0.0) += 1.0;
            }
        }
    }
    universe
        .iter()
        .map(|t| {
            let (n_inserts, n_deletes) = nq.get(&t).copied().unwrap_or((0.0, 0.0));
            let n_objects = no.get(&t).copied().unwrap_or(0.0);
            (t, worker_load(&WorkerLoadSample { n_objects, n_inserts, n_deletes }, costs))
        })
        .collect()
}

/// Union of all query terms in scope; the cover a text split must partition.
pub(crate) fn query_term_universe(s: &WorkloadSample, qrys: &[u32]) -> TermSet {
    let mut v = Vec::new();
    for &i in qrys {
        v.extend(s.queries[i as usize].terms.iter());
    }
    TermSet::new(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BooleanExpr, GeoPoint, Rect};

    fn obj(id: u64, terms: &[u32]) -> SpatioTextualObject {
        SpatioTextualObject::new(id, GeoPoint::new(0.0, 0.0), terms.iter().map(|&t| TermId(t)).collect()).unwrap()
    }

    fn qry(id: u64, terms: &[u32]) -> StsQuery {
        let ts: Vec<TermId> = terms.iter().map(|&t| TermId(t)).collect();
        StsQuery::new(id, BooleanExpr::all_of(&ts).unwrap(), Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn similarity_examples() {
        assert!((text_similarity(&[obj(1, &[0, 1])], &[qry(1, &[0, 1])]) - 1.0).abs() < 1e-12);
        assert_eq!(text_similarity(&[obj(1, &[0])], &[qry(1, &[1])]), 0.0);
        let s = text_similarity(&[obj(1, &[0, 1])], &[qry(1, &[0])]);
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert_eq!(text_similarity(&[], &[qry(1, &[0])]), 1.0);
        assert_eq!(text_similarity(&[obj(1, &[0])], &[]), 1.0);
    }

    #[test]
    fn unit_load_examples() {
        let c = CostModel::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(estimate_partition_load(&WorkerLoadSample::new(10, 5, 0), &c), 50.0);
        assert_eq!(estimate_partition_load(&WorkerLoadSample::default(), &CostModel::default()), 0.0);
    }
}
