use std::collections::{BTreeMap, HashSet};

use crate::model::{matches, MatchResult, QueryId, StreamElement, StsQuery};

/// Centralised matcher: every object against every live query.
pub fn brute_force_matches(trace: &[StreamElement]) -> Vec<MatchResult> {
    let mut live: BTreeMap<QueryId, &StsQuery> = BTreeMap::new();
    let mut out = Vec::new();
    for e in trace {
        match e {
            StreamElement::Insert(q) => {
                live.insert(q.id, q);
            }
            StreamElement::Delete(q) => {
                live.remove(&q.id);
            }
            StreamElement::Object(o) => {
                out.extend(live.values().filter(|q| matches(o, q)).map(|q| MatchResult::new(q.id, o.id)));
            }
        }
    }
    merge_dedup(out)
}

/// Sorted results with duplicates removed.
pub fn merge_dedup(results: impl IntoIterator<Item = MatchResult>) -> Vec<MatchResult> {
    let mut v: Vec<MatchResult> = results.into_iter().collect::<HashSet<_>>().into_iter().collect();
    v.sort_unstable();
    v
}

/// Size of the symmetric difference of two sorted, duplicate-free result lists.
pub fn diff_count(a: &[MatchResult], b: &[MatchResult]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                n += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                n += 1;
                j += 1;
            }
        }
    }
    n + (a.len() - i) + (b.len() - j)
}
