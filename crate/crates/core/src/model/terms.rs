use std::collections::HashMap;
use std::fmt;

/// Interned term identifier. Ids are local to one [`TermDict`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(pub u32);

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// String <-> id interner shared by every trace read in one run.
#[derive(Debug, Clone, Default)]
pub struct TermDict {
    ids: HashMap<String, TermId>,
    names: Vec<String>,
}

impl TermDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, term: &str) -> TermId {
        if let Some(&id) = self.ids.get(term) {
            return id;
        }
        let id = TermId(self.names.len() as u32);
        self.names.push(term.to_owned());
        self.ids.insert(term.to_owned(), id);
        id
    }

    pub fn get(&self, term: &str) -> Option<TermId> {
        self.ids.get(term).copied()
    }

    pub fn name(&self, id: TermId) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A sorted, deduplicated set of terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct TermSet(Vec<TermId>);

impl TermSet {
    pub fn new(mut terms: Vec<TermId>) -> Self {
        terms.sort_unstable();
        terms.dedup();
        TermSet(terms)
    }

    pub fn contains(&self, t: TermId) -> bool {
        self.0.binary_search(&t).is_ok()
    }

    pub fn intersects(&self, other: &TermSet) -> bool {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = TermId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[TermId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn union(&self, other: &TermSet) -> TermSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        TermSet::new(v)
    }
}

impl FromIterator<TermId> for TermSet {
    fn from_iter<I: IntoIterator<Item = TermId>>(iter: I) -> Self {
        TermSet::new(iter.into_iter().collect())
    }
}

/// Term occurrence counts over a reference corpus. Unknown terms count as zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermStats {
    freq: HashMap<TermId, u64>,
}

impl TermStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (TermId, u64)>) -> Self {
        TermStats { freq: counts.into_iter().collect() }
    }

    pub fn observe(&mut self, terms: &TermSet) {
        for t in terms.iter() {
            *self.freq.entry(t).or_insert(0) += 1;
        }
    }

    pub fn freq(&self, t: TermId) -> u64 {
        self.freq.get(&t).copied().unwrap_or(0)
    }

    pub fn distinct(&self) -> usize {
        self.freq.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, u64)> + '_ {
        self.freq.iter().map(|(&t, &c)| (t, c))
    }

    /// Terms by descending frequency, ties by ascending id.
    pub fn ranked(&self) -> Vec<(TermId, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable() {
        let mut d = TermDict::new();
        let a = d.intern("pizza");
        let b = d.intern("nyc");
        assert_eq!(d.intern("pizza"), a);
        assert_ne!(a, b);
        assert_eq!(d.name(b), "nyc");
        assert_eq!(d.get("vegan"), None);
    }

    #[test]
    fn set_ops() {
        let s = TermSet::new(vec![TermId(3), TermId(1), TermId(3)]);
        assert_eq!(s.len(), 2);
        assert!(s.intersects(&TermSet::new(vec![TermId(9), TermId(3)])));
        assert!(!s.intersects(&TermSet::new(vec![TermId(2)])));
    }
}
