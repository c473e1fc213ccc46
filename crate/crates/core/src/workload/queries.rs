use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{BooleanExpr, GeoPoint, Rect, StsQuery, TermId, TermSet, TermStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// Small squares, keywords follow the corpus distribution.
    Q1,
    /// Larger squares, at least one keyword outside the most frequent 1%.
    Q2,
}

impl ProfileKind {
    /// Side length range in kilometres.
    pub fn side_range(self) -> (f64, f64) {
        match self {
            ProfileKind::Q1 => (1.0, 50.0),
            ProfileKind::Q2 => (1.0, 100.0),
        }
    }

    pub fn other(self) -> ProfileKind {
        match self {
            ProfileKind::Q1 => ProfileKind::Q2,
            ProfileKind::Q2 => ProfileKind::Q1,
        }
    }
}

/// Space cut into `side x side` equal regions, each tagged with a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionLayout {
    pub frame: Rect,
    pub side: usize,
    pub tags: Vec<ProfileKind>,
}

impl RegionLayout {
    /// 10x10 regions, half of each kind in random positions.
    pub fn mixed(frame: Rect, seed: u64) -> Self {
        let side = 10;
        let n = side * side;
        let mut tags: Vec<ProfileKind> =
            (0..n).map(|i| if i < n / 2 { ProfileKind::Q1 } else { ProfileKind::Q2 }).collect();
        tags.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        RegionLayout { frame, side, tags }
    }

    pub fn region_of(&self, p: &GeoPoint) -> usize {
        let idx = |v: f64, lo: f64, w: f64| {
            let u = if w > 0.0 { (v - lo) / w } else { 0.0 };
            ((u * self.side as f64).floor().max(0.0) as usize).min(self.side - 1)
        };
        let ix = idx(p.x, self.frame.min.x, self.frame.width());
        let iy = idx(p.y, self.frame.min.y, self.frame.height());
        iy * self.side + ix
    }

    pub fn kind_at(&self, p: &GeoPoint) -> ProfileKind {
        self.tags[self.region_of(p)]
    }

    /// Toggles the tag of `fraction` of the regions, chosen at random. Returns the flipped regions.
    pub fn flip<R: Rng>(&mut self, fraction: f64, rng: &mut R) -> Vec<usize> {
        let n = self.tags.len();
        let k = ((fraction * n as f64).round() as usize).min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        idx.truncate(k);
        idx.sort_unstable();
        for &i in &idx {
            self.tags[i] = self.tags[i].other();
        }
        idx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryProfile {
    Q1,
    Q2,
    Q3(RegionLayout),
}

impl QueryProfile {
    pub fn kind_at(&self, p: &GeoPoint) -> ProfileKind {
        match self {
            QueryProfile::Q1 => ProfileKind::Q1,
            QueryProfile::Q2 => ProfileKind::Q2,
            QueryProfile::Q3(l) => l.kind_at(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGen {
    pub count: usize,
    /// Trace units per kilometre.
    pub scale: f64,
    pub first_id: u64,
    pub min_keywords: usize,
    pub max_keywords: usize,
}

impl Default for QueryGen {
    fn default() -> Self {
        QueryGen { count: 1000, scale: 1.0, first_id: 0, min_keywords: 1, max_keywords: 3 }
    }
}

/// Frequency-weighted keyword draws over a corpus.
pub struct KeywordSampler {
    ranked: Vec<TermId>,
    all: WeightedIndex<f64>,
    /// Draws restricted to terms outside the top 1%.
    rare: Option<(usize, WeightedIndex<f64>)>,
}

impl KeywordSampler {
    pub fn new(stats: &TermStats) -> Result<Self> {
        let ranked: Vec<(TermId, u64)> = stats.ranked().into_iter().filter(|(_, f)| *f > 0).collect();
        if ranked.is_empty() {
            return Err(Error::invalid("corpus has no terms"));
        }
        let top = top_count(ranked.len());
        let all = WeightedIndex::new(ranked.iter().map(|(_, f)| *f as f64)).map_err(|e| Error::invalid(e.to_string()))?;
        let rare = if ranked.len() > top {
            let w = WeightedIndex::new(ranked[top..].iter().map(|(_, f)| *f as f64))
                .map_err(|e| Error::invalid(e.to_string()))?;
            Some((top, w))
        } else {
            None
        };
        Ok(KeywordSampler { ranked: ranked.into_iter().map(|(t, _)| t).collect(), all, rare })
    }

    pub fn distinct(&self) -> usize {
        self.ranked.len()
    }

    pub fn common<R: Rng>(&self, rng: &mut R) -> TermId {
        self.ranked[self.all.sample(rng)]
    }

    pub fn rare<R: Rng>(&self, rng: &mut R) -> Option<TermId> {
        self.rare.as_ref().map(|(off, w)| self.ranked[off + w.sample(rng)])
    }

    /// The most frequent 1% of terms, rounded up.
    pub fn top_terms(&self) -> TermSet {
        self.ranked[..top_count(self.ranked.len())].iter().copied().collect()
    }
}

fn top_count(distinct: usize) -> usize {
    distinct.div_ceil(100)
}

/// Uniform choice among the CNF shapes that AND/OR connectives produce over `kw`.
fn shape<R: Rng>(kw: &[TermId], rng: &mut R) -> Result<BooleanExpr> {
    let s = |ts: &[TermId]| TermSet::new(ts.to_vec());
    let clauses = match kw {
        [a] => vec![s(&[*a])],
        [a, b] => {
            if rng.random_bool(0.5) {
                vec![s(&[*a]), s(&[*b])]
            } else {
                vec![s(&[*a, *b])]
            }
        }
        [a, b, c] => match rng.random_range(0..4) {
            0 => vec![s(&[*a]), s(&[*b]), s(&[*c])],
            1 => vec![s(&[*a, *b, *c])],
            2 => vec![s(&[*a, *b]), s(&[*c])],
            _ => vec![s(&[*a, *c]), s(&[*b, *c])],
        },
        _ => return Err(Error::invalid("queries carry one to three keywords")),
    };
    BooleanExpr::new(clauses)
}

pub fn synthesize_queries(
    stats: &TermStats,
    locations: &[GeoPoint],
    profile: &QueryProfile,
    gen: &QueryGen,
    seed: u64,
) -> Result<Vec<StsQuery>> {
    if locations.is_empty() {
        return Err(Error::invalid("no object locations to centre queries on"));
    }
    if gen.min_keywords < 1 || gen.max_keywords > 3 || gen.min_keywords > gen.max_keywords {
        return Err(Error::invalid("keyword count range must lie within 1..=3"));
    }
    let sampler = KeywordSampler::new(stats)?;
    let needs_rare = match profile {
        QueryProfile::Q1 => false,
        QueryProfile::Q2 => true,
        QueryProfile::Q3(l) => l.tags.contains(&ProfileKind::Q2),
    };
    if needs_rare && sampler.rare.is_none() {
        return Err(Error::invalid("corpus too small: no terms outside the top 1%"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(gen.count);
    for i in 0..gen.count {
        let center = locations[rng.random_range(0..locations.len())];
        let kind = profile.kind_at(&center);
        let (lo, hi) = kind.side_range();
        let side = rng.random_range(lo..=hi) * gen.scale;
        let k = rng.random_range(gen.min_keywords..=gen.max_keywords).min(sampler.distinct());
        let mut kw: Vec<TermId> = Vec::with_capacity(k);
        if kind == ProfileKind::Q2 {
            kw.extend(sampler.rare(&mut rng));
        }
        let mut attempts = 0;
        while kw.len() < k && attempts < 1000 {
            let t = sampler.common(&mut rng);
            if !kw.contains(&t) {
                kw.push(t);
            }
            attempts += 1;
        }
        kw.shuffle(&mut rng);
        let expr = shape(&kw, &mut rng)?;
        out.push(StsQuery::new(gen.first_id + i as u64, expr, Rect::square(center, side))?);
    }
    Ok(out)
}
