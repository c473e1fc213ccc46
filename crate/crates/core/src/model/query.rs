//! Stream elements, subscriptions and their matching semantics.

use std::fmt;

use super::geo::{GeoPoint, Rect};
use super::terms::{TermId, TermSet, TermStats};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueryId(pub u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A geo-tagged message: a point plus the deduplicated terms of its text.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTextualObject {
    pub id: ObjectId,
    pub loc: GeoPoint,
    pub terms: TermSet,
    pub timestamp: u64,
}

impl SpatioTextualObject {
    pub fn new(id: u64, loc: GeoPoint, terms: TermSet) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid(format!("object {id} has no terms")));
        }
        if !loc.is_finite() {
            return Err(Error::invalid(format!("object {id} has a non-finite location")));
        }
        Ok(SpatioTextualObject { id: ObjectId(id), loc, terms, timestamp: 0 })
    }

    pub fn with_timestamp(mut self, ts: u64) -> Self {
        self.timestamp = ts;
        self
    }
}

/// Keyword expression in conjunctive normal form.
///
/// A clause is satisfied when the object carries at least one of its terms;
/// the expression is satisfied when every clause is.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BooleanExpr {
    clauses: Vec<TermSet>,
}

impl BooleanExpr {
    pub fn new(clauses: Vec<TermSet>) -> Result<Self> {
        if clauses.is_empty() {
            return Err(Error::invalid("boolean expression needs at least one clause"));
        }
        if clauses.iter().any(|c| c.is_empty()) {
            return Err(Error::invalid("boolean expression has an empty clause"));
        }
        let mut out: Vec<TermSet> = Vec::with_capacity(clauses.len());
        for c in clauses {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        Ok(BooleanExpr { clauses: out })
    }

    /// `t1 AND t2 AND ...`
    pub fn all_of(terms: &[TermId]) -> Result<Self> {
        Self::new(terms.iter().map(|&t| TermSet::new(vec![t])).collect())
    }

    /// `t1 OR t2 OR ...`
    pub fn any_of(terms: &[TermId]) -> Result<Self> {
        Self::new(vec![TermSet::new(terms.to_vec())])
    }

    pub fn clauses(&self) -> &[TermSet] {
        &self.clauses
    }

    pub fn is_conjunctive(&self) -> bool {
        self.clauses.iter().all(|c| c.len() == 1)
    }

    pub fn terms(&self) -> TermSet {
        self.clauses.iter().flat_map(|c| c.iter()).collect()
    }

    pub fn eval(&self, terms: &TermSet) -> bool {
        self.clauses.iter().all(|c| c.intersects(terms))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsQuery {
    pub id: QueryId,
    pub expr: BooleanExpr,
    pub region: Rect,
}

impl StsQuery {
    pub fn new(id: u64, expr: BooleanExpr, region: Rect) -> Result<Self> {
        if !region.is_valid() {
            return Err(Error::invalid(format!("query {id} has an invalid region")));
        }
        Ok(StsQuery { id: QueryId(id), expr, region })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchResult {
    pub query_id: QueryId,
    pub object_id: ObjectId,
}

impl MatchResult {
    pub fn new(query_id: QueryId, object_id: ObjectId) -> Self {
        MatchResult { query_id, object_id }
    }
}

pub fn matches(o: &SpatioTextualObject, q: &StsQuery) -> bool {
    q.region.contains(&o.loc) && q.expr.eval(&o.terms)
}

/// Terms a query is posted under in inverted lists and routing tables.
///
/// Picks the clause with the smallest summed corpus frequency and returns all
/// of its terms; every matching object carries at least one of them. For a
/// pure conjunction each clause is a single term, so this is the least
/// frequent keyword. Ties go to the earlier clause.
pub fn index_terms(q: &StsQuery, stats: &TermStats) -> TermSet {
    let mut best: Option<(u64, &TermSet)> = None;
    for clause in q.expr.clauses() {
        let total: u64 = clause.iter().map(|t| stats.freq(t)).sum();
        if best.is_none_or(|(b, _)| total < b) {
            best = Some((total, clause));
        }
    }
    best.map(|(_, c)| c.clone()).unwrap_or_default()
}
