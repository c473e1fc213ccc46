use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use super::PartitionParams;
use crate::error::{Error, Result};
use crate::model::{Axis, CellRange, Rect, SpaceFrame, TermDict, TermId, TermSet, WorkerId};

/// Hash buckets used to place terms that no text partition lists explicitly.
pub const TERM_BUCKETS: usize = 64;

pub fn term_bucket(t: TermId) -> usize {
    // splitmix64 finaliser
    let mut z = (t.0 as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z % TERM_BUCKETS as u64) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermPart {
    pub terms: TermSet,
    pub worker: WorkerId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KdtNode {
    /// Cells with index `< at` along `axis` go left.
    Internal { axis: Axis, at: u32, left: Box<KdtNode>, right: Box<KdtNode> },
    SpaceLeaf { worker: WorkerId },
    TextLeaf { parts: Vec<TermPart> },
}

/// Index of the part that handles term `t` in a text leaf.
pub fn text_part_of(parts: &[TermPart], t: TermId) -> usize {
    parts.iter().position(|p| p.terms.contains(t)).unwrap_or(term_bucket(t) % parts.len().max(1))
}

/// A leaf, or one term partition of a text leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafUnit {
    pub range: CellRange,
    /// `Some` for a text partition.
    pub terms: Option<TermSet>,
    pub worker: WorkerId,
}

/// A kd-tree over the split lattice whose leaves may be cut further by term subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct KdtTree {
    pub frame: SpaceFrame,
    pub params: PartitionParams,
    pub root: KdtNode,
}

impl KdtTree {
    pub fn workers(&self) -> usize {
        self.params.m
    }

    /// Lattice level that split indices refer to.
    pub fn level(&self) -> u32 {
        self.params.lattice_level
    }

    pub fn root_range(&self) -> CellRange {
        CellRange::full(self.level())
    }

    /// Units in preorder, text partitions in list order.
    pub fn units(&self) -> Vec<LeafUnit> {
        let mut out = Vec::new();
        self.walk(|range, node| match node {
            KdtNode::SpaceLeaf { worker } => out.push(LeafUnit { range, terms: None, worker: *worker }),
            KdtNode::TextLeaf { parts } => {
                for p in parts {
                    out.push(LeafUnit { range, terms: Some(p.terms.clone()), worker: p.worker });
                }
            }
            KdtNode::Internal { .. } => {}
        });
        out
    }

    pub fn unit_count(&self) -> usize {
        let mut n = 0;
        self.walk(|_, node| match node {
            KdtNode::SpaceLeaf { .. } => n += 1,
            KdtNode::TextLeaf { parts } => n += parts.len(),
            KdtNode::Internal { .. } => {}
        });
        n
    }

    /// Leaf regions in preorder.
    pub fn leaf_ranges(&self) -> Vec<CellRange> {
        let mut out = Vec::new();
        self.walk(|range, node| {
            if !matches!(node, KdtNode::Internal { .. }) {
                out.push(range);
            }
        });
        out
    }

    pub fn leaf_rects(&self) -> Vec<Rect> {
        let level = self.level();
        self.leaf_ranges().iter().map(|r| self.frame.range_rect(r, level)).collect()
    }

    /// Visits every node with its lattice range, preorder.
    pub fn walk<'a>(&'a self, mut f: impl FnMut(CellRange, &'a KdtNode)) {
        fn go<'a>(n: &'a KdtNode, r: CellRange, f: &mut impl FnMut(CellRange, &'a KdtNode)) {
            f(r, n);
            if let KdtNode::Internal { axis, at, left, right } = n {
                let (a, b) = r.split(*axis, *at);
                go(left, a, f);
                go(right, b, f);
            }
        }
        go(&self.root, self.root_range(), &mut f);
    }

    /// Leaf containing lattice cell `(cx, cy)` and its range.
    pub fn locate(&self, cx: u32, cy: u32) -> (&KdtNode, CellRange) {
        let mut n = &self.root;
        let mut r = self.root_range();
        while let KdtNode::Internal { axis, at, left, right } = n {
            let v = match axis {
                Axis::X => cx,
                Axis::Y => cy,
            };
            let (a, b) = r.split(*axis, *at);
            if v < *at {
                n = left;
                r = a;
            } else {
                n = right;
                r = b;
            }
        }
        (n, r)
    }

    /// Overwrites unit workers in [`KdtTree::units`] order.
    pub fn assign_workers(&mut self, unit_worker: &[WorkerId]) {
        fn go(n: &mut KdtNode, ws: &[WorkerId], i: &mut usize) {
            match n {
                KdtNode::Internal { left, right, .. } => {
                    go(left, ws, i);
                    go(right, ws, i);
                }
                KdtNode::SpaceLeaf { worker } => {
                    *worker = ws[*i];
                    *i += 1;
                }
                KdtNode::TextLeaf { parts } => {
                    for p in parts {
                        p.worker = ws[*i];
                        *i += 1;
                    }
                }
            }
        }
        let mut i = 0;
        go(&mut self.root, unit_worker, &mut i);
    }

    /// Coarsest grid level on which every split line falls on a cell border.
    pub fn aligned_level(&self) -> u32 {
        let level = self.level();
        let mut need = 0;
        self.walk(|_, n| {
            if let KdtNode::Internal { at, .. } = n {
                need = need.max(level - at.trailing_zeros().min(level));
            }
        });
        need
    }

    pub fn validate(&self) -> Result<()> {
        fn splits_ok(n: &KdtNode, r: CellRange) -> bool {
            match n {
                KdtNode::Internal { axis, at, left, right } => {
                    if *at <= r.lo(*axis) || *at >= r.hi(*axis) {
                        return false;
                    }
                    let (a, b) = r.split(*axis, *at);
                    splits_ok(left, a) && splits_ok(right, b)
                }
                _ => true,
            }
        }
        if !splits_ok(&self.root, self.root_range()) {
            return Err(Error::partition("split position outside its range"));
        }
        let m = self.workers();
        let mut seen = vec![false; m];
        let mut err = None;
        self.walk(|_, n| match n {
            KdtNode::Internal { .. } => {}
            KdtNode::SpaceLeaf { worker } => {
                if *worker >= m {
                    err.get_or_insert(format!("worker {worker} out of range"));
                } else {
                    seen[*worker] = true;
                }
            }
            KdtNode::TextLeaf { parts } => {
                if parts.is_empty() {
                    err.get_or_insert("text leaf without partitions".to_owned());
                }
                let mut terms = HashSet::new();
                for p in parts {
                    if p.worker >= m {
                        err.get_or_insert(format!("worker {} out of range", p.worker));
                    } else {
                        seen[p.worker] = true;
                    }
                    for t in p.terms.iter() {
                        if !terms.insert(t) {
                            err.get_or_insert(format!("term {t} in two partitions of one leaf"));
                        }
                    }
                }
            }
        });
        if let Some(e) = err {
            return Err(Error::partition(e));
        }
        if let Some(w) = seen.iter().position(|s| !s) {
            return Err(Error::partition(format!("worker {w} receives no unit")));
        }
        Ok(())
    }

    /// Line-oriented preorder text form.
    pub fn to_text(&self, dict: &TermDict) -> String {
        let p = &self.params;
        let b = &self.frame.bounds;
        let mut s = String::from("kdt v1\n");
        let _ = writeln!(s, "frame {} {} {} {}", b.min.x, b.min.y, b.max.x, b.max.y);
        let _ = writeln!(
            s,
            "params {} {} {} {} {} {} {}",
            p.m, p.sigma, p.delta, p.theta, p.epsilon_sim, p.min_split_objects, p.lattice_level
        );
        fn go(n: &KdtNode, dict: &TermDict, s: &mut String) {
            match n {
                KdtNode::Internal { axis, at, left, right } => {
                    let a = if *axis == Axis::X { 'x' } else { 'y' };
                    let _ = writeln!(s, "I {a} {at}");
                    go(left, dict, s);
                    go(right, dict, s);
                }
                KdtNode::SpaceLeaf { worker } => {
                    let _ = writeln!(s, "S {worker}");
                }
                KdtNode::TextLeaf { parts } => {
                    let _ = writeln!(s, "T {}", parts.len());
                    for p in parts {
                        let _ = write!(s, "P {}", p.worker);
                        for t in p.terms.iter() {
                            let _ = write!(s, " {}", dict.name(t));
                        }
                        s.push('\n');
                    }
                }
            }
        }
        go(&self.root, dict, &mut s);
        s
    }

    pub fn from_text(text: &str, dict: &mut TermDict) -> Result<KdtTree> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::parse(0, format!("missing {what}")));

        let (ln, header) = next("header")?;
        if header.trim() != "kdt v1" {
            return Err(Error::parse(ln, "expected `kdt v1`"));
        }
        let (ln, frame) = next("frame")?;
        let f = fields(frame, "frame", 4, ln)?;
        let nums: Vec<f64> = f.iter().map(|v| num(v, ln)).collect::<Result<_>>()?;
        let frame = SpaceFrame::new(Rect::new(nums[0], nums[1], nums[2], nums[3]));
        let (ln, params) = next("params")?;
        let f = fields(params, "params", 7, ln)?;
        let params = PartitionParams {
            m: num(f[0], ln)?,
            sigma: num(f[1], ln)?,
            delta: num(f[2], ln)?,
            theta: num(f[3], ln)?,
            epsilon_sim: num(f[4], ln)?,
            min_split_objects: num(f[5], ln)?,
            lattice_level: num(f[6], ln)?,
        };
        params.validate().map_err(|e| Error::parse(ln, e.to_string()))?;

        fn node<'a>(
            next: &mut impl FnMut(&str) -> Result<(usize, &'a str)>,
            dict: &mut TermDict,
            depth: usize,
        ) -> Result<KdtNode> {
            let (ln, line) = next("node")?;
            if depth > 64 {
                return Err(Error::parse(ln, "tree too deep"));
            }
            let mut it = line.split_whitespace();
            match it.next() {
                Some("I") => {
                    let axis = match it.next() {
                        Some("x") => Axis::X,
                        Some("y") => Axis::Y,
                        _ => return Err(Error::parse(ln, "bad axis")),
                    };
                    let at = num(it.next().unwrap_or(""), ln)?;
                    let left = Box::new(node(next, dict, depth + 1)?);
                    let right = Box::new(node(next, dict, depth + 1)?);
                    Ok(KdtNode::Internal { axis, at, left, right })
                }
                Some("S") => Ok(KdtNode::SpaceLeaf { worker: num(it.next().unwrap_or(""), ln)? }),
                Some("T") => {
                    let n: usize = num(it.next().unwrap_or(""), ln)?;
                    let mut parts = Vec::with_capacity(n);
                    for _ in 0..n {
                        let (ln, pl) = next("text partition")?;
                        let mut it = pl.split_whitespace();
                        if it.next() != Some("P") {
                            return Err(Error::parse(ln, "expected `P`"));
                        }
                        let worker = num(it.next().unwrap_or(""), ln)?;
                        let terms: TermSet = it.map(|t| dict.intern(t)).collect();
                        parts.push(TermPart { terms, worker });
                    }
                    Ok(KdtNode::TextLeaf { parts })
                }
                _ => Err(Error::parse(ln, format!("unknown node line `{line}`"))),
            }
        }
        let root = node(&mut next, dict, 0)?;
        let tree = KdtTree { frame, params, root };
        tree.validate()?;
        Ok(tree)
    }
}

fn fields<'a>(line: &'a str, key: &str, n: usize, ln: usize) -> Result<Vec<&'a str>> {
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(Error::parse(ln, format!("expected `{key}`")));
    }
    let v: Vec<&str> = it.collect();
    if v.len() != n {
        return Err(Error::parse(ln, format!("`{key}` needs {n} values")));
    }
    Ok(v)
}

fn num<T: std::str::FromStr>(s: &str, ln: usize) -> Result<T> {
    s.parse().map_err(|_| Error::parse(ln, format!("bad number `{s}`")))
}

/// Term to part index map for a text leaf.
pub(crate) fn part_lookup(parts: &[TermPart]) -> HashMap<TermId, usize> {
    let mut m = HashMap::new();
    for (i, p) in parts.iter().enumerate() {
        for t in p.terms.iter() {
            m.insert(t, i);
        }
    }
    m
}
