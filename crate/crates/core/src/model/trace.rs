//! Tab-separated trace files.
//!
//! ```text
//! object: id \t x \t y \t term term ...
//! query:  id \t I|D \t minx,miny,maxx,maxy \t a|b&c
//! ```
//!
//! Both kinds may be interleaved in one file; a line whose second field is
//! `I` or `D` is a query request. Line order is the event order.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::geo::{GeoPoint, Rect};
use super::query::{BooleanExpr, SpatioTextualObject, StsQuery};
use super::terms::{TermDict, TermSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum StreamElement {
    Object(SpatioTextualObject),
    Insert(StsQuery),
    /// Deletions carry the full query so the dispatcher can recompute routes.
    Delete(StsQuery),
}

impl StreamElement {
    pub fn id(&self) -> u64 {
        match self {
            StreamElement::Object(o) => o.id.0,
            StreamElement::Insert(q) | StreamElement::Delete(q) => q.id.0,
        }
    }

    pub fn is_object(&self) -> bool {
        matches!(self, StreamElement::Object(_))
    }
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::parse(line, format!("bad {what} `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite {what}")));
    }
    Ok(v)
}

fn parse_id(s: &str, line: usize) -> Result<u64> {
    s.trim().parse().map_err(|_| Error::parse(line, format!("bad id `{s}`")))
}

pub fn parse_object(s: &str, line: usize, dict: &mut TermDict) -> Result<SpatioTextualObject> {
    let f: Vec<&str> = s.split('\t').collect();
    if f.len() != 4 {
        return Err(Error::parse(line, format!("object needs 4 fields, got {}", f.len())));
    }
    let id = parse_id(f[0], line)?;
    let x = parse_f64(f[1], line, "x")?;
    let y = parse_f64(f[2], line, "y")?;
    let terms: TermSet = f[3].split_whitespace().map(|t| dict.intern(t)).collect();
    SpatioTextualObject::new(id, GeoPoint::new(x, y), terms)
        .map(|o| o.with_timestamp(line as u64))
        .map_err(|e| Error::parse(line, e.to_string()))
}

pub fn parse_expr(s: &str, line: usize, dict: &mut TermDict) -> Result<BooleanExpr> {
    let mut clauses = Vec::new();
    for c in s.split('&') {
        let terms: TermSet = c.split('|').map(str::trim).filter(|t| !t.is_empty()).map(|t| dict.intern(t)).collect();
        if terms.is_empty() {
            return Err(Error::parse(line, "empty clause"));
        }
        clauses.push(terms);
    }
    BooleanExpr::new(clauses).map_err(|e| Error::parse(line, e.to_string()))
}

pub fn parse_rect(s: &str, line: usize) -> Result<Rect> {
    let p: Vec<&str> = s.split(',').collect();
    if p.len() != 4 {
        return Err(Error::parse(line, "region needs minx,miny,maxx,maxy"));
    }
    let v = [
        parse_f64(p[0], line, "minx")?,
        parse_f64(p[1], line, "miny")?,
        parse_f64(p[2], line, "maxx")?,
        parse_f64(p[3], line, "maxy")?,
    ];
    if v[0] > v[2] || v[1] > v[3] {
        return Err(Error::parse(line, "region min exceeds max"));
    }
    Ok(Rect::new(v[0], v[1], v[2], v[3]))
}

pub fn parse_query(s: &str, line: usize, dict: &mut TermDict) -> Result<StreamElement> {
    let f: Vec<&str> = s.split('\t').collect();
    if f.len() != 4 {
        return Err(Error::parse(line, format!("query needs 4 fields, got {}", f.len())));
    }
    let id = parse_id(f[0], line)?;
    let region = parse_rect(f[2], line)?;
    let expr = parse_expr(f[3], line, dict)?;
    let q = StsQuery::new(id, expr, region).map_err(|e| Error::parse(line, e.to_string()))?;
    match f[1].trim() {
        "I" => Ok(StreamElement::Insert(q)),
        "D" => Ok(StreamElement::Delete(q)),
        op => Err(Error::parse(line, format!("unknown op `{op}`"))),
    }
}

/// Parses one line of an interleaved trace. `line` is 1-based and doubles as the timestamp.
pub fn parse_line(s: &str, line: usize, dict: &mut TermDict) -> Result<StreamElement> {
    let second = s.split('\t').nth(1).map(str::trim);
    match second {
        Some("I") | Some("D") => parse_query(s, line, dict),
        _ => parse_object(s, line, dict).map(StreamElement::Object),
    }
}

#[derive(Debug, Default)]
pub struct TraceRead {
    pub elements: Vec<StreamElement>,
    pub malformed: usize,
}

/// Reads a whole trace, skipping blank lines and `#` comments. Malformed lines are counted, not fatal.
pub fn read_trace<R: BufRead>(r: R, dict: &mut TermDict) -> Result<TraceRead> {
    let mut out = TraceRead::default();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim_end_matches(['\r', '\n']);
        if t.trim().is_empty() || t.starts_with('#') {
            continue;
        }
        match parse_line(t, i + 1, dict) {
            Ok(e) => out.elements.push(e),
            Err(_) => out.malformed += 1,
        }
    }
    Ok(out)
}

pub fn format_object(o: &SpatioTextualObject, dict: &TermDict) -> String {
    let terms: Vec<&str> = o.terms.iter().map(|t| dict.name(t)).collect();
    format!("{}\t{}\t{}\t{}", o.id, o.loc.x, o.loc.y, terms.join(" "))
}

pub fn format_expr(e: &BooleanExpr, dict: &TermDict) -> String {
    let mut s = String::new();
    for (i, c) in e.clauses().iter().enumerate() {
        if i > 0 {
            s.push('&');
        }
        for (j, t) in c.iter().enumerate() {
            if j > 0 {
                s.push('|');
            }
            let _ = write!(s, "{}", dict.name(t));
        }
    }
    s
}

pub fn format_query(q: &StsQuery, op: char, dict: &TermDict) -> String {
    format!("{}\t{}\t{}\t{}", q.id, op, q.region, format_expr(&q.expr, dict))
}

pub fn format_element(e: &StreamElement, dict: &TermDict) -> String {
    match e {
        StreamElement::Object(o) => format_object(o, dict),
        StreamElement::Insert(q) => format_query(q, 'I', dict),
        StreamElement::Delete(q) => format_query(q, 'D', dict),
    }
}

pub fn write_trace<W: Write>(mut w: W, elements: &[StreamElement], dict: &TermDict) -> Result<()> {
    for e in elements {
        writeln!(w, "{}", format_element(e, dict))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn parses_both_kinds() {
        let mut d = TermDict::new();
        let src = "1\t1.5\t2\tpizza nyc\n7\tI\t0,0,2,2\tpizza|burger&vegan\n# note\n\n7\tD\t0,0,2,2\tpizza|burger&vegan\n";
        let t = read_trace(Cursor::new(src), &mut d).unwrap();
        assert_eq!(t.malformed, 0);
        assert_eq!(t.elements.len(), 3);
        match &t.elements[1] {
            StreamElement::Insert(q) => {
                assert_eq!(q.expr.clauses().len(), 2);
                assert_eq!(q.expr.clauses()[0].len(), 2);
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(t.elements[2], StreamElement::Delete(_)));
    }

    #[test]
    fn malformed_lines_are_counted() {
        let mut d = TermDict::new();
        let src = "1\tx\t2\tpizza\n2\t1\t2\t\n3\tI\t0,0,1\ta\n4\tQ\t0,0,1,1\ta\n5\t1\t1\tok\n";
        let t = read_trace(Cursor::new(src), &mut d).unwrap();
        assert_eq!(t.elements.len(), 1);
        assert_eq!(t.malformed, 4);
    }

    #[test]
    fn round_trip() {
        let mut d = TermDict::new();
        let src = "3\t0.25\t-4\ta b\n9\tI\t-1,-1,1,1\ta&b|c\n";
        let t = read_trace(Cursor::new(src), &mut d).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &t.elements, &d).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), src);
    }
}
