use crate::dispatch::CellId;
use crate::error::{Error, Result};
use crate::model::{BooleanExpr, Rect, StsQuery, TermId, TermSet};

const MAGIC: &[u8; 4] = b"GI2P";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PayloadQuery {
    pub query: StsQuery,
    /// Terms the query was posted under in this cell.
    pub terms: Vec<TermId>,
    pub deleted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayloadCell {
    pub cell: CellId,
    pub text_partitioned: bool,
    pub queries: Vec<PayloadQuery>,
}

/// Cells in transit between workers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MigrationPayload {
    pub cells: Vec<PayloadCell>,
}

impl MigrationPayload {
    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|c| c.queries.is_empty())
    }

    pub fn query_count(&self) -> usize {
        self.cells.iter().map(|c| c.queries.len()).sum()
    }

    /// `GI2P`, version, then per cell: id, tag, query count, and
    /// length-prefixed query records followed by their posting terms.
    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&(self.cells.len() as u32).to_le_bytes());
        for c in &self.cells {
            b.extend_from_slice(&c.cell.to_le_bytes());
            b.push(c.text_partitioned as u8);
            b.extend_from_slice(&(c.queries.len() as u32).to_le_bytes());
            for q in &c.queries {
                let rec = encode_query(&q.query);
                b.extend_from_slice(&(rec.len() as u32).to_le_bytes());
                b.extend_from_slice(&rec);
                b.push(q.deleted as u8);
                b.extend_from_slice(&(q.terms.len() as u16).to_le_bytes());
                for t in &q.terms {
                    b.extend_from_slice(&t.0.to_le_bytes());
                }
            }
        }
        b
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { b: bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Payload("bad magic".into()));
        }
        let v = r.u16()?;
        if v != VERSION {
            return Err(Error::Payload(format!("unsupported version {v}")));
        }
        let n = r.u32()?;
        let mut cells = Vec::new();
        for _ in 0..n {
            let cell = r.u32()?;
            let text_partitioned = r.u8()? != 0;
            let nq = r.u32()?;
            let mut queries = Vec::new();
            for _ in 0..nq {
                let len = r.u32()? as usize;
                let query = decode_query(r.take(len)?)?;
                let deleted = r.u8()? != 0;
                let nt = r.u16()?;
                let terms = (0..nt).map(|_| r.u32().map(TermId)).collect::<Result<Vec<_>>>()?;
                queries.push(PayloadQuery { query, terms, deleted });
            }
            cells.push(PayloadCell { cell, text_partitioned, queries });
        }
        if r.at != bytes.len() {
            return Err(Error::Payload("trailing bytes".into()));
        }
        Ok(MigrationPayload { cells })
    }
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self.b.get(self.at..self.at + n).ok_or_else(|| Error::Payload("truncated".into()))?;
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}

/// id, region, then each clause as a term count and term ids.
pub fn encode_query(q: &StsQuery) -> Vec<u8> {
    let mut b = Vec::with_capacity(encoded_size(q) as usize);
    b.extend_from_slice(&q.id.0.to_le_bytes());
    for v in [q.region.min.x, q.region.min.y, q.region.max.x, q.region.max.y] {
        b.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    b.extend_from_slice(&(q.expr.clauses().len() as u16).to_le_bytes());
    for c in q.expr.clauses() {
        b.extend_from_slice(&(c.len() as u16).to_le_bytes());
        for t in c.iter() {
            b.extend_from_slice(&t.0.to_le_bytes());
        }
    }
    b
}

/// Byte length of `encode_query(q)`.
pub fn encoded_size(q: &StsQuery) -> u64 {
    let terms: usize = q.expr.clauses().iter().map(|c| 2 + 4 * c.len()).sum();
    (8 + 32 + 2 + terms) as u64
}

pub fn decode_query(b: &[u8]) -> Result<StsQuery> {
    let mut r = Reader { b, at: 0 };
    let id = r.u64()?;
    let (x0, y0, x1, y1) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let nc = r.u16()?;
    let mut clauses = Vec::with_capacity(nc as usize);
    for _ in 0..nc {
        let nt = r.u16()?;
        let terms = (0..nt).map(|_| r.u32().map(TermId)).collect::<Result<Vec<_>>>()?;
        clauses.push(TermSet::new(terms));
    }
    if r.at != b.len() {
        return Err(Error::Payload("trailing bytes in query record".into()));
    }
    StsQuery::new(id, BooleanExpr::new(clauses)?, Rect::new(x0, y0, x1, y1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_record_round_trip() {
        let q = StsQuery::new(
            42,
            BooleanExpr::new(vec![TermSet::new(vec![TermId(1), TermId(5)]), TermSet::new(vec![TermId(2)])]).unwrap(),
            Rect::new(1.5, 2.0, 3.25, 4.0),
        )
        .unwrap();
        let b = encode_query(&q);
        assert_eq!(b.len() as u64, encoded_size(&q));
        assert_eq!(decode_query(&b).unwrap(), q);
        assert!(decode_query(&b[..b.len() - 1]).is_err());
    }

    #[test]
    fn rejects_garbage() {
        assert!(MigrationPayload::decode(b"nope").is_err());
        let mut b = MigrationPayload::default().encode();
        b.push(0);
        assert!(MigrationPayload::decode(&b).is_err());
    }
}
