//! Byte layout: four length-prefixed (u32, big-endian) sections holding the
//! header, the garbled tables, the input maps and the decoding table.

use serde::{Deserialize, Serialize};

use super::circuit::BoolCircuit;
use super::garble::{GarbledCircuit, GarbledTables, Label, LABEL_BITS};
use super::GcError;

const MAP_FULL: u8 = 0;
const MAP_PUBLISHED: u8 = 1;

/// The form of a garbled circuit that leaves the garbler: the pool's inputs
/// are already bound to their active labels, while both labels of every
/// requester input remain so that any holder can act as OT sender.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishedCircuit {
    pub tables: GarbledTables,
    pub pool_labels: Vec<Label>,
    pub requester_pairs: Vec<(Label, Label)>,
}

impl GarbledCircuit {
    pub fn publish(&self, pool_bits: &[bool]) -> Result<PublishedCircuit, GcError> {
        Ok(PublishedCircuit {
            tables: self.tables.clone(),
            pool_labels: self.encode_pool_inputs(pool_bits)?,
            requester_pairs: self.requester_pairs.clone(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut maps = vec![MAP_FULL];
        maps.extend(self.tables.const_one.to_be_bytes());
        for (a, b) in self.pool_pairs.iter().chain(&self.requester_pairs) {
            maps.extend(a.to_be_bytes());
            maps.extend(b.to_be_bytes());
        }
        encode(&self.tables, &maps)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GcError> {
        let (tables, maps, circuit) = decode(bytes)?;
        let n = circuit.input_bits_per_party() as usize;
        let mut r = Reader::new(&maps);
        expect_kind(&mut r, MAP_FULL)?;
        let const_one = r.label()?;
        let pool_pairs = (0..n).map(|_| r.pair()).collect::<Result<_, _>>()?;
        let requester_pairs = (0..n).map(|_| r.pair()).collect::<Result<_, _>>()?;
        r.finish()?;
        Ok(Self { tables: GarbledTables { const_one, ..tables }, pool_pairs, requester_pairs })
    }
}

impl PublishedCircuit {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut maps = vec![MAP_PUBLISHED];
        maps.extend(self.tables.const_one.to_be_bytes());
        for l in &self.pool_labels {
            maps.extend(l.to_be_bytes());
        }
        for (a, b) in &self.requester_pairs {
            maps.extend(a.to_be_bytes());
            maps.extend(b.to_be_bytes());
        }
        encode(&self.tables, &maps)
    }

    /// Parses and structurally validates against a freshly built circuit.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GcError> {
        let (tables, maps, circuit) = decode(bytes)?;
        let n = circuit.input_bits_per_party() as usize;
        let mut r = Reader::new(&maps);
        expect_kind(&mut r, MAP_PUBLISHED)?;
        let const_one = r.label()?;
        let pool_labels = (0..n).map(|_| r.label()).collect::<Result<_, _>>()?;
        let requester_pairs = (0..n).map(|_| r.pair()).collect::<Result<_, _>>()?;
        r.finish()?;
        Ok(Self { tables: GarbledTables { const_one, ..tables }, pool_labels, requester_pairs })
    }

    pub fn circuit(&self) -> Result<BoolCircuit, GcError> {
        BoolCircuit::comparison(self.tables.records, self.tables.label_bits)
    }
}

fn section(out: &mut Vec<u8>, body: &[u8]) {
    out.extend((body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

fn encode(t: &GarbledTables, maps: &[u8]) -> Vec<u8> {
    let mut header = Vec::with_capacity(16);
    header.extend(t.records.to_be_bytes());
    header.extend(t.label_bits.to_be_bytes());
    header.extend(LABEL_BITS.to_be_bytes());
    header.extend((t.tables.len() as u32).to_be_bytes());

    let mut tables = Vec::with_capacity(t.tables.len() * 64);
    for row in t.tables.iter().flatten() {
        tables.extend(row.to_be_bytes());
    }
    let mut decoding = Vec::with_capacity(t.decoding.len() * 32);
    for (h0, h1) in &t.decoding {
        decoding.extend(h0.to_be_bytes());
        decoding.extend(h1.to_be_bytes());
    }

    let mut out = Vec::with_capacity(16 + header.len() + tables.len() + maps.len() + decoding.len());
    section(&mut out, &header);
    section(&mut out, &tables);
    section(&mut out, maps);
    section(&mut out, &decoding);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], GcError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| GcError::Malformed(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, GcError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, GcError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn label(&mut self) -> Result<Label, GcError> {
        Ok(u128::from_be_bytes(self.take(16)?.try_into().expect("16 bytes")))
    }

    fn pair(&mut self) -> Result<(Label, Label), GcError> {
        Ok((self.label()?, self.label()?))
    }

    fn section(&mut self) -> Result<&'a [u8], GcError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn finish(&self) -> Result<(), GcError> {
        if self.pos != self.buf.len() {
            return Err(GcError::Malformed(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn expect_kind(r: &mut Reader<'_>, kind: u8) -> Result<(), GcError> {
    let found = r.u8()?;
    if found != kind {
        return Err(GcError::Malformed(format!("input map kind {found}, expected {kind}")));
    }
    Ok(())
}

fn decode(bytes: &[u8]) -> Result<(GarbledTables, Vec<u8>, BoolCircuit), GcError> {
    let mut r = Reader::new(bytes);
    let header = r.section()?;
    let tables_raw = r.section()?;
    let maps = r.section()?.to_vec();
    let decoding_raw = r.section()?;
    r.finish()?;

    let mut h = Reader::new(header);
    let (records, label_bits, k, gates) = (h.u32()?, h.u32()?, h.u32()?, h.u32()?);
    h.finish()?;
    if k != LABEL_BITS {
        return Err(GcError::Malformed(format!("label width {k}, expected {LABEL_BITS}")));
    }
    let circuit = BoolCircuit::comparison(records, label_bits)?;
    if gates as usize != circuit.nonfree_gate_count() {
        return Err(GcError::Malformed(format!(
            "{gates} tables declared, circuit has {} non-free gates",
            circuit.nonfree_gate_count()
        )));
    }

    let mut t = Reader::new(tables_raw);
    let tables = (0..gates)
        .map(|_| Ok([t.label()?, t.label()?, t.label()?, t.label()?]))
        .collect::<Result<Vec<_>, GcError>>()?;
    t.finish()?;
    let mut d = Reader::new(decoding_raw);
    let decoding = (0..circuit.outputs().len()).map(|_| d.pair()).collect::<Result<Vec<_>, _>>()?;
    d.finish()?;

    Ok((GarbledTables { records, label_bits, tables, const_one: 0, decoding }, maps, circuit))
}
