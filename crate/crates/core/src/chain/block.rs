use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ChainError;
use crate::gc::PublishedCircuit;

pub type Hash = [u8; 32];

pub const ZERO_HASH: Hash = [0u8; 32];

const DUMP_MAGIC: &[u8; 8] = b"POFLCHN1";

pub fn sha256(bytes: &[u8]) -> Hash {
    Sha256::digest(bytes).into()
}

fn sha256_pair(a: &Hash, b: &Hash) -> Hash {
    let mut h = Sha256::new();
    h.update(a);
    h.update(b);
    h.finalize().into()
}

/// Binary Merkle root; odd levels pair the last node with itself. An empty
/// body has the all-zero root.
pub fn merkle_root(txs: &[Vec<u8>]) -> Hash {
    if txs.is_empty() {
        return ZERO_HASH;
    }
    let mut level: Vec<Hash> = txs.iter().map(|t| sha256(t)).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| sha256_pair(&pair[0], pair.get(1).unwrap_or(&pair[0])))
            .collect();
    }
    level[0]
}

/// Claimed accuracy as `n` correct predictions out of `i` test records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Accuracy {
    pub n: u64,
    pub i: u64,
}

impl Accuracy {
    pub fn new(n: u64, i: u64) -> Result<Self, ChainError> {
        if n > i {
            return Err(ChainError::Invalid(format!("accuracy {n}/{i} exceeds the test set")));
        }
        Ok(Self { n, i })
    }

    pub fn ratio(&self) -> f64 {
        if self.i == 0 {
            0.0
        } else {
            self.n as f64 / self.i as f64
        }
    }

    /// Exact comparison of `n/i` values.
    pub fn cmp_ratio(&self, other: &Accuracy) -> std::cmp::Ordering {
        (u128::from(self.n) * u128::from(other.i)).cmp(&(u128::from(other.n) * u128::from(self.i)))
    }
}

/// Verification payload: encrypted first layer, the published garbled
/// circuit, the protocol transcript, and hashes committing to each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vm {
    #[serde(with = "hex_bytes")]
    pub encrypted_layer: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub garbled_circuit: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub transcript: Vec<u8>,
    pub commitments: VmCommitments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmCommitments {
    #[serde(with = "hex_array")]
    pub encrypted_layer: Hash,
    #[serde(with = "hex_array")]
    pub garbled_circuit: Hash,
    #[serde(with = "hex_array")]
    pub transcript: Hash,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

mod hex_array {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let v = hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)?;
        v.try_into().map_err(|_| serde::de::Error::custom("expected 32 bytes"))
    }
}

impl Vm {
    pub fn new(encrypted_layer: Vec<u8>, garbled_circuit: Vec<u8>, transcript: Vec<u8>) -> Self {
        let commitments = VmCommitments {
            encrypted_layer: sha256(&encrypted_layer),
            garbled_circuit: sha256(&garbled_circuit),
            transcript: sha256(&transcript),
        };
        Self { encrypted_layer, garbled_circuit, transcript, commitments }
    }

    pub fn circuit(&self) -> Result<PublishedCircuit, ChainError> {
        Ok(PublishedCircuit::from_bytes(&self.garbled_circuit)?)
    }

    /// Commitments match the stored payloads and the circuit parses.
    pub fn validate(&self) -> Result<PublishedCircuit, ChainError> {
        let c = &self.commitments;
        if c.encrypted_layer != sha256(&self.encrypted_layer)
            || c.garbled_circuit != sha256(&self.garbled_circuit)
            || c.transcript != sha256(&self.transcript)
        {
            return Err(ChainError::Invalid("V_m commitment mismatch".into()));
        }
        self.circuit()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_bytes(&mut out, &self.encrypted_layer);
        put_bytes(&mut out, &self.garbled_circuit);
        put_bytes(&mut out, &self.transcript);
        out.extend_from_slice(&self.commitments.encrypted_layer);
        out.extend_from_slice(&self.commitments.garbled_circuit);
        out.extend_from_slice(&self.commitments.transcript);
        out
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, ChainError> {
        let encrypted_layer = r.bytes()?.to_vec();
        let garbled_circuit = r.bytes()?.to_vec();
        let transcript = r.bytes()?.to_vec();
        let commitments =
            VmCommitments { encrypted_layer: r.hash()?, garbled_circuit: r.hash()?, transcript: r.hash()? };
        Ok(Self { encrypted_layer, garbled_circuit, transcript, commitments })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    #[serde(with = "hex_array")]
    pub prev_hash: Hash,
    #[serde(with = "hex_array")]
    pub merkle_root: Hash,
    pub height: u64,
    pub timestamp: u64,
    pub task_id: String,
    pub pool_id: String,
    #[serde(with = "hex_array")]
    pub vm_hash: Hash,
    pub accuracy: Accuracy,
}

impl BlockHeader {
    /// Fields in declaration order, big-endian, strings length-prefixed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(160);
        out.extend_from_slice(&self.prev_hash);
        out.extend_from_slice(&self.merkle_root);
        out.extend(self.height.to_be_bytes());
        out.extend(self.timestamp.to_be_bytes());
        put_bytes(&mut out, self.task_id.as_bytes());
        put_bytes(&mut out, self.pool_id.as_bytes());
        out.extend_from_slice(&self.vm_hash);
        out.extend(self.accuracy.n.to_be_bytes());
        out.extend(self.accuracy.i.to_be_bytes());
        out
    }

    pub fn hash(&self) -> Hash {
        sha256(&self.to_bytes())
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, ChainError> {
        Ok(Self {
            prev_hash: r.hash()?,
            merkle_root: r.hash()?,
            height: r.u64()?,
            timestamp: r.u64()?,
            task_id: r.string()?,
            pool_id: r.string()?,
            vm_hash: r.hash()?,
            accuracy: Accuracy { n: r.u64()?, i: r.u64()? },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    #[serde(with = "hex_vec")]
    pub txs: Vec<Vec<u8>>,
    pub vm: Vm,
}

mod hex_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(hex::encode).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|s| hex::decode(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Inputs of a new block apart from its parent.
#[derive(Debug, Clone)]
pub struct BlockDraft {
    pub timestamp: u64,
    pub task_id: String,
    pub pool_id: String,
    pub txs: Vec<Vec<u8>>,
    pub vm: Vm,
    pub accuracy: Accuracy,
}

/// Links a new block to `parent` (or makes a genesis block).
pub fn build_block(parent: Option<&BlockHeader>, draft: BlockDraft) -> Result<Block, ChainError> {
    Accuracy::new(draft.accuracy.n, draft.accuracy.i)?;
    let (prev_hash, height) = match parent {
        Some(p) => (p.hash(), p.height + 1),
        None => (ZERO_HASH, 0),
    };
    let header = BlockHeader {
        prev_hash,
        merkle_root: merkle_root(&draft.txs),
        height,
        timestamp: draft.timestamp,
        task_id: draft.task_id,
        pool_id: draft.pool_id,
        vm_hash: sha256(&draft.vm.to_bytes()),
        accuracy: draft.accuracy,
    };
    Ok(Block { header, txs: draft.txs, vm: draft.vm })
}

impl Block {
    pub fn hash(&self) -> Hash {
        self.header.hash()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_bytes(&mut out, &self.header.to_bytes());
        out.extend((self.txs.len() as u32).to_be_bytes());
        for tx in &self.txs {
            put_bytes(&mut out, tx);
        }
        put_bytes(&mut out, &self.vm.to_bytes());
        out
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, ChainError> {
        let mut h = Reader::new(r.bytes()?);
        let header = BlockHeader::read(&mut h)?;
        h.finish()?;
        let count = r.u32()? as usize;
        if count > r.remaining() / 4 {
            return Err(ChainError::Malformed("transaction count exceeds input".into()));
        }
        let txs = (0..count).map(|_| r.bytes().map(<[u8]>::to_vec)).collect::<Result<_, _>>()?;
        let mut v = Reader::new(r.bytes()?);
        let vm = Vm::read(&mut v)?;
        v.finish()?;
        Ok(Self { header, txs, vm })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ChainError> {
        let mut r = Reader::new(bytes);
        let b = Self::read(&mut r)?;
        r.finish()?;
        Ok(b)
    }

    /// Checks everything that depends on this block alone.
    pub fn check_self(&self) -> Result<(), ChainError> {
        let h = &self.header;
        if h.accuracy.n > h.accuracy.i {
            return Err(ChainError::Invalid(format!("block {}: N > I", h.height)));
        }
        if h.merkle_root != merkle_root(&self.txs) {
            return Err(ChainError::Invalid(format!("block {}: Merkle root mismatch", h.height)));
        }
        if h.vm_hash != sha256(&self.vm.to_bytes()) {
            return Err(ChainError::Invalid(format!("block {}: V_m hash mismatch", h.height)));
        }
        let circuit = self.vm.validate()?;
        if u64::from(circuit.tables.records) != h.accuracy.i {
            return Err(ChainError::Invalid(format!(
                "block {}: circuit over {} records, header claims I = {}",
                h.height, circuit.tables.records, h.accuracy.i
            )));
        }
        Ok(())
    }
}

/// Why a chain is invalid, if it is.
pub fn check_chain(chain: &[Block]) -> Result<(), ChainError> {
    let mut prev: Option<&BlockHeader> = None;
    for (i, b) in chain.iter().enumerate() {
        b.check_self()?;
        let h = &b.header;
        let (want_prev, want_height) = match prev {
            Some(p) => (p.hash(), p.height + 1),
            None => (ZERO_HASH, 0),
        };
        if h.prev_hash != want_prev {
            return Err(ChainError::Invalid(format!("block {i}: broken hash link")));
        }
        if h.height != want_height {
            return Err(ChainError::Invalid(format!("block {i}: height {} expected {want_height}", h.height)));
        }
        prev = Some(h);
    }
    Ok(())
}

pub fn validate_chain(chain: &[Block]) -> bool {
    check_chain(chain).is_ok()
}

/// Magic, block count, the blocks, then the tip header hash so that the
/// last header is covered too.
pub fn dump_chain(chain: &[Block]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(DUMP_MAGIC);
    out.extend((chain.len() as u64).to_be_bytes());
    for b in chain {
        out.extend(b.to_bytes());
    }
    out.extend_from_slice(&chain.last().map(Block::hash).unwrap_or(ZERO_HASH));
    out
}

pub fn load_chain(bytes: &[u8]) -> Result<Vec<Block>, ChainError> {
    let mut r = Reader::new(bytes);
    if r.take(8)? != DUMP_MAGIC {
        return Err(ChainError::Malformed("not a chain dump".into()));
    }
    let count = r.u64()?;
    if count > r.remaining() as u64 {
        return Err(ChainError::Malformed("block count exceeds input".into()));
    }
    let blocks = (0..count).map(|_| Block::read(&mut r)).collect::<Result<Vec<_>, _>>()?;
    let tip = r.hash()?;
    r.finish()?;
    if tip != blocks.last().map(Block::hash).unwrap_or(ZERO_HASH) {
        return Err(ChainError::Invalid("tip hash does not match the last header".into()));
    }
    Ok(blocks)
}

/// Loads and validates a dump in one step.
pub fn verify_dump(bytes: &[u8]) -> Result<Vec<Block>, ChainError> {
    let chain = load_chain(bytes)?;
    check_chain(&chain)?;
    Ok(chain)
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend((b.len() as u32).to_be_bytes());
    out.extend_from_slice(b);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ChainError> {
        if n > self.remaining() {
            return Err(ChainError::Malformed(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ChainError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ChainError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn hash(&mut self) -> Result<Hash, ChainError> {
        Ok(self.take(32)?.try_into().expect("32 bytes"))
    }

    fn bytes(&mut self) -> Result<&'a [u8], ChainError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn string(&mut self) -> Result<String, ChainError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| ChainError::Malformed("non-UTF-8 string".into()))
    }

    fn finish(&self) -> Result<(), ChainError> {
        if self.remaining() != 0 {
            return Err(ChainError::Malformed(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}
