//! Message log for one verification session.
//!
//! Only direction, kind and size are part of the serialised log. Payload
//! bytes can be captured in memory for inspection but are never exported.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Requester,
    Pool,
    Miner,
    FullNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    PublicKey,
    EncryptedFeatures,
    MaskedActivations,
    MaskedPlaintext,
    EncryptedGradient,
    GarbledCircuit,
    PoolInputLabels,
    OtSetup,
    OtChoice,
    OtTransfer,
    EncodedOutput,
}

/// Cost bucket a message is reported under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    He,
    Ot,
    Gc,
    Training,
}

impl MessageKind {
    pub fn phase(self) -> Phase {
        match self {
            MessageKind::PublicKey
            | MessageKind::EncryptedFeatures
            | MessageKind::MaskedActivations
            | MessageKind::MaskedPlaintext => Phase::He,
            MessageKind::EncryptedGradient => Phase::Training,
            MessageKind::OtSetup | MessageKind::OtChoice | MessageKind::OtTransfer => Phase::Ot,
            MessageKind::GarbledCircuit | MessageKind::PoolInputLabels | MessageKind::EncodedOutput => {
                Phase::Gc
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub from: Party,
    pub to: Party,
    pub kind: MessageKind,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub session: String,
    pub entries: Vec<TranscriptEntry>,
    #[serde(skip)]
    captured: Option<Vec<(Party, MessageKind, Vec<u8>)>>,
}

impl Transcript {
    pub fn new(session: impl Into<String>) -> Self {
        Self { session: session.into(), entries: Vec::new(), captured: None }
    }

    /// Keeps a copy of every payload for later inspection.
    pub fn capturing(session: impl Into<String>) -> Self {
        Self { captured: Some(Vec::new()), ..Self::new(session) }
    }

    pub fn record(&mut self, from: Party, to: Party, kind: MessageKind, payload: &[u8]) {
        self.record_size(from, to, kind, payload.len() as u64);
        if let Some(cap) = &mut self.captured {
            cap.push((from, kind, payload.to_vec()));
        }
    }

    /// Records a message whose payload is not materialised.
    pub fn record_size(&mut self, from: Party, to: Party, kind: MessageKind, bytes: u64) {
        let seq = self.entries.len() as u64;
        self.entries.push(TranscriptEntry { seq, from, to, kind, bytes });
    }

    pub fn captured(&self) -> &[(Party, MessageKind, Vec<u8>)] {
        self.captured.as_deref().unwrap_or(&[])
    }

    pub fn bytes_from(&self, party: Party) -> u64 {
        self.entries.iter().filter(|e| e.from == party).map(|e| e.bytes).sum()
    }

    pub fn bytes_in_phase(&self, phase: Phase) -> u64 {
        self.entries.iter().filter(|e| e.kind.phase() == phase).map(|e| e.bytes).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.entries.iter().map(|e| e.bytes).sum()
    }

    pub fn extend(&mut self, other: Transcript) {
        for e in other.entries {
            self.record_size(e.from, e.to, e.kind, e.bytes);
        }
        if let (Some(mine), Some(theirs)) = (&mut self.captured, other.captured) {
            mine.extend(theirs);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript is plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_has_sizes_only() {
        let mut t = Transcript::capturing("s1");
        t.record(Party::Requester, Party::Pool, MessageKind::EncryptedFeatures, &[1, 2, 3]);
        let json = t.to_json();
        assert!(json.contains("\"bytes\": 3"));
        assert!(!json.contains("captured"));
        assert_eq!(t.captured().len(), 1);
        let back: Transcript = serde_json::from_str(&json).unwrap();
        assert_eq!(back.entries, t.entries);
    }

    #[test]
    fn phase_totals() {
        let mut t = Transcript::new("s");
        t.record_size(Party::Pool, Party::Requester, MessageKind::GarbledCircuit, 100);
        t.record_size(Party::Requester, Party::Pool, MessageKind::OtChoice, 7);
        t.record_size(Party::Pool, Party::Requester, MessageKind::OtTransfer, 9);
        assert_eq!(t.bytes_in_phase(Phase::Gc), 100);
        assert_eq!(t.bytes_in_phase(Phase::Ot), 16);
        assert_eq!(t.bytes_from(Party::Pool), 109);
    }
}
