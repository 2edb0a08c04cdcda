use serde::{Deserialize, Serialize};

use super::block::Hash;
use super::ChainError;

/// A training task published by a requester.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub reward: f64,
    pub arrival: u64,
    /// Hash committing to the requester's test set.
    #[serde(with = "hex_hash")]
    pub test_commitment: Hash,
    /// Last simulated instant at which accuracies may be submitted.
    pub deadline: u64,
}

mod hex_hash {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let v = hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)?;
        v.try_into().map_err(|_| serde::de::Error::custom("expected 32 bytes"))
    }
}

impl Task {
    pub fn new(id: impl Into<String>, reward: f64, arrival: u64, test_commitment: Hash, deadline: u64) -> Result<Self, ChainError> {
        let t = Self { id: id.into(), reward, arrival, test_commitment, deadline };
        if !(t.reward.is_finite() && t.reward >= 0.0) {
            return Err(ChainError::Invalid(format!("task {} has reward {}", t.id, t.reward)));
        }
        Ok(t)
    }
}

/// Highest reward; ties go to the earliest arrival, then the lowest id.
pub fn select_task(pending: &[Task]) -> Result<&Task, ChainError> {
    let mut ids: Vec<&str> = pending.iter().map(|t| t.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(ChainError::Invalid(format!("duplicate task id {}", w[0])));
    }
    pending
        .iter()
        .min_by(|a, b| {
            b.reward
                .total_cmp(&a.reward)
                .then(a.arrival.cmp(&b.arrival))
                .then_with(|| a.id.cmp(&b.id))
        })
        .ok_or(ChainError::NoTask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(id: &str, reward: f64, arrival: u64) -> Task {
        Task::new(id, reward, arrival, [0; 32], 100).unwrap()
    }

    #[test]
    fn highest_reward_then_earliest() {
        let pending = [t("x", 5.0, 1), t("y", 9.0, 3), t("z", 9.0, 2)];
        assert_eq!(select_task(&pending).unwrap().id, "z");
    }

    #[test]
    fn single_and_empty() {
        assert_eq!(select_task(&[t("a", 1.0, 0)]).unwrap().id, "a");
        assert!(matches!(select_task(&[]), Err(ChainError::NoTask)));
    }

    #[test]
    fn lowest_id_breaks_full_tie() {
        assert_eq!(select_task(&[t("b", 1.0, 0), t("a", 1.0, 0)]).unwrap().id, "a");
    }

    #[test]
    fn negative_reward_and_duplicates_rejected() {
        assert!(Task::new("a", -1.0, 0, [0; 32], 0).is_err());
        assert!(select_task(&[t("a", 1.0, 0), t("a", 2.0, 0)]).is_err());
    }
}
