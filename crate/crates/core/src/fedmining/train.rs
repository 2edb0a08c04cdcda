use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::data::{DataShard, Record};
use super::model::ModelParams;
use super::FedError;
use crate::he::{self, Ciphertext, FixedPointEncoding, KeyPair, PublicKey};
use crate::transcript::{MessageKind, Party, Transcript};

/// Fractional bits for gradients in transit; fine enough that encrypted and
/// plaintext training trajectories agree far below `1e-9`.
pub const UPDATE_FRAC_BITS: u32 = 48;

/// Loss above which training is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientUpdate {
    pub grads: ModelParams,
    pub sample_count: usize,
}

fn target_vector(model: &ModelParams, r: &Record) -> Result<Vec<f64>, FedError> {
    let outs = model.output_width();
    if outs == 1 {
        return Ok(vec![r.target]);
    }
    let label = r.target;
    if label < 0.0 || label.fract() != 0.0 || label as usize >= outs {
        return Err(FedError::Shape(format!("label {label} outside {outs} classes")));
    }
    let mut t = vec![0.0; outs];
    t[label as usize] = 1.0;
    Ok(t)
}

fn check_width(model: &ModelParams, records: &[Record]) -> Result<(), FedError> {
    if let Some(r) = records.iter().find(|r| r.features.len() != model.input_width()) {
        return Err(FedError::Shape(format!(
            "record has {} features, model expects {}",
            r.features.len(),
            model.input_width()
        )));
    }
    Ok(())
}

/// Mean over `records` of `sum_o (y_o - t_o)^2`.
pub fn mean_loss(model: &ModelParams, records: &[Record]) -> Result<f64, FedError> {
    if records.is_empty() {
        return Err(FedError::EmptyShard);
    }
    check_width(model, records)?;
    let mut total = 0.0;
    for r in records {
        let t = target_vector(model, r)?;
        total += model.forward(&r.features).iter().zip(&t).map(|(y, t)| (y - t).powi(2)).sum::<f64>();
    }
    Ok(total / records.len() as f64)
}

/// Fraction of correct labels for classifiers; `R^2` floored at zero for
/// single-output regressors.
pub fn accuracy(model: &ModelParams, records: &[Record]) -> Result<f64, FedError> {
    if records.is_empty() {
        return Err(FedError::EmptyShard);
    }
    check_width(model, records)?;
    if model.output_width() > 1 {
        let hits = records.iter().filter(|r| model.predict_label(&r.features) as f64 == r.target).count();
        return Ok(hits as f64 / records.len() as f64);
    }
    let mean = records.iter().map(|r| r.target).sum::<f64>() / records.len() as f64;
    let sst: f64 = records.iter().map(|r| (r.target - mean).powi(2)).sum();
    let sse: f64 = records.iter().map(|r| (model.forward(&r.features)[0] - r.target).powi(2)).sum();
    if sst == 0.0 {
        return Ok(if sse == 0.0 { 1.0 } else { 0.0 });
    }
    Ok((1.0 - sse / sst).max(0.0))
}

/// Full-batch gradient of the mean loss over one miner's shard.
pub fn local_gradient(shard: &DataShard, model: &ModelParams) -> Result<GradientUpdate, FedError> {
    if shard.is_empty() {
        return Err(FedError::EmptyShard);
    }
    check_width(model, &shard.records)?;
    let mut grad = vec![0.0; model.param_count()];
    for r in &shard.records {
        model.accumulate_gradient(&r.features, &target_vector(model, r)?, &mut grad);
    }
    let n = shard.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok(GradientUpdate { grads: model.with_flat(&grad)?, sample_count: shard.len() })
}

/// Sample-count-weighted mean of the updates.
pub fn aggregate(updates: &[GradientUpdate]) -> Result<GradientUpdate, FedError> {
    let first = updates.first().ok_or_else(|| FedError::Shape("no updates to aggregate".into()))?;
    if let Some(u) = updates.iter().find(|u| !u.grads.same_shape(&first.grads)) {
        return Err(FedError::Shape(format!(
            "update with {} parameters does not match {}",
            u.grads.param_count(),
            first.grads.param_count()
        )));
    }
    let total: usize = updates.iter().map(|u| u.sample_count).sum();
    if total == 0 {
        return Err(FedError::Shape("updates carry no samples".into()));
    }
    let mut acc = vec![0.0; first.grads.param_count()];
    for u in updates {
        let w = u.sample_count as f64;
        for (a, g) in acc.iter_mut().zip(u.grads.params()) {
            *a += w * g;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total as f64);
    Ok(GradientUpdate { grads: first.grads.with_flat(&acc)?, sample_count: total })
}

/// A gradient encrypted under the pool manager's key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncryptedUpdate {
    shape: ModelParams,
    values: Vec<Ciphertext>,
    sample_count: usize,
}

impl EncryptedUpdate {
    pub fn values(&self) -> &[Ciphertext] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Ciphertext] {
        &mut self.values
    }

    pub fn wire_len(&self, pk: &PublicKey) -> usize {
        self.values.len() * pk.ciphertext_len() + 8
    }
}

pub fn encrypt_update(
    update: &GradientUpdate,
    manager: &PublicKey,
    encoding: &FixedPointEncoding,
    rng: &mut ChaCha20Rng,
) -> Result<EncryptedUpdate, FedError> {
    let values = update
        .grads
        .params()
        .map(|&g| he::encrypt(manager, &encoding.encode(g)?, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let shape = ModelParams::zeros_like(&update.grads);
    Ok(EncryptedUpdate { shape, values, sample_count: update.sample_count })
}

pub fn decrypt_update(enc: &EncryptedUpdate, manager: &KeyPair) -> Result<GradientUpdate, FedError> {
    let flat = enc.values.iter().map(|c| he::decrypt_f64(manager, c)).collect::<Result<Vec<_>, _>>()?;
    Ok(GradientUpdate { grads: enc.shape.with_flat(&flat)?, sample_count: enc.sample_count })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub zeta: f64,
    pub max_epochs: usize,
    /// Epoch budget granted by the task deadline.
    pub deadline: usize,
}

impl TrainingConfig {
    pub fn new(zeta: f64, max_epochs: usize, deadline: usize) -> Result<Self, FedError> {
        let cfg = Self { zeta, max_epochs, deadline };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FedError> {
        if !(self.zeta.is_finite() && self.zeta >= 0.0) {
            return Err(FedError::Config(format!("learning rate {} must be finite and non-negative", self.zeta)));
        }
        Ok(())
    }

    pub fn epochs(&self) -> usize {
        self.max_epochs.min(self.deadline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub model: ModelParams,
    /// Metrics of the model after each completed epoch.
    pub metrics: Vec<EpochMetrics>,
    /// Loss of the initial model.
    pub initial_loss: f64,
}

impl TrainingOutcome {
    /// First epoch whose loss is at most `threshold`.
    pub fn epochs_to_loss(&self, threshold: f64) -> Option<usize> {
        self.metrics.iter().find(|m| m.loss <= threshold).map(|m| m.epoch)
    }

    pub fn epochs_to_accuracy(&self, threshold: f64) -> Option<usize> {
        self.metrics.iter().find(|m| m.accuracy >= threshold).map(|m| m.epoch)
    }

    pub fn final_loss(&self) -> f64 {
        self.metrics.last().map(|m| m.loss).unwrap_or(self.initial_loss)
    }
}

/// How miners ship their gradients to the manager.
pub enum UpdateTransport<'a> {
    Plain,
    Encrypted {
        manager: &'a KeyPair,
        encoding: FixedPointEncoding,
        rng: &'a mut ChaCha20Rng,
    },
}

/// Runs federated batch gradient descent inside one pool.
///
/// Every epoch is a barrier: the manager waits for an update from each miner,
/// aggregates them weighted by sample count and takes one step of size `zeta`.
pub fn train_pool(
    model0: &ModelParams,
    shards: &[DataShard],
    cfg: &TrainingConfig,
    transport: &mut UpdateTransport<'_>,
    mut transcript: Option<&mut Transcript>,
) -> Result<TrainingOutcome, FedError> {
    cfg.validate()?;
    if shards.is_empty() {
        return Err(FedError::Shape("no miners".into()));
    }
    let union: Vec<Record> = shards.iter().flat_map(|s| s.records.iter().cloned()).collect();
    let initial_loss = mean_loss(model0, &union)?;

    let mut model = model0.clone();
    let mut metrics = Vec::with_capacity(cfg.epochs());
    for epoch in 1..=cfg.epochs() {
        let mut updates = Vec::with_capacity(shards.len());
        for shard in shards {
            let update = local_gradient(shard, &model)?;
            let received = match transport {
                UpdateTransport::Plain => update,
                UpdateTransport::Encrypted { manager, encoding, rng } => {
                    let enc = encrypt_update(&update, manager.public(), encoding, rng)?;
                    if let Some(t) = transcript.as_deref_mut() {
                        t.record_size(
                            Party::Miner,
                            Party::Pool,
                            MessageKind::EncryptedGradient,
                            enc.wire_len(manager.public()) as u64,
                        );
                    }
                    decrypt_update(&enc, manager)?
                }
            };
            updates.push(received);
        }
        let step = aggregate(&updates)?;
        let next: Vec<f64> =
            model.params().zip(step.grads.params()).map(|(w, g)| w - cfg.zeta * g).collect();
        model = model.with_flat(&next)?;

        let loss = mean_loss(&model, &union)?;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS || !model.is_finite() {
            return Err(FedError::Divergence { epoch, loss });
        }
        metrics.push(EpochMetrics { epoch, loss, accuracy: accuracy(&model, &union)? });
    }
    Ok(TrainingOutcome { model, metrics, initial_loss })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::super::model::Layer;
    use super::*;

    fn scalar_model(w: f64) -> ModelParams {
        ModelParams::new(vec![Layer::new(1, 1, vec![w], vec![0.0]).unwrap()]).unwrap()
    }

    fn shard(points: &[(f64, f64)]) -> DataShard {
        DataShard { owner: 0, records: points.iter().map(|&(x, y)| Record::new(vec![x], y)).collect() }
    }

    #[test]
    fn hand_derivative() {
        let g = local_gradient(&shard(&[(1.0, 2.0)]), &scalar_model(0.0)).unwrap();
        assert_eq!(g.grads.layers()[0].weights(), &[-4.0]);
        assert_eq!(g.sample_count, 1);
    }

    #[test]
    fn empty_shard_rejected() {
        assert!(matches!(local_gradient(&shard(&[]), &scalar_model(0.0)), Err(FedError::EmptyShard)));
    }

    #[test]
    fn zero_gradient_at_minimum() {
        let m = ModelParams::new(vec![Layer::new(1, 1, vec![2.0], vec![1.0]).unwrap()]).unwrap();
        let g = local_gradient(&shard(&[(1.0, 3.0), (-1.0, -1.0)]), &m).unwrap();
        assert!(g.grads.params().all(|v| *v == 0.0));
    }

    #[test]
    fn aggregate_examples() {
        let u = |g: f64, n: usize| GradientUpdate { grads: scalar_model(g), sample_count: n };
        let mean = aggregate(&[u(3.0, 2), u(5.0, 2)]).unwrap();
        assert_eq!(mean.grads.layers()[0].weights(), &[4.0]);
        let weighted = aggregate(&[u(0.0, 1), u(4.0, 3)]).unwrap();
        assert_eq!(weighted.grads.layers()[0].weights(), &[3.0]);
        let single = aggregate(&[u(7.0, 5)]).unwrap();
        assert_eq!(single, u(7.0, 5));
    }

    #[test]
    fn aggregate_shape_mismatch() {
        let a = GradientUpdate { grads: scalar_model(1.0), sample_count: 1 };
        let b = GradientUpdate { grads: ModelParams::zeros(&[2, 1]).unwrap(), sample_count: 1 };
        assert!(matches!(aggregate(&[a, b]), Err(FedError::Shape(_))));
    }

    #[test]
    fn one_epoch_example() {
        let cfg = TrainingConfig::new(0.1, 1, 10).unwrap();
        let out =
            train_pool(&scalar_model(0.0), &[shard(&[(1.0, 2.0)])], &cfg, &mut UpdateTransport::Plain, None)
                .unwrap();
        // bias moves too, with the same gradient
        assert!((out.model.layers()[0].weights()[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_keeps_model() {
        let cfg = TrainingConfig::new(0.0, 5, 10).unwrap();
        let m0 = scalar_model(0.3);
        let out = train_pool(&m0, &[shard(&[(1.0, 2.0), (2.0, 1.0)])], &cfg, &mut UpdateTransport::Plain, None)
            .unwrap();
        assert_eq!(out.model, m0);
        assert!(out.metrics.iter().all(|m| m.loss == out.initial_loss));
    }

    #[test]
    fn deadline_caps_epochs() {
        let cfg = TrainingConfig::new(0.01, 50, 3).unwrap();
        let out =
            train_pool(&scalar_model(0.0), &[shard(&[(1.0, 2.0)])], &cfg, &mut UpdateTransport::Plain, None)
                .unwrap();
        assert_eq!(out.metrics.len(), 3);
    }

    #[test]
    fn divergence_names_epoch() {
        let cfg = TrainingConfig::new(50.0, 100, 100).unwrap();
        let err =
            train_pool(&scalar_model(0.0), &[shard(&[(3.0, 2.0)])], &cfg, &mut UpdateTransport::Plain, None)
                .unwrap_err();
        assert!(matches!(err, FedError::Divergence { epoch, .. } if epoch > 1 && epoch < 100));
    }

    #[test]
    fn encrypted_roundtrip_within_quantisation() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = he::keygen(512, &mut rng).unwrap();
        let enc = FixedPointEncoding::new(UPDATE_FRAC_BITS).unwrap();
        let u = GradientUpdate {
            grads: ModelParams::random(&[3, 2], 10.0, &mut rng).unwrap(),
            sample_count: 4,
        };
        let back = decrypt_update(&encrypt_update(&u, kp.public(), &enc, &mut rng).unwrap(), &kp).unwrap();
        for (a, b) in u.grads.params().zip(back.grads.params()) {
            assert!((a - b).abs() <= enc.resolution());
        }
        let zero = GradientUpdate { grads: ModelParams::zeros(&[2, 2]).unwrap(), sample_count: 1 };
        let back = decrypt_update(&encrypt_update(&zero, kp.public(), &enc, &mut rng).unwrap(), &kp).unwrap();
        assert_eq!(back, zero);
    }

    #[test]
    fn wrong_manager_key_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = he::keygen(512, &mut rng).unwrap();
        let other = he::keygen(512, &mut rng).unwrap();
        let enc = FixedPointEncoding::new(UPDATE_FRAC_BITS).unwrap();
        let u = GradientUpdate { grads: scalar_model(1.0), sample_count: 1 };
        let e = encrypt_update(&u, kp.public(), &enc, &mut rng).unwrap();
        assert!(matches!(decrypt_update(&e, &other), Err(FedError::Crypto(_))));
    }
}
