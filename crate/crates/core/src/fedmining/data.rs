use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FedError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    /// Regression target, or the class index for classification tasks.
    pub target: f64,
}

impl Record {
    pub fn new(features: Vec<f64>, target: f64) -> Self {
        Self { features, target }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<Record>,
    width: usize,
}

impl Dataset {
    pub fn new(records: Vec<Record>) -> Result<Self, FedError> {
        let width = records.first().map(|r| r.features.len()).unwrap_or(0);
        if records.iter().any(|r| r.features.len() != width) {
            return Err(FedError::Shape("records have different feature widths".into()));
        }
        if records.iter().any(|r| !r.target.is_finite() || r.features.iter().any(|v| !v.is_finite())) {
            return Err(FedError::Shape("records must be finite".into()));
        }
        Ok(Self { records, width })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.features.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.target as usize).collect()
    }
}

/// The records held by one miner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataShard {
    pub owner: usize,
    pub records: Vec<Record>,
}

impl DataShard {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Shuffles with `seed` and deals the records into `k` shards whose sizes
/// differ by at most one. The first `n mod k` shards get the extra record.
pub fn partition_dataset(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<DataShard>, FedError> {
    let n = dataset.len();
    if k == 0 || n == 0 {
        return Err(FedError::Partition(format!("cannot split {n} records among {k} miners")));
    }
    if k > n {
        return Err(FedError::Partition(format!("{k} miners but only {n} records")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut shards = Vec::with_capacity(k);
    let mut next = 0;
    for owner in 0..k {
        let size = base + usize::from(owner < extra);
        let records = order[next..next + size].iter().map(|&i| dataset.records[i].clone()).collect();
        shards.push(DataShard { owner, records });
        next += size;
    }
    Ok(shards)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
}

/// A fixed random teacher from which any number of samples can be drawn.
///
/// Regression targets are `w . x + b` plus uniform noise in `[-noise, noise]`;
/// classification labels are the argmax of a random linear teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub kind: TaskKind,
    pub dim: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default)]
    pub noise: f64,
    pub teacher_seed: u64,
}

fn default_classes() -> usize {
    2
}

impl SyntheticTask {
    pub fn regression(dim: usize, noise: f64, teacher_seed: u64) -> Self {
        Self { kind: TaskKind::Regression, dim, classes: 1, noise, teacher_seed }
    }

    pub fn classification(dim: usize, classes: usize, teacher_seed: u64) -> Self {
        Self { kind: TaskKind::Classification, dim, classes, noise: 0.0, teacher_seed }
    }

    pub fn output_width(&self) -> usize {
        match self.kind {
            TaskKind::Regression => 1,
            TaskKind::Classification => self.classes,
        }
    }

    fn teacher(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.teacher_seed);
        let outs = self.output_width();
        let w = (0..outs).map(|_| (0..self.dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let b = (0..outs).map(|_| rng.gen_range(-0.5..0.5)).collect();
        (w, b)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset, FedError> {
        if self.dim == 0 || (self.kind == TaskKind::Classification && self.classes < 2) {
            return Err(FedError::Shape(format!("bad synthetic task {self:?}")));
        }
        let (w, b) = self.teacher();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let scores: Vec<f64> = w
                    .iter()
                    .zip(&b)
                    .map(|(row, bk)| row.iter().zip(&x).map(|(a, c)| a * c).sum::<f64>() + bk)
                    .collect();
                let target = match self.kind {
                    TaskKind::Regression => {
                        let eps = if self.noise > 0.0 { rng.gen_range(-self.noise..=self.noise) } else { 0.0 };
                        scores[0] + eps
                    }
                    TaskKind::Classification => super::argmax(&scores) as f64,
                };
                Record::new(x, target)
            })
            .collect();
        Dataset::new(records)
    }
}
