//! Unsupervised training: predict the next turn's vector from the previous
//! one over all consecutive-turn pairs, with a session-level 80/10/10 split,
//! early stopping on validation loss, and best-model selection.

use super::checkpoint::ModelCheckpoint;
use super::{adam_step, backward, forward, AdamConfig, AdamState, Matrix, Mode, NetworkParams};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One training pair: the final-IPU vector of a turn and the initial-IPU
/// vector of the following turn.
#[derive(Debug, Clone)]
pub struct PairSample {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

/// All pairs of one session, kept together so the train/validation/test
/// split happens at session granularity.
#[derive(Debug, Clone)]
pub struct SessionPairs {
    pub session_id: String,
    pub pairs: Vec<PairSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub widths: Vec<usize>,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            widths: NetworkParams::default_widths(),
            batch_size: 128,
            max_epochs: 100,
            patience: 10,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            train_frac: 0.8,
            val_frac: 0.1,
            test_frac: 0.1,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        NetworkParams::validate_widths(&self.widths)?;
        if self.batch_size < 2 {
            return Err(Error::Config(
                "batch_size must be at least 2 (batch statistics)".to_string(),
            ));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "max_epochs and patience must be positive".to_string(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".to_string()));
        }
        let frac_sum = self.train_frac + self.val_frac + self.test_frac;
        if (frac_sum - 1.0).abs() > 1e-9
            || self.train_frac <= 0.0
            || self.val_frac <= 0.0
            || self.test_frac < 0.0
        {
            return Err(Error::Config(format!(
                "split fractions must be positive and sum to 1, got {}/{}/{}",
                self.train_frac, self.val_frac, self.test_frac
            )));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Session ids per split, in split order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Loss trajectory and split bookkeeping from one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub initial_val_loss: f64,
    pub train_loss_history: Vec<f64>,
    pub val_loss_history: Vec<f64>,
    pub first_epoch_batch_losses: Vec<f64>,
    pub split: SplitSummary,
}

/// Train an encoder–decoder on session-grouped pairs.
///
/// Sessions are shuffled once with the seeded generator and split by the
/// configured fractions (every split gets at least one session). Each epoch
/// shuffles the training pairs, steps Adam per minibatch (a trailing batch
/// is kept only if it has at least 2 pairs), then scores the validation
/// pairs with inference-mode batch norm. The parameters with the lowest
/// validation loss are returned; training stops after `patience` epochs
/// without improvement.
pub fn train(
    sessions: &[SessionPairs],
    config: &TrainConfig,
) -> Result<(ModelCheckpoint, TrainReport)> {
    config.validate()?;
    let sessions: Vec<&SessionPairs> = sessions.iter().filter(|s| !s.pairs.is_empty()).collect();
    if sessions.len() < 3 {
        return Err(Error::Config(format!(
            "training needs at least 3 sessions with pairs, got {}",
            sessions.len()
        )));
    }
    let in_dim = config.widths[0];
    let out_dim = config.widths[4];
    for s in &sessions {
        for p in &s.pairs {
            if p.x1.len() != in_dim || p.x2.len() != out_dim {
                return Err(Error::Dimension {
                    expected: in_dim,
                    got: p.x1.len().max(p.x2.len()),
                    context: format!("pair vectors in session {}", s.session_id),
                });
            }
        }
    }

    let fingerprint = corpus_fingerprint(&sessions);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    // Session-level split keeps all pairs of a conversation on one side.
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.shuffle(&mut rng);
    let n = sessions.len();
    let n_val = ((n as f64 * self_frac(config.val_frac)).floor() as usize).max(1);
    let n_test = ((n as f64 * self_frac(config.test_frac)).floor() as usize).max(1);
    if n_val + n_test >= n {
        return Err(Error::Config(format!(
            "empty training split: {n} sessions for {n_val} validation + {n_test} test"
        )));
    }
    let n_train = n - n_val - n_test;
    let split = SplitSummary {
        train: order[..n_train]
            .iter()
            .map(|&i| sessions[i].session_id.clone())
            .collect(),
        validation: order[n_train..n_train + n_val]
            .iter()
            .map(|&i| sessions[i].session_id.clone())
            .collect(),
        test: order[n_train + n_val..]
            .iter()
            .map(|&i| sessions[i].session_id.clone())
            .collect(),
    };

    let train_pairs: Vec<&PairSample> = order[..n_train]
        .iter()
        .flat_map(|&i| sessions[i].pairs.iter())
        .collect();
    let val_pairs: Vec<&PairSample> = order[n_train..n_train + n_val]
        .iter()
        .flat_map(|&i| sessions[i].pairs.iter())
        .collect();
    if train_pairs.is_empty() || val_pairs.is_empty() {
        return Err(Error::Config(
            "training or validation split has no pairs".to_string(),
        ));
    }

    let mut params = NetworkParams::init(&config.widths, &mut rng)?;
    let mut adam_state = AdamState::new(&params);
    let adam_config = config.adam();

    let (val_x, val_t) = batch_matrices(&val_pairs, &(0..val_pairs.len()).collect::<Vec<_>>());
    let initial_val_loss = infer_loss(&mut params, &val_x, &val_t)?;

    let mut best = params.clone();
    let mut best_val_loss = initial_val_loss;
    let mut best_epoch = 0usize;
    let mut epochs_without_improvement = 0usize;
    let mut step = 0usize;
    let mut train_loss_history = Vec::new();
    let mut val_loss_history = Vec::new();
    let mut first_epoch_batch_losses = Vec::new();

    let mut indices: Vec<usize> = (0..train_pairs.len()).collect();
    let mut epochs_run = 0usize;
    for epoch in 1..=config.max_epochs {
        epochs_run = epoch;
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(config.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let (x, t) = batch_matrices(&train_pairs, chunk);
            let pass = forward(&mut params, &x, Mode::Train)?;
            let (loss, grads) = backward(&params, &pass, &t)?;
            step += 1;
            adam_step(&mut params, &grads, &mut adam_state, step, &adam_config);
            epoch_loss += loss;
            batches += 1;
            if epoch == 1 {
                first_epoch_batch_losses.push(loss);
            }
        }
        if batches == 0 {
            return Err(Error::Config(
                "no trainable minibatch (need at least 2 pairs)".to_string(),
            ));
        }
        if !params.is_finite() {
            return Err(Error::Degenerate(format!(
                "non-finite parameters after epoch {epoch}"
            )));
        }
        train_loss_history.push(epoch_loss / batches as f64);

        let val_loss = infer_loss(&mut params, &val_x, &val_t)?;
        val_loss_history.push(val_loss);
        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_epoch = epoch;
            best = params.clone();
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= config.patience {
                break;
            }
        }
    }

    let checkpoint = ModelCheckpoint::from_params(
        &best,
        config.clone(),
        best_val_loss,
        best_epoch,
        fingerprint,
    );
    let report = TrainReport {
        epochs_run,
        best_epoch,
        best_val_loss,
        initial_val_loss,
        train_loss_history,
        val_loss_history,
        first_epoch_batch_losses,
        split,
    };
    Ok((checkpoint, report))
}

fn self_frac(f: f64) -> f64 {
    f.clamp(0.0, 1.0)
}

fn batch_matrices(pairs: &[&PairSample], idx: &[usize]) -> (Matrix, Matrix) {
    let in_dim = pairs[idx[0]].x1.len();
    let out_dim = pairs[idx[0]].x2.len();
    let mut x = Matrix::zeros(idx.len(), in_dim);
    let mut t = Matrix::zeros(idx.len(), out_dim);
    for (r, &i) in idx.iter().enumerate() {
        x.row_mut(r).copy_from_slice(&pairs[i].x1);
        t.row_mut(r).copy_from_slice(&pairs[i].x2);
    }
    (x, t)
}

/// Mean-per-pair smooth-L1 loss with inference-mode batch norm.
pub fn infer_loss(params: &mut NetworkParams, x: &Matrix, targets: &Matrix) -> Result<f64> {
    let pass = forward(params, x, Mode::Infer)?;
    Ok(super::batch_loss(&pass.x_hat, targets))
}

/// SHA-256 over session ids and pair payloads, hex-encoded. Ties a
/// checkpoint to the exact corpus bytes it was trained on.
pub fn corpus_fingerprint(sessions: &[&SessionPairs]) -> String {
    let mut hasher = Sha256::new();
    for s in sessions {
        hasher.update(s.session_id.as_bytes());
        hasher.update([0u8]);
        for p in &s.pairs {
            for v in p.x1.iter().chain(&p.x2) {
                hasher.update(v.to_le_bytes());
            }
        }
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_sessions(n_sessions: usize, pairs_per: usize, seed: u64) -> Vec<SessionPairs> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_sessions)
            .map(|s| SessionPairs {
                session_id: format!("s{s}"),
                pairs: (0..pairs_per)
                    .map(|_| {
                        let x1: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        // x2 linearly related to x1 so there is something to learn
                        let x2: Vec<f64> = x1.iter().map(|v| 0.5 * v + 0.1).collect();
                        PairSample { x1, x2 }
                    })
                    .collect(),
            })
            .collect()
    }

    fn toy_config(seed: u64) -> TrainConfig {
        TrainConfig {
            widths: vec![8, 6, 3, 6, 8],
            batch_size: 16,
            max_epochs: 5,
            patience: 3,
            rng_seed: seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_bit_reproducible() {
        let sessions = toy_sessions(6, 20, 7);
        let (c1, r1) = train(&sessions, &toy_config(42)).unwrap();
        let (c2, r2) = train(&sessions, &toy_config(42)).unwrap();
        assert_eq!(r1.first_epoch_batch_losses, r2.first_epoch_batch_losses);
        assert_eq!(r1.val_loss_history, r2.val_loss_history);
        assert_eq!(
            serde_json::to_string(&c1).unwrap(),
            serde_json::to_string(&c2).unwrap()
        );
    }

    #[test]
    fn split_covers_all_sessions_once() {
        let sessions = toy_sessions(10, 4, 1);
        let (_, report) = train(&sessions, &toy_config(5)).unwrap();
        let mut all: Vec<String> = report
            .split
            .train
            .iter()
            .chain(&report.split.validation)
            .chain(&report.split.test)
            .cloned()
            .collect();
        all.sort();
        let mut expected: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        expected.sort();
        assert_eq!(all, expected);
        assert!(!report.split.train.is_empty());
        assert!(!report.split.validation.is_empty());
        assert!(!report.split.test.is_empty());
    }

    #[test]
    fn too_few_sessions_is_config_error() {
        let sessions = toy_sessions(2, 4, 1);
        assert!(matches!(
            train(&sessions, &toy_config(5)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn learnable_relation_improves_over_init() {
        let sessions = toy_sessions(8, 40, 3);
        let mut config = toy_config(11);
        config.max_epochs = 30;
        config.patience = 30;
        let (checkpoint, report) = train(&sessions, &config).unwrap();
        assert!(
            report.best_val_loss < report.initial_val_loss,
            "best {} vs initial {}",
            report.best_val_loss,
            report.initial_val_loss
        );
        assert!(checkpoint.best_epoch >= 1);
    }
}
