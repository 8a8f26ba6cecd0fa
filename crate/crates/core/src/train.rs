//! Mini-batch training with Adam in vanilla, adversarial and smoothing regimes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::Classifier;
use crate::attacks::{attack_batch, AttackConfig, AttackKind, AttackTarget};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grad::{batch_loss_and_param_grad, GradBackend, DEFAULT_FD_STEP};
use crate::loss::Loss;
use crate::scalar::{argmax, Real};

/// Adam state for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    /// One bias-corrected update of `params` against `grads`.
    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: T) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "Adam state has {} entries, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Functional form of [`Adam::step`].
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut Adam<T>, lr: T) -> Result<()> {
    state.step(params, grads, lr)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrainMode {
    Vanilla,
    /// Batches are replaced by their PGD adversarial counterparts.
    Adversarial,
    /// Batches are perturbed by fresh uniform noise in `[−σ, σ]`.
    Smoothing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig<T> {
    pub learning_rate: T,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: Loss,
    pub mode: TrainMode,
    pub attack: Option<AttackConfig<T>>,
    pub sigma: T,
    /// Stop once an epoch's mean training loss falls to or below this value.
    pub early_stop_loss: Option<T>,
    pub seed: u64,
    pub backend: GradBackend,
}

impl<T: Real> TrainConfig<T> {
    pub fn vanilla(learning_rate: T, batch_size: usize, epochs: usize, loss: Loss, seed: u64) -> Self {
        Self {
            learning_rate,
            batch_size,
            epochs,
            loss,
            mode: TrainMode::Vanilla,
            attack: None,
            sigma: T::zero(),
            early_stop_loss: None,
            seed,
            backend: GradBackend::Adjoint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > T::zero()) {
            return Err(Error::InvalidConfig("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be ≥ 1".into()));
        }
        match self.mode {
            TrainMode::Vanilla => {}
            TrainMode::Adversarial => {
                let attack = self
                    .attack
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("adversarial training needs an attack".into()))?;
                attack.validate()?;
                if attack.kind != AttackKind::Pgd {
                    return Err(Error::InvalidConfig("adversarial training uses PGD".into()));
                }
            }
            TrainMode::Smoothing => {
                if !(self.sigma > T::zero()) {
                    return Err(Error::InvalidConfig("smoothing needs sigma > 0".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_acc: Vec<f64>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }
}

/// Metrics of one finished epoch (0-based `epoch`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Mean loss and accuracy of the noiseless model on `samples`.
pub fn evaluate<T: Real>(model: &Classifier<T>, samples: &[(&[T], usize)], loss: Loss) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySplit("evaluation set".into()));
    }
    let mut total = 0.0;
    let mut hits = 0usize;
    for (x, y) in samples {
        let probs = model.forward(x, None)?;
        total += loss.value_and_grad(*y, &probs).0.to_f64_lossy();
        hits += usize::from(argmax(&probs) == *y);
    }
    let n = samples.len() as f64;
    Ok((total / n, hits as f64 / n))
}

pub fn train<T: Real>(model: Classifier<T>, dataset: &Dataset<T>, cfg: &TrainConfig<T>) -> Result<(Classifier<T>, TrainHistory)> {
    train_with_observer(model, dataset, cfg, |_, _| Ok(()))
}

/// Trains on the train split, validating on the validation split (or the test
/// split when there is none). `observer` runs after every epoch.
pub fn train_with_observer<T: Real>(
    mut model: Classifier<T>,
    dataset: &Dataset<T>,
    cfg: &TrainConfig<T>,
    mut observer: impl FnMut(&EpochReport, &Classifier<T>) -> Result<()>,
) -> Result<(Classifier<T>, TrainHistory)> {
    cfg.validate()?;
    let train_set = dataset.train();
    if train_set.is_empty() {
        return Err(Error::EmptySplit("train".into()));
    }
    let val_set = dataset.validation();
    let (lo, hi) = dataset.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.params.len());
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let originals: Vec<(&[T], usize)> = chunk.iter().map(|&i| train_set[i]).collect();
            let fed: Vec<Vec<T>> = match cfg.mode {
                TrainMode::Vanilla => originals.iter().map(|(x, _)| x.to_vec()).collect(),
                TrainMode::Adversarial => {
                    let attack = cfg.attack.as_ref().expect("validated");
                    let target = AttackTarget::new(&model, None, cfg.loss);
                    attack_batch(&originals, &target, attack)?
                }
                TrainMode::Smoothing => originals
                    .iter()
                    .map(|(x, _)| {
                        x.iter()
                            .map(|&v| {
                                let u: f64 = rng.gen_range(-1.0..=1.0);
                                (v + cfg.sigma * T::lit(u)).max(lo).min(hi)
                            })
                            .collect()
                    })
                    .collect(),
            };
            let batch: Vec<(&[T], usize)> = fed.iter().zip(&originals).map(|(x, (_, y))| (x.as_slice(), *y)).collect();
            let (loss, grad) = batch_loss_and_param_grad(&batch, &model, cfg.loss, None, cfg.backend, DEFAULT_FD_STEP)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            loss_sum += loss.to_f64_lossy() * chunk.len() as f64;
            adam.step(model.params.as_mut_slice(), &grad, cfg.learning_rate)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (val_loss, val_acc) = if val_set.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            evaluate(&model, &val_set, cfg.loss)?
        };
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.val_acc.push(val_acc);
        observer(&EpochReport { epoch, train_loss, val_loss, val_acc }, &model)?;
        if cfg.early_stop_loss.is_some_and(|t| train_loss <= t.to_f64_lossy()) {
            break;
        }
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::ModelConfig;
    use crate::data::load_iris;

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut p = vec![0.3, -1.2];
        let mut adam = Adam::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut adam, 0.1).unwrap();
        assert_eq!(p, vec![0.3, -1.2]);
    }

    #[test]
    fn adam_first_step_has_lr_magnitude() {
        let mut p: Vec<f64> = vec![1.0, 1.0, 1.0];
        let g: [f64; 3] = [0.5, -3.0, 1e-3];
        let mut adam = Adam::new(3);
        adam.step(&mut p, &g, 0.01).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            let expected = 0.01 * gi.abs() / (gi.abs() + 1e-8);
            assert!(((1.0 - pi).abs() - expected).abs() < 1e-15);
            assert_eq!((1.0 - pi).signum(), gi.signum());
        }
        assert!(adam.step(&mut p, &[1.0], 0.01).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::<f64>::vanilla(0.05, 30, 1, Loss::CrossEntropy, 0);
        assert!(c.validate().is_ok());
        c.mode = TrainMode::Adversarial;
        assert!(c.validate().is_err());
        c.attack = Some(AttackConfig::fgsm(0.1));
        assert!(c.validate().is_err());
        c.attack = Some(AttackConfig::pgd(0.1, 3));
        assert!(c.validate().is_ok());
        c.mode = TrainMode::Smoothing;
        assert!(c.validate().is_err());
        c.sigma = 0.1;
        assert!(c.validate().is_ok());
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }

    fn iris_model() -> Classifier<f64> {
        Classifier::random(ModelConfig { n_qubits: 2, n_layers: 2, n_measured: 1, n_classes: 2, seed: 1 }).unwrap()
    }

    #[test]
    fn runs_all_epochs_without_early_stop_and_is_reproducible() {
        let data = load_iris::<f64>().unwrap();
        let mut cfg = TrainConfig::vanilla(0.05, 30, 3, Loss::CrossEntropy, 9);
        cfg.early_stop_loss = Some(f64::NEG_INFINITY);
        let (m1, h1) = train(iris_model(), &data, &cfg).unwrap();
        let (m2, h2) = train(iris_model(), &data, &cfg).unwrap();
        assert_eq!(h1.epochs(), 3);
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
        cfg.early_stop_loss = Some(f64::INFINITY);
        assert_eq!(train(iris_model(), &data, &cfg).unwrap().1.epochs(), 1);
    }

    #[test]
    fn regimes_run() {
        let data = load_iris::<f64>().unwrap();
        let mut cfg = TrainConfig::vanilla(0.05, 30, 1, Loss::Nll, 2);
        cfg.mode = TrainMode::Smoothing;
        cfg.sigma = 0.1;
        assert_eq!(train(iris_model(), &data, &cfg).unwrap().1.epochs(), 1);
        cfg.mode = TrainMode::Adversarial;
        cfg.attack = Some(AttackConfig::pgd(0.05, 2));
        let mut seen = Vec::new();
        train_with_observer(iris_model(), &data, &cfg, |r, _| {
            seen.push(r.epoch);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![0]);
    }

    #[test]
    fn empty_train_split_is_rejected() {
        let mut data = load_iris::<f64>().unwrap();
        data.splits.train.clear();
        let cfg = TrainConfig::vanilla(0.05, 30, 1, Loss::Nll, 2);
        assert!(matches!(train(iris_model(), &data, &cfg), Err(Error::EmptySplit(_))));
    }
}
