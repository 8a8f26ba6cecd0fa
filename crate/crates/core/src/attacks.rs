//! White-box L∞ evasion attacks on the raw classical features.

use rayon::prelude::*;

use crate::ansatz::Classifier;
use crate::error::{Error, Result};
use crate::grad::{loss_grad_input, GradBackend, DEFAULT_FD_STEP};
use crate::loss::Loss;
use crate::noise::NoiseSpec;
use crate::scalar::{sign, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttackKind {
    Fgsm,
    Pgd,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackConfig<T> {
    pub kind: AttackKind,
    pub epsilon: T,
    pub steps: usize,
    pub clip_lo: T,
    pub clip_hi: T,
}

impl<T: Real> AttackConfig<T> {
    pub fn fgsm(epsilon: T) -> Self {
        Self {
            kind: AttackKind::Fgsm,
            epsilon,
            steps: 1,
            clip_lo: T::zero(),
            clip_hi: T::one(),
        }
    }

    pub fn pgd(epsilon: T, steps: usize) -> Self {
        Self {
            kind: AttackKind::Pgd,
            steps,
            ..Self::fgsm(epsilon)
        }
    }

    pub fn with_domain(mut self, lo: T, hi: T) -> Self {
        self.clip_lo = lo;
        self.clip_hi = hi;
        self
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!("epsilon = {} must be finite and ≥ 0", self.epsilon)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("attack steps must be ≥ 1".into()));
        }
        if self.kind == AttackKind::Fgsm && self.steps != 1 {
            return Err(Error::InvalidConfig(format!("FGSM takes exactly one step, got {}", self.steps)));
        }
        if !(self.clip_lo <= self.clip_hi) {
            return Err(Error::InvalidConfig(format!(
                "clip bounds [{}, {}] are empty",
                self.clip_lo, self.clip_hi
            )));
        }
        Ok(())
    }
}

/// What is being attacked: the model, the noise it is evaluated under, and
/// the loss whose gradient drives the perturbation.
#[derive(Clone, Copy, Debug)]
pub struct AttackTarget<'a, T> {
    pub model: &'a Classifier<T>,
    pub noise: Option<&'a NoiseSpec<T>>,
    pub loss: Loss,
    pub backend: GradBackend,
}

impl<'a, T: Real> AttackTarget<'a, T> {
    pub fn new(model: &'a Classifier<T>, noise: Option<&'a NoiseSpec<T>>, loss: Loss) -> Self {
        Self {
            model,
            noise,
            loss,
            backend: GradBackend::Auto,
        }
    }

    fn input_grad(&self, x: &[T], label: usize) -> Result<Vec<T>> {
        loss_grad_input(x, label, self.model, self.loss, self.noise, self.backend, DEFAULT_FD_STEP)
    }
}

/// Fast gradient sign method: one step of size ε.
pub fn fgsm<T: Real>(x: &[T], label: usize, target: &AttackTarget<'_, T>, cfg: &AttackConfig<T>) -> Result<Vec<T>> {
    if cfg.kind != AttackKind::Fgsm {
        return Err(Error::InvalidConfig("fgsm called with a non-FGSM config".into()));
    }
    run(x, label, target, cfg)
}

/// Projected gradient descent: `steps` signed steps of size ε/steps, each
/// followed by projection onto the ε-box around `x` intersected with the domain.
/// A step that would land on the all-zero vector is skipped.
pub fn pgd<T: Real>(x: &[T], label: usize, target: &AttackTarget<'_, T>, cfg: &AttackConfig<T>) -> Result<Vec<T>> {
    if cfg.kind != AttackKind::Pgd {
        return Err(Error::InvalidConfig("pgd called with a non-PGD config".into()));
    }
    run(x, label, target, cfg)
}

/// Dispatches on `cfg.kind`.
pub fn attack<T: Real>(x: &[T], label: usize, target: &AttackTarget<'_, T>, cfg: &AttackConfig<T>) -> Result<Vec<T>> {
    run(x, label, target, cfg)
}

fn run<T: Real>(x0: &[T], label: usize, target: &AttackTarget<'_, T>, cfg: &AttackConfig<T>) -> Result<Vec<T>> {
    cfg.validate()?;
    if x0.iter().any(|&v| !(v >= cfg.clip_lo && v <= cfg.clip_hi)) {
        return Err(Error::InputOutsideDomain {
            lo: cfg.clip_lo.to_f64_lossy(),
            hi: cfg.clip_hi.to_f64_lossy(),
        });
    }
    if cfg.epsilon == T::zero() {
        return Ok(x0.to_vec());
    }
    let step = cfg.epsilon / T::from_usize_lossy(cfg.steps);
    let lo: Vec<T> = x0.iter().map(|&v| (v - cfg.epsilon).max(cfg.clip_lo)).collect();
    let hi: Vec<T> = x0.iter().map(|&v| (v + cfg.epsilon).min(cfg.clip_hi)).collect();
    let mut x = x0.to_vec();
    let mut next = x.clone();
    for _ in 0..cfg.steps {
        let g = target.input_grad(&x, label)?;
        for i in 0..x.len() {
            next[i] = (x[i] + step * sign(g[i])).max(lo[i]).min(hi[i]);
        }
        // the all-zero vector cannot be encoded; stay put instead
        if next.iter().any(|v| *v != T::zero()) {
            std::mem::swap(&mut x, &mut next);
        }
    }
    Ok(x)
}

/// Attacks every sample in parallel; output order follows input order.
pub fn attack_batch<T: Real>(
    samples: &[(&[T], usize)],
    target: &AttackTarget<'_, T>,
    cfg: &AttackConfig<T>,
) -> Result<Vec<Vec<T>>> {
    samples
        .par_iter()
        .map(|(x, y)| run(x, *y, target, cfg))
        .collect()
}

/// Fraction of samples classified correctly under `target.noise`.
pub fn clean_accuracy<T: Real>(samples: &[(&[T], usize)], target: &AttackTarget<'_, T>) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySplit("evaluation set".into()));
    }
    let hits: Vec<bool> = samples
        .par_iter()
        .map(|(x, y)| Ok(target.model.predict(x, target.noise)? == *y))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / samples.len() as f64)
}

/// Fraction of samples still classified correctly after the attack.
pub fn adversarial_accuracy<T: Real>(
    samples: &[(&[T], usize)],
    target: &AttackTarget<'_, T>,
    cfg: &AttackConfig<T>,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySplit("evaluation set".into()));
    }
    let hits: Vec<bool> = samples
        .par_iter()
        .map(|(x, y)| {
            let adv = run(x, *y, target, cfg)?;
            Ok(target.model.predict(&adv, target.noise)? == *y)
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{ModelConfig, ModelParams};

    fn model(seed: u64) -> Classifier<f64> {
        Classifier::random(ModelConfig {
            n_qubits: 2,
            n_layers: 2,
            n_measured: 1,
            n_classes: 2,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::fgsm(0.1).validate().is_ok());
        assert!(AttackConfig { steps: 3, ..AttackConfig::fgsm(0.1) }.validate().is_err());
        assert!(AttackConfig::pgd(0.1, 0).validate().is_err());
        assert!(AttackConfig::pgd(-0.1, 3).validate().is_err());
        assert!(AttackConfig::pgd(0.1, 3).with_domain(1.0, 0.0).validate().is_err());
    }

    #[test]
    fn zero_budget_is_identity() {
        let m = model(1);
        let t = AttackTarget::new(&m, None, Loss::CrossEntropy);
        let x = [0.2, 0.4, 0.6, 0.1];
        assert_eq!(fgsm(&x, 0, &t, &AttackConfig::fgsm(0.0)).unwrap(), x);
        assert_eq!(pgd(&x, 1, &t, &AttackConfig::pgd(0.0, 7)).unwrap(), x);
    }

    #[test]
    fn pgd_single_step_equals_fgsm() {
        let m = model(2);
        let t = AttackTarget::new(&m, None, Loss::Nll);
        let x = [0.2, 0.4, 0.6, 0.1];
        let a = fgsm(&x, 1, &t, &AttackConfig::fgsm(0.05)).unwrap();
        let b = pgd(&x, 1, &t, &AttackConfig::pgd(0.05, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kind_mismatch_and_domain() {
        let m = model(3);
        let t = AttackTarget::new(&m, None, Loss::Nll);
        assert!(fgsm(&[0.5; 4], 0, &t, &AttackConfig::pgd(0.1, 2)).is_err());
        assert!(matches!(
            pgd(&[1.5, 0.1, 0.1, 0.1], 0, &t, &AttackConfig::pgd(0.1, 2)),
            Err(Error::InputOutsideDomain { .. })
        ));
    }

    #[test]
    fn single_qubit_toy_matches_corner_search() {
        // one qubit, RY(θ*) only, 2-dim input; the loss is linear-fractional in
        // the box so the FGSM point should be the best ε-box corner
        let cfg = ModelConfig { n_qubits: 1, n_layers: 1, n_measured: 1, n_classes: 2, seed: 0 };
        let mut p = ModelParams::zeros(&cfg);
        p.as_mut_slice()[1] = 0.7;
        let m = Classifier::new(cfg, p).unwrap();
        let t = AttackTarget::new(&m, None, Loss::Nll);
        let x = [0.6, 0.3];
        let eps = 0.01;
        let adv = fgsm(&x, 0, &t, &AttackConfig::fgsm(eps)).unwrap();
        let loss_at = |v: &[f64]| Loss::Nll.value(&[1.0, 0.0], &m.forward(v, None).unwrap());
        let mut best = (f64::NEG_INFINITY, vec![]);
        for sa in [-1.0, 1.0] {
            for sb in [-1.0, 1.0] {
                let c = vec![x[0] + sa * eps, x[1] + sb * eps];
                let l = loss_at(&c);
                if l > best.0 {
                    best = (l, c);
                }
            }
        }
        for (a, b) in adv.iter().zip(&best.1) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn never_steps_onto_the_zero_vector() {
        let m = model(5);
        let t = AttackTarget::new(&m, None, Loss::CrossEntropy);
        let x = [0.01, 0.0, 0.0, 0.0];
        for cfg in [AttackConfig::fgsm(0.5), AttackConfig::pgd(0.5, 4)] {
            let adv = attack(&x, 0, &t, &cfg).unwrap();
            assert!(adv.iter().any(|&v| v != 0.0));
            assert!(adv.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 0.5));
        }
    }

    #[test]
    fn accuracy_at_zero_budget_equals_clean() {
        let m = model(4);
        let t = AttackTarget::new(&m, None, Loss::CrossEntropy);
        let xs = [[0.2, 0.4, 0.6, 0.1], [0.9, 0.1, 0.0, 0.3], [0.1, 0.1, 0.8, 0.8]];
        let s: Vec<(&[f64], usize)> = xs.iter().enumerate().map(|(i, x)| (&x[..], i % 2)).collect();
        let clean = clean_accuracy(&s, &t).unwrap();
        assert_eq!(adversarial_accuracy(&s, &t, &AttackConfig::pgd(0.0, 5)).unwrap(), clean);
        assert_eq!(attack_batch(&s, &t, &AttackConfig::fgsm(0.0)).unwrap()[2], xs[2]);
    }
}
