//! Certified trace-distance radii implied by depolarizing noise.
//!
//! With class probabilities `y`, true class `C` and runner-up `y_k`, the
//! prediction is stable for every state within trace distance
//! `τ_D = (e^{ε_min} − 1) / D_meas · p / (1 − p)`, where
//! `ε_min = ½ ln(y_C / y_k)`. Negative values flag samples that cannot be
//! certified (the true class is not the most likely one).

use rayon::prelude::*;

use crate::ansatz::Classifier;
use crate::error::{Error, Result};
use crate::loss::PROB_FLOOR;
use crate::noise::{compose_noise_probability, NoiseSpec};
use crate::scalar::{argmax, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate<T> {
    pub sample_id: usize,
    pub true_class: usize,
    /// Noiseless prediction.
    pub predicted_class: usize,
    /// Noiseless probability of the true class.
    pub y_c: T,
    /// Noiseless probability of the strongest other class.
    pub y_k: T,
    pub eps_min: T,
    /// Measurement dimension `2^n_measured`.
    pub d_meas: usize,
    /// One entry per requested noise level, in request order.
    pub levels: Vec<LevelCertificate<T>>,
}

impl<T: Real> Certificate<T> {
    pub fn tau_d(&self) -> Vec<T> {
        self.levels.iter().map(|l| l.tau_d).collect()
    }
}

/// Certificate at one noise level. Under [`ProbabilitySource::Noiseless`] the
/// probabilities repeat the noiseless ones.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelCertificate<T> {
    /// Probability entering the τ_D formula.
    pub p: T,
    pub predicted_class: usize,
    pub y_c: T,
    pub y_k: T,
    pub eps_min: T,
    pub tau_d: T,
}

/// Which class probabilities a certificate is computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ProbabilitySource {
    #[default]
    Noiseless,
    /// The model evaluated under the noise template at each requested level.
    UnderNoise,
}

/// Which probability enters the τ_D formula for a requested level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PConvention {
    /// The level composed over every channel instance of the template.
    #[default]
    Composed,
    /// The level itself, whatever the number of channel instances.
    PerChannel,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CertifyOptions<'a, T> {
    /// Channel layout the requested levels are applied to.
    pub template: Option<&'a NoiseSpec<T>>,
    pub source: ProbabilitySource,
    pub convention: PConvention,
}

/// `½ ln(y_C / max(y_k, floor))` with `y_k` the largest probability of any other class.
pub fn epsilon_min<T: Real>(probs: &[T], class_c: usize) -> Result<T> {
    if class_c >= probs.len() {
        return Err(Error::ShapeMismatch(format!(
            "class {class_c} out of range for {} classes",
            probs.len()
        )));
    }
    let (y_c, y_k) = top_two(probs, class_c);
    Ok(half_log_ratio(y_c, y_k))
}

fn top_two<T: Real>(probs: &[T], class_c: usize) -> (T, T) {
    let y_k = probs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != class_c)
        .map(|(_, &v)| v)
        .fold(T::zero(), T::max);
    (probs[class_c], y_k)
}

fn half_log_ratio<T: Real>(y_c: T, y_k: T) -> T {
    let floor = T::lit(PROB_FLOOR);
    (y_c.max(floor) / y_k.max(floor)).ln() / T::lit(2.0)
}

/// `(e^{ε_min} − 1) / D_meas · p / (1 − p)`.
pub fn certified_distance<T: Real>(eps_min: T, d_meas: usize, p: T) -> Result<T> {
    if d_meas == 0 {
        return Err(Error::InvalidConfig("measurement dimension must be ≥ 1".into()));
    }
    crate::noise::check_probability(p)?;
    if p == T::zero() {
        return Err(Error::ZeroNoise);
    }
    if p == T::one() {
        return Err(Error::FullNoise);
    }
    Ok(eps_min.exp_m1() / T::from_usize_lossy(d_meas) * p / (T::one() - p))
}

/// Per-sample certificates plus dataset-level aggregates.
#[derive(Clone, Debug, PartialEq)]
pub struct CertificationReport<T> {
    pub certificates: Vec<Certificate<T>>,
    /// Effective (composed) noise probability per requested level.
    pub p: Vec<T>,
    /// Arithmetic mean of τ_D over all samples, misclassified ones included.
    pub mean_tau_d: Vec<T>,
    /// Noiseless accuracy.
    pub accuracy: f64,
    /// Accuracy of the predictions each level was certified from.
    pub level_accuracy: Vec<f64>,
}

/// Effective probability of one requested noise level: the level is applied
/// at every channel instance of `template` and the instances are composed.
/// Without a template the level is used directly.
pub fn effective_probability<T: Real>(level: T, template: Option<&NoiseSpec<T>>) -> Result<T> {
    match template {
        None => {
            crate::noise::check_probability(level)?;
            Ok(level)
        }
        Some(spec) => {
            let ps: Vec<T> = spec
                .with_probability(level)
                .instances()
                .into_iter()
                .map(|(_, p)| p)
                .collect();
            compose_noise_probability(&ps)
        }
    }
}

/// Certifies each `(sample_id, x, label)` against its true class using the
/// noiseless class probabilities and the composed noise probability.
pub fn certify_dataset<T: Real>(
    samples: &[(usize, &[T], usize)],
    model: &Classifier<T>,
    p_levels: &[T],
    template: Option<&NoiseSpec<T>>,
) -> Result<CertificationReport<T>> {
    let opts = CertifyOptions {
        template,
        ..CertifyOptions::default()
    };
    certify_dataset_with(samples, model, p_levels, &opts)
}

fn level_certificate<T: Real>(probs: &[T], label: usize, p: T, d_meas: usize) -> Result<LevelCertificate<T>> {
    if label >= probs.len() {
        return Err(Error::ShapeMismatch(format!("label {label} out of range")));
    }
    let (y_c, y_k) = top_two(probs, label);
    let eps_min = half_log_ratio(y_c, y_k);
    Ok(LevelCertificate {
        p,
        predicted_class: argmax(probs),
        y_c,
        y_k,
        eps_min,
        tau_d: certified_distance(eps_min, d_meas, p)?,
    })
}

pub fn certify_dataset_with<T: Real>(
    samples: &[(usize, &[T], usize)],
    model: &Classifier<T>,
    p_levels: &[T],
    opts: &CertifyOptions<'_, T>,
) -> Result<CertificationReport<T>> {
    if samples.is_empty() {
        return Err(Error::EmptySplit("certification set".into()));
    }
    if p_levels.is_empty() {
        return Err(Error::InvalidConfig("at least one noise level is required".into()));
    }
    let noisy_specs: Vec<Option<NoiseSpec<T>>> = match opts.source {
        ProbabilitySource::Noiseless => vec![None; p_levels.len()],
        ProbabilitySource::UnderNoise => {
            let t = opts.template.ok_or_else(|| {
                Error::InvalidConfig("certifying under noise needs a noise template".into())
            })?;
            p_levels.iter().map(|&l| Some(t.with_probability(l))).collect()
        }
    };
    let p: Vec<T> = p_levels
        .iter()
        .map(|&l| match opts.convention {
            PConvention::Composed => effective_probability(l, opts.template),
            PConvention::PerChannel => crate::noise::check_probability(l).map(|_| l),
        })
        .collect::<Result<_>>()?;
    let d_meas = model.config.measurement_dim();
    let certificates: Vec<Certificate<T>> = samples
        .par_iter()
        .map(|&(sample_id, x, label)| {
            let clean = model.forward(x, None)?;
            if label >= clean.len() {
                return Err(Error::ShapeMismatch(format!("label {label} out of range")));
            }
            let (y_c, y_k) = top_two(&clean, label);
            let levels = p
                .iter()
                .zip(&noisy_specs)
                .map(|(&pi, spec)| match spec {
                    None => level_certificate(&clean, label, pi, d_meas),
                    Some(s) => level_certificate(&model.forward(x, Some(s))?, label, pi, d_meas),
                })
                .collect::<Result<_>>()?;
            Ok(Certificate {
                sample_id,
                true_class: label,
                predicted_class: argmax(&clean),
                y_c,
                y_k,
                eps_min: half_log_ratio(y_c, y_k),
                d_meas,
                levels,
            })
        })
        .collect::<Result<_>>()?;
    let n = T::from_usize_lossy(certificates.len());
    let mean_tau_d = (0..p.len())
        .map(|j| certificates.iter().map(|c| c.levels[j].tau_d).sum::<T>() / n)
        .collect();
    let level_accuracy = (0..p.len())
        .map(|j| {
            let hits = certificates
                .iter()
                .filter(|c| c.levels[j].predicted_class == c.true_class)
                .count();
            hits as f64 / certificates.len() as f64
        })
        .collect();
    let correct = certificates
        .iter()
        .filter(|c| c.predicted_class == c.true_class)
        .count();
    Ok(CertificationReport {
        accuracy: correct as f64 / certificates.len() as f64,
        level_accuracy,
        certificates,
        p,
        mean_tau_d,
    })
}
