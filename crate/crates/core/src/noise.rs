//! Depolarizing noise: Kraus channels, the analytic global channel, and the
//! composition rule for several channel instances.

use crate::error::{Error, Result};
use crate::qsim::{check_wire_list, DensityMatrix, Pauli, QuantumState};
use crate::scalar::{c, Real, C};

/// Quantum channel `ρ ↦ Σ_i K_i ρ K_i†` on `arity` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel<T> {
    arity: usize,
    operators: Vec<Vec<C<T>>>,
}

impl<T: Real> KrausChannel<T> {
    /// Builds a channel and checks `Σ K†K = I`.
    pub fn new(arity: usize, operators: Vec<Vec<C<T>>>) -> Result<Self> {
        let ch = Self::new_unchecked(arity, operators)?;
        ch.check_completeness()?;
        Ok(ch)
    }

    /// Builds a channel checking only operator shapes.
    pub fn new_unchecked(arity: usize, operators: Vec<Vec<C<T>>>) -> Result<Self> {
        let d = 1usize << arity;
        if arity == 0 || operators.is_empty() {
            return Err(Error::InvalidConfig("channel needs arity >= 1 and operators".into()));
        }
        if let Some(bad) = operators.iter().find(|k| k.len() != d * d) {
            return Err(Error::ShapeMismatch(format!(
                "Kraus operator with {} entries, expected {}",
                bad.len(),
                d * d
            )));
        }
        Ok(Self { arity, operators })
    }

    /// Single-qubit depolarizing channel
    /// `{√(1−p) I, √(p/3) X, √(p/3) Y, √(p/3) Z}`.
    pub fn depolarizing(p: T) -> Result<Self> {
        check_probability(p)?;
        let k0 = (T::one() - p).sqrt();
        let kp = (p / T::lit(3.0)).sqrt();
        let id = [c(T::one(), T::zero()), c(T::zero(), T::zero()), c(T::zero(), T::zero()), c(T::one(), T::zero())];
        let mut ops = vec![id.iter().map(|z| z * k0).collect::<Vec<_>>()];
        for pauli in [Pauli::X, Pauli::Y, Pauli::Z] {
            let m = pauli.matrix::<T>();
            ops.push([m[0][0], m[0][1], m[1][0], m[1][1]].iter().map(|z| z * kp).collect());
        }
        Ok(Self {
            arity: 1,
            operators: ops,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn operators(&self) -> &[Vec<C<T>>] {
        &self.operators
    }

    /// Largest entry of `|Σ K_i†K_i − I|`.
    pub fn completeness_defect(&self) -> T {
        let d = 1usize << self.arity;
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..d {
                let mut s = c(T::zero(), T::zero());
                for k in &self.operators {
                    for r in 0..d {
                        s += k[r * d + i].conj() * k[r * d + j];
                    }
                }
                if i == j {
                    s.re -= T::one();
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    fn check_completeness(&self) -> Result<()> {
        let defect = self.completeness_defect();
        if defect > T::validation_tol() {
            return Err(Error::IncompleteChannel {
                defect: defect.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

pub fn depolarizing_kraus<T: Real>(p: T) -> Result<KrausChannel<T>> {
    KrausChannel::depolarizing(p)
}

/// `ρ ↦ Σ_i K_i ρ K_i†` with the channel embedded on `wires`.
pub fn apply_kraus<T: Real>(
    rho: &DensityMatrix<T>,
    ch: &KrausChannel<T>,
    wires: &[usize],
) -> Result<DensityMatrix<T>> {
    if wires.len() != ch.arity {
        return Err(Error::ArityMismatch {
            expected: ch.arity,
            got: wires.len(),
        });
    }
    check_wire_list(wires, rho.n_qubits())?;
    ch.check_completeness()?;
    let mut out = rho.zeros_like();
    for k in &ch.operators {
        if k.iter().all(|z| z.norm_sqr() == T::zero()) {
            continue;
        }
        let mut term = rho.clone();
        if ch.arity == 1 {
            let m = [[k[0], k[1]], [k[2], k[3]]];
            term.left_1q(wires[0], &m)?;
            term.right_adjoint_1q(wires[0], &m)?;
        } else {
            term.sandwich_local(wires, k)?;
        }
        out.add_assign(&term);
    }
    Ok(out)
}

/// Applies the single-qubit depolarizing channel to every wire in turn.
pub fn apply_depolarizing_all_wires<T: Real>(
    rho: &DensityMatrix<T>,
    p: T,
) -> Result<DensityMatrix<T>> {
    let ch = KrausChannel::depolarizing(p)?;
    let mut out = rho.clone();
    if p == T::zero() {
        return Ok(out);
    }
    for w in 0..rho.n_qubits() {
        out = apply_kraus(&out, &ch, &[w])?;
    }
    Ok(out)
}

/// Whole-register depolarizing channel `ρ ↦ (1−p) ρ + p I/2^n`.
pub fn apply_global_depolarizing<T: Real>(rho: &DensityMatrix<T>, p: T) -> Result<DensityMatrix<T>> {
    check_probability(p)?;
    let mut out = rho.clone();
    out.mix_identity(T::one() - p, p);
    Ok(out)
}

/// Total depolarization probability `1 − Π(1 − p_i)` of a channel sequence.
pub fn compose_noise_probability<T: Real>(ps: &[T]) -> Result<T> {
    let mut total = T::zero();
    for &p in ps {
        check_probability(p)?;
        // equals 1 − (1 − total)(1 − p); exact for a single channel
        total = total + p - total * p;
    }
    Ok(total)
}

pub(crate) fn check_probability<T: Real>(p: T) -> Result<()> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::InvalidProbability(p.to_f64_lossy()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// Single-qubit depolarizing Kraus channel on every wire.
    PerQubit,
    /// Analytic depolarizing channel on the whole register.
    Global,
}

/// Where a channel instance sits in the classifier circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NoisePosition {
    /// After the entangling block of layer `l` (0-based).
    AfterLayer(usize),
    BeforeMeasurement,
}

/// Noise model of a classifier evaluation.
///
/// `probabilities` holds either one value shared by every position or one
/// value per position.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec<T> {
    pub kind: NoiseKind,
    pub probabilities: Vec<T>,
    pub positions: Vec<NoisePosition>,
}

impl<T: Real> NoiseSpec<T> {
    pub fn per_qubit(p: T) -> Self {
        Self {
            kind: NoiseKind::PerQubit,
            probabilities: vec![p],
            positions: vec![NoisePosition::BeforeMeasurement],
        }
    }

    pub fn global(p: T) -> Self {
        Self {
            kind: NoiseKind::Global,
            probabilities: vec![p],
            positions: vec![NoisePosition::BeforeMeasurement],
        }
    }

    pub fn with_positions(mut self, positions: Vec<NoisePosition>) -> Self {
        self.positions = positions;
        self
    }

    /// Channel after every layer; the last coincides with the pre-measurement slot.
    pub fn after_every_layer(self, n_layers: usize) -> Self {
        self.with_positions((0..n_layers).map(NoisePosition::AfterLayer).collect())
    }

    /// Same kind and positions with every probability replaced by `p`.
    pub fn with_probability(&self, p: T) -> Self {
        Self {
            kind: self.kind,
            probabilities: vec![p],
            positions: self.positions.clone(),
        }
    }

    pub fn validate(&self, n_layers: usize) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidConfig("noise spec without positions".into()));
        }
        if self.probabilities.len() != 1 && self.probabilities.len() != self.positions.len() {
            return Err(Error::InvalidConfig(format!(
                "{} probabilities for {} noise positions",
                self.probabilities.len(),
                self.positions.len()
            )));
        }
        for &p in &self.probabilities {
            check_probability(p)?;
        }
        if self.positions.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("noise positions must be sorted".into()));
        }
        for pos in &self.positions {
            if let NoisePosition::AfterLayer(l) = *pos {
                if l >= n_layers {
                    return Err(Error::InvalidConfig(format!(
                        "noise after layer {l} but the circuit has {n_layers} layers"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(position, p)` for every channel instance.
    pub fn instances(&self) -> Vec<(NoisePosition, T)> {
        self.positions
            .iter()
            .enumerate()
            .map(|(i, &pos)| {
                let p = if self.probabilities.len() == 1 {
                    self.probabilities[0]
                } else {
                    self.probabilities[i]
                };
                (pos, p)
            })
            .collect()
    }

    /// `1 − Π(1 − p_i)` over all instances.
    pub fn composed_probability(&self) -> Result<T> {
        let ps: Vec<T> = self.instances().into_iter().map(|(_, p)| p).collect();
        compose_noise_probability(&ps)
    }

    pub fn is_noiseless(&self) -> bool {
        self.probabilities.iter().all(|&p| p == T::zero())
    }

    /// Applies the channel instance with probability `p` to `rho`.
    pub fn apply_instance(&self, rho: &DensityMatrix<T>, p: T) -> Result<DensityMatrix<T>> {
        match self.kind {
            NoiseKind::PerQubit => apply_depolarizing_all_wires(rho, p),
            NoiseKind::Global => apply_global_depolarizing(rho, p),
        }
    }
}
