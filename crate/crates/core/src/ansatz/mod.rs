//! Strongly entangling layers classifier: circuit construction and the
//! encode → evolve → noise → measure → class-probability pipeline.

pub mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoisePosition, NoiseSpec};
use crate::qsim::{DensityMatrix, GateOp, QuantumState, StateVector};
use crate::scalar::Real;

/// Architecture of a classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_qubits: usize,
    pub n_layers: usize,
    /// Number of measured wires `k`; wires `0..k` are read out.
    pub n_measured: usize,
    pub n_classes: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > 16 {
            return Err(Error::InvalidConfig(format!(
                "n_qubits = {} outside 1..=16",
                self.n_qubits
            )));
        }
        if self.n_layers == 0 {
            return Err(Error::InvalidConfig("n_layers must be >= 1".into()));
        }
        if self.n_measured == 0 || self.n_measured > self.n_qubits {
            return Err(Error::InvalidConfig(format!(
                "n_measured = {} must lie in 1..={}",
                self.n_measured, self.n_qubits
            )));
        }
        if self.n_classes < 2 || self.n_classes > self.measurement_dim() {
            return Err(Error::InvalidConfig(format!(
                "n_classes = {} must lie in 2..={}",
                self.n_classes,
                self.measurement_dim()
            )));
        }
        Ok(())
    }

    /// `D_meas = 2^k`.
    pub fn measurement_dim(&self) -> usize {
        1 << self.n_measured
    }

    pub fn n_params(&self) -> usize {
        self.n_layers * self.n_qubits * 3
    }

    pub fn measured_wires(&self) -> Vec<usize> {
        (0..self.n_measured).collect()
    }

    /// CNOT range of layer `l`: `(l mod (n − 1)) + 1`.
    pub fn entangler_range(&self, layer: usize) -> usize {
        if self.n_qubits < 2 {
            0
        } else {
            layer % (self.n_qubits - 1) + 1
        }
    }
}

/// Rotation angles `θ[layer][qubit][k]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    n_layers: usize,
    n_qubits: usize,
    theta: Vec<T>,
}

impl<T: Real> ModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            n_layers: config.n_layers,
            n_qubits: config.n_qubits,
            theta: vec![T::zero(); config.n_params()],
        }
    }

    /// Angles drawn uniformly from `[0, 2π)` with a ChaCha8 stream seeded by `config.seed`.
    pub fn random(config: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let two_pi = 2.0 * std::f64::consts::PI;
        Self {
            n_layers: config.n_layers,
            n_qubits: config.n_qubits,
            theta: (0..config.n_params())
                .map(|_| T::lit(rng.gen::<f64>() * two_pi))
                .collect(),
        }
    }

    pub fn from_flat(n_layers: usize, n_qubits: usize, theta: Vec<T>) -> Result<Self> {
        if theta.len() != n_layers * n_qubits * 3 {
            return Err(Error::ShapeMismatch(format!(
                "{} angles for shape [{n_layers}][{n_qubits}][3]",
                theta.len()
            )));
        }
        Ok(Self {
            n_layers,
            n_qubits,
            theta,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.n_layers, self.n_qubits, 3]
    }

    pub fn flat_index(&self, layer: usize, qubit: usize, k: usize) -> usize {
        (layer * self.n_qubits + qubit) * 3 + k
    }

    pub fn get(&self, layer: usize, qubit: usize, k: usize) -> T {
        self.theta[self.flat_index(layer, qubit, k)]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn check_shape(&self, config: &ModelConfig) -> Result<()> {
        if self.n_layers != config.n_layers || self.n_qubits != config.n_qubits {
            return Err(Error::ShapeMismatch(format!(
                "params [{}][{}][3] vs config [{}][{}][3]",
                self.n_layers, self.n_qubits, config.n_layers, config.n_qubits
            )));
        }
        Ok(())
    }
}

/// Ordered gate list with parameter bindings and layer boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit<T> {
    pub n_qubits: usize,
    pub gates: Vec<GateOp<T>>,
    /// Flat index into [`ModelParams`] of each gate's angle (`None` for CNOT).
    pub param_index: Vec<Option<usize>>,
    /// `layer_ends[l]` is one past the last gate of layer `l`.
    pub layer_ends: Vec<usize>,
}

impl<T: Real> Circuit<T> {
    pub fn rotation_count(&self) -> usize {
        self.param_index.iter().filter(|p| p.is_some()).count()
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.len() - self.rotation_count()
    }

    /// Gate index at which a noise channel at `pos` is inserted.
    pub fn insertion_point(&self, pos: NoisePosition) -> usize {
        match pos {
            NoisePosition::AfterLayer(l) => self.layer_ends[l],
            NoisePosition::BeforeMeasurement => self.gates.len(),
        }
    }
}

/// Per layer: `RZ·RY·RZ` on each qubit, then a ring of CNOTs with control `q`
/// and target `(q + r_l) mod n`.
pub fn build_circuit<T: Real>(config: &ModelConfig, params: &ModelParams<T>) -> Result<Circuit<T>> {
    params.check_shape(config)?;
    let n = config.n_qubits;
    let mut gates = Vec::with_capacity(config.n_layers * n * 4);
    let mut param_index = Vec::with_capacity(gates.capacity());
    let mut layer_ends = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        for q in 0..n {
            let idx = params.flat_index(l, q, 0);
            gates.push(GateOp::rz(q, params.theta[idx]));
            gates.push(GateOp::ry(q, params.theta[idx + 1]));
            gates.push(GateOp::rz(q, params.theta[idx + 2]));
            param_index.extend([Some(idx), Some(idx + 1), Some(idx + 2)]);
        }
        if n > 1 {
            let r = config.entangler_range(l);
            for q in 0..n {
                gates.push(GateOp::cnot(q, (q + r) % n));
                param_index.push(None);
            }
        }
        layer_ends.push(gates.len());
    }
    Ok(Circuit {
        n_qubits: n,
        gates,
        param_index,
        layer_ends,
    })
}

/// First `n_classes` outcome probabilities, renormalized.
pub fn class_probs_from_measurement<T: Real>(outcome_probs: &[T], n_classes: usize) -> Result<Vec<T>> {
    if n_classes == 0 || n_classes > outcome_probs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{n_classes} classes from {} outcomes",
            outcome_probs.len()
        )));
    }
    let head = &outcome_probs[..n_classes];
    let mass: T = head.iter().copied().sum();
    if !(mass > T::zero()) {
        return Err(Error::DegenerateRenormalization);
    }
    Ok(head.iter().map(|&p| p / mass).collect())
}

/// A configured classifier with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier<T> {
    pub config: ModelConfig,
    pub params: ModelParams<T>,
}

impl<T: Real> Classifier<T> {
    pub fn new(config: ModelConfig, params: ModelParams<T>) -> Result<Self> {
        config.validate()?;
        params.check_shape(&config)?;
        Ok(Self { config, params })
    }

    /// Classifier with seeded uniform `[0, 2π)` initialization.
    pub fn random(config: ModelConfig) -> Result<Self> {
        Self::new(config, ModelParams::random(&config))
    }

    pub fn circuit(&self) -> Circuit<T> {
        build_circuit(&self.config, &self.params).expect("shape checked at construction")
    }

    pub fn encode(&self, x: &[T]) -> Result<StateVector<T>> {
        StateVector::amplitude_encode_padded(x, self.config.n_qubits)
    }

    /// Outcome distribution over the `2^k` measured basis states.
    pub fn outcome_probs(&self, x: &[T], noise: Option<&NoiseSpec<T>>) -> Result<Vec<T>> {
        let circuit = self.circuit();
        let wires = self.config.measured_wires();
        let mut psi = self.encode(x)?;
        let noise = match noise {
            Some(spec) if !spec.is_noiseless() => spec,
            _ => {
                psi.apply_circuit(&circuit.gates)?;
                return psi.measure_probs(&wires);
            }
        };
        noise.validate(self.config.n_layers)?;
        match noise.kind {
            NoiseKind::Global => {
                // global channels commute with unitaries onto I/2^n
                psi.apply_circuit(&circuit.gates)?;
                let p = noise.composed_probability()?;
                let uniform = p / T::from_usize_lossy(self.config.measurement_dim());
                Ok(psi
                    .measure_probs(&wires)?
                    .into_iter()
                    .map(|q| (T::one() - p) * q + uniform)
                    .collect())
            }
            NoiseKind::PerQubit => {
                let instances = noise.instances();
                let first = circuit.insertion_point(instances[0].0);
                psi.apply_circuit(&circuit.gates[..first])?;
                let rho = evolve_density(DensityMatrix::from_pure(&psi), &circuit, noise, first)?;
                rho.measure_probs(&wires)
            }
        }
    }

    /// Class probabilities.
    pub fn forward(&self, x: &[T], noise: Option<&NoiseSpec<T>>) -> Result<Vec<T>> {
        class_probs_from_measurement(&self.outcome_probs(x, noise)?, self.config.n_classes)
    }

    pub fn predict(&self, x: &[T], noise: Option<&NoiseSpec<T>>) -> Result<usize> {
        Ok(crate::scalar::argmax(&self.forward(x, noise)?))
    }

    /// Final density matrix from a gate-by-gate mixed-state simulation with
    /// every channel applied explicitly (no analytic shortcuts).
    pub fn forward_density(&self, x: &[T], noise: Option<&NoiseSpec<T>>) -> Result<DensityMatrix<T>> {
        let circuit = self.circuit();
        let rho = DensityMatrix::from_pure(&self.encode(x)?);
        match noise {
            Some(spec) => {
                spec.validate(self.config.n_layers)?;
                evolve_density(rho, &circuit, spec, 0)
            }
            None => {
                let mut rho = rho;
                rho.apply_circuit(&circuit.gates)?;
                Ok(rho)
            }
        }
    }
}

/// Runs `circuit.gates[start..]` on `rho`, inserting every channel instance of
/// `noise` at its position.
fn evolve_density<T: Real>(
    mut rho: DensityMatrix<T>,
    circuit: &Circuit<T>,
    noise: &NoiseSpec<T>,
    start: usize,
) -> Result<DensityMatrix<T>> {
    let mut cursor = start;
    for (pos, p) in noise.instances() {
        let at = circuit.insertion_point(pos);
        if at < cursor {
            continue;
        }
        rho.apply_circuit(&circuit.gates[cursor..at])?;
        rho = noise.apply_instance(&rho, p)?;
        cursor = at;
    }
    rho.apply_circuit(&circuit.gates[cursor..])?;
    Ok(rho)
}

pub fn forward<T: Real>(
    x: &[T],
    model: &Classifier<T>,
    noise: Option<&NoiseSpec<T>>,
) -> Result<Vec<T>> {
    model.forward(x, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::GateKind;

    fn cfg(n_qubits: usize, n_layers: usize, n_measured: usize, n_classes: usize) -> ModelConfig {
        ModelConfig {
            n_qubits,
            n_layers,
            n_measured,
            n_classes,
            seed: 11,
        }
    }

    #[test]
    fn three_qubit_single_layer_layout() {
        let c = cfg(3, 1, 1, 2);
        let circ = build_circuit(&c, &ModelParams::<f64>::random(&c)).unwrap();
        assert_eq!((circ.rotation_count(), circ.cnot_count()), (9, 3));
        let kinds: Vec<_> = circ.gates[..3].iter().map(|g| g.kind()).collect();
        assert_eq!(kinds, vec![GateKind::Rz, GateKind::Ry, GateKind::Rz]);
        let cnots: Vec<_> = circ.gates[9..].to_vec();
        assert_eq!(
            cnots,
            vec![GateOp::cnot(0, 1), GateOp::cnot(1, 2), GateOp::cnot(2, 0)]
        );
    }

    #[test]
    fn single_qubit_has_no_entangler() {
        let c = cfg(1, 2, 1, 2);
        let circ = build_circuit(&c, &ModelParams::<f64>::zeros(&c)).unwrap();
        assert_eq!((circ.rotation_count(), circ.cnot_count()), (6, 0));
    }

    #[test]
    fn iris_shape_gate_counts() {
        let c = cfg(2, 2, 1, 2);
        let circ = build_circuit(&c, &ModelParams::<f64>::zeros(&c)).unwrap();
        assert_eq!(circ.rotation_count(), 12);
        assert_eq!(circ.cnot_count(), 4);
        assert_eq!(c.n_params(), 12);
        assert_eq!(cfg(8, 40, 1, 2).n_params(), 960);
    }

    #[test]
    fn entangler_range_cycles() {
        let c = cfg(4, 5, 1, 2);
        let ranges: Vec<_> = (0..5).map(|l| c.entangler_range(l)).collect();
        assert_eq!(ranges, vec![1, 2, 3, 1, 2]);
        let circ = build_circuit(&c, &ModelParams::<f64>::zeros(&c)).unwrap();
        let layer1_cnots = &circ.gates[circ.layer_ends[0] + 12..circ.layer_ends[1]];
        assert_eq!(layer1_cnots[3], GateOp::cnot(3, 1));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let c = cfg(2, 2, 1, 2);
        let other = ModelParams::<f64>::zeros(&cfg(3, 2, 1, 2));
        assert!(matches!(build_circuit(&c, &other), Err(Error::ShapeMismatch(_))));
        assert!(ModelParams::from_flat(2, 2, vec![0.0f64; 11]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(cfg(2, 2, 1, 3).validate().is_err());
        assert!(cfg(2, 2, 3, 2).validate().is_err());
        assert!(cfg(8, 1, 4, 10).validate().is_ok());
    }

    #[test]
    fn class_prob_mapping() {
        assert_eq!(class_probs_from_measurement(&[0.5, 0.5], 2).unwrap(), vec![0.5, 0.5]);
        let p = class_probs_from_measurement(&[1.0 / 16.0; 16], 10).unwrap();
        assert!(p.iter().all(|v| (v - 0.1f64).abs() < 1e-15));
        let p = class_probs_from_measurement(&[0.7, 0.1, 0.1, 0.1], 2).unwrap();
        assert!((p[0] - 0.875f64).abs() < 1e-15 && (p[1] - 0.125).abs() < 1e-15);
        assert!(matches!(
            class_probs_from_measurement(&[0.0, 0.0, 0.5, 0.5], 2),
            Err(Error::DegenerateRenormalization)
        ));
    }

    #[test]
    fn random_init_is_seeded_and_in_range() {
        let c = cfg(3, 4, 1, 2);
        let a = ModelParams::<f64>::random(&c);
        assert_eq!(a, ModelParams::random(&c));
        let two_pi = 2.0 * std::f64::consts::PI;
        assert!(a.as_slice().iter().all(|&t| (0.0..two_pi).contains(&t)));
        let b = ModelParams::<f64>::random(&ModelConfig { seed: 12, ..c });
        assert_ne!(a, b);
    }

    #[test]
    fn full_global_noise_gives_uniform_classes() {
        let model = Classifier::<f64>::random(cfg(3, 2, 2, 3)).unwrap();
        let probs = model
            .forward(&[0.2, 0.4, 0.1, 0.9, 0.3], Some(&NoiseSpec::global(1.0)))
            .unwrap();
        for p in probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_equals_noiseless() {
        let model = Classifier::<f64>::random(cfg(3, 2, 1, 2)).unwrap();
        let x = [0.2, 0.4, 0.1, 0.9, 0.3, 0.0, 0.5, 0.7];
        let clean = model.forward(&x, None).unwrap();
        let spec = NoiseSpec::per_qubit(0.0).after_every_layer(2);
        // bypasses the noiseless shortcut by routing through the density path
        let rho = model.forward_density(&x, Some(&spec)).unwrap();
        let dm = class_probs_from_measurement(&rho.measure_probs(&[0]).unwrap(), 2).unwrap();
        for (a, b) in clean.iter().zip(&dm) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(model.forward(&x, Some(&spec)).unwrap(), clean);
    }

    #[test]
    fn per_qubit_fast_path_matches_density_path() {
        let model = Classifier::<f64>::random(cfg(3, 3, 2, 4)).unwrap();
        let x = [0.2, 0.4, 0.1, 0.9, 0.3, 0.0, 0.5, 0.7];
        let spec = NoiseSpec::per_qubit(0.2).with_positions(vec![
            NoisePosition::AfterLayer(1),
            NoisePosition::BeforeMeasurement,
        ]);
        let fast = model.outcome_probs(&x, Some(&spec)).unwrap();
        let slow = model
            .forward_density(&x, Some(&spec))
            .unwrap()
            .measure_probs(&[0, 1])
            .unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let model = Classifier::<f64>::random(cfg(2, 2, 1, 2)).unwrap();
        let x = [0.3, 0.1, 0.8, 0.0];
        let a = model.forward(&x, Some(&NoiseSpec::per_qubit(0.3))).unwrap();
        let b = model.forward(&x, Some(&NoiseSpec::per_qubit(0.3))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn f32_forward_is_a_distribution() {
        let model = Classifier::<f32>::random(cfg(2, 2, 1, 2)).unwrap();
        let p = model.forward(&[0.3, 0.1, 0.8, 0.2], None).unwrap();
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    }
}
