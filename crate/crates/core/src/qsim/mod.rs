//! Dense pure-state and mixed-state simulation.
//!
//! Qubit 0 is the most significant bit of a basis-state index throughout the
//! crate, so `|q0 q1 ... q(n-1)⟩` has index `q0·2^(n-1) + ... + q(n-1)`.

mod density;
mod gate;
mod state;

pub use density::DensityMatrix;
pub use gate::{GateKind, GateOp, Mat2, Pauli};
pub use state::{qubits_for_dim, StateVector};

pub(crate) use gate::check_wire_list;
pub(crate) use state::l2_norm;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Operations shared by pure and mixed states.
pub trait QuantumState<T: Real> {
    fn n_qubits(&self) -> usize;

    fn apply_gate(&mut self, g: &GateOp<T>) -> Result<()>;

    /// Probabilities of all `2^n` computational basis outcomes.
    fn basis_probabilities(&self) -> Vec<T>;

    fn apply_circuit<'a, I>(&mut self, gates: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a GateOp<T>>,
        Self: Sized,
    {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// Marginal outcome distribution of the listed wires; `wires[0]` is the
    /// most significant bit of the returned index.
    fn measure_probs(&self, wires: &[usize]) -> Result<Vec<T>> {
        marginalize(&self.basis_probabilities(), self.n_qubits(), wires)
    }
}

/// Sums basis probabilities over all wires not listed.
pub fn marginalize<T: Real>(probs: &[T], n_qubits: usize, wires: &[usize]) -> Result<Vec<T>> {
    if wires.is_empty() {
        return Err(Error::InvalidConfig("at least one wire must be measured".into()));
    }
    check_wire_list(wires, n_qubits)?;
    let k = wires.len();
    let masks: Vec<usize> = wires.iter().map(|&w| 1 << (n_qubits - 1 - w)).collect();
    let mut out = vec![T::zero(); 1 << k];
    for (i, &p) in probs.iter().enumerate() {
        let mut idx = 0;
        for (j, m) in masks.iter().enumerate() {
            if i & m != 0 {
                idx |= 1 << (k - 1 - j);
            }
        }
        out[idx] += p;
    }
    Ok(out)
}

/// Amplitude-encodes `x` (normalized, zero-padded to the next power of two).
pub fn init_amplitude_state<T: Real>(x: &[T]) -> Result<StateVector<T>> {
    StateVector::amplitude_encode(x)
}

/// Value-style gate application on a pure state.
pub fn apply_gate<T: Real>(mut state: StateVector<T>, g: &GateOp<T>) -> Result<StateVector<T>> {
    state.apply_gate(g)?;
    Ok(state)
}

/// Value-style `ρ ↦ UρU†`.
pub fn apply_gate_dm<T: Real>(mut rho: DensityMatrix<T>, g: &GateOp<T>) -> Result<DensityMatrix<T>> {
    rho.apply_gate(g)?;
    Ok(rho)
}

pub fn measure_probs<T: Real, S: QuantumState<T>>(state: &S, wires: &[usize]) -> Result<Vec<T>> {
    state.measure_probs(wires)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn bell() -> StateVector<f64> {
        let z = c(0.0, 0.0);
        let h = c(FRAC_1_SQRT_2, 0.0);
        StateVector::from_amplitudes(vec![h, z, z, h]).unwrap()
    }

    #[test]
    fn marginal_of_zero_state() {
        let s = StateVector::<f64>::zero(2);
        assert_eq!(s.measure_probs(&[0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn bell_marginal_is_uniform() {
        let p = bell().measure_probs(&[0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pure_and_density_paths_agree() {
        let psi = bell();
        let rho = DensityMatrix::from_pure(&psi);
        for wires in [vec![0], vec![1], vec![1, 0], vec![0, 1]] {
            let a = psi.measure_probs(&wires).unwrap();
            let b = rho.measure_probs(&wires).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn marginal_wire_order() {
        // |01⟩: wires [1, 0] reads qubit 1 as the MSB -> outcome index 0b10
        let s = StateVector::<f64>::basis(2, 0b01);
        assert_eq!(s.measure_probs(&[1, 0]).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn measure_rejects_bad_wires() {
        let s = StateVector::<f64>::zero(2);
        assert!(s.measure_probs(&[2]).is_err());
        assert!(s.measure_probs(&[0, 0]).is_err());
        assert!(s.measure_probs(&[]).is_err());
    }

    #[test]
    fn value_style_wrappers() {
        let s = init_amplitude_state(&[1.0f64, 0.0]).unwrap();
        let s = apply_gate(s, &GateOp::rx(0, std::f64::consts::PI)).unwrap();
        assert!((s.measure_probs(&[0]).unwrap()[1] - 1.0).abs() < 1e-15);
        let rho = apply_gate_dm(DensityMatrix::from_pure(&s), &GateOp::rx(0, -std::f64::consts::PI)).unwrap();
        assert!((measure_probs(&rho, &[0]).unwrap()[0] - 1.0).abs() < 1e-15);
    }
}
