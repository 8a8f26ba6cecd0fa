use crate::error::{Error, Result};
use crate::qsim::gate::{group_bases, local_offsets, wire_mask, GateOp, Mat2, Pauli};
use crate::qsim::QuantumState;
use crate::scalar::{c, cone, czero, Real, C};

/// Pure state of `n_qubits` qubits; amplitude `i` belongs to basis state `|i⟩`
/// with qubit 0 as the most significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    n_qubits: usize,
    amps: Vec<C<T>>,
}

/// Smallest register holding `dim` amplitudes (at least one qubit).
pub fn qubits_for_dim(dim: usize) -> usize {
    let mut n = 1;
    while (1usize << n) < dim {
        n += 1;
    }
    n
}

impl<T: Real> StateVector<T> {
    /// The computational basis state `|0...0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        assert!(n_qubits >= 1 && index < 1 << n_qubits);
        let mut amps = vec![czero(); 1 << n_qubits];
        amps[index] = cone();
        Self { n_qubits, amps }
    }

    /// Wraps explicit amplitudes; the length must be a power of two and the
    /// vector normalized.
    pub fn from_amplitudes(amps: Vec<C<T>>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "amplitude count {dim} is not a power of two >= 2"
            )));
        }
        let norm: T = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - T::one()).abs() > T::validation_tol() {
            return Err(Error::InvalidState(format!(
                "squared norm {norm} differs from 1"
            )));
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            amps,
        })
    }

    /// Amplitude encoding on the smallest register holding `x`.
    pub fn amplitude_encode(x: &[T]) -> Result<Self> {
        Self::amplitude_encode_padded(x, qubits_for_dim(x.len()))
    }

    /// Amplitude encoding of `x / ‖x‖₂`, zero-padded to `2^n_qubits`.
    pub fn amplitude_encode_padded(x: &[T], n_qubits: usize) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EncodingUndefined);
        }
        if x.len() > 1 << n_qubits {
            return Err(Error::InputTooLarge {
                dim: x.len(),
                n_qubits,
            });
        }
        let norm = l2_norm(x);
        if norm == T::zero() || !norm.is_finite() {
            return Err(Error::EncodingUndefined);
        }
        let mut amps = vec![czero(); 1 << n_qubits];
        for (a, &v) in amps.iter_mut().zip(x) {
            *a = c(v / norm, T::zero());
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C<T>] {
        &mut self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(czero(), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn apply_1q(&mut self, wire: usize, m: &Mat2<T>) -> Result<()> {
        if wire >= self.n_qubits {
            return Err(Error::WireOutOfRange {
                wire,
                n_qubits: self.n_qubits,
            });
        }
        apply_1q_slice(&mut self.amps, wire_mask(self.n_qubits, wire), m);
        Ok(())
    }

    pub fn apply_pauli(&mut self, wire: usize, p: Pauli) -> Result<()> {
        self.apply_1q(wire, &p.matrix())
    }

    /// Applies a dense `2^m x 2^m` operator (row-major) on `wires`. The
    /// operator need not be unitary.
    pub fn apply_local(&mut self, wires: &[usize], matrix: &[C<T>]) -> Result<()> {
        crate::qsim::gate::check_wire_list(wires, self.n_qubits)?;
        let local = 1usize << wires.len();
        if matrix.len() != local * local {
            return Err(Error::ArityMismatch {
                expected: (matrix.len() as f64).sqrt().log2().round() as usize,
                got: wires.len(),
            });
        }
        let offsets = local_offsets(self.n_qubits, wires);
        let mask = offsets[local - 1];
        let mut buf = vec![czero(); local];
        for base in group_bases(self.dim(), mask) {
            for (k, off) in offsets.iter().enumerate() {
                buf[k] = self.amps[base + off];
            }
            for (j, off) in offsets.iter().enumerate() {
                let row = &matrix[j * local..(j + 1) * local];
                self.amps[base + off] = row
                    .iter()
                    .zip(&buf)
                    .fold(czero(), |acc, (m, v)| acc + m * v);
            }
        }
        Ok(())
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let cm = wire_mask(self.n_qubits, control);
        let tm = wire_mask(self.n_qubits, target);
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }
}

impl<T: Real> QuantumState<T> for StateVector<T> {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn apply_gate(&mut self, g: &GateOp<T>) -> Result<()> {
        g.check_wires(self.n_qubits)?;
        match *g {
            GateOp::Cnot { control, target } => self.apply_cnot(control, target),
            GateOp::Rz { wire, theta } => {
                // diagonal fast path
                let (s, co) = (theta / T::lit(2.0)).sin_cos();
                let (lo, hi) = (c(co, -s), c(co, s));
                let m = wire_mask(self.n_qubits, wire);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    *a *= if i & m == 0 { lo } else { hi };
                }
            }
            _ => {
                let (w, _) = g.wires();
                let m = g.matrix().expect("rotation");
                apply_1q_slice(&mut self.amps, wire_mask(self.n_qubits, w[0]), &m);
            }
        }
        Ok(())
    }

    fn basis_probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub(crate) fn apply_1q_slice<T: Real>(amps: &mut [C<T>], stride: usize, m: &Mat2<T>) {
    let dim = amps.len();
    let mut block = 0;
    while block < dim {
        for i in block..block + stride {
            let (a, b) = (amps[i], amps[i + stride]);
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[i + stride] = m[1][0] * a + m[1][1] * b;
        }
        block += 2 * stride;
    }
}

pub(crate) fn l2_norm<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn real_amps(s: &StateVector<f64>) -> Vec<f64> {
        s.amplitudes().iter().map(|a| a.re).collect()
    }

    #[test]
    fn encode_basis_state() {
        let s = StateVector::amplitude_encode(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.n_qubits(), 2);
        assert_eq!(real_amps(&s), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn encode_uniform() {
        let s = StateVector::amplitude_encode(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        for a in real_amps(&s) {
            assert!((a - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn encode_three_four_five() {
        let s = StateVector::amplitude_encode(&[3.0, 4.0, 0.0, 0.0]).unwrap();
        let a = real_amps(&s);
        assert!((a[0] - 0.6).abs() < 1e-15 && (a[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn encode_pads_with_zeros() {
        let s = StateVector::amplitude_encode(&[1.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.dim(), 4);
        let a = real_amps(&s);
        assert!((a[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(a[3], 0.0);
        let s1 = StateVector::amplitude_encode(&[-2.0]).unwrap();
        assert_eq!((s1.n_qubits(), real_amps(&s1)), (1, vec![-1.0, 0.0]));
    }

    #[test]
    fn encode_rejects_zero_vector() {
        assert!(matches!(
            StateVector::<f64>::amplitude_encode(&[0.0, 0.0, 0.0]),
            Err(Error::EncodingUndefined)
        ));
        assert!(matches!(
            StateVector::<f64>::amplitude_encode(&[]),
            Err(Error::EncodingUndefined)
        ));
        assert!(matches!(
            StateVector::<f64>::amplitude_encode_padded(&[1.0; 5], 2),
            Err(Error::InputTooLarge { dim: 5, n_qubits: 2 })
        ));
    }

    #[test]
    fn rz_on_zero_is_phase() {
        let mut s = StateVector::<f64>::zero(1);
        s.apply_gate(&GateOp::rz(0, 1.3)).unwrap();
        assert!((s.amplitudes()[0] - C::from_polar(1.0, -0.65)).norm() < 1e-15);
        assert_eq!(s.amplitudes()[1], czero());
    }

    #[test]
    fn ry_half_pi_on_zero() {
        let mut s = StateVector::<f64>::zero(1);
        s.apply_gate(&GateOp::ry(0, FRAC_PI_2)).unwrap();
        let a = real_amps(&s);
        assert!((a[0] - FRAC_PI_4.cos()).abs() < 1e-15);
        assert!((a[1] - FRAC_PI_4.sin()).abs() < 1e-15);
    }

    #[test]
    fn cnot_truth_table() {
        // |10⟩ with qubit 0 as control -> |11⟩
        let mut s = StateVector::<f64>::basis(2, 0b10);
        s.apply_gate(&GateOp::cnot(0, 1)).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11));
        let mut s = StateVector::<f64>::basis(2, 0b01);
        s.apply_gate(&GateOp::cnot(0, 1)).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b01));
    }

    #[test]
    fn gate_wire_out_of_range() {
        let mut s = StateVector::<f64>::zero(2);
        assert!(matches!(
            s.apply_gate(&GateOp::rx(2, PI)),
            Err(Error::WireOutOfRange { wire: 2, .. })
        ));
    }

    #[test]
    fn local_operator_matches_gate_path() {
        let x = [0.3, -0.1, 0.7, 0.2, 0.5, 0.1, -0.4, 0.2];
        let mut a = StateVector::amplitude_encode(&x).unwrap();
        let mut b = a.clone();
        let g = GateOp::rx(1, 0.9);
        a.apply_gate(&g).unwrap();
        let m = g.matrix().unwrap();
        b.apply_local(&[1], &[m[0][0], m[0][1], m[1][0], m[1][1]]).unwrap();
        for (u, v) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((u - v).norm() < 1e-15);
        }
        // CNOT as a 4x4 permutation on (control=2, target=0)
        let (o, l) = (czero(), cone());
        let cnot = [l, o, o, o, o, l, o, o, o, o, o, l, o, o, l, o];
        a.apply_gate(&GateOp::cnot(2, 0)).unwrap();
        b.apply_local(&[2, 0], &cnot).unwrap();
        for (u, v) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((u - v).norm() < 1e-15);
        }
    }
}
