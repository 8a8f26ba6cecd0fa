use crate::error::{Error, Result};
use crate::scalar::{c, cone, czero, Real, C};

/// Dense 2x2 complex matrix, row-major.
pub type Mat2<T> = [[C<T>; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    Rz,
    Ry,
    Rx,
    Cnot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix<T: Real>(self) -> Mat2<T> {
        let (o, l) = (czero::<T>(), cone::<T>());
        let i = c(T::zero(), T::one());
        match self {
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }
}

/// A gate of the classifier's gate set. Rotations are `exp(-i theta P / 2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateOp<T> {
    Rz { wire: usize, theta: T },
    Ry { wire: usize, theta: T },
    Rx { wire: usize, theta: T },
    Cnot { control: usize, target: usize },
}

impl<T: Real> GateOp<T> {
    pub fn rz(wire: usize, theta: T) -> Self {
        GateOp::Rz { wire, theta }
    }

    pub fn ry(wire: usize, theta: T) -> Self {
        GateOp::Ry { wire, theta }
    }

    pub fn rx(wire: usize, theta: T) -> Self {
        GateOp::Rx { wire, theta }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        GateOp::Cnot { control, target }
    }

    pub fn kind(&self) -> GateKind {
        match self {
            GateOp::Rz { .. } => GateKind::Rz,
            GateOp::Ry { .. } => GateKind::Ry,
            GateOp::Rx { .. } => GateKind::Rx,
            GateOp::Cnot { .. } => GateKind::Cnot,
        }
    }

    /// Wires touched by the gate; for CNOT the order is (control, target).
    pub fn wires(&self) -> ([usize; 2], usize) {
        match *self {
            GateOp::Rz { wire, .. } | GateOp::Ry { wire, .. } | GateOp::Rx { wire, .. } => {
                ([wire, wire], 1)
            }
            GateOp::Cnot { control, target } => ([control, target], 2),
        }
    }

    pub fn theta(&self) -> Option<T> {
        match *self {
            GateOp::Rz { theta, .. } | GateOp::Ry { theta, .. } | GateOp::Rx { theta, .. } => {
                Some(theta)
            }
            GateOp::Cnot { .. } => None,
        }
    }

    /// Replaces the rotation angle; CNOT is returned unchanged.
    pub fn with_theta(self, theta: T) -> Self {
        match self {
            GateOp::Rz { wire, .. } => GateOp::Rz { wire, theta },
            GateOp::Ry { wire, .. } => GateOp::Ry { wire, theta },
            GateOp::Rx { wire, .. } => GateOp::Rx { wire, theta },
            cnot => cnot,
        }
    }

    pub fn inverse(self) -> Self {
        match self.theta() {
            Some(theta) => self.with_theta(-theta),
            None => self,
        }
    }

    /// Pauli generator of a rotation gate.
    pub fn generator(&self) -> Option<Pauli> {
        match self {
            GateOp::Rz { .. } => Some(Pauli::Z),
            GateOp::Ry { .. } => Some(Pauli::Y),
            GateOp::Rx { .. } => Some(Pauli::X),
            GateOp::Cnot { .. } => None,
        }
    }

    /// 2x2 unitary of a rotation gate, `None` for CNOT.
    pub fn matrix(&self) -> Option<Mat2<T>> {
        let half = self.theta()? / T::lit(2.0);
        let (s, co) = half.sin_cos();
        let z = T::zero();
        Some(match self {
            GateOp::Rz { .. } => [[c(co, -s), czero()], [czero(), c(co, s)]],
            GateOp::Ry { .. } => [[c(co, z), c(-s, z)], [c(s, z), c(co, z)]],
            GateOp::Rx { .. } => [[c(co, z), c(z, -s)], [c(z, -s), c(co, z)]],
            GateOp::Cnot { .. } => unreachable!(),
        })
    }

    pub fn check_wires(&self, n_qubits: usize) -> Result<()> {
        let (wires, arity) = self.wires();
        for &w in &wires[..arity] {
            if w >= n_qubits {
                return Err(Error::WireOutOfRange { wire: w, n_qubits });
            }
        }
        if arity == 2 && wires[0] == wires[1] {
            return Err(Error::DuplicateWire(wires[0]));
        }
        Ok(())
    }
}

/// Bit mask of `wire` inside a basis index; wire 0 is the most significant bit.
#[inline]
pub(crate) fn wire_mask(n_qubits: usize, wire: usize) -> usize {
    1 << (n_qubits - 1 - wire)
}

pub(crate) fn check_wire_list(wires: &[usize], n_qubits: usize) -> Result<()> {
    for (i, &w) in wires.iter().enumerate() {
        if w >= n_qubits {
            return Err(Error::WireOutOfRange { wire: w, n_qubits });
        }
        if wires[..i].contains(&w) {
            return Err(Error::DuplicateWire(w));
        }
    }
    Ok(())
}

/// Basis-index offsets of a local operator on `wires`: entry `k` sets the
/// global bits corresponding to the bits of `k`, `wires[0]` being the local MSB.
pub(crate) fn local_offsets(n_qubits: usize, wires: &[usize]) -> Vec<usize> {
    let m = wires.len();
    (0..1usize << m)
        .map(|k| {
            wires
                .iter()
                .enumerate()
                .filter(|(j, _)| k & (1 << (m - 1 - j)) != 0)
                .map(|(_, &w)| wire_mask(n_qubits, w))
                .sum()
        })
        .collect()
}

/// Basis indices whose bits on the masked wires are all zero.
pub(crate) fn group_bases(dim: usize, mask: usize) -> impl Iterator<Item = usize> {
    (0..dim).filter(move |i| i & mask == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unitary_defect(m: &Mat2<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let s: C<f64> = m.iter().map(|row| row[i].conj() * row[j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - c(target, 0.0)).norm());
            }
        }
        worst
    }

    #[test]
    fn rotations_are_unitary() {
        for theta in [-2.3, 0.0, 0.7, 3.1, 6.0] {
            for g in [GateOp::rz(0, theta), GateOp::ry(0, theta), GateOp::rx(0, theta)] {
                assert!(unitary_defect(&g.matrix().unwrap()) < 1e-14);
            }
        }
    }

    #[test]
    fn rz_matrix_is_diagonal_phase() {
        let m = GateOp::rz(0, 0.8f64).matrix().unwrap();
        assert!((m[0][0] - C::from_polar(1.0, -0.4)).norm() < 1e-15);
        assert!((m[1][1] - C::from_polar(1.0, 0.4)).norm() < 1e-15);
        assert_eq!(m[0][1], czero());
    }

    #[test]
    fn wire_validation() {
        assert!(GateOp::<f64>::cnot(0, 0).check_wires(2).is_err());
        assert!(GateOp::<f64>::cnot(0, 2).check_wires(2).is_err());
        assert!(GateOp::rx(1, 0.1f64).check_wires(2).is_ok());
        assert!(matches!(
            GateOp::rx(3, 0.1f64).check_wires(2),
            Err(Error::WireOutOfRange { wire: 3, n_qubits: 2 })
        ));
    }

    #[test]
    fn offsets_follow_msb_ordering() {
        // 3 qubits, wires [2, 0]: local bit1 -> wire 2 (mask 1), local bit0 -> wire 0 (mask 4)
        assert_eq!(local_offsets(3, &[2, 0]), vec![0, 4, 1, 5]);
    }
}
