use crate::error::{Error, Result};
use crate::qsim::gate::{check_wire_list, group_bases, local_offsets, wire_mask, GateOp, Mat2};
use crate::qsim::state::StateVector;
use crate::qsim::QuantumState;
use crate::scalar::{c, czero, Real, C};

/// Mixed state as a dense `2^n x 2^n` row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    n_qubits: usize,
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &StateVector<T>) -> Self {
        let a = psi.amplitudes();
        let dim = a.len();
        let mut data = Vec::with_capacity(dim * dim);
        for ai in a {
            for aj in a {
                data.push(ai * aj.conj());
            }
        }
        Self {
            n_qubits: psi.n_qubits(),
            dim,
            data,
        }
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![czero(); dim * dim];
        let v = c(T::one() / T::from_usize_lossy(dim), T::zero());
        for i in 0..dim {
            data[i * dim + i] = v;
        }
        Self {
            n_qubits,
            dim,
            data,
        }
    }

    /// Wraps a row-major matrix after checking Hermiticity and unit trace.
    pub fn from_matrix(data: Vec<C<T>>) -> Result<Self> {
        let dim = (data.len() as f64).sqrt().round() as usize;
        if dim * dim != data.len() || dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "{} entries do not form a 2^n x 2^n matrix",
                data.len()
            )));
        }
        let rho = Self {
            n_qubits: dim.trailing_zeros() as usize,
            dim,
            data,
        };
        let tol = T::validation_tol();
        if rho.hermiticity_defect() > tol {
            return Err(Error::InvalidState("matrix is not Hermitian".into()));
        }
        if (rho.trace().re - T::one()).abs() > tol {
            return Err(Error::InvalidState("trace differs from 1".into()));
        }
        Ok(rho)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[C<T>] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C<T> {
        self.data[row * self.dim + col]
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim).fold(czero(), |acc, i| acc + self.data[i * self.dim + i])
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Largest elementwise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    /// `ρ ← U ρ U†` for a single-qubit `U`.
    pub fn conjugate_1q(&mut self, wire: usize, u: &Mat2<T>) -> Result<()> {
        self.left_1q(wire, u)?;
        self.right_adjoint_1q(wire, u)
    }

    /// `ρ ← M ρ` with `M` acting on one wire.
    pub fn left_1q(&mut self, wire: usize, m: &Mat2<T>) -> Result<()> {
        self.check_wire(wire)?;
        let (dim, s) = (self.dim, wire_mask(self.n_qubits, wire));
        let mut block = 0;
        while block < dim {
            for r in block..block + s {
                let (top, bottom) = (r * dim, (r + s) * dim);
                for col in 0..dim {
                    let (a, b) = (self.data[top + col], self.data[bottom + col]);
                    self.data[top + col] = m[0][0] * a + m[0][1] * b;
                    self.data[bottom + col] = m[1][0] * a + m[1][1] * b;
                }
            }
            block += 2 * s;
        }
        Ok(())
    }

    /// `ρ ← ρ M†` with `M` acting on one wire.
    pub fn right_adjoint_1q(&mut self, wire: usize, m: &Mat2<T>) -> Result<()> {
        self.check_wire(wire)?;
        let (dim, s) = (self.dim, wire_mask(self.n_qubits, wire));
        let md = [
            [m[0][0].conj(), m[0][1].conj()],
            [m[1][0].conj(), m[1][1].conj()],
        ];
        for row in self.data.chunks_exact_mut(dim) {
            crate::qsim::state::apply_1q_slice(row, s, &md);
        }
        Ok(())
    }

    /// `ρ ← M ρ M†` for a dense `2^m x 2^m` operator on `wires`.
    pub fn sandwich_local(&mut self, wires: &[usize], matrix: &[C<T>]) -> Result<()> {
        check_wire_list(wires, self.n_qubits)?;
        let local = 1usize << wires.len();
        if matrix.len() != local * local {
            return Err(Error::ArityMismatch {
                expected: (matrix.len() as f64).sqrt().log2().round() as usize,
                got: wires.len(),
            });
        }
        let offsets = local_offsets(self.n_qubits, wires);
        let mask = offsets[local - 1];
        let dim = self.dim;
        let mut buf = vec![czero(); local];
        // rows: ρ ← M ρ
        for col in 0..dim {
            for base in group_bases(dim, mask) {
                for (k, off) in offsets.iter().enumerate() {
                    buf[k] = self.data[(base + off) * dim + col];
                }
                for (j, off) in offsets.iter().enumerate() {
                    let row = &matrix[j * local..(j + 1) * local];
                    self.data[(base + off) * dim + col] =
                        row.iter().zip(&buf).fold(czero(), |acc, (m, v)| acc + m * v);
                }
            }
        }
        // columns: ρ ← ρ M†
        for r in 0..dim {
            let row_data = &mut self.data[r * dim..(r + 1) * dim];
            for base in group_bases(dim, mask) {
                for (k, off) in offsets.iter().enumerate() {
                    buf[k] = row_data[base + off];
                }
                for (j, off) in offsets.iter().enumerate() {
                    let mrow = &matrix[j * local..(j + 1) * local];
                    row_data[base + off] = mrow
                        .iter()
                        .zip(&buf)
                        .fold(czero(), |acc, (m, v)| acc + v * m.conj());
                }
            }
        }
        Ok(())
    }

    /// `ρ ← a ρ + b I / 2^n`.
    pub(crate) fn mix_identity(&mut self, keep: T, mixed: T) {
        let diag = mixed / T::from_usize_lossy(self.dim);
        for z in self.data.iter_mut() {
            *z *= keep;
        }
        for i in 0..self.dim {
            self.data[i * self.dim + i].re += diag;
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            dim: self.dim,
            data: vec![czero(); self.data.len()],
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    fn check_wire(&self, wire: usize) -> Result<()> {
        if wire >= self.n_qubits {
            return Err(Error::WireOutOfRange {
                wire,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    fn permute_cnot(&mut self, control: usize, target: usize) {
        let cm = wire_mask(self.n_qubits, control);
        let tm = wire_mask(self.n_qubits, target);
        let dim = self.dim;
        let flip = |i: usize| if i & cm != 0 { i ^ tm } else { i };
        // rows
        for i in 0..dim {
            if i & cm != 0 && i & tm == 0 {
                for col in 0..dim {
                    self.data.swap(i * dim + col, (i | tm) * dim + col);
                }
            }
        }
        // columns
        for row in self.data.chunks_exact_mut(dim) {
            for j in 0..dim {
                let k = flip(j);
                if j < k {
                    row.swap(j, k);
                }
            }
        }
    }
}

impl<T: Real> QuantumState<T> for DensityMatrix<T> {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn apply_gate(&mut self, g: &GateOp<T>) -> Result<()> {
        g.check_wires(self.n_qubits)?;
        match *g {
            GateOp::Cnot { control, target } => self.permute_cnot(control, target),
            _ => {
                let (w, _) = g.wires();
                self.conjugate_1q(w[0], &g.matrix().expect("rotation"))?;
            }
        }
        Ok(())
    }

    fn basis_probabilities(&self) -> Vec<T> {
        (0..self.dim)
            .map(|i| self.data[i * self.dim + i].re.max(T::zero()))
            .collect()
    }
}
