//! Sparse connection Laplacians and derived operators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::{ConnectionGraph, SmoothingProblem};
use crate::signal::ComplexSignal;

/// Hermitian matrix in compressed sparse row form.
///
/// Entry `(j, i)` is written as the conjugate of entry `(i, j)` at build time,
/// so hermitianity holds exactly.
#[derive(Debug, Clone)]
pub struct SparseHermitianOperator {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
    diag: Vec<f64>,
}

impl SparseHermitianOperator {
    fn assemble(graph: &ConnectionGraph, diag: Vec<f64>, off: impl Fn(usize, usize, f64, f64) -> Complex64) -> Self {
        let n = graph.n_nodes();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(n + 2 * graph.n_edges());
        let mut values = Vec::with_capacity(n + 2 * graph.n_edges());
        offsets.push(0);
        for (i, &d) in diag.iter().enumerate() {
            let mut placed = false;
            for nb in graph.neighbors(i) {
                if !placed && nb.node > i {
                    cols.push(i);
                    values.push(Complex64::new(d, 0.0));
                    placed = true;
                }
                cols.push(nb.node);
                values.push(off(i, nb.node, nb.weight, nb.angle));
            }
            if !placed {
                cols.push(i);
                values.push(Complex64::new(d, 0.0));
            }
            offsets.push(cols.len());
        }
        Self {
            offsets,
            cols,
            values,
            diag,
        }
    }

    /// `L_theta = D - A_theta` with `(A_theta)_{ij} = w_ij e^{-i theta_(i,j)}`.
    pub fn connection_laplacian(graph: &ConnectionGraph) -> Self {
        Self::assemble(graph, graph.degrees().to_vec(), |_, _, w, theta| {
            -w * Complex64::from_polar(1.0, -theta)
        })
    }

    /// `L_theta + Q`.
    pub fn regularized(problem: &SmoothingProblem<'_>) -> Self {
        let graph = problem.graph();
        let diag = graph.degrees().iter().zip(problem.q()).map(|(d, q)| d + q).collect();
        Self::assemble(graph, diag, |_, _, w, theta| -w * Complex64::from_polar(1.0, -theta))
    }

    /// `D^{-1/2} L_theta D^{-1/2}`.
    pub fn normalized(graph: &ConnectionGraph) -> Result<Self> {
        if let Some(i) = graph.degrees().iter().position(|&d| d <= 0.0) {
            return Err(Error::IsolatedNode(i));
        }
        let inv_sqrt: Vec<f64> = graph.degrees().iter().map(|d| d.sqrt().recip()).collect();
        Ok(Self::assemble(graph, vec![1.0; graph.n_nodes()], |i, j, w, theta| {
            -w * inv_sqrt[i] * inv_sqrt[j] * Complex64::from_polar(1.0, -theta)
        }))
    }

    /// The connection-aware adjacency `A_theta` (zero diagonal).
    pub fn adjacency(graph: &ConnectionGraph) -> Self {
        Self::assemble(graph, vec![0.0; graph.n_nodes()], |_, _, w, theta| {
            w * Complex64::from_polar(1.0, -theta)
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `out = self * f`, writing into a caller-owned buffer.
    pub fn matvec_into(&self, f: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let n = self.dim();
        for len in [f.len(), out.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        for (i, slot) in out.iter_mut().enumerate() {
            let range = self.offsets[i]..self.offsets[i + 1];
            *slot = self.cols[range.clone()]
                .iter()
                .zip(&self.values[range])
                .map(|(&j, v)| v * f[j])
                .sum();
        }
        Ok(())
    }

    pub fn matvec(&self, f: &ComplexSignal) -> Result<ComplexSignal> {
        let mut out = ComplexSignal::zeros(self.dim());
        self.matvec_into(f.as_slice(), out.as_mut_slice())?;
        Ok(out)
    }

    /// Real part of `<f, A f>`. The imaginary residue is asserted to be
    /// negligible relative to `|f|^2`.
    pub fn quadratic_form(&self, f: &ComplexSignal) -> Result<f64> {
        let af = self.matvec(f)?;
        let z = f.dot(&af);
        let scale = f.norm_sqr().max(f64::MIN_POSITIVE);
        let mag = self.diag.iter().fold(1.0_f64, |m, d| m.max(d.abs()));
        debug_assert!(
            z.im.abs() <= 1e-10 * scale * mag,
            "quadratic form has imaginary part {}",
            z.im
        );
        Ok(z.re)
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let range = self.offsets[i]..self.offsets[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in self.offsets[i]..self.offsets[i + 1] {
                m[(i, self.cols[k])] = self.values[k];
            }
        }
        m
    }
}

/// `sum_e w_e |f(t_e) - e^{i theta_e} f(s_e)|^2` over undirected edges, i.e.
/// half the sum over both orientations.
pub fn incoherence(graph: &ConnectionGraph, f: &ComplexSignal) -> f64 {
    graph
        .edges()
        .iter()
        .map(|e| {
            let diff = f[e.target] - Complex64::from_polar(1.0, e.angle) * f[e.source];
            e.weight * diff.norm_sqr()
        })
        .sum()
}

/// Bounds `(1 + d_max, 2 d_max)` on the largest eigenvalue of `L_theta`,
/// valid for unweighted graphs with at least one edge.
pub fn lambda_extremes_bounds(graph: &ConnectionGraph) -> (f64, f64) {
    let d = graph.max_degree();
    (1.0 + d, 2.0 * d)
}
