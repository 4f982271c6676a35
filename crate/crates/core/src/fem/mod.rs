//! Finite-element infrastructure shared by the mechanics, phase-field and
//! transport solvers.

mod dofmap;
mod solver;
mod space;
mod sparse;

pub use dofmap::DofMap;
pub use solver::{solve, Factor, LinearSolver, RESIDUAL_TOL};
pub use space::{FeSpace, QpData};
pub use sparse::{assemble, SparsePattern, SparseSystem};

use crate::element::{NODES, QP_PER_ELEM};
use crate::error::Result;
use crate::mesh::Mesh;

/// Consistent mass matrix ∫ N_i N_j over the free equations of a scalar field.
pub fn mass_matrix(
    mesh: &Mesh,
    space: &FeSpace,
    dofs: &DofMap,
    pattern: &std::sync::Arc<SparsePattern>,
) -> Result<SparseSystem> {
    assemble(mesh, dofs, pattern, true, |e, ke, _| {
        for d in space.element_qps(e) {
            for a in 0..NODES {
                for b in 0..NODES {
                    ke[a * NODES + b] += d.n[a] * d.n[b] * d.jxw;
                }
            }
        }
        Ok(())
    })
}

/// Consistent L2 projection of Gauss-point fields onto the nodes. The mass
/// matrix is factorized once.
pub struct L2Projector {
    factor: Factor,
}

impl L2Projector {
    pub fn new(mesh: &Mesh, space: &FeSpace) -> Result<Self> {
        let dofs = DofMap::new(mesh.n_nodes(), 1);
        let pattern = SparsePattern::new(mesh, &dofs);
        let mass = mass_matrix(mesh, space, &dofs, &pattern)?;
        let factor = LinearSolver::new("projection").factorize(mass)?;
        Ok(L2Projector { factor })
    }

    pub fn project(&self, mesh: &Mesh, space: &FeSpace, qp_values: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; mesh.n_nodes()];
        for (e, conn) in mesh.elements.iter().enumerate() {
            for (q, d) in space.element_qps(e).iter().enumerate() {
                let v = qp_values[e * QP_PER_ELEM + q] * d.jxw;
                for a in 0..NODES {
                    rhs[conn[a]] += d.n[a] * v;
                }
            }
        }
        self.factor.solve(&rhs)
    }
}
