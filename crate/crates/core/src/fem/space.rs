use crate::element::{self, NODES, QP_PER_ELEM};
use crate::error::{Error, Result};
use crate::mesh::{self, Mesh};

/// Shape data of one Gauss point in physical coordinates.
#[derive(Debug, Clone, Copy)]
pub struct QpData {
    pub n: [f64; NODES],
    pub grad: [[f64; 2]; NODES],
    /// det(J) times the Gauss weight.
    pub jxw: f64,
    pub x: [f64; 2],
}

/// Per-element shape functions, gradients and integration weights, computed
/// once per mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    qp: Vec<QpData>,
    n_elements: usize,
}

impl FeSpace {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let rule = element::quadrature_rule();
        let mut qp = Vec::with_capacity(mesh.n_elements() * QP_PER_ELEM);
        for e in 0..mesh.n_elements() {
            let xy = mesh.element_coords(e);
            for q in &rule {
                let j = mesh::jacobian(&xy, q.xi, q.eta);
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if !(det > 0.0) || !det.is_finite() {
                    return Err(Error::Assembly {
                        element: e,
                        reason: format!("singular element Jacobian (det = {det:e})"),
                    });
                }
                let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
                let n = element::shape(q.xi, q.eta);
                let d = element::shape_derivs(q.xi, q.eta);
                let mut grad = [[0.0; 2]; NODES];
                let mut x = [0.0; 2];
                for k in 0..NODES {
                    grad[k][0] = inv[0][0] * d[k][0] + inv[0][1] * d[k][1];
                    grad[k][1] = inv[1][0] * d[k][0] + inv[1][1] * d[k][1];
                    x[0] += n[k] * xy[k][0];
                    x[1] += n[k] * xy[k][1];
                }
                qp.push(QpData {
                    n,
                    grad,
                    jxw: det * q.weight,
                    x,
                });
            }
        }
        Ok(FeSpace {
            qp,
            n_elements: mesh.n_elements(),
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_qp(&self) -> usize {
        self.qp.len()
    }

    #[inline]
    pub fn qp(&self, e: usize, q: usize) -> &QpData {
        &self.qp[e * QP_PER_ELEM + q]
    }

    pub fn element_qps(&self, e: usize) -> &[QpData] {
        &self.qp[e * QP_PER_ELEM..(e + 1) * QP_PER_ELEM]
    }

    /// Values of a nodal scalar field at every Gauss point.
    pub fn interpolate(&self, mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_qp());
        for (e, conn) in mesh.elements.iter().enumerate() {
            for d in self.element_qps(e) {
                out.push((0..NODES).map(|k| d.n[k] * nodal[conn[k]]).sum());
            }
        }
        out
    }

    /// Gradients of a nodal scalar field at every Gauss point.
    pub fn gradient(&self, mesh: &Mesh, nodal: &[f64]) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.n_qp());
        for (e, conn) in mesh.elements.iter().enumerate() {
            for d in self.element_qps(e) {
                let mut g = [0.0; 2];
                for k in 0..NODES {
                    g[0] += d.grad[k][0] * nodal[conn[k]];
                    g[1] += d.grad[k][1] * nodal[conn[k]];
                }
                out.push(g);
            }
        }
        out
    }

    /// ∫ N_i dV for every node (row sums of the consistent mass matrix).
    pub fn nodal_volumes(&self, mesh: &Mesh) -> Vec<f64> {
        let mut v = vec![0.0; mesh.n_nodes()];
        for (e, conn) in mesh.elements.iter().enumerate() {
            for d in self.element_qps(e) {
                for k in 0..NODES {
                    v[conn[k]] += d.n[k] * d.jxw;
                }
            }
        }
        v
    }

    /// Positive nodal volumes from diagonal-scaled (HRZ) lumping.
    pub fn lumped_volumes(&self, mesh: &Mesh) -> Vec<f64> {
        let mut v = vec![0.0; mesh.n_nodes()];
        for (e, conn) in mesh.elements.iter().enumerate() {
            let mut diag = [0.0; NODES];
            let mut area = 0.0;
            for d in self.element_qps(e) {
                area += d.jxw;
                for k in 0..NODES {
                    diag[k] += d.n[k] * d.n[k] * d.jxw;
                }
            }
            let total: f64 = diag.iter().sum();
            for k in 0..NODES {
                v[conn[k]] += diag[k] * area / total;
            }
        }
        v
    }

    /// ∫ f dV of a field given at Gauss points.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.qp.iter().zip(values).map(|(d, v)| d.jxw * v).sum()
    }
}
