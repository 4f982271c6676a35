use std::sync::Arc;

use faer::sparse::SymbolicSparseColMat;
use rayon::prelude::*;

use super::dofmap::DofMap;
use crate::element::NODES;
use crate::error::Result;
use crate::mesh::Mesh;

const NO_SLOT: u32 = u32::MAX;
const CHUNK: usize = 256;

/// Compressed-column sparsity of the free equations of one field, with a
/// precomputed element-to-slot scatter map.
#[derive(Debug)]
pub struct SparsePattern {
    n: usize,
    symbolic: SymbolicSparseColMat<usize>,
    /// Per element, (local row, local col) → value slot, row-major.
    slots: Vec<u32>,
    ndof_elem: usize,
}

impl SparsePattern {
    pub fn new(mesh: &Mesh, dofs: &DofMap) -> Arc<Self> {
        let n = dofs.n_free();
        let per = dofs.per_node();
        let ndof_elem = NODES * per;
        let elem_eqs = |conn: &[usize; NODES]| -> Vec<Option<usize>> {
            let mut out = Vec::with_capacity(ndof_elem);
            for &node in conn {
                for c in 0..per {
                    out.push(dofs.equation(dofs.dof(node, c)));
                }
            }
            out
        };

        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for conn in &mesh.elements {
            let eqs = elem_eqs(conn);
            for &cj in eqs.iter().flatten() {
                cols[cj].extend(eqs.iter().flatten());
            }
        }
        // Every equation keeps its diagonal even when no element touches it.
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(j);
            col.sort_unstable();
            col.dedup();
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &cols {
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }

        let mut slots = Vec::with_capacity(mesh.n_elements() * ndof_elem * ndof_elem);
        for conn in &mesh.elements {
            let eqs = elem_eqs(conn);
            for a in 0..ndof_elem {
                for b in 0..ndof_elem {
                    let slot = match (eqs[a], eqs[b]) {
                        (Some(r), Some(c)) => {
                            let start = col_ptr[c];
                            let pos = row_idx[start..col_ptr[c + 1]]
                                .binary_search(&r)
                                .expect("pattern contains element coupling");
                            (start + pos) as u32
                        }
                        _ => NO_SLOT,
                    };
                    slots.push(slot);
                }
            }
        }

        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        Arc::new(SparsePattern {
            n,
            symbolic,
            slots,
            ndof_elem,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.symbolic.row_idx().len()
    }

    pub fn symbolic(&self) -> &SymbolicSparseColMat<usize> {
        &self.symbolic
    }

    pub fn col_ptr(&self) -> &[usize] {
        self.symbolic.col_ptr()
    }

    pub fn row_idx(&self) -> &[usize] {
        self.symbolic.row_idx()
    }

    /// Value slot of entry (row, col), if structurally present.
    pub fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let cp = self.col_ptr();
        let rows = &self.row_idx()[cp[col]..cp[col + 1]];
        rows.binary_search(&row).ok().map(|p| cp[col] + p)
    }
}

/// Assembled matrix over the free equations plus right-hand side.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub pattern: Arc<SparsePattern>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
    pub symmetric: bool,
}

impl SparseSystem {
    pub fn zeros(pattern: Arc<SparsePattern>, symmetric: bool) -> Self {
        let nnz = pattern.nnz();
        let n = pattern.dim();
        SparseSystem {
            pattern,
            values: vec![0.0; nnz],
            rhs: vec![0.0; n],
            symmetric,
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    /// Scatters an element matrix (row-major) and vector, lifting the
    /// contributions of constrained dofs into the right-hand side.
    pub fn add_element(&mut self, e: usize, ke: &[f64], fe: &[f64], conn: &[usize; NODES], dofs: &DofMap) {
        let nd = self.pattern.ndof_elem;
        let per = dofs.per_node();
        let slots = &self.pattern.slots[e * nd * nd..(e + 1) * nd * nd];
        let dof_of = |a: usize| dofs.dof(conn[a / per], a % per);
        for a in 0..nd {
            let Some(row) = dofs.equation(dof_of(a)) else { continue };
            self.rhs[row] += fe[a];
            for b in 0..nd {
                let s = slots[a * nd + b];
                if s != NO_SLOT {
                    self.values[s as usize] += ke[a * nd + b];
                } else {
                    let db = dof_of(b);
                    if dofs.is_constrained(db) {
                        self.rhs[row] -= ke[a * nd + b] * dofs.prescribed(db);
                    }
                }
            }
        }
    }

    pub fn add_to_entry(&mut self, row: usize, col: usize, v: f64) {
        let s = self.pattern.slot(row, col).expect("entry in pattern");
        self.values[s] += v;
    }

    /// y = A·x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let cp = self.pattern.col_ptr();
        let ri = self.pattern.row_idx();
        let mut y = vec![0.0; self.dim()];
        for j in 0..self.dim() {
            let xj = x[j];
            for s in cp[j]..cp[j + 1] {
                y[ri[s]] += self.values[s] * xj;
            }
        }
        y
    }

    /// max |A − Aᵀ| relative to max |A|.
    pub fn asymmetry(&self) -> f64 {
        let cp = self.pattern.col_ptr();
        let ri = self.pattern.row_idx();
        let mut max_diff: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for j in 0..self.dim() {
            for s in cp[j]..cp[j + 1] {
                let i = ri[s];
                max_abs = max_abs.max(self.values[s].abs());
                let t = self.pattern.slot(j, i).map(|k| self.values[k]).unwrap_or(0.0);
                max_diff = max_diff.max((self.values[s] - t).abs());
            }
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_diff / max_abs
        }
    }

    /// True when the matrix is symmetric to 1e-9 of its largest entry.
    pub fn is_numerically_symmetric(&self) -> bool {
        self.asymmetry() < 1e-9
    }
}

/// Element-by-element assembly. `element` fills the row-major element matrix
/// and vector (both zeroed on entry). Element contributions are computed in
/// parallel chunks and scattered serially in element order, so the result
/// does not depend on the thread count.
pub fn assemble<F>(
    mesh: &Mesh,
    dofs: &DofMap,
    pattern: &Arc<SparsePattern>,
    symmetric: bool,
    element: F,
) -> Result<SparseSystem>
where
    F: Fn(usize, &mut [f64], &mut [f64]) -> Result<()> + Sync,
{
    let nd = pattern.ndof_elem;
    let mut sys = SparseSystem::zeros(pattern.clone(), symmetric);
    let n_el = mesh.n_elements();
    let mut ke_buf = vec![0.0; CHUNK * nd * nd];
    let mut fe_buf = vec![0.0; CHUNK * nd];
    let mut start = 0;
    while start < n_el {
        let end = (start + CHUNK).min(n_el);
        let count = end - start;
        ke_buf[..count * nd * nd].fill(0.0);
        fe_buf[..count * nd].fill(0.0);
        ke_buf[..count * nd * nd]
            .par_chunks_mut(nd * nd)
            .zip(fe_buf[..count * nd].par_chunks_mut(nd))
            .enumerate()
            .try_for_each(|(k, (ke, fe))| element(start + k, ke, fe))?;
        for k in 0..count {
            let e = start + k;
            sys.add_element(
                e,
                &ke_buf[k * nd * nd..(k + 1) * nd * nd],
                &fe_buf[k * nd..(k + 1) * nd],
                &mesh.elements[e],
                dofs,
            );
        }
        start = end;
    }
    Ok(sys)
}
