use crate::error::{Error, Result};

const CONSTRAINED: usize = usize::MAX;

/// Node-to-equation numbering for one field with `per_node` components.
/// Constrained dofs carry prescribed values and have no equation.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    per_node: usize,
    eq: Vec<usize>,
    n_free: usize,
    prescribed: Vec<f64>,
}

impl DofMap {
    pub fn new(n_nodes: usize, per_node: usize) -> Self {
        Self::with_constraints(n_nodes, per_node, std::iter::empty())
    }

    /// Builds the map; later duplicates of a constrained dof override its value.
    pub fn with_constraints(
        n_nodes: usize,
        per_node: usize,
        constraints: impl IntoIterator<Item = (usize, f64)>,
    ) -> Self {
        let n = n_nodes * per_node;
        let mut prescribed = vec![0.0; n];
        let mut fixed = vec![false; n];
        for (dof, v) in constraints {
            fixed[dof] = true;
            prescribed[dof] = v;
        }
        let mut eq = vec![CONSTRAINED; n];
        let mut n_free = 0;
        for d in 0..n {
            if !fixed[d] {
                eq[d] = n_free;
                n_free += 1;
            }
        }
        DofMap {
            per_node,
            eq,
            n_free,
            prescribed,
        }
    }

    pub fn per_node(&self) -> usize {
        self.per_node
    }

    pub fn n_dofs(&self) -> usize {
        self.eq.len()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    #[inline]
    pub fn dof(&self, node: usize, comp: usize) -> usize {
        node * self.per_node + comp
    }

    #[inline]
    pub fn equation(&self, dof: usize) -> Option<usize> {
        let e = self.eq[dof];
        (e != CONSTRAINED).then_some(e)
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.eq[dof] == CONSTRAINED
    }

    pub fn prescribed(&self, dof: usize) -> f64 {
        self.prescribed[dof]
    }

    /// Changes the value of an already constrained dof.
    pub fn set_prescribed(&mut self, dof: usize, value: f64) -> Result<()> {
        if !self.is_constrained(dof) {
            return Err(Error::config(format!("dof {dof} is not constrained")));
        }
        self.prescribed[dof] = value;
        Ok(())
    }

    /// Scales every prescribed value.
    pub fn scale_prescribed(&mut self, factor: f64) {
        for v in &mut self.prescribed {
            *v *= factor;
        }
    }

    pub fn constrained_dofs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_dofs()).filter(|&d| self.is_constrained(d))
    }

    /// Expands a vector of free unknowns into a full dof vector.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        (0..self.n_dofs())
            .map(|d| match self.equation(d) {
                Some(e) => free[e],
                None => self.prescribed[d],
            })
            .collect()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for d in 0..self.n_dofs() {
            if let Some(e) = self.equation(d) {
                out[e] = full[d];
            }
        }
        out
    }
}
