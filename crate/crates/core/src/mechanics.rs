//! Plane-strain linear elasticity with phase-field degraded stiffness.

use std::sync::Arc;

use rayon::prelude::*;

use crate::element::{NODES, QP_PER_ELEM};
use crate::error::{Error, Result};
use crate::fem::{assemble, DofMap, Factor, FeSpace, LinearSolver, QpData, SparsePattern};
use crate::mesh::{self, Mesh};
use crate::model::MaterialParams;

/// Residual stiffness added to the degradation inside stiffness assembly.
pub const K_RES: f64 = 1e-7;

const NDOF: usize = 2 * NODES;

/// g_eff = (1−φ)² + k_res.
pub fn residual_stiffness_floor(phi: f64) -> f64 {
    let p = phi.clamp(0.0, 1.0);
    (1.0 - p) * (1.0 - p) + K_RES
}

/// Converged mechanical fields. Strains are (ε_xx, ε_yy, γ_xy) and undamaged
/// stresses (σ_xx, σ_yy, σ_xy, σ_zz), both at Gauss points.
#[derive(Debug, Clone, PartialEq)]
pub struct MechState {
    pub u: Vec<f64>,
    pub strain: Vec<[f64; 3]>,
    pub stress0: Vec<[f64; 4]>,
    pub psi0: Vec<f64>,
    pub sigma_h: Vec<f64>,
    /// Load scale the state was solved for.
    pub load: f64,
}

impl MechState {
    pub fn zeros(n_nodes: usize, n_qp: usize) -> Self {
        MechState {
            u: vec![0.0; 2 * n_nodes],
            strain: vec![[0.0; 3]; n_qp],
            stress0: vec![[0.0; 4]; n_qp],
            psi0: vec![0.0; n_qp],
            sigma_h: vec![0.0; n_qp],
            load: 0.0,
        }
    }

    /// Displacement of a node.
    pub fn displacement(&self, node: usize) -> [f64; 2] {
        [self.u[2 * node], self.u[2 * node + 1]]
    }
}

/// How the pin force enters the half model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PinLoad {
    /// Nodal force on the single PIN node.
    Node,
    /// Force shared equally by the nodes within `radius` of the pin node.
    Distributed { radius: f64 },
}

/// Dirichlet values and nodal forces for a unit load; both scale linearly
/// with the applied load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MechBoundary {
    pub fixed: Vec<(usize, f64)>,
    pub forces: Vec<(usize, f64)>,
}

impl MechBoundary {
    /// Half CT specimen: u_y = 0 on SYMMETRY, u_x fixed at the symmetry node
    /// farthest from the notch, and a force of 1 N per thickness `b` in +y
    /// at the pin.
    pub fn ct_half(mesh: &Mesh, pin: PinLoad, b: f64) -> Result<Self> {
        let sym = mesh.require_set(mesh::SYMMETRY)?;
        if sym.is_empty() {
            return Err(Error::config("SYMMETRY node set is empty"));
        }
        let pin_node = *mesh
            .require_set(mesh::PIN)?
            .first()
            .ok_or_else(|| Error::config("PIN node set is empty"))?;
        let mut fixed: Vec<(usize, f64)> = sym.iter().map(|&n| (2 * n + 1, 0.0)).collect();
        let anchor = *sym
            .iter()
            .max_by(|&&a, &&b| mesh.nodes[a][0].total_cmp(&mesh.nodes[b][0]))
            .unwrap();
        fixed.push((2 * anchor, 0.0));
        let loaded = match pin {
            PinLoad::Node => vec![pin_node],
            PinLoad::Distributed { radius } => mesh.nodes_within(mesh.nodes[pin_node], radius.max(0.0)),
        };
        let share = 1.0 / (b * loaded.len() as f64);
        let forces = loaded.into_iter().map(|n| (2 * n + 1, share)).collect();
        Ok(MechBoundary { fixed, forces })
    }
}

/// Switches of the mechanical model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechOptions {
    /// Hydrostatic stress from the damaged stress g(φ)σ₀ rather than σ₀.
    pub sigma_h_damaged: bool,
}

impl Default for MechOptions {
    fn default() -> Self {
        MechOptions { sigma_h_damaged: true }
    }
}

struct Cached {
    phi: Vec<f64>,
    factor: Factor,
    /// Right-hand side for a unit load.
    rhs_unit: Vec<f64>,
}

/// Equilibrium solver for ∇·[g(φ)σ₀] = 0. The factorization is reused while
/// the phase field does not change.
pub struct Mechanics {
    material: MaterialParams,
    options: MechOptions,
    dofs: DofMap,
    boundary: MechBoundary,
    pattern: Arc<SparsePattern>,
    solver: LinearSolver,
    cache: Option<Cached>,
}

/// Plane-strain constitutive law; returns (σ_xx, σ_yy, σ_xy, σ_zz).
#[inline]
fn stress(lambda: f64, mu: f64, eps: [f64; 3]) -> [f64; 4] {
    let tr = eps[0] + eps[1];
    [
        lambda * tr + 2.0 * mu * eps[0],
        lambda * tr + 2.0 * mu * eps[1],
        mu * eps[2],
        lambda * tr,
    ]
}

#[inline]
fn strain_at(d: &QpData, conn: &[usize; NODES], u: &[f64]) -> [f64; 3] {
    let mut eps = [0.0; 3];
    for k in 0..NODES {
        let (ux, uy) = (u[2 * conn[k]], u[2 * conn[k] + 1]);
        let [gx, gy] = d.grad[k];
        eps[0] += gx * ux;
        eps[1] += gy * uy;
        eps[2] += gy * ux + gx * uy;
    }
    eps
}

#[inline]
fn phi_at(d: &QpData, conn: &[usize; NODES], phi: &[f64]) -> f64 {
    (0..NODES).map(|k| d.n[k] * phi[conn[k]]).sum::<f64>().clamp(0.0, 1.0)
}

impl Mechanics {
    pub fn new(mesh: &Mesh, material: MaterialParams, boundary: MechBoundary, options: MechOptions) -> Result<Self> {
        material.validate()?;
        let n = mesh.n_nodes();
        for &(d, _) in boundary.fixed.iter().chain(&boundary.forces) {
            if d >= 2 * n {
                return Err(Error::config(format!("mechanical dof {d} out of range")));
            }
        }
        let dofs = DofMap::with_constraints(n, 2, boundary.fixed.iter().copied());
        let pattern = SparsePattern::new(mesh, &dofs);
        Ok(Mechanics {
            material,
            options,
            dofs,
            boundary,
            pattern,
            solver: LinearSolver::new("displacement"),
            cache: None,
        })
    }

    pub fn material(&self) -> &MaterialParams {
        &self.material
    }

    pub fn boundary(&self) -> &MechBoundary {
        &self.boundary
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    fn element_stiffness(&self, space: &FeSpace, e: usize, conn: &[usize; NODES], phi: &[f64], ke: &mut [f64]) {
        let (lambda, mu) = self.material.lame();
        for d in space.element_qps(e) {
            let g = residual_stiffness_floor(phi_at(d, conn, phi)) * d.jxw;
            // Columns of B for each dof: (ε_xx, ε_yy, γ_xy).
            let mut bcol = [[0.0; 3]; NDOF];
            for k in 0..NODES {
                let [gx, gy] = d.grad[k];
                bcol[2 * k] = [gx, 0.0, gy];
                bcol[2 * k + 1] = [0.0, gy, gx];
            }
            for a in 0..NDOF {
                let s = stress(lambda, mu, bcol[a]);
                for b in a..NDOF {
                    let v = g * (s[0] * bcol[b][0] + s[1] * bcol[b][1] + s[2] * bcol[b][2]);
                    ke[a * NDOF + b] += v;
                    if b != a {
                        ke[b * NDOF + a] += v;
                    }
                }
            }
        }
    }

    fn factorize(&mut self, mesh: &Mesh, space: &FeSpace, phi: &[f64]) -> Result<()> {
        let mut unit = self.dofs.clone();
        for &(d, v) in &self.boundary.fixed {
            unit.set_prescribed(d, v)?;
        }
        let sys = assemble(mesh, &unit, &self.pattern, true, |e, ke, _| {
            self.element_stiffness(space, e, &mesh.elements[e], phi, ke);
            Ok(())
        })?;
        let mut rhs_unit = sys.rhs.clone();
        for &(d, f) in &self.boundary.forces {
            if let Some(eq) = unit.equation(d) {
                rhs_unit[eq] += f;
            }
        }
        let factor = self.solver.factorize(sys).map_err(separation)?;
        self.cache = Some(Cached {
            phi: phi.to_vec(),
            factor,
            rhs_unit,
        });
        Ok(())
    }

    /// Solves equilibrium for nodal phase field `phi` and load scale `load`
    /// (the applied pin force in N for CT boundaries).
    pub fn solve(&mut self, mesh: &Mesh, space: &FeSpace, phi: &[f64], load: f64) -> Result<MechState> {
        if !load.is_finite() {
            return Err(Error::domain(format!("load {load} is not finite")));
        }
        if phi.len() != mesh.n_nodes() {
            return Err(Error::domain("phase field size does not match the mesh"));
        }
        if load == 0.0 {
            let mut s = MechState::zeros(mesh.n_nodes(), space.n_qp());
            s.load = 0.0;
            return Ok(s);
        }
        let stale = self.cache.as_ref().is_none_or(|c| c.phi != phi);
        if stale {
            self.factorize(mesh, space, phi)?;
        }
        let cache = self.cache.as_ref().unwrap();
        let rhs: Vec<f64> = cache.rhs_unit.iter().map(|r| r * load).collect();
        let free = cache.factor.solve(&rhs).map_err(separation)?;
        let mut dofs = self.dofs.clone();
        for &(d, v) in &self.boundary.fixed {
            dofs.set_prescribed(d, v * load)?;
        }
        let u = dofs.expand(&free);
        Ok(self.state_from_displacement(mesh, space, phi, u, load))
    }

    /// Post-processes a displacement field into Gauss-point quantities.
    pub fn state_from_displacement(
        &self,
        mesh: &Mesh,
        space: &FeSpace,
        phi: &[f64],
        u: Vec<f64>,
        load: f64,
    ) -> MechState {
        let (lambda, mu) = self.material.lame();
        let damaged = self.options.sigma_h_damaged;
        let per_elem: Vec<[([f64; 3], [f64; 4], f64, f64); QP_PER_ELEM]> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|e| {
                let conn = &mesh.elements[e];
                let mut out = [([0.0; 3], [0.0; 4], 0.0, 0.0); QP_PER_ELEM];
                for (q, d) in space.element_qps(e).iter().enumerate() {
                    let eps = strain_at(d, conn, &u);
                    let s = stress(lambda, mu, eps);
                    let psi0 = 0.5 * (s[0] * eps[0] + s[1] * eps[1] + s[2] * eps[2]);
                    let g = if damaged {
                        let p = phi_at(d, conn, phi);
                        (1.0 - p) * (1.0 - p)
                    } else {
                        1.0
                    };
                    let sh = g * (s[0] + s[1] + s[3]) / 3.0;
                    out[q] = (eps, s, psi0.max(0.0), sh);
                }
                out
            })
            .collect();
        let n_qp = space.n_qp();
        let mut st = MechState {
            u,
            strain: Vec::with_capacity(n_qp),
            stress0: Vec::with_capacity(n_qp),
            psi0: Vec::with_capacity(n_qp),
            sigma_h: Vec::with_capacity(n_qp),
            load,
        };
        for elem in per_elem {
            for (eps, s, psi, sh) in elem {
                st.strain.push(eps);
                st.stress0.push(s);
                st.psi0.push(psi);
                st.sigma_h.push(sh);
            }
        }
        st
    }

    /// Internal force vector K(φ)·u over all dofs; at constrained dofs this
    /// is the reaction.
    pub fn internal_forces(&self, mesh: &Mesh, space: &FeSpace, phi: &[f64], u: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; u.len()];
        let mut ke = vec![0.0; NDOF * NDOF];
        for (e, conn) in mesh.elements.iter().enumerate() {
            ke.fill(0.0);
            self.element_stiffness(space, e, conn, phi, &mut ke);
            for a in 0..NDOF {
                let da = 2 * conn[a / 2] + a % 2;
                let mut s = 0.0;
                for b in 0..NDOF {
                    s += ke[a * NDOF + b] * u[2 * conn[b / 2] + b % 2];
                }
                f[da] += s;
            }
        }
        f
    }

    /// Sum of reaction components `comp` over the nodes of a set.
    pub fn reaction(
        &self,
        mesh: &Mesh,
        space: &FeSpace,
        phi: &[f64],
        state: &MechState,
        set: &[usize],
        comp: usize,
    ) -> f64 {
        let f = self.internal_forces(mesh, space, phi, &state.u);
        set.iter().map(|&n| f[2 * n + comp]).sum()
    }

    /// Work of the unit-load nodal forces scaled by the state load: ½·fᵀu.
    pub fn external_work(&self, state: &MechState) -> f64 {
        0.5 * state.load * self.boundary.forces.iter().map(|&(d, f)| f * state.u[d]).sum::<f64>()
    }

    /// Load-point displacement per unit force per thickness, weighted like
    /// the applied forces.
    pub fn load_point_displacement(&self, state: &MechState) -> f64 {
        let total: f64 = self.boundary.forces.iter().map(|&(_, f)| f).sum();
        self.boundary.forces.iter().map(|&(d, f)| f * state.u[d]).sum::<f64>() / total
    }
}

/// Stored energy ∑ g_eff(φ)ψ₀ w_q.
pub fn strain_energy(mesh: &Mesh, space: &FeSpace, phi: &[f64], state: &MechState) -> f64 {
    let mut total = 0.0;
    for (e, conn) in mesh.elements.iter().enumerate() {
        for (q, d) in space.element_qps(e).iter().enumerate() {
            let g = residual_stiffness_floor(phi_at(d, conn, phi));
            total += g * state.psi0[e * QP_PER_ELEM + q] * d.jxw;
        }
    }
    total
}

fn separation(e: Error) -> Error {
    match e {
        Error::Solver { field, reason } => {
            Error::Separation(format!("{field} system singular, ligament broken: {reason}"))
        }
        other => other,
    }
}
