//! Stress-assisted hydrogen diffusion with environmental boundaries and
//! penalty exposure of new crack faces.

use std::sync::Arc;

use crate::element::{NODES, QP_PER_ELEM};
use crate::error::{Error, Result};
use crate::fem::{assemble, DofMap, Factor, FeSpace, L2Projector, LinearSolver, SparsePattern};
use crate::mesh::Mesh;
use crate::model::HydrogenParams;

/// Nodal concentration and environment.
#[derive(Debug, Clone, PartialEq)]
pub struct HydrogenState {
    /// Concentration [wppm].
    pub c: Vec<f64>,
    /// Environmental concentration [wppm].
    pub c_env: f64,
    /// Nodes exposed to the environment through the crack.
    pub exposed: Vec<bool>,
}

impl HydrogenState {
    pub fn new(n_nodes: usize, c_env: f64) -> Self {
        HydrogenState {
            c: vec![0.0; n_nodes],
            c_env,
            exposed: vec![false; n_nodes],
        }
    }

    /// Saturates the body: C = C_env everywhere.
    pub fn precharge(&mut self) {
        self.c.fill(self.c_env);
    }

    /// Concentration with negative overshoot removed, for output.
    pub fn clipped(&self) -> Vec<f64> {
        self.c.iter().map(|c| c.max(0.0)).collect()
    }

    /// True when nothing can happen: no environment and no hydrogen.
    pub fn is_inert(&self) -> bool {
        self.c_env == 0.0 && self.c.iter().all(|&c| c == 0.0)
    }
}

/// Transport discretization choices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    /// Phase-field value above which a node counts as crack face.
    pub phi_exposure: f64,
    /// Penalty factor: k_pen = factor·D/ℓ² per unit volume.
    pub penalty_factor: f64,
    /// Streamline diffusion where the element Péclet number exceeds 2.
    pub stabilization: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions {
            phi_exposure: 0.9,
            penalty_factor: 1e6,
            stabilization: false,
        }
    }
}

impl TransportOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi_exposure > 0.0 && self.phi_exposure <= 1.0) {
            return Err(Error::config(format!(
                "phi_exposure {} not in (0, 1]",
                self.phi_exposure
            )));
        }
        if !(self.penalty_factor >= 0.0) {
            return Err(Error::config(format!(
                "penalty factor {} must be non-negative",
                self.penalty_factor
            )));
        }
        Ok(())
    }
}

struct Cached {
    dt: f64,
    n_exposed: usize,
    factor: Factor,
}

/// Backward-Euler solver of ∂C/∂t = ∇·(D∇C) − ∇·(D·V_H·C/(R_g·T)·∇σ_h).
pub struct Transport {
    params: HydrogenParams,
    options: TransportOptions,
    k_pen: f64,
    dofs: DofMap,
    pattern: Arc<SparsePattern>,
    solver: LinearSolver,
    volumes: Vec<f64>,
    projector: Option<L2Projector>,
    /// Factorization of the drift-free matrix, reused for equal dt.
    cache: Option<Cached>,
}

impl Transport {
    /// `dirichlet` lists the nodes held at C_env; `ell` sets the penalty scale.
    pub fn new(
        mesh: &Mesh,
        space: &FeSpace,
        params: HydrogenParams,
        ell: f64,
        dirichlet: &[usize],
        c_env: f64,
        options: TransportOptions,
    ) -> Result<Self> {
        params.validate()?;
        options.validate()?;
        if !(ell > 0.0) {
            return Err(Error::config(format!("length scale {ell} must be positive")));
        }
        if !(c_env >= 0.0) {
            return Err(Error::domain(format!(
                "environmental concentration {c_env} must be non-negative"
            )));
        }
        let dofs = DofMap::with_constraints(mesh.n_nodes(), 1, dirichlet.iter().map(|&n| (n, c_env)));
        let pattern = SparsePattern::new(mesh, &dofs);
        Ok(Transport {
            params,
            options,
            k_pen: options.penalty_factor * params.d / (ell * ell),
            dofs,
            pattern,
            solver: LinearSolver::new("hydrogen concentration"),
            volumes: space.lumped_volumes(mesh),
            projector: None,
            cache: None,
        })
    }

    pub fn params(&self) -> &HydrogenParams {
        &self.params
    }

    pub fn options(&self) -> &TransportOptions {
        &self.options
    }

    /// Nodal hydrostatic stress by consistent L2 projection.
    pub fn project_hydrostatic(&mut self, mesh: &Mesh, space: &FeSpace, sigma_h_qp: &[f64]) -> Result<Vec<f64>> {
        if self.projector.is_none() {
            self.projector = Some(L2Projector::new(mesh, space)?);
        }
        self.projector.as_ref().unwrap().project(mesh, space, sigma_h_qp)
    }

    /// Marks nodes whose φ reached the exposure threshold; the set only grows.
    pub fn update_exposure(&self, state: &mut HydrogenState, phi: &[f64]) {
        for (flag, &p) in state.exposed.iter_mut().zip(phi) {
            if p >= self.options.phi_exposure {
                *flag = true;
            }
        }
    }

    /// One backward-Euler step of length `dt` with nodal hydrostatic stress
    /// `sigma_h` (`None` for zero stress).
    pub fn step(
        &mut self,
        mesh: &Mesh,
        space: &FeSpace,
        state: &HydrogenState,
        sigma_h: Option<&[f64]>,
        dt: f64,
        phi: &[f64],
    ) -> Result<HydrogenState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("time step {dt} must be positive and finite")));
        }
        let mut next = state.clone();
        self.update_exposure(&mut next, phi);
        let sigma_h = sigma_h.filter(|s| s.iter().any(|&v| v != 0.0));
        let drift = self.params.drift_coefficient();
        let d = self.params.d;
        let stabilize = self.options.stabilization;
        let c_old = &state.c;
        let n_exposed = next.exposed.iter().filter(|&&e| e).count();

        let reuse = sigma_h.is_none()
            && self
                .cache
                .as_ref()
                .is_some_and(|c| c.dt == dt && c.n_exposed == n_exposed);
        let element = |e: usize, ke: &mut [f64], fe: &mut [f64], with_matrix: bool| {
            let conn = &mesh.elements[e];
            let h = mesh.elem_size[e];
            for d_q in space.element_qps(e) {
                let w = d_q.jxw;
                let c_q: f64 = (0..NODES).map(|k| d_q.n[k] * c_old[conn[k]]).sum();
                for a in 0..NODES {
                    fe[a] += d_q.n[a] * c_q * w / dt;
                }
                if !with_matrix {
                    continue;
                }
                let mut v = [0.0; 2];
                if let Some(s) = sigma_h {
                    for k in 0..NODES {
                        v[0] += drift * d_q.grad[k][0] * s[conn[k]];
                        v[1] += drift * d_q.grad[k][1] * s[conn[k]];
                    }
                }
                let vnorm = (v[0] * v[0] + v[1] * v[1]).sqrt();
                let peclet = vnorm * h / (2.0 * d);
                let d_art = if stabilize && peclet > 2.0 {
                    0.5 * vnorm * h * (1.0 / peclet.tanh() - 1.0 / peclet)
                } else {
                    0.0
                };
                for a in 0..NODES {
                    let ga = d_q.grad[a];
                    let v_ga = v[0] * ga[0] + v[1] * ga[1];
                    for b in 0..NODES {
                        let gb = d_q.grad[b];
                        let mut k = d_q.n[a] * d_q.n[b] / dt + d * (ga[0] * gb[0] + ga[1] * gb[1]) - d_q.n[b] * v_ga;
                        if d_art > 0.0 {
                            let v_gb = v[0] * gb[0] + v[1] * gb[1];
                            k += d_art * v_ga * v_gb / (vnorm * vnorm);
                        }
                        ke[a * NODES + b] += k * w;
                    }
                }
            }
        };

        let symmetric = sigma_h.is_none();
        let mut sys = assemble(mesh, &self.dofs, &self.pattern, symmetric, |e, ke, fe| {
            element(e, ke, fe, true);
            Ok(())
        })?;
        for (node, &exp) in next.exposed.iter().enumerate() {
            if !exp {
                continue;
            }
            if let Some(eq) = self.dofs.equation(node) {
                let k = self.k_pen * self.volumes[node];
                sys.add_to_entry(eq, eq, k);
                sys.rhs[eq] += k * state.c_env;
            }
        }
        let rhs = sys.rhs.clone();
        let free = if reuse {
            self.cache.as_ref().unwrap().factor.solve(&rhs)?
        } else if symmetric {
            let factor = self.solver.factorize(sys)?;
            let x = factor.solve(&rhs)?;
            self.cache = Some(Cached { dt, n_exposed, factor });
            x
        } else {
            self.solver.solve(sys)?
        };
        let mut c = self.dofs.expand(&free);
        if let Some(bad) = c.iter().find(|v| !v.is_finite()) {
            return Err(Error::solver(
                "hydrogen concentration",
                format!("non-finite value {bad}"),
            ));
        }
        std::mem::swap(&mut next.c, &mut c);
        Ok(next)
    }

    /// Unloaded diffusion over `duration` seconds in geometrically growing
    /// sub-steps.
    pub fn soak(
        &mut self,
        mesh: &Mesh,
        space: &FeSpace,
        state: &HydrogenState,
        duration: f64,
    ) -> Result<HydrogenState> {
        if !(duration >= 0.0) {
            return Err(Error::domain(format!("soak duration {duration} must be non-negative")));
        }
        let mut s = state.clone();
        if duration == 0.0 {
            return Ok(s);
        }
        let phi = vec![0.0; mesh.n_nodes()];
        for dt in soak_steps(duration) {
            s = self.step(mesh, space, &s, None, dt, &phi)?;
        }
        Ok(s)
    }
}

const SOAK_STEPS: i32 = 40;
const SOAK_RATIO: f64 = 1.2;

/// Sub-step lengths for a soak, growing by a fixed ratio and summing to the
/// duration.
pub fn soak_steps(duration: f64) -> Vec<f64> {
    let dt0 = duration * (SOAK_RATIO - 1.0) / (SOAK_RATIO.powi(SOAK_STEPS) - 1.0);
    let mut steps: Vec<f64> = (0..SOAK_STEPS).map(|i| dt0 * SOAK_RATIO.powi(i)).collect();
    let sum: f64 = steps[..steps.len() - 1].iter().sum();
    *steps.last_mut().unwrap() = duration - sum;
    steps
}

/// Total hydrogen ∫C dV.
pub fn total_hydrogen(mesh: &Mesh, space: &FeSpace, c: &[f64]) -> f64 {
    let mut total = 0.0;
    for (e, conn) in mesh.elements.iter().enumerate() {
        for d in space.element_qps(e) {
            let cq: f64 = (0..NODES).map(|k| d.n[k] * c[conn[k]]).sum();
            total += cq * d.jxw;
        }
    }
    total
}

/// Concentration interpolated at Gauss points.
pub fn concentration_at_qp(mesh: &Mesh, space: &FeSpace, c: &[f64]) -> Vec<f64> {
    debug_assert_eq!(space.n_qp(), mesh.n_elements() * QP_PER_ELEM);
    space.interpolate(mesh, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{LEFT, RIGHT};

    fn bar(nx: usize, len: f64) -> (Mesh, FeSpace) {
        let m = Mesh::rectangle([0.0, 0.0], len, 0.1 * len / nx as f64 * 2.0, nx, 1).unwrap();
        let s = FeSpace::new(&m).unwrap();
        (m, s)
    }

    #[test]
    fn uniform_equilibrium_is_preserved() {
        let (m, s) = bar(10, 1.0);
        let p = HydrogenParams::default();
        let mut t = Transport::new(&m, &s, p, 0.27, m.node_set(LEFT), 0.7928, TransportOptions::default()).unwrap();
        let mut st = HydrogenState::new(m.n_nodes(), 0.7928);
        st.precharge();
        let phi = vec![0.0; m.n_nodes()];
        for _ in 0..5 {
            st = t.step(&m, &s, &st, None, 10.0, &phi).unwrap();
        }
        assert!(st.c.iter().all(|&c| (c - 0.7928).abs() < 1e-12));
    }

    #[test]
    fn precharge_values() {
        let mut a = HydrogenState::new(4, 0.0);
        a.precharge();
        assert!(a.c.iter().all(|&c| c == 0.0));
        let mut b = HydrogenState::new(4, 0.7928);
        b.precharge();
        assert!(b.c.iter().all(|&c| c == 0.7928));
    }

    #[test]
    fn sealed_bar_conserves_hydrogen_with_drift() {
        let (m, s) = bar(10, 1.0);
        let p = HydrogenParams::default();
        let mut t = Transport::new(&m, &s, p, 0.27, &[], 0.0, TransportOptions::default()).unwrap();
        let mut st = HydrogenState::new(m.n_nodes(), 0.0);
        st.c = m
            .nodes
            .iter()
            .map(|q| (-(q[0] - 0.3f64).powi(2) / 0.01).exp())
            .collect();
        let sigma: Vec<f64> = m.nodes.iter().map(|q| 800.0 * q[0]).collect();
        let phi = vec![0.0; m.n_nodes()];
        let total0 = total_hydrogen(&m, &s, &st.c);
        for _ in 0..20 {
            let before = total_hydrogen(&m, &s, &st.c);
            st = t.step(&m, &s, &st, Some(&sigma), 50.0, &phi).unwrap();
            let after = total_hydrogen(&m, &s, &st.c);
            assert!((after - before).abs() <= 1e-10 * before);
        }
        assert!((total_hydrogen(&m, &s, &st.c) - total0).abs() < 1e-9 * total0);
    }

    #[test]
    fn stress_driven_enrichment_at_steady_state() {
        let (m, s) = bar(40, 2.0);
        let p = HydrogenParams::default();
        let mut t = Transport::new(&m, &s, p, 0.27, m.node_set(LEFT), 0.5, TransportOptions::default()).unwrap();
        let mut st = HydrogenState::new(m.n_nodes(), 0.5);
        st.precharge();
        let sigma: Vec<f64> = m.nodes.iter().map(|q| 500.0 * q[0]).collect();
        let phi = vec![0.0; m.n_nodes()];
        for _ in 0..5 {
            st = t.step(&m, &s, &st, Some(&sigma), 1e9, &phi).unwrap();
        }
        let group = p.v_h / (HydrogenParams::RG * p.temperature);
        for &n in m.node_set(RIGHT) {
            let expected = 0.5 * (group * 1000.0).exp();
            assert!((st.c[n] - expected).abs() < 0.01 * expected);
            assert!((st.c[n] / 0.5 - 2.230).abs() < 2.5e-2);
        }
    }

    #[test]
    fn maximum_principle_without_drift() {
        let (m, s) = bar(20, 4.0);
        let p = HydrogenParams::default();
        let mut t = Transport::new(&m, &s, p, 0.27, m.node_set(LEFT), 1.0, TransportOptions::default()).unwrap();
        let mut st = HydrogenState::new(m.n_nodes(), 1.0);
        let phi = vec![0.0; m.n_nodes()];
        let mut dt = 100.0;
        for _ in 0..30 {
            st = t.step(&m, &s, &st, None, dt, &phi).unwrap();
            assert!(st.c.iter().all(|&c| (-1e-6..=1.0 + 1e-6).contains(&c)));
            dt *= 1.5;
        }
    }

    #[test]
    fn exposure_penalty_pulls_to_environment() {
        let (m, s) = bar(10, 1.0);
        let p = HydrogenParams::default();
        let mut t = Transport::new(&m, &s, p, 0.27, &[], 0.8, TransportOptions::default()).unwrap();
        let st0 = HydrogenState::new(m.n_nodes(), 0.8);
        let phi: Vec<f64> = m.nodes.iter().map(|q| if q[0] > 0.85 { 0.95 } else { 0.0 }).collect();
        let mut st = st0;
        for _ in 0..3 {
            st = t.step(&m, &s, &st, None, 1.0, &phi).unwrap();
        }
        for (n, q) in m.nodes.iter().enumerate() {
            if q[0] > 0.85 {
                assert!(st.exposed[n]);
                assert!((st.c[n] - 0.8).abs() < 0.01 * 0.8);
            }
        }
    }

    #[test]
    fn soak_limits() {
        let (m, s) = bar(10, 1.0);
        let p = HydrogenParams::default();
        let mut t = Transport::new(&m, &s, p, 0.27, m.node_set(LEFT), 0.6, TransportOptions::default()).unwrap();
        let st = HydrogenState::new(m.n_nodes(), 0.6);
        assert_eq!(t.soak(&m, &s, &st, 0.0).unwrap(), st);
        let done = t.soak(&m, &s, &st, 1e9).unwrap();
        assert!(done.c.iter().all(|&c| (c - 0.6).abs() < 1e-3 * 0.6));
        let steps = soak_steps(86_400.0);
        assert!((steps.iter().sum::<f64>() - 86_400.0).abs() < 1e-6);
        assert!(steps.windows(2).all(|w| w[1] > w[0]));
    }
}
