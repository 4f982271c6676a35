//! Phase-field evolution with fatigue and hydrogen toughness degradation,
//! and the history variables that drive it.

use std::sync::Arc;

use crate::element::{NODES, QP_PER_ELEM};
use crate::error::{Error, Result};
use crate::fem::{assemble, DofMap, FeSpace, LinearSolver, SparsePattern};
use crate::mesh::Mesh;
use crate::model::{fatigue_factor, FatigueParams, HydrogenParams, MaterialParams};

/// Per Gauss point record of cyclic loading.
#[derive(Debug, Clone, PartialEq)]
pub struct FatigueHistory {
    /// Accumulated fatigue variable ᾱ [N/mm²].
    pub alpha_bar: Vec<f64>,
    /// Running maximum of α within the current cycle [N/mm²].
    pub alpha_max: Vec<f64>,
    /// All-time maximum of α_max·((1−R)/2)^{2κ} [N/mm²].
    pub gate_max: Vec<f64>,
    /// Threshold latch; once set it stays set.
    pub activated: Vec<bool>,
}

impl FatigueHistory {
    pub fn new(n_qp: usize) -> Self {
        FatigueHistory {
            alpha_bar: vec![0.0; n_qp],
            alpha_max: vec![0.0; n_qp],
            gate_max: vec![0.0; n_qp],
            activated: vec![false; n_qp],
        }
    }

    pub fn len(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_bar.is_empty()
    }

    pub fn begin_cycle(&mut self) {
        self.alpha_max.fill(0.0);
    }

    /// Folds the α of one increment into the within-cycle maximum.
    pub fn record_increment(&mut self, alpha: &[f64]) {
        for (m, &a) in self.alpha_max.iter_mut().zip(alpha) {
            *m = m.max(a);
        }
    }

    /// Adds the fatigue increment of a completed cycle, multiplied by
    /// `cycle_jump`, using exponent `n`. Returns the largest increment.
    pub fn accumulate(&mut self, r: f64, params: &FatigueParams, n: f64, cycle_jump: u64) -> f64 {
        let mut largest: f64 = 0.0;
        let amp = mean_stress_factor(r, params.kappa);
        for q in 0..self.len() {
            let gate = self.alpha_max[q] * amp;
            if gate > self.gate_max[q] {
                self.gate_max[q] = gate;
            }
            if self.gate_max[q] > params.alpha_e {
                self.activated[q] = true;
            }
            let d = fatigue_increment(self.alpha_max[q], r, self.activated[q], params, n) * cycle_jump as f64;
            self.alpha_bar[q] += d;
            largest = largest.max(d);
        }
        largest
    }

    /// Fatigue degradation factor f_F at every point.
    pub fn degradation(&self, params: &FatigueParams) -> Vec<f64> {
        self.alpha_bar
            .iter()
            .map(|&a| fatigue_factor(a, params.alpha_bar_0))
            .collect()
    }
}

/// ((1−R)/2)^{2κ}.
pub fn mean_stress_factor(r: f64, kappa: f64) -> f64 {
    (0.5 * (1.0 - r)).max(0.0).powf(2.0 * kappa)
}

/// Δᾱ = (α_max/α_n)ⁿ·((1−R)/2)^{2κn} when the threshold gate is open, else 0.
pub fn fatigue_increment(alpha_max: f64, r: f64, gate_open: bool, params: &FatigueParams, n: f64) -> f64 {
    if !gate_open || alpha_max <= 0.0 {
        return 0.0;
    }
    (alpha_max / params.alpha_n * mean_stress_factor(r, params.kappa)).powf(n)
}

/// Largest ψ₀ seen so far at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct IrreversibilityHistory {
    pub h: Vec<f64>,
}

impl IrreversibilityHistory {
    pub fn new(n_qp: usize) -> Self {
        IrreversibilityHistory { h: vec![0.0; n_qp] }
    }

    /// Raises the history with the current ψ₀; returns true when any point grew.
    pub fn update(&mut self, psi0: &[f64]) -> bool {
        let mut grew = false;
        for (h, &p) in self.h.iter_mut().zip(psi0) {
            if p > *h {
                *h = p;
                grew = true;
            }
        }
        grew
    }
}

/// Fatigue driving quantity α at Gauss points: (1−φ)²ψ₀ when `degraded`,
/// ψ₀ otherwise.
pub fn update_alpha(mesh: &Mesh, space: &FeSpace, phi: &[f64], psi0: &[f64], degraded: bool) -> Vec<f64> {
    if !degraded {
        return psi0.to_vec();
    }
    let phi_q = space.interpolate(mesh, phi);
    phi_q
        .iter()
        .zip(psi0)
        .map(|(&p, &s)| {
            let p = p.clamp(0.0, 1.0);
            (1.0 - p) * (1.0 - p) * s
        })
        .collect()
}

/// Combined toughness factor f_F(ᾱ)·f_H(C) at Gauss points.
pub fn toughness_factor(
    mesh: &Mesh,
    space: &FeSpace,
    history: &FatigueHistory,
    fatigue: &FatigueParams,
    concentration: &[f64],
    hydrogen: &HydrogenParams,
) -> Vec<f64> {
    let c_q = space.interpolate(mesh, concentration);
    history
        .alpha_bar
        .iter()
        .zip(&c_q)
        .map(|(&a, &c)| fatigue_factor(a, fatigue.alpha_bar_0) * hydrogen.f_h(c))
        .collect()
}

/// Closed-form phase field of a homogeneous state: 2ψℓ/(f·G_c + 2ψℓ).
pub fn homogeneous_phase_field(psi: f64, ell: f64, gc: f64, f: f64) -> f64 {
    2.0 * psi * ell / (f * gc + 2.0 * psi * ell)
}

/// Solver for f·(G_c/ℓ)(φ − ℓ²∇²φ) − 2(1−φ)H = 0 with natural boundaries.
pub struct PhaseField {
    dofs: DofMap,
    pattern: Arc<SparsePattern>,
    solver: LinearSolver,
}

impl PhaseField {
    pub fn new(mesh: &Mesh) -> Self {
        let dofs = DofMap::new(mesh.n_nodes(), 1);
        let pattern = SparsePattern::new(mesh, &dofs);
        PhaseField {
            dofs,
            pattern,
            solver: LinearSolver::new("phase field"),
        }
    }

    /// Solves for nodal φ given the history field `h_irr` and toughness
    /// factor `f` at Gauss points. The result is clipped to [0, 1] and never
    /// falls below `phi_prev`.
    pub fn solve(
        &mut self,
        mesh: &Mesh,
        space: &FeSpace,
        material: &MaterialParams,
        h_irr: &[f64],
        f: &[f64],
        phi_prev: &[f64],
    ) -> Result<Vec<f64>> {
        let n_qp = space.n_qp();
        if h_irr.len() != n_qp || f.len() != n_qp || phi_prev.len() != mesh.n_nodes() {
            return Err(Error::domain("phase-field inputs do not match the mesh"));
        }
        if let Some(bad) = f.iter().find(|&&v| !(v > 0.0 && v <= 1.0 + 1e-12)) {
            return Err(Error::domain(format!("toughness factor {bad} not in (0, 1]")));
        }
        if h_irr.iter().all(|&h| h == 0.0) {
            return Ok(phi_prev.iter().map(|p| p.clamp(0.0, 1.0)).collect());
        }
        let (gc, ell) = (material.gc0, material.ell);
        let sys = assemble(mesh, &self.dofs, &self.pattern, true, |e, ke, fe| {
            for (q, d) in space.element_qps(e).iter().enumerate() {
                let i = e * QP_PER_ELEM + q;
                let react = (f[i] * gc / ell + 2.0 * h_irr[i]) * d.jxw;
                let diff = f[i] * gc * ell * d.jxw;
                let src = 2.0 * h_irr[i] * d.jxw;
                for a in 0..NODES {
                    fe[a] += src * d.n[a];
                    for b in 0..NODES {
                        ke[a * NODES + b] += react * d.n[a] * d.n[b]
                            + diff * (d.grad[a][0] * d.grad[b][0] + d.grad[a][1] * d.grad[b][1]);
                    }
                }
            }
            Ok(())
        })?;
        let phi = self.solver.solve(sys)?;
        Ok(phi
            .iter()
            .zip(phi_prev)
            .map(|(&p, &old)| p.clamp(0.0, 1.0).max(old))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FatigueParams;
    use proptest::prelude::*;

    fn params() -> FatigueParams {
        FatigueParams::reference(&MaterialParams::reference_steel())
    }

    #[test]
    fn increment_examples() {
        let p = params();
        let d = fatigue_increment(p.alpha_n, 0.1, true, &p, 1.25);
        assert!((d - 0.45f64.powf(1.95)).abs() < 1e-12);
        assert!((d - 0.2108).abs() < 1e-4);
        assert_eq!(fatigue_increment(p.alpha_n, 1.0, true, &p, 1.25), 0.0);
        assert_eq!(fatigue_increment(p.alpha_n, 0.1, false, &p, 1.25), 0.0);
    }

    #[test]
    fn gate_stays_closed_below_threshold() {
        let p = params();
        let mut h = FatigueHistory::new(3);
        // α_max·(0.45)^{1.56} just below α_e.
        let amp = mean_stress_factor(0.1, p.kappa);
        h.record_increment(&[0.9 * p.alpha_e / amp, 0.0, 0.5 * p.alpha_e / amp]);
        h.accumulate(0.1, &p, p.n, 1);
        assert!(h.alpha_bar.iter().all(|&a| a == 0.0));
        assert!(h.activated.iter().all(|&f| !f));
        h.begin_cycle();
        h.record_increment(&[1.1 * p.alpha_e / amp, 0.0, 0.0]);
        h.accumulate(0.1, &p, p.n, 1);
        assert!(h.activated[0] && h.alpha_bar[0] > 0.0);
        // The latch keeps the gate open for a smaller later cycle.
        let before = h.alpha_bar[0];
        h.begin_cycle();
        h.record_increment(&[0.5 * p.alpha_e / amp, 0.0, 0.0]);
        h.accumulate(0.1, &p, p.n, 1);
        assert!(h.activated[0] && h.alpha_bar[0] > before);
    }

    #[test]
    fn cycle_jump_multiplies_increment() {
        let p = params();
        let mut a = FatigueHistory::new(1);
        let mut b = FatigueHistory::new(1);
        a.record_increment(&[p.alpha_n]);
        b.record_increment(&[p.alpha_n]);
        a.accumulate(0.1, &p, p.n, 1);
        b.accumulate(0.1, &p, p.n, 10);
        assert!((b.alpha_bar[0] - 10.0 * a.alpha_bar[0]).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_root_examples() {
        assert_eq!(homogeneous_phase_field(0.0, 0.27, 100.0, 1.0), 0.0);
        let full = homogeneous_phase_field(30.0, 0.27, 100.0, 1.0);
        let half = homogeneous_phase_field(30.0, 0.27, 100.0, 0.5);
        assert!(half > full);
        let quarter = homogeneous_phase_field(30.0, 0.27, 100.0, 0.25);
        let composed = homogeneous_phase_field(30.0, 0.27, 100.0, 0.5 * 0.5);
        assert_eq!(quarter, composed);
    }

    fn strip() -> (Mesh, FeSpace) {
        let m = Mesh::rectangle([0.0, 0.0], 2.0, 0.5, 8, 2).unwrap();
        let s = FeSpace::new(&m).unwrap();
        (m, s)
    }

    #[test]
    fn zero_history_gives_zero_field() {
        let (m, s) = strip();
        let mat = MaterialParams::reference_steel();
        let mut pf = PhaseField::new(&m);
        let phi = pf
            .solve(
                &m,
                &s,
                &mat,
                &vec![0.0; s.n_qp()],
                &vec![1.0; s.n_qp()],
                &vec![0.0; m.n_nodes()],
            )
            .unwrap();
        assert!(phi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn uniform_strip_matches_closed_form() {
        let (m, s) = strip();
        let mat = MaterialParams::reference_steel();
        let mut pf = PhaseField::new(&m);
        for (psi, f) in [(5.0, 1.0), (30.0, 0.25), (200.0, 0.13)] {
            let phi = pf
                .solve(
                    &m,
                    &s,
                    &mat,
                    &vec![psi; s.n_qp()],
                    &vec![f; s.n_qp()],
                    &vec![0.0; m.n_nodes()],
                )
                .unwrap();
            let exact = homogeneous_phase_field(psi, mat.ell, mat.gc0, f);
            for p in phi {
                assert!((p - exact).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn monotone_clamp_keeps_previous_field() {
        let (m, s) = strip();
        let mat = MaterialParams::reference_steel();
        let mut pf = PhaseField::new(&m);
        let prev = vec![0.4; m.n_nodes()];
        let phi = pf
            .solve(&m, &s, &mat, &vec![1.0; s.n_qp()], &vec![1.0; s.n_qp()], &prev)
            .unwrap();
        assert!(phi.iter().all(|&p| p >= 0.4));
    }

    #[test]
    fn degraded_alpha() {
        let (m, s) = strip();
        let psi = vec![34.68; s.n_qp()];
        let a0 = update_alpha(&m, &s, &vec![0.0; m.n_nodes()], &psi, true);
        let a1 = update_alpha(&m, &s, &vec![1.0; m.n_nodes()], &psi, true);
        assert!(a0.iter().all(|&a| (a - 34.68).abs() < 1e-12));
        assert!(a1.iter().all(|&a| a.abs() < 1e-12));
        let p = FatigueParams {
            alpha_n: 34.68,
            ..params()
        };
        assert!((a0[0] / p.alpha_n - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn alpha_bar_never_decreases(
            cycles in proptest::collection::vec((0.0f64..80.0, 0.0f64..0.95), 1..20),
        ) {
            let p = params();
            let mut h = FatigueHistory::new(1);
            let mut prev = 0.0;
            let mut latched = false;
            for (amax, r) in cycles {
                h.begin_cycle();
                h.record_increment(&[amax]);
                h.accumulate(r, &p, p.n, 1);
                prop_assert!(h.alpha_bar[0] >= prev);
                prop_assert!(!latched || h.activated[0]);
                latched = h.activated[0];
                prev = h.alpha_bar[0];
            }
        }

        #[test]
        fn history_never_decreases(values in proptest::collection::vec(0.0f64..10.0, 1..30)) {
            let mut h = IrreversibilityHistory::new(1);
            let mut prev = 0.0;
            for v in values {
                h.update(&[v]);
                prop_assert!(h.h[0] >= prev);
                prev = h.h[0];
            }
        }
    }
}
