//! Staggered time loop: soak or pre-charge, then cycle-by-cycle loading with
//! equilibrium → phase field → transport per increment.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{self, CoefficientSet, CrackLength};
use crate::fem::FeSpace;
use crate::hydrogen::{HydrogenState, Transport, TransportOptions};
use crate::mechanics::{MechBoundary, MechOptions, MechState, Mechanics, PinLoad};
use crate::mesh::{self, CtGeometry, Mesh};
use crate::model::{sieverts_concentration, FatigueParams, HydrogenParams, MaterialParams};
use crate::phasefield::{self, FatigueHistory, IrreversibilityHistory, PhaseField};

/// Shape of the load signal within one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    #[default]
    Sinusoidal,
    Triangular,
}

impl Waveform {
    /// Normalised load in [0, 1] at cycle fraction `s`, starting and ending
    /// at the minimum and peaking at s = ½.
    pub fn shape(self, s: f64) -> f64 {
        let s = s - s.floor();
        match self {
            Waveform::Sinusoidal => 0.5 * (1.0 - (2.0 * PI * s).cos()),
            Waveform::Triangular => 1.0 - (2.0 * s - 1.0).abs(),
        }
    }
}

/// Cyclic loading and environment of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProgram {
    /// Peak pin force [N].
    pub p_max: f64,
    /// Load ratio P_min/P_max.
    pub r: f64,
    /// Frequency [Hz].
    pub f: f64,
    pub waveform: Waveform,
    pub increments_per_cycle: u32,
    pub max_cycles: u64,
    /// Unloaded exposure before cycling [s].
    pub soak_duration: f64,
    /// Start saturated at C_env instead of soaking.
    pub precharged: bool,
    /// Hydrogen gas pressure [MPa].
    pub p_h2: f64,
    /// Cycles represented by each simulated cycle.
    pub cycle_jump: u64,
    /// Target ΔK [MPa·√m]; when set, ΔP is adjusted every cycle.
    pub delta_k_control: Option<f64>,
}

impl Default for LoadProgram {
    fn default() -> Self {
        LoadProgram {
            p_max: 15_000.0,
            r: 0.1,
            f: 1.0,
            waveform: Waveform::Sinusoidal,
            increments_per_cycle: 8,
            max_cycles: 1000,
            soak_duration: 86_400.0,
            precharged: false,
            p_h2: 0.0,
            cycle_jump: 1,
            delta_k_control: None,
        }
    }
}

impl LoadProgram {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if !(self.p_max >= 0.0 && self.p_max.is_finite()) {
            return bad(format!("P_max = {} must be finite and non-negative", self.p_max));
        }
        if !(0.0..1.0).contains(&self.r) {
            return bad(format!("load ratio R = {} must lie in [0, 1)", self.r));
        }
        if !(self.f > 0.0 && self.f.is_finite()) {
            return bad(format!("frequency f = {} must be positive", self.f));
        }
        if self.increments_per_cycle < 4 {
            return bad(format!(
                "increments_per_cycle = {} must be at least 4",
                self.increments_per_cycle
            ));
        }
        if self.cycle_jump < 1 {
            return bad("cycle_jump must be at least 1".into());
        }
        if !(self.soak_duration >= 0.0) {
            return bad(format!("soak duration {} must be non-negative", self.soak_duration));
        }
        if !(self.p_h2 >= 0.0) {
            return bad(format!("hydrogen pressure {} must be non-negative", self.p_h2));
        }
        if let Some(k) = self.delta_k_control {
            if !(k > 0.0 && k.is_finite()) {
                return bad(format!("controlled delta K {k} must be positive"));
            }
        }
        Ok(())
    }

    pub fn p_min(&self) -> f64 {
        self.r * self.p_max
    }

    /// Pin force at cycle fraction `s` for peak force `p_max`.
    pub fn load_at(&self, s: f64, p_max: f64) -> f64 {
        let p_min = self.r * p_max;
        p_min + (p_max - p_min) * self.waveform.shape(s)
    }

    pub fn period(&self) -> f64 {
        1.0 / self.f
    }
}

/// Numerical choices of the staggered scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverOptions {
    /// Fixed-point tolerance on max nodal |Δφ|; infinity gives one pass.
    pub tol_stagger: f64,
    pub max_stagger_iterations: u32,
    /// Fatigue driven by the degraded energy (1−φ)²ψ₀.
    pub alpha_degraded: bool,
    pub mech: MechOptions,
    pub transport: TransportOptions,
    pub pin: PinLoad,
    pub coefficient_set: CoefficientSet,
    /// Crack-length logging increment [mm].
    pub log_delta_a: f64,
    /// Stop once a/W reaches this value.
    pub max_a_over_w: f64,
}

impl Default for DriverOptions {
    fn default() -> Self {
        DriverOptions {
            tol_stagger: f64::INFINITY,
            max_stagger_iterations: 20,
            alpha_degraded: true,
            mech: MechOptions::default(),
            transport: TransportOptions::default(),
            pin: PinLoad::Node,
            coefficient_set: CoefficientSet::Astm,
            log_delta_a: 0.1,
            max_a_over_w: 0.8,
        }
    }
}

impl DriverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_stagger > 0.0) {
            return Err(Error::config(format!(
                "tol_stagger {} must be positive",
                self.tol_stagger
            )));
        }
        if self.max_stagger_iterations < 1 {
            return Err(Error::config("max_stagger_iterations must be at least 1"));
        }
        if !(self.log_delta_a > 0.0) {
            return Err(Error::config(format!(
                "log increment {} must be positive",
                self.log_delta_a
            )));
        }
        if !(self.max_a_over_w > 0.0 && self.max_a_over_w < 1.0) {
            return Err(Error::config(format!(
                "max a/W {} must lie in (0, 1)",
                self.max_a_over_w
            )));
        }
        self.transport.validate()
    }
}

/// All evolving fields of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub mech: MechState,
    pub phi: Vec<f64>,
    pub hydrogen: HydrogenState,
    pub fatigue: FatigueHistory,
    pub irreversibility: IrreversibilityHistory,
    /// Simulated time [s].
    pub t: f64,
    /// Cycle counter.
    pub n: u64,
}

impl SimState {
    pub fn new(n_nodes: usize, n_qp: usize, c_env: f64) -> Self {
        SimState {
            mech: MechState::zeros(n_nodes, n_qp),
            phi: vec![0.0; n_nodes],
            hydrogen: HydrogenState::new(n_nodes, c_env),
            fatigue: FatigueHistory::new(n_qp),
            irreversibility: IrreversibilityHistory::new(n_qp),
            t: 0.0,
            n: 0,
        }
    }
}

/// Work counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub increments: u64,
    pub mech_solves: u64,
    pub phi_solves: u64,
    pub transport_steps: u64,
    pub halvings: u64,
}

/// Continuous check of the bounds and monotonicity invariants.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InvariantMonitor {
    pub checks: u64,
    pub violations: u64,
    pub phi_violations: u64,
    pub alpha_violations: u64,
    pub c_violations: u64,
    pub first_violation: Option<String>,
    /// Largest C/C_env seen (0 without an environment).
    pub max_c_ratio: f64,
    pub min_c: f64,
    pub max_phi: f64,
}

impl InvariantMonitor {
    fn fail(&mut self, msg: String) {
        self.violations += 1;
        if self.first_violation.is_none() {
            self.first_violation = Some(msg);
        }
    }

    /// Compares consecutive converged states.
    pub fn check(&mut self, before: &SimState, after: &SimState) {
        self.checks += 1;
        for (i, (&p0, &p1)) in before.phi.iter().zip(&after.phi).enumerate() {
            if !(0.0..=1.0).contains(&p1) {
                self.phi_violations += 1;
                self.fail(format!("phi = {p1} out of [0, 1] at node {i}, cycle {}", after.n));
            } else if p1 < p0 - 1e-12 {
                self.phi_violations += 1;
                self.fail(format!(
                    "phi decreased from {p0} to {p1} at node {i}, cycle {}",
                    after.n
                ));
            }
            self.max_phi = self.max_phi.max(p1);
        }
        for (q, (&a0, &a1)) in before
            .fatigue
            .alpha_bar
            .iter()
            .zip(&after.fatigue.alpha_bar)
            .enumerate()
        {
            if a1 < a0 {
                self.alpha_violations += 1;
                self.fail(format!("alpha_bar decreased at point {q}, cycle {}", after.n));
            }
        }
        let c_env = after.hydrogen.c_env;
        for (i, &c) in after.hydrogen.c.iter().enumerate() {
            self.min_c = self.min_c.min(c);
            if c_env > 0.0 {
                self.max_c_ratio = self.max_c_ratio.max(c / c_env);
            }
            if c < -1e-9 || (c_env > 0.0 && c > 1.01 * c_env) || (c_env == 0.0 && c > 1e-9) {
                self.c_violations += 1;
                self.fail(format!(
                    "C = {c} outside [-1e-9, 1.01 C_env = {}] at node {i}, cycle {}",
                    1.01 * c_env,
                    after.n
                ));
            }
        }
    }
}

/// Coupled simulation of one specimen.
pub struct Simulation {
    pub mesh: Mesh,
    pub space: FeSpace,
    pub geometry: Option<CtGeometry>,
    pub material: MaterialParams,
    pub fatigue: FatigueParams,
    pub hydrogen: HydrogenParams,
    pub program: LoadProgram,
    pub options: DriverOptions,
    pub state: SimState,
    pub counters: Counters,
    pub monitor: InvariantMonitor,
    mechanics: Mechanics,
    phase: PhaseField,
    transport: Transport,
    /// Toughness factor used by the last φ solve.
    last_f: Option<Vec<f64>>,
    /// History changed since the last φ solve.
    history_dirty: bool,
    a0: f64,
    crack: CrackLength,
    initialized: bool,
}

impl Simulation {
    /// CT specimen: half mesh, pin loading, environment on OUTER and NOTCH_FACES.
    pub fn ct(
        geometry: CtGeometry,
        material: MaterialParams,
        fatigue: FatigueParams,
        hydrogen: HydrogenParams,
        program: LoadProgram,
        options: DriverOptions,
    ) -> Result<Self> {
        let mesh = mesh::generate_ct_half_mesh(&geometry, material.ell)?;
        let boundary = MechBoundary::ct_half(&mesh, options.pin, geometry.b)?;
        let mut env: Vec<usize> = mesh.require_set(mesh::OUTER)?.to_vec();
        env.extend_from_slice(mesh.require_set(mesh::NOTCH_FACES)?);
        env.sort_unstable();
        env.dedup();
        let a0 = geometry.a0;
        Self::new(
            mesh,
            Some(geometry),
            boundary,
            &env,
            a0,
            material,
            fatigue,
            hydrogen,
            program,
            options,
        )
    }

    /// General constructor. Mechanical boundaries are for a unit load;
    /// `environment` lists nodes held at C_env.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mesh: Mesh,
        geometry: Option<CtGeometry>,
        boundary: MechBoundary,
        environment: &[usize],
        a0: f64,
        material: MaterialParams,
        fatigue: FatigueParams,
        hydrogen: HydrogenParams,
        program: LoadProgram,
        options: DriverOptions,
    ) -> Result<Self> {
        material.validate()?;
        fatigue.validate()?;
        hydrogen.validate()?;
        program.validate()?;
        options.validate()?;
        if program.delta_k_control.is_some() && geometry.is_none() {
            return Err(Error::config("delta K control needs a CT geometry"));
        }
        let space = FeSpace::new(&mesh)?;
        let c_env = sieverts_concentration(program.p_h2, hydrogen.solubility)?;
        let mechanics = Mechanics::new(&mesh, material, boundary, options.mech)?;
        let phase = PhaseField::new(&mesh);
        let transport = Transport::new(
            &mesh,
            &space,
            hydrogen,
            material.ell,
            environment,
            c_env,
            options.transport,
        )?;
        let state = SimState::new(mesh.n_nodes(), space.n_qp(), c_env);
        Ok(Simulation {
            mesh,
            space,
            geometry,
            material,
            fatigue,
            hydrogen,
            program,
            options,
            state,
            counters: Counters::default(),
            monitor: InvariantMonitor::default(),
            mechanics,
            phase,
            transport,
            last_f: None,
            history_dirty: true,
            a0,
            crack: CrackLength {
                a: a0,
                contiguous: true,
            },
            initialized: false,
        })
    }

    pub fn c_env(&self) -> f64 {
        self.state.hydrogen.c_env
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn mechanics(&self) -> &Mechanics {
        &self.mechanics
    }

    /// Soak or pre-charge, once, before the first cycle.
    pub fn initialize(&mut self) -> Result<()> {
        if self.initialized {
            return Ok(());
        }
        if self.program.precharged {
            self.state.hydrogen.precharge();
        } else if self.program.soak_duration > 0.0 && self.c_env() > 0.0 {
            let h = self.transport.soak(
                &self.mesh,
                &self.space,
                &self.state.hydrogen,
                self.program.soak_duration,
            )?;
            self.state.hydrogen = h;
            self.counters.transport_steps += crate::hydrogen::soak_steps(self.program.soak_duration).len() as u64;
        }
        self.initialized = true;
        self.crack = self.measure_crack()?;
        Ok(())
    }

    /// Replaces the evolving state, e.g. from a checkpoint.
    pub fn restore(&mut self, state: SimState) -> Result<()> {
        let n = self.mesh.n_nodes();
        let q = self.space.n_qp();
        if state.phi.len() != n
            || state.hydrogen.c.len() != n
            || state.fatigue.len() != q
            || state.irreversibility.h.len() != q
        {
            return Err(Error::Checkpoint("state does not match the mesh".into()));
        }
        self.state = state;
        self.last_f = None;
        self.history_dirty = true;
        self.initialized = true;
        self.crack = self.measure_crack()?;
        Ok(())
    }

    pub fn measure_crack(&self) -> Result<CrackLength> {
        if self.mesh.node_set(mesh::SYMMETRY).is_empty() {
            return Ok(CrackLength {
                a: self.a0,
                contiguous: true,
            });
        }
        experiment::measure_crack_length(&self.mesh, &self.state.phi, self.a0)
    }

    /// Crack length after the last completed cycle.
    pub fn crack(&self) -> CrackLength {
        self.crack
    }

    /// Concentration at the current crack tip.
    pub fn c_tip(&self) -> f64 {
        experiment::value_on_symmetry(&self.mesh, &self.state.hydrogen.c, self.crack.a).max(0.0)
    }

    /// Peak force of the coming cycle: fixed, or set from the ΔK target.
    pub fn cycle_peak_load(&self) -> Result<f64> {
        match (self.program.delta_k_control, &self.geometry) {
            (Some(k), Some(g)) => {
                let dp = experiment::load_range_for(k, self.crack.a, g.w, g.b, self.options.coefficient_set)?;
                Ok(dp / (1.0 - self.program.r))
            }
            _ => Ok(self.program.p_max),
        }
    }

    /// ΔK [MPa·√m] for peak force `p_max` at the current crack length.
    pub fn delta_k(&self, p_max: f64) -> Option<f64> {
        let g = self.geometry.as_ref()?;
        experiment::compute_delta_k(
            p_max * (1.0 - self.program.r),
            self.crack.a,
            g.w,
            g.b,
            self.options.coefficient_set,
        )
        .ok()
        .map(|k| k.value)
    }

    fn toughness(&self) -> Vec<f64> {
        phasefield::toughness_factor(
            &self.mesh,
            &self.space,
            &self.state.fatigue,
            &self.fatigue,
            &self.state.hydrogen.c,
            &self.hydrogen,
        )
    }

    /// One load increment to pin force `p` over `dt` seconds.
    pub fn staggered_increment(&mut self, p: f64, dt: f64) -> Result<()> {
        if !p.is_finite() {
            return Err(Error::domain(format!("load {p} is not finite")));
        }
        let phi_start = self.state.phi.clone();
        let f = self.toughness();
        if self.last_f.as_ref() != Some(&f) {
            self.history_dirty = true;
        }
        let mut iterations = 0;
        loop {
            iterations += 1;
            let mech = self.mechanics.solve(&self.mesh, &self.space, &self.state.phi, p)?;
            self.counters.mech_solves += 1;
            if self.state.irreversibility.update(&mech.psi0) {
                self.history_dirty = true;
            }
            self.state.mech = mech;
            let mut change: f64 = 0.0;
            if self.history_dirty {
                let phi = self.phase.solve(
                    &self.mesh,
                    &self.space,
                    &self.material,
                    &self.state.irreversibility.h,
                    &f,
                    &phi_start,
                )?;
                self.counters.phi_solves += 1;
                change = phi
                    .iter()
                    .zip(&self.state.phi)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                self.state.phi = phi;
                self.history_dirty = false;
                self.last_f = Some(f.clone());
            }
            if change < self.options.tol_stagger || iterations >= self.options.max_stagger_iterations {
                break;
            }
        }
        let alpha = phasefield::update_alpha(
            &self.mesh,
            &self.space,
            &self.state.phi,
            &self.state.mech.psi0,
            self.options.alpha_degraded,
        );
        self.state.fatigue.record_increment(&alpha);
        self.transport_step(dt, true)?;
        self.counters.increments += 1;
        Ok(())
    }

    fn transport_step(&mut self, dt: f64, with_stress: bool) -> Result<()> {
        if self.state.hydrogen.is_inert() {
            return Ok(());
        }
        let sigma_h = if with_stress && self.state.mech.sigma_h.iter().any(|&s| s != 0.0) {
            Some(
                self.transport
                    .project_hydrostatic(&self.mesh, &self.space, &self.state.mech.sigma_h)?,
            )
        } else {
            None
        };
        let h = self.transport.step(
            &self.mesh,
            &self.space,
            &self.state.hydrogen,
            sigma_h.as_deref(),
            dt,
            &self.state.phi,
        )?;
        self.state.hydrogen = h;
        self.counters.transport_steps += 1;
        Ok(())
    }

    /// Advances one increment, retrying once as two half increments.
    fn increment_with_retry(&mut self, s0: f64, s1: f64, p_max: f64) -> Result<()> {
        let period = self.program.period();
        let snapshot = self.state.clone();
        let first = self.staggered_increment(self.program.load_at(s1, p_max), (s1 - s0) * period);
        match first {
            Ok(()) => Ok(()),
            Err(e) if e.is_solver_failure() => {
                log::warn!("increment failed ({e}); retrying with two half increments");
                self.state = snapshot.clone();
                self.history_dirty = true;
                self.counters.halvings += 1;
                let mid = 0.5 * (s0 + s1);
                let retry = self
                    .staggered_increment(self.program.load_at(mid, p_max), (mid - s0) * period)
                    .and_then(|_| self.staggered_increment(self.program.load_at(s1, p_max), (s1 - mid) * period));
                retry.map_err(|e2| {
                    self.state = snapshot;
                    Error::Aborted(format!(
                        "increment failed twice at cycle {} (t = {} s): {e2}",
                        self.state.n, self.state.t
                    ))
                })
            }
            Err(e) => Err(e),
        }
    }

    /// One load cycle (standing for `cycle_jump` cycles).
    pub fn run_cycle(&mut self) -> Result<()> {
        self.initialize()?;
        let before = self.state.clone();
        let p_max = self.cycle_peak_load()?;
        let inc = self.program.increments_per_cycle;
        let period = self.program.period();
        let t_start = self.state.t;
        self.state.fatigue.begin_cycle();
        for k in 1..=inc {
            let s0 = (k - 1) as f64 / inc as f64;
            let s1 = k as f64 / inc as f64;
            self.increment_with_retry(s0, s1, p_max)?;
            self.state.t = t_start + s1 * period;
        }
        let n_eff = self.fatigue.exponent_for_pressure(self.program.p_h2);
        let jump = self.program.cycle_jump;
        self.state
            .fatigue
            .accumulate(self.program.r, &self.fatigue, n_eff, jump);
        if jump > 1 {
            self.transport_step((jump - 1) as f64 * period, true)?;
        }
        self.state.t = t_start + jump as f64 * period;
        self.state.n += jump;
        self.monitor.check(&before, &self.state);
        self.crack = self.measure_crack()?;
        Ok(())
    }

    /// Stop reason once the crack reaches the configured limit or leaves the
    /// refined band.
    pub fn stop_reason(&self) -> Option<String> {
        let g = self.geometry.as_ref()?;
        let a = self.crack.a;
        if a / g.w >= self.options.max_a_over_w {
            return Some(format!(
                "a/W = {:.4} reached the limit {}",
                a / g.w,
                self.options.max_a_over_w
            ));
        }
        let band_end = g.a0 + g.refined_length();
        if band_end < g.w - 1e-9 && a >= band_end - 2.0 * self.material.ell {
            return Some(format!("crack reached the end of the refined band at a = {a:.4} mm"));
        }
        None
    }
}
