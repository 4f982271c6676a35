//! Experiment configuration: a TOML document with one table per block.
//! Every key has a default, unknown keys are rejected and the resolved
//! configuration can be echoed and parsed back unchanged.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::driver::{DriverOptions, LoadProgram, Waveform};
use crate::error::{Error, Result};
use crate::experiment::CoefficientSet;
use crate::hydrogen::TransportOptions;
use crate::mechanics::{MechOptions, PinLoad};
use crate::mesh::CtGeometry;
use crate::model::{units, FatigueParams, HydrogenParams, MaterialParams};

const DEFAULT_SIGMA_C: f64 = 4.0 * 715.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
    #[serde(rename = "Gc0")]
    pub gc0: f64,
    /// Either ℓ or σ_c may be given; the other is derived. Without either,
    /// σ_c = 4 × 715 MPa.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_c: Option<f64>,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig {
            e: 210_000.0,
            nu: 0.3,
            gc0: 100.0,
            ell: None,
            sigma_c: None,
            eps_c: None,
        }
    }
}

impl MaterialConfig {
    pub fn params(&self) -> Result<MaterialParams> {
        let mut p = match (self.ell, self.sigma_c) {
            (Some(ell), _) => MaterialParams::from_length_scale(self.e, self.nu, self.gc0, ell)?,
            (None, Some(s)) => MaterialParams::from_strength(self.e, self.nu, self.gc0, s)?,
            (None, None) => MaterialParams::from_strength(self.e, self.nu, self.gc0, DEFAULT_SIGMA_C)?,
        };
        // Values given explicitly are kept verbatim once shown consistent.
        if let Some(s) = self.sigma_c {
            p.sigma_c = s;
        }
        if let Some(e) = self.eps_c {
            p.eps_c = e;
        }
        p.validate().map_err(|e| Error::config(format!("material: {e}")))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FatigueConfig {
    pub n: f64,
    pub kappa: f64,
    pub alpha_bar_0: f64,
    pub alpha_e: f64,
    /// Defaults to σ_c·ε_c/2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_hydrogen_override: Option<f64>,
}

impl Default for FatigueConfig {
    fn default() -> Self {
        let p = FatigueParams::reference(&MaterialParams::reference_steel());
        FatigueConfig {
            n: p.n,
            kappa: p.kappa,
            alpha_bar_0: p.alpha_bar_0,
            alpha_e: p.alpha_e,
            alpha_n: None,
            n_hydrogen_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HydrogenConfig {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "V_H")]
    pub v_h: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
    /// Fixed; accepted only with its reference value.
    #[serde(rename = "Rg")]
    pub rg: f64,
    #[serde(rename = "S")]
    pub solubility: f64,
    pub xi: f64,
    pub eta: f64,
    pub b: f64,
}

impl Default for HydrogenConfig {
    fn default() -> Self {
        let p = HydrogenParams::default();
        HydrogenConfig {
            d: p.d,
            v_h: p.v_h,
            temperature: p.temperature,
            rg: units::GAS_CONSTANT,
            solubility: p.solubility,
            xi: p.xi,
            eta: p.eta,
            b: p.b,
        }
    }
}

impl HydrogenConfig {
    pub fn params(&self) -> Result<HydrogenParams> {
        if self.rg != units::GAS_CONSTANT {
            return Err(Error::config(format!(
                "hydrogen.Rg is fixed at {}, got {}",
                units::GAS_CONSTANT,
                self.rg
            )));
        }
        let p = HydrogenParams {
            d: self.d,
            v_h: self.v_h,
            temperature: self.temperature,
            solubility: self.solubility,
            xi: self.xi,
            eta: self.eta,
            b: self.b,
        };
        p.validate().map_err(|e| Error::config(format!("hydrogen: {e}")))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub a0: f64,
    pub pin: [f64; 2],
    pub front_offset: f64,
    pub half_height: f64,
    pub notch_half_width: f64,
    /// Defaults to ℓ/2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_half_height: Option<f64>,
    /// Refined length ahead of the notch; absent means the whole ligament.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_length: Option<f64>,
    pub grading: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = CtGeometry::standard_1t();
        GeometryConfig {
            w: g.w,
            b: g.b,
            a0: g.a0,
            pin: g.pin,
            front_offset: g.front_offset,
            half_height: g.half_height,
            notch_half_width: g.notch_half_width,
            band_half_height: None,
            refine_length: g.refine_length,
            grading: g.grading,
        }
    }
}

impl GeometryConfig {
    pub fn geometry(&self, ell: f64) -> Result<CtGeometry> {
        let g = CtGeometry {
            w: self.w,
            b: self.b,
            a0: self.a0,
            pin: self.pin,
            front_offset: self.front_offset,
            half_height: self.half_height,
            notch_half_width: self.notch_half_width,
            band_half_height: self.band_half_height.unwrap_or(0.5 * ell),
            refine_length: self.refine_length,
            grading: self.grading,
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadConfig {
    /// Peak force [N]; ignored when `delta_P` is given.
    #[serde(rename = "P_max", skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(rename = "delta_P", skip_serializing_if = "Option::is_none")]
    pub delta_p: Option<f64>,
    #[serde(rename = "R")]
    pub r: f64,
    pub f: f64,
    pub waveform: Waveform,
    pub increments_per_cycle: u32,
    pub max_cycles: u64,
    pub soak_duration: f64,
    pub precharged: bool,
    #[serde(rename = "p_H2")]
    pub p_h2: f64,
    pub cycle_jump: u64,
    /// Holds ΔK [MPa·√m] constant by adjusting ΔP every cycle.
    #[serde(rename = "delta_K_control", skip_serializing_if = "Option::is_none")]
    pub delta_k_control: Option<f64>,
}

impl Default for LoadConfig {
    fn default() -> Self {
        let p = LoadProgram::default();
        LoadConfig {
            p_max: Some(p.p_max),
            delta_p: None,
            r: p.r,
            f: p.f,
            waveform: p.waveform,
            increments_per_cycle: p.increments_per_cycle,
            max_cycles: p.max_cycles,
            soak_duration: p.soak_duration,
            precharged: p.precharged,
            p_h2: p.p_h2,
            cycle_jump: p.cycle_jump,
            delta_k_control: None,
        }
    }
}

impl LoadConfig {
    pub fn program(&self) -> Result<LoadProgram> {
        if !(0.0..1.0).contains(&self.r) {
            return Err(Error::config(format!("load.R = {} must lie in [0, 1)", self.r)));
        }
        let p_max = match (self.delta_p, self.p_max) {
            (Some(dp), _) => dp / (1.0 - self.r),
            (None, Some(p)) => p,
            (None, None) => return Err(Error::config("load needs P_max or delta_P")),
        };
        let p = LoadProgram {
            p_max,
            r: self.r,
            f: self.f,
            waveform: self.waveform,
            increments_per_cycle: self.increments_per_cycle,
            max_cycles: self.max_cycles,
            soak_duration: self.soak_duration,
            precharged: self.precharged,
            p_h2: self.p_h2,
            cycle_jump: self.cycle_jump,
            delta_k_control: self.delta_k_control,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Pin loading as written in the file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum PinConfig {
    Node,
    Distributed { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Staggering tolerance on max |Δφ|; `inf` gives a single pass.
    pub tol_stagger: f64,
    pub max_stagger_iterations: u32,
    pub alpha_degraded: bool,
    pub sigma_h_damaged: bool,
    pub stabilization: bool,
    pub phi_exposure: f64,
    pub penalty_factor: f64,
    pub pin: PinConfig,
    pub coefficient_set: CoefficientSet,
    pub max_a_over_w: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = DriverOptions::default();
        SolverConfig {
            tol_stagger: o.tol_stagger,
            max_stagger_iterations: o.max_stagger_iterations,
            alpha_degraded: o.alpha_degraded,
            sigma_h_damaged: o.mech.sigma_h_damaged,
            stabilization: o.transport.stabilization,
            phi_exposure: o.transport.phi_exposure,
            penalty_factor: o.transport.penalty_factor,
            pin: PinConfig::Node,
            coefficient_set: o.coefficient_set,
            max_a_over_w: o.max_a_over_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub run_id: String,
    /// Output directory, relative to the working directory.
    pub directory: PathBuf,
    /// Cycles between VTK snapshots; 0 disables them.
    pub snapshot_every: u64,
    /// Crack-length logging increment [mm].
    #[serde(rename = "delta_a_log")]
    pub delta_a_log: f64,
    /// Cycles between checkpoints; 0 disables them.
    pub checkpoint_every: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            run_id: "run".into(),
            directory: PathBuf::from("output"),
            snapshot_every: 0,
            delta_a_log: 0.1,
            checkpoint_every: 0,
        }
    }
}

/// Full description of one virtual experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub material: MaterialConfig,
    pub fatigue: FatigueConfig,
    pub hydrogen: HydrogenConfig,
    pub geometry: GeometryConfig,
    pub load: LoadConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

/// Parameters built from a resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedParts {
    pub material: MaterialParams,
    pub fatigue: FatigueParams,
    pub hydrogen: HydrogenParams,
    pub geometry: CtGeometry,
    pub program: LoadProgram,
    pub options: DriverOptions,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        raw.resolve()
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Fills derived values and checks physical consistency.
    pub fn resolve(mut self) -> Result<Self> {
        let m = self.material.params()?;
        if self.load.delta_p.is_some() {
            self.load.p_max = None;
        }
        self.material.ell = Some(m.ell);
        self.material.sigma_c = Some(m.sigma_c);
        self.material.eps_c = Some(m.eps_c);
        if self.fatigue.alpha_n.is_none() {
            self.fatigue.alpha_n = Some(m.alpha_n());
        }
        if self.geometry.band_half_height.is_none() {
            self.geometry.band_half_height = Some(0.5 * m.ell);
        }
        self.parts()?;
        Ok(self)
    }

    pub fn parts(&self) -> Result<ResolvedParts> {
        let material = self.material.params()?;
        let fatigue = FatigueParams {
            n: self.fatigue.n,
            kappa: self.fatigue.kappa,
            alpha_bar_0: self.fatigue.alpha_bar_0,
            alpha_e: self.fatigue.alpha_e,
            alpha_n: self.fatigue.alpha_n.unwrap_or_else(|| material.alpha_n()),
            n_hydrogen_override: self.fatigue.n_hydrogen_override,
        };
        fatigue.validate().map_err(|e| Error::config(format!("fatigue: {e}")))?;
        let hydrogen = self.hydrogen.params()?;
        let geometry = self.geometry.geometry(material.ell)?;
        let program = self.load.program()?;
        let s = &self.solver;
        let options = DriverOptions {
            tol_stagger: s.tol_stagger,
            max_stagger_iterations: s.max_stagger_iterations,
            alpha_degraded: s.alpha_degraded,
            mech: MechOptions {
                sigma_h_damaged: s.sigma_h_damaged,
            },
            transport: TransportOptions {
                phi_exposure: s.phi_exposure,
                penalty_factor: s.penalty_factor,
                stabilization: s.stabilization,
            },
            pin: match s.pin {
                PinConfig::Node => PinLoad::Node,
                PinConfig::Distributed { radius } => PinLoad::Distributed { radius },
            },
            coefficient_set: s.coefficient_set,
            log_delta_a: self.output.delta_a_log,
            max_a_over_w: s.max_a_over_w,
        };
        options.validate()?;
        if self.output.run_id.is_empty() || self.output.run_id.contains(['/', '\\', ',']) {
            return Err(Error::config(format!(
                "output.run_id {:?} must be non-empty without separators or commas",
                self.output.run_id
            )));
        }
        Ok(ResolvedParts {
            material,
            fatigue,
            hydrogen,
            geometry,
            program,
            options,
        })
    }
}

/// Reads and resolves a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes the resolved configuration next to the outputs.
pub fn write_echo(config: &ExperimentConfig, path: &Path) -> Result<()> {
    std::fs::write(path, config.to_toml_string()?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_values() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        let p = c.parts().unwrap();
        assert_eq!(p.material.e, 210_000.0);
        assert_eq!(p.material.nu, 0.3);
        assert_eq!(p.material.gc0, 100.0);
        assert!((p.material.ell - 0.27).abs() < 0.02 * 0.27);
        assert_eq!(p.fatigue.n, 1.25);
        assert_eq!(p.fatigue.alpha_bar_0, 8.0);
        assert_eq!(p.hydrogen.solubility, 0.077);
        assert_eq!(p.geometry.w, 50.8);
        assert_eq!(p.program.r, 0.1);
        assert_eq!(p.options.coefficient_set, CoefficientSet::Astm);
        assert_eq!(p.options.tol_stagger, f64::INFINITY);
    }

    #[test]
    fn rejects_r_of_one_or_more() {
        let e = ExperimentConfig::from_toml_str("[load]\nR = 1.2\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("R"));
    }

    #[test]
    fn rejects_unknown_key_by_name() {
        let e = ExperimentConfig::from_toml_str("[load]\nspeling = 3\n").unwrap_err();
        assert!(e.to_string().contains("speling"), "{e}");
        let e = ExperimentConfig::from_toml_str("speling = 3\n").unwrap_err();
        assert!(e.to_string().contains("speling"), "{e}");
    }

    #[test]
    fn wrong_type_names_key() {
        let e = ExperimentConfig::from_toml_str("[load]\nf = \"fast\"\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("f") && msg.contains("invalid type"), "{msg}");
    }

    #[test]
    fn echo_round_trips_exactly() {
        let text = "[material]\nell = 0.3\n[load]\ndelta_P = 1200.0\nR = 0.4\nwaveform = \"triangular\"\n\
                    [solver]\ntol_stagger = 1e-4\npin = { kind = \"distributed\", radius = 1.0 }\n\
                    coefficient_set = \"paper_as_written\"\n";
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        let echo = c.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&echo).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml_string().unwrap(), echo);
        let d = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(
            ExperimentConfig::from_toml_str(&d.to_toml_string().unwrap()).unwrap(),
            d
        );
    }

    #[test]
    fn inconsistent_material_is_rejected() {
        let e = ExperimentConfig::from_toml_str("[material]\nell = 0.27\nsigma_c = 1000.0\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn delta_p_sets_peak() {
        let c = ExperimentConfig::from_toml_str("[load]\ndelta_P = 900.0\nR = 0.1\n").unwrap();
        assert!((c.parts().unwrap().program.p_max - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn gas_constant_is_fixed() {
        assert!(ExperimentConfig::from_toml_str("[hydrogen]\nRg = 8.314\n").is_err());
    }
}
