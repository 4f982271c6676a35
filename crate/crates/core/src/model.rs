//! Material parameters, unit conventions and the pointwise laws shared by
//! every physics module.
//!
//! All quantities use the mm–N–s–MPa system with concentrations in wppm.
//! Toughness is therefore in N/mm (1 kJ/m² = 1 N/mm) and energy densities in
//! N/mm² (= MPa).

use crate::error::{Error, Result};

/// Unit conventions.
pub mod units {
    /// Gas constant in N·mm/(mol·K).
    pub const GAS_CONSTANT: f64 = 8314.0;
    /// √1000: converts MPa·√m to MPa·√mm.
    pub const SQRT_MM_PER_M: f64 = 31.622_776_601_683_793;

    pub fn mpa_sqrt_m_to_mpa_sqrt_mm(k: f64) -> f64 {
        k * SQRT_MM_PER_M
    }

    pub fn mpa_sqrt_mm_to_mpa_sqrt_m(k: f64) -> f64 {
        k / SQRT_MM_PER_M
    }

    /// Dimensionless drift group V_H·σ_h/(R_g·T). With V_H in mm³/mol and
    /// σ_h in MPa no conversion factor is needed.
    pub fn drift_group(partial_molar_volume: f64, sigma_h: f64, temperature: f64) -> f64 {
        partial_molar_volume * sigma_h / (GAS_CONSTANT * temperature)
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

/// Elastic, fracture and derived phase-field constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Young's modulus [MPa].
    pub e: f64,
    /// Poisson ratio.
    pub nu: f64,
    /// Toughness in an inert environment [N/mm].
    pub gc0: f64,
    /// Phase-field length scale [mm].
    pub ell: f64,
    /// Critical strength [MPa].
    pub sigma_c: f64,
    /// Critical strain.
    pub eps_c: f64,
}

impl MaterialParams {
    /// Builds the parameter set from the critical strength; ℓ is derived.
    pub fn from_strength(e: f64, nu: f64, gc0: f64, sigma_c: f64) -> Result<Self> {
        let ell = derive_length_scale(e, gc0, sigma_c)?;
        Self::from_length_scale(e, nu, gc0, ell)
    }

    /// Builds the parameter set from the length scale; σ_c and ε_c are derived.
    pub fn from_length_scale(e: f64, nu: f64, gc0: f64, ell: f64) -> Result<Self> {
        require(nu > 0.0 && nu < 0.5, || format!("Poisson ratio {nu} not in (0, 0.5)"))?;
        let sigma_c = derive_strength(e, gc0, ell)?;
        let eps_c = critical_strain(e, gc0, ell)?;
        let p = MaterialParams {
            e,
            nu,
            gc0,
            ell,
            sigma_c,
            eps_c,
        };
        p.validate()?;
        Ok(p)
    }

    /// Reference steel: E = 210 GPa, ν = 0.3, G_c = 100 kJ/m², σ_c = 4 × 715 MPa.
    pub fn reference_steel() -> Self {
        Self::from_strength(210_000.0, 0.3, 100.0, 4.0 * 715.0).expect("reference values are valid")
    }

    pub fn validate(&self) -> Result<()> {
        require(self.e > 0.0, || format!("E = {} must be positive", self.e))?;
        require(self.nu > 0.0 && self.nu < 0.5, || {
            format!("Poisson ratio {} not in (0, 0.5)", self.nu)
        })?;
        require(self.gc0 > 0.0, || format!("Gc0 = {} must be positive", self.gc0))?;
        require(self.ell > 0.0, || format!("ell = {} must be positive", self.ell))?;
        let sigma = derive_strength(self.e, self.gc0, self.ell)?;
        let eps = critical_strain(self.e, self.gc0, self.ell)?;
        require((self.sigma_c - sigma).abs() <= 1e-10 * sigma, || {
            format!(
                "sigma_c = {} inconsistent with (E, Gc0, ell): expected {sigma}",
                self.sigma_c
            )
        })?;
        require((self.eps_c - eps).abs() <= 1e-10 * eps, || {
            format!("eps_c = {} inconsistent with (E, Gc0, ell): expected {eps}", self.eps_c)
        })
    }

    /// Fatigue normalisation α_n = σ_c·ε_c/2 [N/mm²].
    pub fn alpha_n(&self) -> f64 {
        self.sigma_c * self.eps_c / 2.0
    }

    /// Lamé constants (λ, μ).
    pub fn lame(&self) -> (f64, f64) {
        let lambda = self.e * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu));
        let mu = self.e / (2.0 * (1.0 + self.nu));
        (lambda, mu)
    }
}

/// Cyclic damage law constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FatigueParams {
    /// Fatigue exponent n.
    pub n: f64,
    /// Mean-stress sensitivity κ.
    pub kappa: f64,
    /// Fatigue degradation rate parameter ᾱ₀ [N/mm²].
    pub alpha_bar_0: f64,
    /// Fatigue threshold α_e [N/mm²].
    pub alpha_e: f64,
    /// Normalisation α_n [N/mm²].
    pub alpha_n: f64,
    /// Exponent used instead of `n` when the gas pressure is positive.
    pub n_hydrogen_override: Option<f64>,
}

impl FatigueParams {
    /// Reference values for the pressure-vessel steel, with α_n taken from
    /// the material.
    pub fn reference(material: &MaterialParams) -> Self {
        FatigueParams {
            n: 1.25,
            kappa: 0.78,
            alpha_bar_0: 8.0,
            alpha_e: 0.05,
            alpha_n: material.alpha_n(),
            n_hydrogen_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(self.n > 0.0, || {
            format!("fatigue exponent n = {} must be positive", self.n)
        })?;
        require(self.kappa >= 0.0, || {
            format!("kappa = {} must be non-negative", self.kappa)
        })?;
        require(self.alpha_bar_0 > 0.0, || {
            format!("alpha_bar_0 = {} must be positive", self.alpha_bar_0)
        })?;
        require(self.alpha_e >= 0.0, || {
            format!("alpha_e = {} must be non-negative", self.alpha_e)
        })?;
        require(self.alpha_n > 0.0, || {
            format!("alpha_n = {} must be positive", self.alpha_n)
        })?;
        if let Some(n_h) = self.n_hydrogen_override {
            require(n_h > 0.0, || format!("n_hydrogen_override = {n_h} must be positive"))?;
        }
        Ok(())
    }

    /// Fatigue exponent in effect for a given environmental pressure.
    pub fn exponent_for_pressure(&self, p_h2: f64) -> f64 {
        match self.n_hydrogen_override {
            Some(n_h) if p_h2 > 0.0 => n_h,
            _ => self.n,
        }
    }
}

/// Transport and toughness-degradation constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydrogenParams {
    /// Apparent diffusivity [mm²/s].
    pub d: f64,
    /// Partial molar volume [mm³/mol].
    pub v_h: f64,
    /// Absolute temperature [K].
    pub temperature: f64,
    /// Solubility [wppm·MPa^-0.5].
    pub solubility: f64,
    pub xi: f64,
    pub eta: f64,
    pub b: f64,
}

impl Default for HydrogenParams {
    fn default() -> Self {
        HydrogenParams {
            d: 2e-4,
            v_h: 2000.0,
            temperature: 300.0,
            solubility: 0.077,
            xi: 0.12,
            eta: 7.0,
            b: 2.0,
        }
    }
}

impl HydrogenParams {
    pub const RG: f64 = units::GAS_CONSTANT;

    pub fn validate(&self) -> Result<()> {
        require(self.d > 0.0, || format!("diffusivity D = {} must be positive", self.d))?;
        require(self.v_h > 0.0, || format!("V_H = {} must be positive", self.v_h))?;
        require(self.temperature > 0.0, || {
            format!("temperature T = {} must be positive", self.temperature)
        })?;
        require(self.solubility >= 0.0, || {
            format!("solubility S = {} must be non-negative", self.solubility)
        })?;
        require((0.0..=1.0).contains(&self.xi), || {
            format!("xi = {} not in [0, 1]", self.xi)
        })?;
        require(self.eta >= 0.0, || format!("eta = {} must be non-negative", self.eta))?;
        require(self.b > 0.0, || format!("b = {} must be positive", self.b))
    }

    /// Drift coefficient D·V_H/(R_g·T) [mm²/(s·MPa)].
    pub fn drift_coefficient(&self) -> f64 {
        self.d * self.v_h / (Self::RG * self.temperature)
    }

    pub fn f_h(&self, c: f64) -> f64 {
        let c = c.max(0.0);
        self.xi + (1.0 - self.xi) * (-self.eta * c.powf(self.b)).exp()
    }
}

/// Quadratic degradation g(φ) = (1−φ)².
pub fn degradation_g(phi: f64) -> Result<f64> {
    require((0.0..=1.0).contains(&phi), || {
        format!("phase field {phi} not in [0, 1]")
    })?;
    Ok((1.0 - phi) * (1.0 - phi))
}

/// g'(φ) = −2(1−φ).
pub fn degradation_g_prime(phi: f64) -> Result<f64> {
    require((0.0..=1.0).contains(&phi), || {
        format!("phase field {phi} not in [0, 1]")
    })?;
    Ok(-2.0 * (1.0 - phi))
}

/// Hydrogen toughness degradation f_H(C) = ξ + (1−ξ)·exp(−η·C^b).
pub fn hydrogen_degradation_fh(c: f64, params: &HydrogenParams) -> Result<f64> {
    require(c >= 0.0, || format!("concentration {c} must be non-negative"))?;
    Ok(params.f_h(c))
}

/// Fatigue toughness degradation f_F(ᾱ) = (1 − ᾱ/(ᾱ+ᾱ₀))².
pub fn fatigue_degradation_ff(alpha_bar: f64, params: &FatigueParams) -> Result<f64> {
    require(alpha_bar >= 0.0, || {
        format!("fatigue history {alpha_bar} must be non-negative")
    })?;
    Ok(fatigue_factor(alpha_bar, params.alpha_bar_0))
}

#[inline]
pub(crate) fn fatigue_factor(alpha_bar: f64, alpha_bar_0: f64) -> f64 {
    let r = alpha_bar_0 / (alpha_bar + alpha_bar_0);
    r * r
}

/// Sievert's law: C_env = S·√p.
pub fn sieverts_concentration(p_h2: f64, solubility: f64) -> Result<f64> {
    require(p_h2 >= 0.0, || format!("gas pressure {p_h2} must be non-negative"))?;
    Ok(solubility * p_h2.sqrt())
}

/// Length scale such that the homogeneous AT2 peak stress equals σ_c:
/// ℓ = (81/256)·E·G_c/(3σ_c²).
pub fn derive_length_scale(e: f64, gc0: f64, sigma_c: f64) -> Result<f64> {
    require(e > 0.0 && gc0 > 0.0 && sigma_c > 0.0, || {
        format!("E, Gc0, sigma_c must be positive (got {e}, {gc0}, {sigma_c})")
    })?;
    Ok(81.0 / 256.0 * e * gc0 / (3.0 * sigma_c * sigma_c))
}

/// σ_c = (9/16)·√(E·G_c/(3ℓ)).
pub fn derive_strength(e: f64, gc0: f64, ell: f64) -> Result<f64> {
    require(e > 0.0 && gc0 > 0.0 && ell > 0.0, || {
        format!("E, Gc0, ell must be positive (got {e}, {gc0}, {ell})")
    })?;
    Ok(9.0 / 16.0 * (e * gc0 / (3.0 * ell)).sqrt())
}

/// ε_c = √(G_c/(3ℓE)).
pub fn critical_strain(e: f64, gc0: f64, ell: f64) -> Result<f64> {
    require(e > 0.0 && gc0 > 0.0 && ell > 0.0, || {
        format!("E, Gc0, ell must be positive (got {e}, {gc0}, {ell})")
    })?;
    Ok((gc0 / (3.0 * ell * e)).sqrt())
}

/// Plane-strain toughness from K_Ic [MPa·√m]: G_c = (1−ν²)K²/E in N/mm.
pub fn toughness_from_kic(k_ic: f64, e: f64, nu: f64) -> Result<f64> {
    require(k_ic >= 0.0, || format!("K_Ic = {k_ic} must be non-negative"))?;
    require(e > 0.0, || format!("E = {e} must be positive"))?;
    require((0.0..0.5).contains(&nu), || {
        format!("Poisson ratio {nu} not in [0, 0.5)")
    })?;
    let k_mm = units::mpa_sqrt_m_to_mpa_sqrt_mm(k_ic);
    Ok((1.0 - nu * nu) * k_mm * k_mm / e)
}

/// Inverse of [`toughness_from_kic`]; returns K_Ic in MPa·√m.
pub fn kic_from_toughness(gc: f64, e: f64, nu: f64) -> Result<f64> {
    require(gc >= 0.0, || format!("Gc = {gc} must be non-negative"))?;
    require(e > 0.0, || format!("E = {e} must be positive"))?;
    require((0.0..0.5).contains(&nu), || {
        format!("Poisson ratio {nu} not in [0, 0.5)")
    })?;
    Ok(units::mpa_sqrt_mm_to_mpa_sqrt_m((gc * e / (1.0 - nu * nu)).sqrt()))
}

const PARIS_SLOPE: f64 = 0.49;
const PARIS_OFFSET: f64 = 0.61;

/// Fatigue exponent from the Paris slope: n = 0.49·m − 0.61.
pub fn fatigue_exponent_from_paris(m: f64) -> Result<f64> {
    let n = PARIS_SLOPE * m - PARIS_OFFSET;
    require(n > 0.0, || {
        format!("Paris slope m = {m} gives non-positive exponent n = {n}")
    })?;
    Ok(n)
}

/// Paris slope from the fatigue exponent: m = (n + 0.61)/0.49.
pub fn paris_from_fatigue_exponent(n: f64) -> Result<f64> {
    require(n > 0.0, || format!("fatigue exponent n = {n} must be positive"))?;
    Ok((n + PARIS_OFFSET) / PARIS_SLOPE)
}
