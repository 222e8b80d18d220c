//! Decay models: the objects that measurement protocols act on.

use num_complex::Complex64;

use crate::amplitude::{exp_m1, pole_term, survival_minus_one, LorentzianSurvival, SpectralDensity, SpectralOptions};
use crate::error::{Error, Result};
use crate::formfactor::{Family, FormFactor};
use crate::resolvent::PoleData;

/// Below `τ·Λ` of this size the effective rate is taken from its quadratic
/// short-time limit `τ/τ_Z²`.
pub const SHORT_TIME_LIMIT: f64 = 1e-3;

pub trait SurvivalModel: Sync {
    fn amplitude(&self, t: f64) -> Result<Complex64>;

    /// `x(t) - 1`. Override when it can be formed without cancellation.
    fn amplitude_deviation(&self, t: f64) -> Result<Complex64> {
        Ok(self.amplitude(t)? - 1.0)
    }

    fn survival(&self, t: f64) -> Result<f64> {
        Ok(self.amplitude(t)?.norm_sqr())
    }

    fn ln_survival(&self, t: f64) -> Result<f64> {
        let d = self.amplitude_deviation(t)?;
        if d.norm() <= 0.5 {
            Ok(survival_minus_one(d).ln_1p())
        } else {
            Ok(2.0 * self.amplitude(t)?.norm().ln())
        }
    }

    fn pole(&self) -> Result<&PoleData>;
    fn zeno_time(&self) -> Result<f64>;
    fn bandwidth(&self) -> f64;

    /// Closed-form rate for very short intervals, if the model has one.
    fn short_time_rate(&self, tau: f64) -> Option<f64> {
        let tz = self.zeno_time().ok()?;
        (tau * self.bandwidth() < SHORT_TIME_LIMIT).then(|| tau / (tz * tz))
    }

    fn is_lorentzian(&self) -> bool {
        false
    }

    fn coupling(&self) -> Option<f64> {
        None
    }

    fn form_factor(&self) -> Option<FormFactor> {
        None
    }

    fn omega_a(&self) -> Option<f64> {
        None
    }
}

impl SurvivalModel for LorentzianSurvival {
    fn amplitude(&self, t: f64) -> Result<Complex64> {
        check_forward(t)?;
        Ok(LorentzianSurvival::amplitude(self, t))
    }

    fn amplitude_deviation(&self, t: f64) -> Result<Complex64> {
        check_forward(t)?;
        Ok(self.deviation(t))
    }

    fn ln_survival(&self, t: f64) -> Result<f64> {
        check_forward(t)?;
        Ok(LorentzianSurvival::ln_survival(self, t))
    }

    fn pole(&self) -> Result<&PoleData> {
        Ok(LorentzianSurvival::pole(self))
    }

    fn zeno_time(&self) -> Result<f64> {
        Ok(1.0 / self.lambda())
    }

    fn bandwidth(&self) -> f64 {
        LorentzianSurvival::bandwidth(self)
    }

    fn is_lorentzian(&self) -> bool {
        true
    }

    fn coupling(&self) -> Option<f64> {
        Some(self.lambda())
    }

    fn form_factor(&self) -> Option<FormFactor> {
        FormFactor::lorentzian(self.lambda(), LorentzianSurvival::bandwidth(self)).ok()
    }

    fn omega_a(&self) -> Option<f64> {
        Some(LorentzianSurvival::omega_a(self))
    }
}

fn check_forward(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be finite and non-negative, got {t}")))
    }
}

/// A general form factor evaluated through its spectral density.
#[derive(Debug)]
pub struct SpectralModel {
    ff: FormFactor,
    omega_a: f64,
    density: SpectralDensity,
}

impl SpectralModel {
    pub fn new(ff: FormFactor, omega_a: f64, opts: SpectralOptions) -> Result<Self> {
        let density = SpectralDensity::build(&ff, omega_a, opts)?;
        Ok(Self { ff, omega_a, density })
    }

    pub fn density(&self) -> &SpectralDensity {
        &self.density
    }
}

impl SurvivalModel for SpectralModel {
    fn amplitude(&self, t: f64) -> Result<Complex64> {
        self.density.amplitude(t)
    }

    fn amplitude_deviation(&self, t: f64) -> Result<Complex64> {
        self.density.deviation(t)
    }

    fn pole(&self) -> Result<&PoleData> {
        self.density.pole().ok_or_else(|| {
            Error::ContinuationUnsupported(format!(
                "no decay pole available for the {} family at omega_a = {}",
                self.ff.family(),
                self.omega_a
            ))
        })
    }

    fn zeno_time(&self) -> Result<f64> {
        self.ff.zeno_time()
    }

    fn bandwidth(&self) -> f64 {
        self.ff.bandwidth()
    }

    fn is_lorentzian(&self) -> bool {
        self.ff.family() == Family::Lorentzian
    }

    fn coupling(&self) -> Option<f64> {
        Some(self.ff.lambda())
    }

    fn form_factor(&self) -> Option<FormFactor> {
        Some(self.ff.clone())
    }

    fn omega_a(&self) -> Option<f64> {
        Some(self.omega_a)
    }
}

/// The bare exponential `√𝒵 e^{-iRe(E)t - γ₀t/2}`; it has no quadratic
/// short-time regime.
#[derive(Debug, Clone)]
pub struct PoleModel {
    pole: PoleData,
    bandwidth: f64,
}

impl PoleModel {
    pub fn new(pole: PoleData, bandwidth: f64) -> Result<Self> {
        if !(pole.z_renorm > 0.0 && pole.gamma0 >= 0.0 && bandwidth > 0.0) {
            return Err(Error::invalid("pole model needs 𝒵 > 0, γ₀ ≥ 0 and a positive bandwidth"));
        }
        Ok(Self { pole, bandwidth })
    }
}

impl SurvivalModel for PoleModel {
    fn amplitude(&self, t: f64) -> Result<Complex64> {
        check_forward(t)?;
        Ok(pole_term(&self.pole, t))
    }

    fn amplitude_deviation(&self, t: f64) -> Result<Complex64> {
        check_forward(t)?;
        let z = Complex64::new(0.5 * self.pole.z_renorm.ln() - 0.5 * self.pole.gamma0 * t, -self.pole.e_pole.re * t);
        Ok(exp_m1(z))
    }

    fn ln_survival(&self, t: f64) -> Result<f64> {
        check_forward(t)?;
        Ok(self.pole.z_renorm.ln() - self.pole.gamma0 * t)
    }

    fn pole(&self) -> Result<&PoleData> {
        Ok(&self.pole)
    }

    fn zeno_time(&self) -> Result<f64> {
        Err(Error::InfiniteZenoTime)
    }

    fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    fn short_time_rate(&self, _tau: f64) -> Option<f64> {
        None
    }
}

/// Closed form for Lorentzian form factors, spectral integral otherwise.
#[derive(Debug)]
pub enum DecayModel {
    Lorentzian(LorentzianSurvival),
    Spectral(Box<SpectralModel>),
    Pole(PoleModel),
}

impl DecayModel {
    pub fn new(ff: &FormFactor, omega_a: f64) -> Result<Self> {
        Self::with_options(ff, omega_a, SpectralOptions::default())
    }

    pub fn with_options(ff: &FormFactor, omega_a: f64, opts: SpectralOptions) -> Result<Self> {
        if ff.lambda() == 0.0 {
            return Err(Error::NoDecay("zero coupling: the level is stationary".into()));
        }
        match ff.family() {
            Family::Lorentzian => Ok(Self::Lorentzian(LorentzianSurvival::new(ff.lambda(), ff.bandwidth(), omega_a)?)),
            _ => Ok(Self::Spectral(Box::new(SpectralModel::new(ff.clone(), omega_a, opts)?))),
        }
    }

    fn inner(&self) -> &dyn SurvivalModel {
        match self {
            Self::Lorentzian(m) => m,
            Self::Spectral(m) => m.as_ref(),
            Self::Pole(m) => m,
        }
    }
}

impl SurvivalModel for DecayModel {
    fn amplitude(&self, t: f64) -> Result<Complex64> {
        self.inner().amplitude(t)
    }
    fn amplitude_deviation(&self, t: f64) -> Result<Complex64> {
        self.inner().amplitude_deviation(t)
    }
    fn ln_survival(&self, t: f64) -> Result<f64> {
        self.inner().ln_survival(t)
    }
    fn pole(&self) -> Result<&PoleData> {
        self.inner().pole()
    }
    fn zeno_time(&self) -> Result<f64> {
        self.inner().zeno_time()
    }
    fn bandwidth(&self) -> f64 {
        self.inner().bandwidth()
    }
    fn short_time_rate(&self, tau: f64) -> Option<f64> {
        self.inner().short_time_rate(tau)
    }
    fn is_lorentzian(&self) -> bool {
        self.inner().is_lorentzian()
    }
    fn coupling(&self) -> Option<f64> {
        self.inner().coupling()
    }
    fn form_factor(&self) -> Option<FormFactor> {
        self.inner().form_factor()
    }
    fn omega_a(&self) -> Option<f64> {
        self.inner().omega_a()
    }
}
