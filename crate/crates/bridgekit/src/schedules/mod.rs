//! Probability-path schedules for paired data.
//!
//! Every schedule defines coefficient functions (a_t, b_t, sigma_t) with
//! time derivatives, so the marginal at time t is Gaussian with mean
//! a_t·s + b_t·y and standard deviation sigma_t. The sampling direction is
//! fixed per kind: the bridge family keeps clean data at t = 0 and samples
//! in reverse time, while optimal-transport flow matching keeps clean data
//! at t = 1 and samples forward.

mod expint;

pub use expint::{expint_ei, EULER_GAMMA};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{BridgeError, Result};

/// Times closer than this to a Dirac endpoint are treated as singular by
/// operations that divide by sigma.
pub const DIRAC_GUARD: f64 = 1e-12;

/// Below this proximity to t = 1, the (1-t)·Ei[2(t-1)·log k] product in the
/// BBED variance is replaced by its limit 0.
const BBED_LIMIT_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Ouve,
    Bbed,
    SbGeneral,
    Sbve,
    OtCfm,
    SbCfm,
}

impl ScheduleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScheduleKind::Ouve => "ouve",
            ScheduleKind::Bbed => "bbed",
            ScheduleKind::SbGeneral => "sb-general",
            ScheduleKind::Sbve => "sbve",
            ScheduleKind::OtCfm => "ot-cfm",
            ScheduleKind::SbCfm => "sb-cfm",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "ouve" => Ok(ScheduleKind::Ouve),
            "bbed" => Ok(ScheduleKind::Bbed),
            "sb-general" => Ok(ScheduleKind::SbGeneral),
            "sbve" => Ok(ScheduleKind::Sbve),
            "ot-cfm" => Ok(ScheduleKind::OtCfm),
            "sb-cfm" => Ok(ScheduleKind::SbCfm),
            other => Err(BridgeError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the clean endpoint sits, which fixes the sampling direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Clean data at t = 0; sampling runs in reverse time (bridge family).
    CleanAtT0,
    /// Clean data at t = 1; sampling runs forward in time (OT-CFM).
    CleanAtT1,
}

/// Coefficients of the Gaussian path at one time, with derivatives.
///
/// `sigma` is always a standard deviation; kinds whose defining formula is
/// a variance are square-rooted internally. `dsigma` is +/-infinity at a
/// Dirac endpoint where the one-sided derivative diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCoefficients {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub da: f64,
    pub db: f64,
    pub dsigma: f64,
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The Schr\u{f6}dinger-bridge family expressed through alpha_t and rho_t^2.
///
/// `alpha(t) = exp(int_0^t f)`, `rho_sq(t) = int_0^t g^2 alpha^-2`; the path
/// coefficients follow as a = alpha·rhobar^2/rho1^2, b = (alpha/alpha1)·rho^2/rho1^2,
/// sigma^2 = alpha^2·rho^2·rhobar^2/rho1^2 with rhobar^2 = rho1^2 - rho^2.
#[derive(Clone)]
pub struct SbFunctions {
    pub alpha: ScalarFn,
    pub dalpha: ScalarFn,
    pub rho_sq: ScalarFn,
    pub drho_sq: ScalarFn,
}

impl SbFunctions {
    pub fn new(
        alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dalpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rho_sq: impl Fn(f64) -> f64 + Send + Sync + 'static,
        drho_sq: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            alpha: Arc::new(alpha),
            dalpha: Arc::new(dalpha),
            rho_sq: Arc::new(rho_sq),
            drho_sq: Arc::new(drho_sq),
        }
    }

    pub fn rhobar_sq(&self, t: f64) -> f64 {
        (self.rho_sq)(1.0) - (self.rho_sq)(t)
    }

    fn coefficients(&self, t: f64) -> PathCoefficients {
        let alpha = (self.alpha)(t);
        let dalpha = (self.dalpha)(t);
        let alpha1 = (self.alpha)(1.0);
        let rho1_sq = (self.rho_sq)(1.0);
        let rho_sq = (self.rho_sq)(t);
        let drho_sq = (self.drho_sq)(t);
        let rhobar_sq = rho1_sq - rho_sq;

        let a = alpha * rhobar_sq / rho1_sq;
        let b = (alpha / alpha1) * rho_sq / rho1_sq;
        let f = dalpha / alpha;
        let da = f * a - alpha * drho_sq / rho1_sq;
        let db = f * b + (alpha / alpha1) * drho_sq / rho1_sq;

        let sigma_sq = (alpha * alpha * rho_sq * rhobar_sq / rho1_sq).max(0.0);
        let dsigma_sq =
            (2.0 * alpha * dalpha * rho_sq * rhobar_sq + alpha * alpha * drho_sq * (rhobar_sq - rho_sq))
                / rho1_sq;
        let sigma = sigma_sq.sqrt();
        let dsigma = dsigma_sq / (2.0 * sigma);

        PathCoefficients { a, b, sigma, da, db, dsigma }
    }
}

#[derive(Clone)]
enum Params {
    Ouve { gamma: f64, c: f64, k: f64 },
    Bbed { c: f64, k: f64 },
    Sbve { c: f64, k: f64 },
    SbCfm { sigma: f64 },
    OtCfm { sigma_max: f64, sigma_min: f64 },
    SbGeneral(SbFunctions),
}

/// A validated probability-path parameterization.
#[derive(Clone)]
pub struct Schedule {
    params: Params,
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.params() {
            Ok(map) => write!(f, "Schedule({} {:?})", self.kind(), map),
            Err(_) => write!(f, "Schedule({})", self.kind()),
        }
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(BridgeError::NonPositiveParameter { name, value })
    }
}

fn require_base(name: &'static str, value: f64) -> Result<f64> {
    require_positive(name, value)?;
    if value > 1.0 {
        Ok(value)
    } else {
        Err(BridgeError::DiffusionBaseTooSmall { name, value })
    }
}

impl Schedule {
    /// Ornstein-Uhlenbeck mean with variance-exploding diffusion.
    pub fn ouve(gamma: f64, c: f64, k: f64) -> Result<Self> {
        Ok(Self {
            params: Params::Ouve {
                gamma: require_positive("gamma", gamma)?,
                c: require_positive("c", c)?,
                k: require_base("k", k)?,
            },
        })
    }

    /// Brownian bridge with exponential (variance-exploding) diffusion.
    pub fn bbed(c: f64, k: f64) -> Result<Self> {
        Ok(Self {
            params: Params::Bbed {
                c: require_positive("c", c)?,
                k: require_base("k", k)?,
            },
        })
    }

    /// Schr\u{f6}dinger bridge with the variance-exploding diffusion (alpha = 1).
    pub fn sbve(c: f64, k: f64) -> Result<Self> {
        Ok(Self {
            params: Params::Sbve {
                c: require_positive("c", c)?,
                k: require_base("k", k)?,
            },
        })
    }

    /// Brownian-bridge path a = 1-t, b = t, sigma^2 = sigma^2 t(1-t).
    pub fn sb_cfm(sigma: f64) -> Result<Self> {
        Ok(Self {
            params: Params::SbCfm { sigma: require_positive("sigma", sigma)? },
        })
    }

    /// Optimal-transport conditional flow matching, clean data at t = 1.
    pub fn ot_cfm(sigma_max: f64, sigma_min: f64) -> Result<Self> {
        Ok(Self {
            params: Params::OtCfm {
                sigma_max: require_positive("sigma_max", sigma_max)?,
                sigma_min: require_positive("sigma_min", sigma_min)?,
            },
        })
    }

    /// General bridge from user-supplied alpha_t and rho_t^2.
    ///
    /// Constructible only through the API (not JSON); only alpha = 1 kinds
    /// are exercised against published forms.
    pub fn sb_general(funcs: SbFunctions) -> Self {
        Self { params: Params::SbGeneral(funcs) }
    }

    /// Build a schedule of `kind` from a named-parameter map.
    pub fn from_params(kind: ScheduleKind, params: &BTreeMap<String, f64>) -> Result<Self> {
        let kind_name = kind.as_str();
        let get = |name: &'static str| -> Result<f64> {
            params
                .get(name)
                .copied()
                .ok_or(BridgeError::MissingParameter { kind: kind_name, name })
        };
        let expect_only = |names: &[&str]| -> Result<()> {
            for key in params.keys() {
                if !names.contains(&key.as_str()) {
                    return Err(BridgeError::UnexpectedParameter(key.clone()));
                }
            }
            Ok(())
        };
        match kind {
            ScheduleKind::Ouve => {
                expect_only(&["gamma", "c", "k"])?;
                Self::ouve(get("gamma")?, get("c")?, get("k")?)
            }
            ScheduleKind::Bbed => {
                expect_only(&["c", "k"])?;
                Self::bbed(get("c")?, get("k")?)
            }
            ScheduleKind::Sbve => {
                expect_only(&["c", "k"])?;
                Self::sbve(get("c")?, get("k")?)
            }
            ScheduleKind::SbCfm => {
                expect_only(&["sigma"])?;
                Self::sb_cfm(get("sigma")?)
            }
            ScheduleKind::OtCfm => {
                expect_only(&["sigma_max", "sigma_min"])?;
                Self::ot_cfm(get("sigma_max")?, get("sigma_min")?)
            }
            ScheduleKind::SbGeneral => Err(BridgeError::NotSerializable("sb-general")),
        }
    }

    /// Parse `{"kind": string, "params": {string: number}}`.
    pub fn from_json(json: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Wire {
            kind: String,
            #[serde(default)]
            params: BTreeMap<String, f64>,
        }
        let wire: Wire = serde_json::from_str(json)?;
        Self::from_params(ScheduleKind::parse(&wire.kind)?, &wire.params)
    }

    /// Serialize to the `{"kind", "params"}` wire form. Lossless for all
    /// parametric kinds; `sb-general` is not representable.
    pub fn to_json(&self) -> Result<String> {
        #[derive(serde::Serialize)]
        struct Wire<'a> {
            kind: &'a str,
            params: BTreeMap<String, f64>,
        }
        let wire = Wire { kind: self.kind().as_str(), params: self.params()? };
        Ok(serde_json::to_string(&wire)?)
    }

    pub fn params(&self) -> Result<BTreeMap<String, f64>> {
        let mut map = BTreeMap::new();
        match &self.params {
            Params::Ouve { gamma, c, k } => {
                map.insert("gamma".into(), *gamma);
                map.insert("c".into(), *c);
                map.insert("k".into(), *k);
            }
            Params::Bbed { c, k } | Params::Sbve { c, k } => {
                map.insert("c".into(), *c);
                map.insert("k".into(), *k);
            }
            Params::SbCfm { sigma } => {
                map.insert("sigma".into(), *sigma);
            }
            Params::OtCfm { sigma_max, sigma_min } => {
                map.insert("sigma_max".into(), *sigma_max);
                map.insert("sigma_min".into(), *sigma_min);
            }
            Params::SbGeneral(_) => return Err(BridgeError::NotSerializable("sb-general")),
        }
        Ok(map)
    }

    pub fn kind(&self) -> ScheduleKind {
        match &self.params {
            Params::Ouve { .. } => ScheduleKind::Ouve,
            Params::Bbed { .. } => ScheduleKind::Bbed,
            Params::Sbve { .. } => ScheduleKind::Sbve,
            Params::SbCfm { .. } => ScheduleKind::SbCfm,
            Params::OtCfm { .. } => ScheduleKind::OtCfm,
            Params::SbGeneral(_) => ScheduleKind::SbGeneral,
        }
    }

    pub fn direction(&self) -> Direction {
        match self.kind() {
            ScheduleKind::OtCfm => Direction::CleanAtT1,
            _ => Direction::CleanAtT0,
        }
    }

    /// Time of the clean endpoint (0 or 1).
    pub fn clean_time(&self) -> f64 {
        match self.direction() {
            Direction::CleanAtT0 => 0.0,
            Direction::CleanAtT1 => 1.0,
        }
    }

    /// Time of the noisy endpoint (1 or 0).
    pub fn noisy_time(&self) -> f64 {
        1.0 - self.clean_time()
    }

    /// Whether sigma vanishes at the clean endpoint.
    pub fn dirac_at_clean(&self) -> bool {
        // Every bridge kind pins the clean endpoint; OT-CFM keeps sigma_min there.
        !matches!(self.kind(), ScheduleKind::OtCfm)
    }

    /// Whether sigma vanishes at the noisy endpoint.
    pub fn dirac_at_noisy(&self) -> bool {
        match &self.params {
            Params::Bbed { .. } | Params::Sbve { .. } | Params::SbCfm { .. } => true,
            Params::SbGeneral(funcs) => funcs.rhobar_sq(1.0).abs() < 1e-300,
            Params::Ouve { .. } | Params::OtCfm { .. } => false,
        }
    }

    /// True when t is within the singularity guard of a Dirac endpoint.
    pub fn is_dirac(&self, t: f64) -> bool {
        let clean = self.clean_time();
        let noisy = self.noisy_time();
        (self.dirac_at_clean() && (t - clean).abs() < DIRAC_GUARD)
            || (self.dirac_at_noisy() && (t - noisy).abs() < DIRAC_GUARD)
    }

    /// Evaluate (a, b, sigma) and their time derivatives at t in [0, 1].
    pub fn coefficients(&self, t: f64) -> Result<PathCoefficients> {
        if !(0.0..=1.0).contains(&t) {
            return Err(BridgeError::TimeOutOfRange(t));
        }
        Ok(match &self.params {
            Params::Ouve { gamma, c, k } => {
                let a = (-gamma * t).exp();
                let ln_k = k.ln();
                let sigma_sq = (c * ((2.0 * t * ln_k).exp() - (-2.0 * gamma * t).exp())
                    / (2.0 * (gamma + ln_k)))
                    .max(0.0);
                let dsigma_sq = c
                    * (ln_k * (2.0 * t * ln_k).exp() + gamma * (-2.0 * gamma * t).exp())
                    / (gamma + ln_k);
                let sigma = sigma_sq.sqrt();
                PathCoefficients {
                    a,
                    b: 1.0 - a,
                    sigma,
                    da: -gamma * a,
                    db: gamma * a,
                    dsigma: dsigma_sq / (2.0 * sigma),
                }
            }
            Params::Bbed { c, k } => {
                let ln_k = k.ln();
                let big_l = 2.0 * k * k * ln_k; // log(k^{2k^2})
                // (1-t)*Ei[2(t-1) log k] is a 0*(-inf) form at t = 1 with
                // limit 0; switch to the limit inside the guard band.
                let delta_ei = if 1.0 - t < BBED_LIMIT_GUARD {
                    -expint_ei(-2.0 * ln_k)?
                } else {
                    expint_ei(2.0 * (t - 1.0) * ln_k)? - expint_ei(-2.0 * ln_k)?
                };
                let e_t = ((2.0 * t * ln_k).exp() - 1.0 + t) + big_l * delta_ei * (1.0 - t);
                let sigma_sq = (c * (1.0 - t) * e_t).max(0.0);
                let dsigma_sq = c * (2.0 * (1.0 - t) - (2.0 * t * ln_k).exp())
                    - 2.0 * c * big_l * (1.0 - t) * delta_ei;
                let sigma = sigma_sq.sqrt();
                PathCoefficients {
                    a: 1.0 - t,
                    b: t,
                    sigma,
                    da: -1.0,
                    db: 1.0,
                    dsigma: dsigma_sq / (2.0 * sigma),
                }
            }
            Params::Sbve { c, k } => {
                let ln_k = k.ln();
                let rho1_sq = c * ((2.0 * ln_k).exp() - 1.0) / (2.0 * ln_k);
                let rho_sq = c * ((2.0 * t * ln_k).exp() - 1.0) / (2.0 * ln_k);
                let drho_sq = c * (2.0 * t * ln_k).exp();
                let rhobar_sq = rho1_sq - rho_sq;
                let sigma_sq = (rho_sq * rhobar_sq / rho1_sq).max(0.0);
                let sigma = sigma_sq.sqrt();
                PathCoefficients {
                    a: rhobar_sq / rho1_sq,
                    b: rho_sq / rho1_sq,
                    sigma,
                    da: -drho_sq / rho1_sq,
                    db: drho_sq / rho1_sq,
                    dsigma: drho_sq * (rhobar_sq - rho_sq) / rho1_sq / (2.0 * sigma),
                }
            }
            Params::SbCfm { sigma } => {
                let sp_sq = sigma * sigma;
                let sigma_t = (sp_sq * t * (1.0 - t)).max(0.0).sqrt();
                PathCoefficients {
                    a: 1.0 - t,
                    b: t,
                    sigma: sigma_t,
                    da: -1.0,
                    db: 1.0,
                    dsigma: sp_sq * (1.0 - 2.0 * t) / (2.0 * sigma_t),
                }
            }
            Params::OtCfm { sigma_max, sigma_min } => PathCoefficients {
                a: t,
                b: 1.0 - t,
                sigma: (1.0 - t) * sigma_max + t * sigma_min,
                da: 1.0,
                db: -1.0,
                dsigma: sigma_min - sigma_max,
            },
            Params::SbGeneral(funcs) => funcs.coefficients(t),
        })
    }

    /// Auxiliary squared diffusion coefficient of the original model family:
    /// (sigma^2)' + 2·gamma·sigma^2 for OUVE, (sigma^2)' + 2·sigma^2/(1-t)
    /// for BBED (both reduce to c·k^{2t}), and alpha^2·(rho^2)' for the
    /// bridge family.
    pub fn gtilde_sq(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(BridgeError::TimeOutOfRange(t));
        }
        match &self.params {
            Params::Ouve { c, k, .. } => Ok(c * (2.0 * t * k.ln()).exp()),
            Params::Bbed { c, k } => {
                if 1.0 - t < DIRAC_GUARD {
                    // The defining combination divides by 1-t.
                    return Err(BridgeError::SingularTime {
                        t,
                        reason: "auxiliary diffusion formula divides by 1-t",
                    });
                }
                Ok(c * (2.0 * t * k.ln()).exp())
            }
            Params::Sbve { c, k } => Ok(c * (2.0 * t * k.ln()).exp()),
            Params::SbCfm { sigma } => Ok(sigma * sigma),
            Params::SbGeneral(funcs) => {
                let alpha = (funcs.alpha)(t);
                Ok(alpha * alpha * (funcs.drho_sq)(t))
            }
            Params::OtCfm { .. } => Err(BridgeError::NoAuxiliaryDiffusion("ot-cfm")),
        }
    }

    /// The (alpha, rho^2) functions for bridge-family kinds.
    pub fn sb_functions(&self) -> Result<SbFunctions> {
        match &self.params {
            Params::Sbve { c, k } => {
                let (c, k) = (*c, *k);
                let ln_k = k.ln();
                Ok(SbFunctions::new(
                    |_| 1.0,
                    |_| 0.0,
                    move |t| c * ((2.0 * t * ln_k).exp() - 1.0) / (2.0 * ln_k),
                    move |t| c * (2.0 * t * ln_k).exp(),
                ))
            }
            Params::SbCfm { sigma } => {
                let sp_sq = sigma * sigma;
                Ok(SbFunctions::new(
                    |_| 1.0,
                    |_| 0.0,
                    move |t| sp_sq * t,
                    move |_| sp_sq,
                ))
            }
            Params::SbGeneral(funcs) => Ok(funcs.clone()),
            other => Err(BridgeError::NotSbFamily(match other {
                Params::Ouve { .. } => "ouve",
                Params::Bbed { .. } => "bbed",
                Params::OtCfm { .. } => "ot-cfm",
                _ => unreachable!(),
            })),
        }
    }
}
