//! Willingness-to-pay curves, delay-cost types and customer populations.
//!
//! The WTP family is
//!
//! ```text
//! u(alpha, phi) = p * (1 - (alpha * (phi - T))^beta),   phi >= T
//! ```
//!
//! where `p` and `T` are the on-demand price and delay. Every customer accepts
//! on-demand service (`u(alpha, T) = p`), a larger `alpha` means a more
//! delay-sensitive customer, and the WTP reaches zero at `phi0 = 1/alpha + T`.
//! Values are returned unclamped; negative WTP simply means the customer would
//! refuse that delay at any positive price.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that type probabilities sum to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Default value for the "arbitrarily small" zero-value offset of the most
/// delay-sensitive grid type.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// The WTP function family with parameters `(p, T, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WtpParams", into = "WtpParams")]
pub struct WtpModel {
    p: f64,
    t: f64,
    beta: f64,
    int_beta: Option<i32>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WtpParams {
    p: f64,
    #[serde(rename = "T")]
    t: f64,
    beta: f64,
}

impl TryFrom<WtpParams> for WtpModel {
    type Error = Error;

    fn try_from(v: WtpParams) -> Result<Self> {
        WtpModel::new(v.p, v.t, v.beta)
    }
}

impl From<WtpModel> for WtpParams {
    fn from(m: WtpModel) -> Self {
        WtpParams { p: m.p, t: m.t, beta: m.beta }
    }
}

impl WtpModel {
    pub fn new(p: f64, t: f64, beta: f64) -> Result<Self> {
        let mut bad = Vec::new();
        if !(p.is_finite() && p > 0.0) {
            bad.push(format!("on-demand price p must be > 0 (got {p})"));
        }
        if !(t.is_finite() && t > 0.0) {
            bad.push(format!("on-demand delay T must be > 0 (got {t})"));
        }
        if !(beta.is_finite() && beta >= 2.0) {
            bad.push(format!("beta must be >= 2 (got {beta})"));
        }
        if !bad.is_empty() {
            return Err(Error::InvalidParameter(bad.join("; ")));
        }
        let int_beta = (beta.fract() == 0.0 && beta <= 64.0).then_some(beta as i32);
        Ok(WtpModel { p, t, beta, int_beta })
    }

    /// `p = 1`, `T = 0.05`, `beta = 3`: the setting used for every reported number.
    pub fn reference() -> Self {
        WtpModel::new(1.0, 0.05, 3.0).expect("reference parameters are valid")
    }

    pub fn price(&self) -> f64 {
        self.p
    }

    pub fn on_demand_delay(&self) -> f64 {
        self.t
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Willingness to pay of a type-`alpha` customer facing delay `phi`.
    pub fn wtp(&self, alpha: f64, phi: f64) -> Result<f64> {
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be > 0 (got {alpha})")));
        }
        if !(phi >= self.t) {
            return Err(Error::Domain(format!("delay {phi} is below the on-demand delay T = {}", self.t)));
        }
        Ok(self.wtp_unchecked(alpha, phi))
    }

    /// [`WtpModel::wtp`] without argument checks, for inner loops whose
    /// inputs are already validated.
    #[inline]
    pub(crate) fn wtp_unchecked(&self, alpha: f64, phi: f64) -> f64 {
        let x = alpha * (phi - self.t);
        let loss = match self.int_beta {
            Some(k) => x.powi(k),
            None => x.powf(self.beta),
        };
        self.p * (1.0 - loss)
    }

    /// Delay at which a type-`alpha` customer values service at zero.
    pub fn zero_value_delay(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be > 0 (got {alpha})")));
        }
        Ok(1.0 / alpha + self.t)
    }
}

/// A delay-cost type. `alpha` is canonical; `phi0` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomerType {
    pub alpha: f64,
}

impl CustomerType {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be finite and > 0 (got {alpha})")));
        }
        Ok(CustomerType { alpha })
    }

    /// Type whose WTP hits zero `offset` time units after `T`.
    pub fn from_zero_value_offset(offset: f64) -> Result<Self> {
        if !(offset.is_finite() && offset > 0.0) {
            return Err(Error::InvalidParameter(format!("zero-value offset must be > 0 (got {offset})")));
        }
        CustomerType::new(1.0 / offset)
    }

    pub fn phi0(&self, model: &WtpModel) -> f64 {
        1.0 / self.alpha + model.on_demand_delay()
    }
}

/// A finite type set with arrival probabilities, total arrival rate and mean
/// service time.
///
/// Types are stored most delay-sensitive first: `alpha` strictly decreasing,
/// `phi0` strictly increasing. Index 0 is the type with the largest alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypePopulation {
    types: Vec<CustomerType>,
    probs: Vec<f64>,
    total_rate: f64,
    mean_service: f64,
}

impl TypePopulation {
    pub fn new(types: Vec<CustomerType>, probs: Vec<f64>, total_rate: f64, mean_service: f64) -> Result<Self> {
        let mut bad = Vec::new();
        if types.is_empty() {
            bad.push("population needs at least one type".to_string());
        }
        if types.len() != probs.len() {
            bad.push(format!("{} types but {} probabilities", types.len(), probs.len()));
        }
        for (i, w) in types.windows(2).enumerate() {
            if !(w[0].alpha > w[1].alpha) {
                bad.push(format!(
                    "types must be ordered by strictly decreasing alpha (entries {} and {})",
                    i + 1,
                    i + 2
                ));
            }
        }
        let single = probs.len() == 1;
        for (i, &q) in probs.iter().enumerate() {
            let ok = if single { q > 0.0 && q <= 1.0 } else { q > 0.0 && q < 1.0 };
            if !ok {
                bad.push(format!("probability of type {} must lie in (0, 1) (got {q})", i + 1));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            bad.push(format!("probabilities sum to {sum}, not 1"));
        }
        if !(total_rate.is_finite() && total_rate > 0.0) {
            bad.push(format!("total arrival rate must be > 0 (got {total_rate})"));
        }
        if !(mean_service.is_finite() && mean_service > 0.0) {
            bad.push(format!("mean service time must be > 0 (got {mean_service})"));
        }
        if !bad.is_empty() {
            return Err(Error::InvalidParameter(bad.join("; ")));
        }
        Ok(TypePopulation { types, probs, total_rate, mean_service })
    }

    /// Uniform population with equally spaced zero-value delays.
    ///
    /// Type `i` (1-based) has `phi0' = epsilon` for `i = 1` and
    /// `(i - 1) * delta` otherwise, `alpha = 1 / phi0'`, and probability `1/n`.
    pub fn grid(n: usize, delta: f64, epsilon: f64, total_rate: f64) -> Result<Self> {
        let mut bad = Vec::new();
        if n < 2 {
            bad.push(format!("grid needs n >= 2 types (got {n})"));
        }
        if !(delta.is_finite() && delta > 0.0) {
            bad.push(format!("delta must be > 0 (got {delta})"));
        }
        if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < delta) {
            bad.push(format!("epsilon must lie in (0, delta) (got {epsilon})"));
        }
        if !bad.is_empty() {
            return Err(Error::InvalidParameter(bad.join("; ")));
        }
        let types = (1..=n)
            .map(|i| {
                let offset = if i == 1 { epsilon } else { (i - 1) as f64 * delta };
                CustomerType::from_zero_value_offset(offset)
            })
            .collect::<Result<Vec<_>>>()?;
        let probs = vec![1.0 / n as f64; n];
        TypePopulation::new(types, probs, total_rate, 1.0)
    }

    /// Same types and probabilities, different total arrival rate.
    pub fn with_total_rate(&self, total_rate: f64) -> Result<Self> {
        if !(total_rate.is_finite() && total_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("total arrival rate must be > 0 (got {total_rate})")));
        }
        Ok(TypePopulation { total_rate, ..self.clone() })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn types(&self) -> &[CustomerType] {
        &self.types
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn alpha(&self, idx: usize) -> f64 {
        self.types[idx].alpha
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn mean_service(&self) -> f64 {
        self.mean_service
    }

    /// Largest alpha (most delay-sensitive type).
    pub fn alpha_max(&self) -> f64 {
        self.types[0].alpha
    }

    /// Smallest alpha (most delay-tolerant type).
    pub fn alpha_min(&self) -> f64 {
        self.types[self.types.len() - 1].alpha
    }
}

/// Free-function form of [`WtpModel::wtp`].
pub fn wtp(model: &WtpModel, alpha: f64, phi: f64) -> Result<f64> {
    model.wtp(alpha, phi)
}

/// Free-function form of [`WtpModel::zero_value_delay`].
pub fn zero_value_delay(model: &WtpModel, alpha: f64) -> Result<f64> {
    model.zero_value_delay(alpha)
}

/// Free-function form of [`TypePopulation::grid`].
pub fn grid_population(n: usize, delta: f64, epsilon: f64, total_rate: f64) -> Result<TypePopulation> {
    TypePopulation::grid(n, delta, epsilon, total_rate)
}
