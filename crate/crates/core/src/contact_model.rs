//! Per-pair contact statistics: exponential inter-contact times and
//! Pareto-distributed per-contact transferable data.

use rand::Rng;
use rand_distr::{Distribution, Exp, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Contact statistics of one node pair.
///
/// `lambda` is the Poisson contact rate, `alpha`/`beta` the Pareto shape and
/// scale of the data a single contact can carry, and `rate` the data rate of
/// the link. A contact of duration `t` carries `t * rate` data units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairContactParams {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rate: f64,
}

impl PairContactParams {
    pub fn new(lambda: f64, alpha: f64, beta: f64, rate: f64) -> Result<Self> {
        let p = Self {
            lambda,
            alpha,
            beta,
            rate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("rate", self.rate),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Domain(format!(
                    "contact parameter {name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Mean inter-contact time, 1/λ.
    pub fn mean_inter_contact(&self) -> f64 {
        1.0 / self.lambda
    }

    /// Minimum contact duration in time units (β / rate).
    pub fn min_duration(&self) -> f64 {
        self.beta / self.rate
    }
}

/// One observed contact used as fitting input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactSample {
    pub inter_contact: f64,
    pub duration: f64,
}

impl ContactSample {
    pub fn new(inter_contact: f64, duration: f64) -> Result<Self> {
        if !(inter_contact >= 0.0) || !(duration > 0.0) {
            return Err(Error::Domain(format!(
                "contact sample needs inter_contact >= 0 and duration > 0, got ({inter_contact}, {duration})"
            )));
        }
        Ok(Self {
            inter_contact,
            duration,
        })
    }
}

/// A sampled contact of one pair: start time and length, both in time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub start: f64,
    pub duration: f64,
}

/// Maximum-likelihood contact rate from inter-contact times: 1 / mean.
pub fn fit_exponential(inter_contact: &[f64]) -> Result<f64> {
    if inter_contact.len() < 2 {
        return Err(Error::Fit(format!(
            "exponential fit needs at least 2 samples, got {}",
            inter_contact.len()
        )));
    }
    if let Some(bad) = inter_contact
        .iter()
        .find(|x| !(**x >= 0.0) || !x.is_finite())
    {
        return Err(Error::Fit(format!(
            "inter-contact sample {bad} is not a finite nonnegative value"
        )));
    }
    let mean = inter_contact.iter().sum::<f64>() / inter_contact.len() as f64;
    if mean <= 0.0 {
        return Err(Error::Fit("inter-contact samples have zero mean".into()));
    }
    Ok(1.0 / mean)
}

/// Maximum-likelihood Pareto fit: β = min sample, α = n / Σ ln(x/β).
pub fn fit_pareto(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Fit(format!(
            "Pareto fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::Fit(format!(
            "Pareto sample {bad} is not finite and positive"
        )));
    }
    let beta = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let log_sum: f64 = samples.iter().map(|x| (x / beta).ln()).sum();
    if log_sum <= 0.0 {
        return Err(Error::Fit(
            "all Pareto samples are equal; shape is undefined".into(),
        ));
    }
    let alpha = samples.len() as f64 / log_sum;
    if !alpha.is_finite() {
        return Err(Error::Fit(format!(
            "Pareto shape estimate is not finite ({alpha})"
        )));
    }
    Ok((alpha, beta))
}

/// Fit all four pair parameters from observed contacts and a known data rate.
pub fn fit_pair(samples: &[ContactSample], rate: f64) -> Result<PairContactParams> {
    let gaps: Vec<f64> = samples.iter().map(|s| s.inter_contact).collect();
    let data: Vec<f64> = samples.iter().map(|s| s.duration * rate).collect();
    let lambda = fit_exponential(&gaps)?;
    let (alpha, beta) = fit_pareto(&data)?;
    PairContactParams::new(lambda, alpha, beta, rate)
}

/// Sample one pair's contact process over `[0, horizon)`.
pub fn sample_contact_process(
    params: &PairContactParams,
    horizon: f64,
    seed: u64,
) -> Result<Vec<ContactEvent>> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!(
            "sampling horizon must be positive, got {horizon}"
        )));
    }
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    Ok(sample_contacts_with(&mut rng, params, 0.0, horizon))
}

/// Sample contacts that start within `[from, until)`; start times are
/// `from` plus cumulative exponential gaps and durations are
/// Pareto(α, β/rate).
pub fn sample_contacts_with<R: Rng + ?Sized>(
    rng: &mut R,
    params: &PairContactParams,
    from: f64,
    until: f64,
) -> Vec<ContactEvent> {
    let gap = Exp::new(params.lambda).expect("validated rate");
    let dur = Pareto::new(params.min_duration(), params.alpha).expect("validated shape");
    let mut out = Vec::new();
    let mut t = from;
    loop {
        t += gap.sample(rng);
        if t >= until {
            break;
        }
        let mut d: f64 = dur.sample(rng);
        // Guard against the rare rounding below the scale.
        if d < params.min_duration() {
            d = params.min_duration();
        }
        out.push(ContactEvent {
            start: t,
            duration: d,
        });
    }
    out
}
