//! Closed-form per-user procedure rates and the Monte Carlo plumbing that
//! feeds them from the traffic and mobility models.

use rayon::prelude::*;

use crate::mobility::{analytic_ccr, CellGrid};
use crate::signaling::ProcedureRates;
use crate::stochastic::{Distribution, DistributionSpec, RandomStream};
use crate::traffic::{Application, ApplicationMix, LinkProfile, TrafficModel, TrafficParams};
use crate::{Error, Result};

/// Inputs of the rate model.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModelInputs {
    /// Sessions per second per user.
    pub lambda_s: f64,
    /// Mean activity periods per session.
    pub n_bar: f64,
    /// Reading time between periods of one session.
    pub reading_time: DistributionSpec,
    /// Gap from the end of a session to the start of the next.
    pub inter_session: DistributionSpec,
    pub inactivity_timer: f64,
    /// Mean activity-period duration.
    pub t_on: f64,
    /// Cell crossings per second.
    pub ccr: f64,
}

impl RateModelInputs {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |field: &str, v: f64| {
            if v >= 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::param(field, format!("must be >= 0, got {v}")))
            }
        };
        nonneg("lambda_s", self.lambda_s)?;
        nonneg("t_on", self.t_on)?;
        nonneg("ccr", self.ccr)?;
        nonneg("inactivity_timer_s", self.inactivity_timer)?;
        if !(self.n_bar >= 1.0) {
            return Err(Error::param("n_bar", format!("must be >= 1, got {}", self.n_bar)));
        }
        self.reading_time.validate().map_err(|e| e.within("reading_time"))?;
        self.inter_session.validate().map_err(|e| e.within("inter_session"))?;
        Ok(())
    }

    pub fn with_timer(&self, inactivity_timer: f64) -> Self {
        Self {
            inactivity_timer,
            ..self.clone()
        }
    }
}

/// Service Request rate per user. Every SR is matched by one SRR, so this is
/// also the SRR prediction.
pub fn lambda_sr(inputs: &RateModelInputs) -> Result<f64> {
    inputs.validate()?;
    let t = inputs.inactivity_timer;
    let d = Distribution::new(inputs.reading_time.clone())?;
    let gap = Distribution::new(inputs.inter_session.clone())?;
    Ok(inputs.lambda_s * ((inputs.n_bar - 1.0) * d.survival(t) + gap.survival(t)))
}

/// `E[min(X, T_I)]`: time spent in `Active` after a gap of length `X`.
pub fn mean_tua(x: &DistributionSpec, inactivity_timer: f64) -> Result<f64> {
    Distribution::new(x.clone())?.truncated_expectation(inactivity_timer)
}

/// Probability that a user is `Active` at a random instant.
pub fn p_ua(inputs: &RateModelInputs) -> Result<f64> {
    inputs.validate()?;
    let t = inputs.inactivity_timer;
    let busy = inputs.n_bar * inputs.t_on
        + (inputs.n_bar - 1.0) * mean_tua(&inputs.reading_time, t)?
        + mean_tua(&inputs.inter_session, t)?;
    let p = inputs.lambda_s * busy;
    if p > 1.0 {
        return Err(Error::Model(format!(
            "active probability {p} exceeds 1: session activity exceeds wall time"
        )));
    }
    Ok(p)
}

/// Handover rate per user.
pub fn lambda_hr(inputs: &RateModelInputs) -> Result<f64> {
    Ok(inputs.ccr * p_ua(inputs)?)
}

pub fn predict(inputs: &RateModelInputs) -> Result<ProcedureRates> {
    let sr = lambda_sr(inputs)?;
    Ok(ProcedureRates {
        sr,
        srr: sr,
        hr: lambda_hr(inputs)?,
    })
}

/// Model inputs estimated by simulation, with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedInputs {
    pub inputs: RateModelInputs,
    pub sessions: usize,
    pub n_bar_se: f64,
    pub t_on_se: f64,
    pub lambda_s_se: f64,
    /// Fraction of sessions whose successor starts as soon as they end.
    pub deferred_fraction: f64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    n: f64,
    periods: f64,
    periods_sq: f64,
    on: f64,
    on_sq: f64,
    periods_on: f64,
    cycle: f64,
    cycle_sq: f64,
    deferred: f64,
    positive_gap: f64,
    reading_gaps: [f64; 2],
}

impl Moments {
    fn merge(mut self, o: Moments) -> Moments {
        self.n += o.n;
        self.periods += o.periods;
        self.periods_sq += o.periods_sq;
        self.on += o.on;
        self.on_sq += o.on_sq;
        self.periods_on += o.periods_on;
        self.cycle += o.cycle;
        self.cycle_sq += o.cycle_sq;
        self.deferred += o.deferred;
        self.positive_gap += o.positive_gap;
        self.reading_gaps[0] += o.reading_gaps[0];
        self.reading_gaps[1] += o.reading_gaps[1];
        self
    }
}

const CHUNK: usize = 4096;

/// Estimate the model inputs by drawing `samples` sessions the same way the
/// timeline generator does.
///
/// The gap between sessions is `max(0, G - L)` with `G` the session
/// inter-arrival draw and `L` the session length; it is reported as a
/// [`DistributionSpec::DeferredExponential`] whose atom at zero and positive
/// mean are estimated. The reading-time law is the one configured for the
/// application contributing most reading gaps.
#[allow(clippy::too_many_arguments)]
pub fn derive_inputs(
    mix: &ApplicationMix,
    traffic: &TrafficParams,
    link: LinkProfile,
    grid: &CellGrid,
    speed: &DistributionSpec,
    inactivity_timer: f64,
    samples: usize,
    seed: u64,
) -> Result<DerivedInputs> {
    mix.validate().map_err(|e| e.within("mix"))?;
    grid.validate().map_err(|e| e.within("grid"))?;
    if samples < 2 {
        return Err(Error::param("samples", "must be >= 2"));
    }
    let model = TrafficModel::new(traffic, link)?;
    let mean_speed = Distribution::new(speed.clone())
        .map_err(|e| e.within("speed"))?
        .mean()
        .map_err(|e| e.within("speed"))?;
    let ccr = analytic_ccr(mean_speed, grid.cell_perimeter(), grid.cell_area())?;

    let chunks = samples.div_ceil(CHUNK);
    let m = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut stream = RandomStream::substream(seed, c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut acc = Moments::default();
            for _ in 0..count {
                let app = mix.draw(&mut stream);
                let draw = model.generate_session(app, &mut stream);
                let g = model.session_interarrival().sample(&mut stream);
                let periods = draw.activities.len() as f64;
                let on: f64 = draw.activities.iter().sum();
                let length = draw.length();
                let gap = (g - length).max(0.0);
                acc.n += 1.0;
                acc.periods += periods;
                acc.periods_sq += periods * periods;
                acc.on += on;
                acc.on_sq += on * on;
                acc.periods_on += periods * on;
                let cycle = length + gap;
                acc.cycle += cycle;
                acc.cycle_sq += cycle * cycle;
                if gap > 0.0 {
                    acc.positive_gap += gap;
                } else {
                    acc.deferred += 1.0;
                }
                match app {
                    Application::Web => acc.reading_gaps[0] += periods - 1.0,
                    Application::Video => acc.reading_gaps[1] += periods - 1.0,
                    Application::Call => {}
                }
            }
            acc
        })
        .reduce(Moments::default, Moments::merge);

    let n = m.n;
    let var = |sum: f64, sum_sq: f64| ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
    let n_bar = m.periods / n;
    let n_bar_se = (var(m.periods, m.periods_sq) / n).sqrt();
    // Ratio estimator: total on-time over total periods.
    let t_on = m.on / m.periods;
    let cov = (m.periods_on - m.periods * m.on / n) / (n - 1.0);
    let ratio_var =
        (var(m.on, m.on_sq) - 2.0 * t_on * cov + t_on * t_on * var(m.periods, m.periods_sq))
            / (n_bar * n_bar);
    let t_on_se = (ratio_var.max(0.0) / n).sqrt();
    let mean_cycle = m.cycle / n;
    let lambda_s = 1.0 / mean_cycle;
    let lambda_s_se = (var(m.cycle, m.cycle_sq) / n).sqrt() / (mean_cycle * mean_cycle);
    let p_zero = m.deferred / n;
    let positives = n - m.deferred;
    let inter_session = if positives > 0.0 {
        DistributionSpec::DeferredExponential {
            mean: m.positive_gap / positives,
            p_zero,
        }
    } else {
        DistributionSpec::Constant { value: 0.0 }
    };

    let reading_app = if m.reading_gaps[1] > m.reading_gaps[0] {
        Application::Video
    } else {
        Application::Web
    };
    let reading_time = model
        .reading_time(reading_app)
        .map(|d| d.spec())
        .expect("web and video have reading times");

    Ok(DerivedInputs {
        inputs: RateModelInputs {
            lambda_s,
            n_bar,
            reading_time,
            inter_session,
            inactivity_timer,
            t_on,
            ccr,
        },
        sessions: samples,
        n_bar_se,
        t_on_se,
        lambda_s_se,
        deferred_fraction: p_zero,
    })
}
