//! Correlation functions, stroboscopic envelopes, lifetimes, spectra and
//! the phase classifier.

use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time series of one trajectory over the modulation window, sampled
/// uniformly with an integer number of samples per drive period. Sample 0
/// is taken at t₀, the end of the hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t0: f64,
    pub period: f64,
    pub samples_per_period: usize,
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub photons: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub epsilon: Vec<f64>,
    /// Coarse (t, Θ, |α|²) samples of the ramp and hold.
    pub hold: Vec<[f64; 3]>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Whole drive cycles covered by the record.
    pub fn cycles(&self) -> usize {
        self.len().saturating_sub(1) / self.samples_per_period
    }

    /// Normalized single-trajectory correlation Re(α*(t)α(t₀))/|α(t₀)|².
    pub fn correlation(&self) -> Result<Vec<f64>> {
        correlation(std::slice::from_ref(self))
    }

    pub fn alpha_t0(&self) -> Complex64 {
        self.alpha[0]
    }

    /// Byte-stable textual form: (t, Θ, |α|², Re α, Im α, ε, C), with t in
    /// ms given the length of one code time unit in ms.
    pub fn write_csv<W: Write>(&self, mut w: W, ms_per_unit: f64) -> Result<()> {
        let c = self.correlation().unwrap_or_else(|_| vec![f64::NAN; self.len()]);
        writeln!(w, "t_ms,theta,photons,alpha_re,alpha_im,epsilon,c")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.times[i] * ms_per_unit,
                self.theta[i],
                self.photons[i],
                self.alpha[i].re, self.alpha[i].im, self.epsilon[i], c[i]
            )?;
        }
        Ok(())
    }
}

/// C(t) = Re⟨α*(t)α(t₀)⟩ / ⟨|α(t₀)|²⟩ over the ensemble.
pub fn correlation(records: &[TrajectoryRecord]) -> Result<Vec<f64>> {
    let first = records
        .first()
        .ok_or_else(|| Error::RecordMismatch("empty ensemble".into()))?;
    let n = first.len();
    if n == 0 {
        return Err(Error::RecordMismatch("empty record".into()));
    }
    for r in records {
        if r.len() != n || r.t0 != first.t0 || r.samples_per_period != first.samples_per_period {
            return Err(Error::RecordMismatch(
                "records must share sampling times and t0".into(),
            ));
        }
    }
    let denom: f64 = records.iter().map(|r| r.alpha[0].norm_sqr()).sum();
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::EmptyCavity);
    }
    let mut c = vec![0.0; n];
    for r in records {
        let a0 = r.alpha[0];
        for (ci, a) in c.iter_mut().zip(&r.alpha) {
            *ci += (a.conj() * a0).re;
        }
    }
    for ci in c.iter_mut() {
        *ci /= denom;
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    /// Time since t₀ in drive periods.
    pub cycle: f64,
    pub value: f64,
}

/// Envelope of the period-doubled oscillation: for each 2T window the
/// largest |C| and the time at which it occurs.
pub fn strobe_envelope(c: &[f64], samples_per_period: usize) -> Result<Vec<EnvelopePoint>> {
    let w = 2 * samples_per_period;
    if samples_per_period == 0 || c.len() < w {
        return Err(Error::SeriesTooShort {
            len: c.len(),
            need: w.max(1),
        });
    }
    Ok(c.chunks_exact(w)
        .enumerate()
        .map(|(m, chunk)| {
            let (i, v) = chunk
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
            EnvelopePoint {
                cycle: (m * w + i) as f64 / samples_per_period as f64,
                value: v,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeOptions {
    /// Minimum plateau length in drive periods.
    pub min_plateau_cycles: f64,
    /// A plateau's |slope| must stay below this fraction of the decay slope.
    pub plateau_slope_ratio: f64,
    /// The fit stops at the first envelope value at or below this fraction
    /// of the initial value (the residual level of a dephased ensemble).
    pub floor: f64,
    /// τ longer than this multiple of the fitted span is reported as censored.
    pub censor_factor: f64,
}

impl Default for LifetimeOptions {
    fn default() -> Self {
        LifetimeOptions {
            min_plateau_cycles: 10.0,
            plateau_slope_ratio: 0.1,
            floor: 0.15,
            censor_factor: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeFit {
    /// Lifetime in drive periods; `None` when no decay is resolved within
    /// the record (censored).
    pub tau_cycles: Option<f64>,
    /// Fitted d ln C̄ / dt in 1/periods.
    pub slope: f64,
    /// End of the prethermal plateau in drive periods, if any.
    pub plateau_end: Option<f64>,
    pub fit_start: f64,
    pub fit_end: f64,
    pub points: usize,
}

/// Least-squares line through (x, y): slope and residual sum of squares.
fn ls_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    (slope, sse)
}

/// Least-squares fit of ln C̄ against time, after an optional prethermal
/// plateau. The fit window starts at the envelope maximum of the first
/// cycles and ends where C̄ first falls to the floor.
pub fn fit_lifetime(envelope: &[EnvelopePoint], opts: &LifetimeOptions) -> Result<LifetimeFit> {
    // skip the switch-on transient: start from the largest value within the
    // first plateau-length of cycles
    let first_cycle = envelope.first().map_or(0.0, |p| p.cycle);
    let i0 = envelope
        .iter()
        .enumerate()
        .take_while(|(_, p)| p.cycle - first_cycle < opts.min_plateau_cycles)
        .fold(0, |best, (i, p)| if p.value > envelope[best].value { i } else { best });
    let envelope = &envelope[i0.min(envelope.len().saturating_sub(1))..];
    let floor = opts.floor * envelope.first().map_or(0.0, |p| p.value);
    let usable = envelope
        .iter()
        .take_while(|p| p.value > floor && p.value > 0.0)
        .count();
    if usable < 2 {
        return Err(Error::SeriesTooShort { len: usable, need: 2 });
    }
    let x: Vec<f64> = envelope[..usable].iter().map(|p| p.cycle).collect();
    let y: Vec<f64> = envelope[..usable].iter().map(|p| p.value.ln()).collect();

    // among the admissible plateau ends, take the best two-segment fit
    let mut best: Option<(usize, f64)> = None;
    for p in 1..usable {
        if x[p] - x[0] < opts.min_plateau_cycles || usable - p < 3 {
            continue;
        }
        let (pre, pre_sse) = ls_fit(&x[..=p], &y[..=p]);
        let (post, post_sse) = ls_fit(&x[p..], &y[p..]);
        let span = x[usable - 1] - x[p];
        let resolved = post < 0.0 && -1.0 / post < opts.censor_factor * span;
        let sse = pre_sse + post_sse;
        if resolved && pre.abs() < opts.plateau_slope_ratio * post.abs() && best.map_or(true, |(_, b)| sse < b) {
            best = Some((p, sse));
        }
    }
    let start = best.map_or(0, |(p, _)| p);
    let plateau_end = best.map(|(p, _)| x[p]);
    let (slope, _) = ls_fit(&x[start..], &y[start..]);
    let span = x[usable - 1] - x[start];
    let tau = if slope < 0.0 && -1.0 / slope < opts.censor_factor * span {
        Some(-1.0 / slope)
    } else {
        None
    };
    Ok(LifetimeFit {
        tau_cycles: tau,
        slope,
        plateau_end,
        fit_start: x[start],
        fit_end: x[usable - 1],
        points: usable - start,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Frequencies in units of ω_d.
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    /// Largest power within one bin of `freq`.
    pub fn power_near(&self, freq: f64) -> f64 {
        if self.freqs.len() < 2 {
            return 0.0;
        }
        let df = self.freqs[1] - self.freqs[0];
        let i = (freq / df).round() as isize;
        (i - 1..=i + 1)
            .filter(|&j| j >= 0 && (j as usize) < self.power.len())
            .map(|j| self.power[j as usize])
            .fold(0.0, f64::max)
    }

    /// Local maxima ordered by decreasing power.
    pub fn peaks(&self) -> Vec<(f64, f64)> {
        let p = &self.power;
        let mut out: Vec<(f64, f64)> = (0..p.len())
            .filter(|&i| {
                let left = if i == 0 { f64::MIN } else { p[i - 1] };
                let right = if i + 1 == p.len() { f64::MIN } else { p[i + 1] };
                p[i] > left && p[i] >= right && p[i] > 0.0
            })
            .map(|i| (self.freqs[i], p[i]))
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        out
    }

    pub fn accumulate(&mut self, other: &Spectrum) {
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.power.iter_mut() {
            *a *= s;
        }
    }
}

/// One-sided |FFT|² of a uniformly sampled series, frequencies in units of
/// the drive frequency. The mean is kept, so a constant signal puts all its
/// power in the zero bin.
pub fn power_spectrum(series: &[f64], samples_per_period: usize) -> Spectrum {
    let n = series.len();
    if n == 0 {
        return Spectrum {
            freqs: vec![],
            power: vec![],
        };
    }
    let mut buf: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2 + 1;
    let norm = 1.0 / (n as f64 * n as f64);
    let cycles = n as f64 / samples_per_period as f64;
    Spectrum {
        freqs: (0..half).map(|i| i as f64 / cycles).collect(),
        power: buf[..half].iter().map(|v| v.norm_sqr() * norm).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PhaseLabel {
    StableDTC,
    MetastableDTC {
        tau_cycles: Option<f64>,
        prethermal: bool,
    },
    Chaotic,
    LowFreqDTC,
    NoDW,
}

impl PhaseLabel {
    pub fn name(&self) -> &'static str {
        match self {
            PhaseLabel::StableDTC => "StableDTC",
            PhaseLabel::MetastableDTC { .. } => "MetastableDTC",
            PhaseLabel::Chaotic => "Chaotic",
            PhaseLabel::LowFreqDTC => "LowFreqDTC",
            PhaseLabel::NoDW => "NoDW",
        }
    }

    pub fn is_time_crystal(&self) -> bool {
        matches!(self, PhaseLabel::StableDTC | PhaseLabel::LowFreqDTC)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Stroboscopic sampling phase as a fraction of T after t₀ + nT.
    pub strobe_offset: f64,
    /// Cycles at the end of the run that must alternate perfectly; capped
    /// at half the record.
    pub final_cycles: usize,
    /// Consecutive sign switches required at the start of the drive.
    pub initial_switches: usize,
    /// Stroboscopic samples smaller than this in magnitude count as no sign.
    pub amplitude_floor: f64,
    /// A stable DTC must keep at least this fraction of its initial
    /// stroboscopic amplitude over the final window. Catches ensemble
    /// averages that keep alternating while they decay.
    pub retention: f64,
    /// Minimum P(3ω_d/2)/P(ω_d/2) for the low-frequency DTC.
    pub third_harmonic_ratio: f64,
    pub lifetime: LifetimeOptions,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            strobe_offset: 0.5,
            final_cycles: 100,
            initial_switches: 6,
            amplitude_floor: 0.0,
            retention: 0.5,
            third_harmonic_ratio: 0.05,
            lifetime: LifetimeOptions::default(),
        }
    }
}

/// Stroboscopic samples s_n = x(t₀ + (n + offset)T).
pub fn strobe_samples(series: &[f64], samples_per_period: usize, offset: f64) -> Vec<f64> {
    let shift = (offset * samples_per_period as f64).round() as usize;
    (0..)
        .map(|n| n * samples_per_period + shift)
        .take_while(|&i| i < series.len())
        .map(|i| series[i])
        .collect()
}

/// Number of consecutive sign alternations starting from the first sample.
pub fn leading_switches(samples: &[f64], floor: f64) -> usize {
    samples
        .windows(2)
        .take_while(|w| w[0].abs() > floor && w[1].abs() > floor && w[0] * w[1] < 0.0)
        .count()
}

/// True when every consecutive pair in `samples` has opposite sign.
pub fn alternates(samples: &[f64], floor: f64) -> bool {
    samples.len() >= 2
        && samples
            .windows(2)
            .all(|w| w[0].abs() > floor && w[1].abs() > floor && w[0] * w[1] < 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: PhaseLabel,
    pub initial_switches: usize,
    pub final_alternates: bool,
    /// Mean |s_n| over the final window relative to the first cycles.
    pub retained: f64,
    pub third_harmonic_ratio: Option<f64>,
    pub lifetime: Option<LifetimeFit>,
    pub peaks: Vec<(f64, f64)>,
}

/// Sign-pattern classification of a correlation (or order-parameter) series
/// recorded from t₀ over whole drive periods.
///
/// Stable: the stroboscopic signs alternate over the final window and keep
/// their amplitude.
/// Metastable: not stable, but the first `initial_switches` switches occur
/// without interruption. Chaotic: neither. A stable series whose Θ
/// spectrum carries a third harmonic above threshold is a low-frequency DTC.
pub fn classify_series(
    series: &[f64],
    samples_per_period: usize,
    organized: bool,
    theta_spectrum: Option<&Spectrum>,
    opts: &ClassifyOptions,
) -> Result<Classification> {
    let cycles = series.len().saturating_sub(1) / samples_per_period.max(1);
    if cycles < 2 * opts.initial_switches.max(1) {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            need: 2 * opts.initial_switches.max(1) * samples_per_period + 1,
        });
    }
    let peaks = theta_spectrum.map(|s| s.peaks().into_iter().take(8).collect()).unwrap_or_default();
    if !organized {
        return Ok(Classification {
            label: PhaseLabel::NoDW,
            initial_switches: 0,
            final_alternates: false,
            retained: 0.0,
            third_harmonic_ratio: None,
            lifetime: None,
            peaks,
        });
    }
    let samples = strobe_samples(series, samples_per_period, opts.strobe_offset);
    let samples = &samples[..cycles.min(samples.len())];
    let final_n = opts.final_cycles.min(samples.len() / 2).max(2);
    let final_window = &samples[samples.len() - final_n..];
    let final_alternates = alternates(final_window, opts.amplitude_floor);
    let mean_abs = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
    let head = mean_abs(&samples[..opts.initial_switches.max(1).min(samples.len())]);
    let retained = if head > 0.0 { mean_abs(final_window) / head } else { 0.0 };
    let initial = leading_switches(samples, opts.amplitude_floor);
    let third = theta_spectrum.map(|s| {
        let sub = s.power_near(0.5);
        if sub > 0.0 {
            s.power_near(1.5) / sub
        } else {
            0.0
        }
    });
    let envelope = strobe_envelope(&series[..cycles * samples_per_period], samples_per_period)?;
    let lifetime = fit_lifetime(&envelope, &opts.lifetime).ok();

    let label = if final_alternates && retained >= opts.retention {
        match third {
            Some(r) if r >= opts.third_harmonic_ratio => PhaseLabel::LowFreqDTC,
            _ => PhaseLabel::StableDTC,
        }
    } else if initial >= opts.initial_switches {
        PhaseLabel::MetastableDTC {
            tau_cycles: lifetime.and_then(|l| l.tau_cycles),
            prethermal: lifetime.map(|l| l.plateau_end.is_some()).unwrap_or(false),
        }
    } else {
        PhaseLabel::Chaotic
    };
    Ok(Classification {
        label,
        initial_switches: initial,
        final_alternates,
        retained,
        third_harmonic_ratio: third,
        lifetime,
        peaks,
    })
}

/// Writes the envelope as (cycle, C̄).
pub fn write_envelope_csv<W: Write>(mut w: W, envelope: &[EnvelopePoint]) -> Result<()> {
    writeln!(w, "cycle,c_strobe")?;
    for p in envelope {
        writeln!(w, "{},{}", p.cycle, p.value)?;
    }
    Ok(())
}
