//! Retrieved mean LST against ground-station air temperatures.
//!
//! Stations report at fixed hours; the satellite passes in between, so the
//! reading at overpass time is linearly interpolated between the two
//! bracketing observations. That interpolation rule is an inference, so
//! the comparison is only ever reported, never asserted; a user-supplied
//! reference value is echoed verbatim next to it.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("invalid clock time '{0}' (expected HH:MM)")]
    Clock(String),
    #[error("invalid station reading '{0}' (expected HH:MM=°C)")]
    Reading(String),
    #[error("need at least two station readings, got {0}")]
    TooFewReadings(usize),
    #[error("two readings at {0}")]
    DuplicateTime(ClockTime),
    #[error("overpass {at} lies outside the readings {first}..{last}")]
    OutsideReadings { at: ClockTime, first: ClockTime, last: ClockTime },
}

/// Minutes after midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClockTime(pub u16);

impl ClockTime {
    pub fn hm(h: u16, m: u16) -> Self {
        Self(h * 60 + m)
    }

    pub fn hours(self) -> f64 {
        f64::from(self.0) / 60.0
    }
}

impl FromStr for ClockTime {
    type Err = ValidationError;

    /// `HH:MM`, `HH.MM` or bare `HH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ValidationError::Clock(s.to_string());
        let t = s.trim();
        let (h, m) = match t.split_once([':', '.']) {
            Some((h, m)) if m.len() == 2 => (h, m),
            Some(_) => return Err(bad()),
            None => (t, "0"),
        };
        let h: u16 = h.parse().map_err(|_| bad())?;
        let m: u16 = m.parse().map_err(|_| bad())?;
        if h > 23 || m > 59 {
            return Err(bad());
        }
        Ok(Self::hm(h, m))
    }
}

impl std::fmt::Display for ClockTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationReading {
    pub time: ClockTime,
    pub celsius: f64,
}

impl FromStr for StationReading {
    type Err = ValidationError;

    /// `HH:MM=25.8`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (t, v) = s.split_once('=').ok_or_else(|| ValidationError::Reading(s.to_string()))?;
        let celsius: f64 = v
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| ValidationError::Reading(s.to_string()))?;
        Ok(Self {
            time: t.parse()?,
            celsius,
        })
    }
}

/// Linear interpolation of the readings at `at`, which must lie within
/// the observed time span.
pub fn interpolate_reading(readings: &[StationReading], at: ClockTime) -> Result<f64, ValidationError> {
    if readings.len() < 2 {
        return Err(ValidationError::TooFewReadings(readings.len()));
    }
    let mut sorted = readings.to_vec();
    sorted.sort_by_key(|r| r.time);
    if let Some(w) = sorted.windows(2).find(|w| w[0].time == w[1].time) {
        return Err(ValidationError::DuplicateTime(w[0].time));
    }
    let (first, last) = (sorted[0].time, sorted[sorted.len() - 1].time);
    if at < first || at > last {
        return Err(ValidationError::OutsideReadings { at, first, last });
    }
    let w = sorted
        .windows(2)
        .find(|w| at <= w[1].time)
        .expect("at is within the span");
    let (a, b) = (w[0], w[1]);
    let frac = (at.hours() - a.time.hours()) / (b.time.hours() - a.time.hours());
    Ok(a.celsius + frac * (b.celsius - a.celsius))
}

/// One scene's column of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub label: String,
    pub readings: Vec<StationReading>,
    pub overpass: ClockTime,
    pub interpolated: f64,
    /// Echoed exactly as the user typed it.
    pub reference: Option<String>,
    pub water_vapour: Option<f64>,
    pub mean_lst: f64,
}

impl Comparison {
    pub fn new(
        label: impl Into<String>,
        readings: Vec<StationReading>,
        overpass: ClockTime,
        mean_lst: f64,
    ) -> Result<Self, ValidationError> {
        let interpolated = interpolate_reading(&readings, overpass)?;
        let mut readings = readings;
        readings.sort_by_key(|r| r.time);
        Ok(Self {
            label: label.into(),
            readings,
            overpass,
            interpolated,
            reference: None,
            water_vapour: None,
            mean_lst,
        })
    }

    /// Mean LST minus the interpolated station reading.
    pub fn difference(&self) -> f64 {
        self.mean_lst - self.interpolated
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, k: &str, v: &str| {
            let _ = writeln!(s, "{k:<34}{v}");
        };
        row(&mut s, "Date", &self.label);
        if let Some(w) = self.water_vapour {
            row(&mut s, "w (g/cm2)", &format!("{w}"));
        }
        row(&mut s, "Measured air temperature (°C)", "");
        for r in &self.readings {
            row(&mut s, &format!("  At {}", r.time), &format!("{}", r.celsius));
        }
        row(
            &mut s,
            &format!("  At {} (linear interpolation)", self.overpass),
            &format!("{:.2}", self.interpolated),
        );
        if let Some(r) = &self.reference {
            row(&mut s, &format!("  At {} (reference)", self.overpass), r);
        }
        row(&mut s, "Mean LST (°C)", &format!("{:.2}", self.mean_lst));
        row(&mut s, "Mean LST − interpolated (°C)", &format!("{:+.2}", self.difference()));
        s
    }
}
