//! Seeded synthetic panels.
//!
//! NE(d, t) ~ Poisson(exp(η)), clipped at `max_count`, with
//! η = base + u_d + slope·t + amplitude·cos(2π(month − 7)/12)
//!     + Σ coefficient · investment(code, d, t − lag).
//! `u_d` is a per-district normal offset. Investment projects arrive as
//! Poisson counts whose rate carries a month-level shock shared by all
//! districts; `B` codes hold budget amounts (a lognormal amount per project).

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};

use super::{PanelDataset, YearMonth};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSignal {
    pub code: String,
    /// 1..=12
    pub lag: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_districts: usize,
    pub n_months: usize,
    pub start: YearMonth,
    pub silent_fraction: f64,
    /// Log-rate at t = 0 for a typical district.
    pub base_log_rate: f64,
    /// Standard deviation of the per-district log-rate offset.
    pub district_spread: f64,
    /// Log-rate change per month.
    pub trend_slope: f64,
    pub seasonal_amplitude: f64,
    pub planted_signals: Vec<PlantedSignal>,
    pub investment_codes: Vec<String>,
    /// Mean projects per district-month.
    pub investment_rate: f64,
    /// Standard deviation of the shared monthly log-shock on investment rates.
    pub investment_shock: f64,
    pub max_count: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_districts: 400,
            n_months: 84,
            start: YearMonth { year: 2004, month: 1 },
            silent_fraction: 0.35,
            base_log_rate: -4.455,
            district_spread: 1.6,
            trend_slope: 0.035,
            seasonal_amplitude: 0.3,
            planted_signals: vec![PlantedSignal {
                code: "A6".into(),
                lag: 6,
                coefficient: 0.5,
            }],
            investment_codes: ["A2", "A3", "A6", "B5", "B9"].map(String::from).to_vec(),
            investment_rate: 1.0,
            investment_shock: 0.5,
            max_count: 500,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_districts == 0 || self.n_months == 0 {
            return bad("panel shape must be non-empty".into());
        }
        if !(0.0..=1.0).contains(&self.silent_fraction) {
            return bad(format!("silent_fraction {} not in [0, 1]", self.silent_fraction));
        }
        if !(1..=12).contains(&self.start.month) {
            return bad(format!("start month {}", self.start.month));
        }
        for v in [
            self.base_log_rate,
            self.district_spread,
            self.trend_slope,
            self.seasonal_amplitude,
            self.investment_rate,
            self.investment_shock,
        ] {
            if !v.is_finite() {
                return bad("non-finite generator parameter".into());
            }
        }
        if self.district_spread < 0.0 || self.investment_rate < 0.0 || self.investment_shock < 0.0 {
            return bad("spreads and rates must be non-negative".into());
        }
        let mut codes = BTreeSet::new();
        for c in &self.investment_codes {
            if !super::io::is_investment_code(c) {
                return bad(format!("investment code `{c}` is not A<k>/B<k>"));
            }
            if !codes.insert(c) {
                return bad(format!("investment code `{c}` listed twice"));
            }
        }
        for s in &self.planted_signals {
            if !(1..=12).contains(&s.lag) {
                return bad(format!("planted lag {} not in 1..=12", s.lag));
            }
            if !codes.contains(&s.code) {
                return bad(format!("planted code `{}` is not generated", s.code));
            }
            if !s.coefficient.is_finite() {
                return bad("non-finite planted coefficient".into());
            }
        }
        Ok(())
    }
}

/// District ids (1-based) that the generator forces to NE ≡ 0.
pub fn silent_districts(config: &SynthConfig) -> BTreeSet<u64> {
    let n_silent = (config.silent_fraction * config.n_districts as f64).round() as usize;
    let mut ids: Vec<u64> = (1..=config.n_districts as u64).collect();
    ids.shuffle(&mut seed::rng(seed::derive(config.seed, &[seed::label("silent")])));
    ids.into_iter().take(n_silent).collect()
}

/// Deterministic in `config`; active districts always record at least one event.
pub fn generate_synthetic(config: &SynthConfig) -> Result<PanelDataset> {
    config.validate()?;
    let (nd, nm) = (config.n_districts, config.n_months);
    let silent = silent_districts(config);

    let mut investments = BTreeMap::new();
    for code in &config.investment_codes {
        let mut shared = seed::rng(seed::derive(config.seed, &[seed::label(code)]));
        let shock = Normal::new(0.0, config.investment_shock)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let half_var = 0.5 * config.investment_shock * config.investment_shock;
        let monthly_rate: Vec<f64> = (0..nm)
            .map(|_| config.investment_rate * (shock.sample(&mut shared) - half_var).exp())
            .collect();
        let amount = LogNormal::new(-0.125, 0.5).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let is_budget = code.starts_with('B');
        let mut m = Array2::<f64>::zeros((nd, nm));
        for d in 0..nd {
            let mut rng = seed::rng(seed::derive(config.seed, &[seed::label(code), d as u64]));
            for t in 0..nm {
                let k = poisson(&mut rng, monthly_rate[t]);
                m[[d, t]] = if is_budget {
                    (0..k as usize).map(|_| amount.sample(&mut rng)).sum::<f64>() + 0.0
                } else {
                    k as f64
                };
            }
        }
        investments.insert(code.clone(), m);
    }

    let offset = Normal::new(0.0, config.district_spread)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut ne = Array2::<u32>::zeros((nd, nm));
    for d in 0..nd {
        let id = d as u64 + 1;
        let mut rng = seed::rng(seed::derive(config.seed, &[seed::label("ne"), id]));
        let u = offset.sample(&mut rng);
        if silent.contains(&id) {
            continue;
        }
        let mut best = (f64::NEG_INFINITY, 0);
        for t in 0..nm {
            let month = config.start.plus_months(t).month as f64;
            let mut eta = config.base_log_rate
                + u
                + config.trend_slope * t as f64
                + config.seasonal_amplitude * (2.0 * PI * (month - 7.0) / 12.0).cos();
            for s in &config.planted_signals {
                if t >= s.lag {
                    eta += s.coefficient * investments[&s.code][[d, t - s.lag]];
                }
            }
            if eta > best.0 {
                best = (eta, t);
            }
            let draw = poisson(&mut rng, eta.min(30.0).exp());
            ne[[d, t]] = draw.min(config.max_count as u64) as u32;
        }
        if config.max_count > 0 && ne.row(d).iter().all(|&v| v == 0) {
            ne[[d, best.1]] = 1;
        }
    }

    let ids = (1..=nd as u64).collect();
    PanelDataset::new(ids, config.start, ne, investments)
}

fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(p) => p.sample(rng) as u64,
        Err(_) => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            seed: 11,
            n_districts: 30,
            n_months: 36,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SynthConfig { seed: 12, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn all_silent() {
        let p = generate_synthetic(&SynthConfig {
            silent_fraction: 1.0,
            ..small()
        })
        .unwrap();
        assert!(p.ne().iter().all(|&v| v == 0));
    }

    #[test]
    fn silent_set_is_exact() {
        let cfg = small();
        let p = generate_synthetic(&cfg).unwrap();
        let silent = silent_districts(&cfg);
        assert_eq!(silent.len(), (0.35f64 * 30.0).round() as usize);
        for (r, id) in p.district_ids().iter().enumerate() {
            let total: u32 = p.ne_series(r).sum();
            assert_eq!(total == 0, silent.contains(id), "district {id}");
        }
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SynthConfig { silent_fraction: 1.5, ..small() },
            SynthConfig {
                planted_signals: vec![PlantedSignal { code: "A6".into(), lag: 13, coefficient: 0.1 }],
                ..small()
            },
            SynthConfig {
                planted_signals: vec![PlantedSignal { code: "A99".into(), lag: 2, coefficient: 0.1 }],
                ..small()
            },
            SynthConfig { investment_codes: vec!["X1".into()], planted_signals: vec![], ..small() },
        ] {
            assert!(generate_synthetic(&cfg).is_err());
        }
    }
}
