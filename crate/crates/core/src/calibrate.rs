//! Fitting unpublished model constants to measured operating points.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::network::{ScenarioKind, ScenarioSettings};
use crate::optim::golden_section_min;

/// Grid points per decade of each log-scaled parameter.
pub const GRID_POINTS_PER_DECADE: u32 = 11;
pub const REFINE_ROUNDS: usize = 3;
/// Refinement may not end worse than this multiple of the best grid residual.
pub const MAX_RESIDUAL_RATIO: f64 = 25.0;

pub const RHO_BOUNDS: (f64, f64) = (1e-11, 1e-7);
pub const LAUNCH_DBM_BOUNDS: (f64, f64) = (-20.0, 10.0);
pub const E_DET_BOUNDS: (f64, f64) = (1e-4, 0.1);
pub const DARK_COUNT_BOUNDS: (f64, f64) = (1e-7, 1e-3);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Qber,
    SecretBps,
}

impl FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "qber" => Ok(Self::Qber),
            "secret_bps" => Ok(Self::SecretBps),
            other => Err(Error::InvalidInput(format!("unknown observable `{other}`"))),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Qber => "qber",
            Self::SecretBps => "secret_bps",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub scenario: ScenarioKind,
    pub length_km: f64,
    pub observable: Observable,
    pub target: f64,
    pub weight: f64,
}

impl Anchor {
    /// Weighted squared relative error; a zero target penalizes any positive
    /// model value instead.
    pub fn penalty(&self, model: f64) -> f64 {
        if !model.is_finite() {
            return f64::INFINITY;
        }
        let r = if self.target == 0.0 { model.max(0.0) } else { (model - self.target) / self.target };
        self.weight * r * r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    anchors: Vec<Anchor>,
}

#[derive(Deserialize)]
struct AnchorRow {
    scenario: String,
    length_km: f64,
    observable: String,
    target: f64,
    weight: f64,
}

impl AnchorSet {
    pub fn new(anchors: Vec<Anchor>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidInput("anchor set is empty".into()));
        }
        for a in &anchors {
            if !(a.length_km >= 0.0) {
                return Err(Error::Domain { what: "anchor length (km)", value: a.length_km });
            }
            if !(a.target >= 0.0) {
                return Err(Error::Domain { what: "anchor target", value: a.target });
            }
            if !(a.weight > 0.0) {
                return Err(Error::Domain { what: "anchor weight", value: a.weight });
            }
        }
        Ok(Self { anchors })
    }

    /// Reads `scenario,length_km,observable,target,weight` rows.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut anchors = Vec::new();
        for (i, row) in r.deserialize::<AnchorRow>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            let wrap = |e: Error| Error::Parse { line, msg: e.to_string() };
            anchors.push(Anchor {
                scenario: row.scenario.parse().map_err(|msg| Error::Parse { line, msg })?,
                length_km: row.length_km,
                observable: row.observable.parse().map_err(wrap)?,
                target: row.target,
                weight: row.weight,
            });
        }
        Self::new(anchors)
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn for_scenario(&self, kind: ScenarioKind) -> Result<Self> {
        Self::new(self.anchors.iter().copied().filter(|a| a.scenario == kind).collect())
            .map_err(|_| Error::InvalidInput(format!("no anchors for the {kind} scenario")))
    }
}

/// A model constant the calibration may adjust.
#[derive(Debug, Clone, PartialEq)]
pub enum FreeParam {
    /// Raman coefficient of one fiber type.
    Rho(String),
    /// Effective power of every attenuable launch, or of the launch at one wavelength.
    LaunchDbm(Option<f64>),
    MisalignmentError,
    DarkCountProb,
}

impl FromStr for FreeParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        match (name, arg) {
            ("rho", Some(label)) if !label.is_empty() => Ok(Self::Rho(label.to_string())),
            ("launch_dbm", None) => Ok(Self::LaunchDbm(None)),
            ("launch_dbm", Some(nm)) => nm
                .parse()
                .map(|nm| Self::LaunchDbm(Some(nm)))
                .map_err(|_| Error::InvalidInput(format!("bad launch wavelength `{nm}`"))),
            ("e_det", None) => Ok(Self::MisalignmentError),
            ("dark_count_prob", None) => Ok(Self::DarkCountProb),
            _ => Err(Error::InvalidInput(format!("unknown free parameter `{s}`"))),
        }
    }
}

impl fmt::Display for FreeParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rho(label) => write!(f, "rho:{label}"),
            Self::LaunchDbm(None) => f.write_str("launch_dbm"),
            Self::LaunchDbm(Some(nm)) => write!(f, "launch_dbm:{nm}"),
            Self::MisalignmentError => f.write_str("e_det"),
            Self::DarkCountProb => f.write_str("dark_count_prob"),
        }
    }
}

impl FreeParam {
    pub fn default_set(kind: ScenarioKind) -> Vec<FreeParam> {
        match kind {
            ScenarioKind::Backbone => vec![Self::Rho("ssmf".into()), Self::LaunchDbm(None)],
            ScenarioKind::Gpon => vec![Self::LaunchDbm(None), Self::Rho("ssmf".into())],
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Rho(_) => RHO_BOUNDS,
            Self::LaunchDbm(_) => LAUNCH_DBM_BOUNDS,
            Self::MisalignmentError => E_DET_BOUNDS,
            Self::DarkCountProb => DARK_COUNT_BOUNDS,
        }
    }

    /// Launch powers are searched directly in dBm; the others in log10.
    fn is_log(&self) -> bool {
        !matches!(self, Self::LaunchDbm(_))
    }

    fn coord_of(&self, v: f64) -> f64 {
        if self.is_log() { v.log10() } else { v }
    }

    fn value_at(&self, u: f64) -> f64 {
        if self.is_log() { 10f64.powf(u) } else { u }
    }

    /// Search coordinates: 11 per decade for log parameters, 1 dB for launches.
    fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        let (lo, hi) = (self.coord_of(lo), self.coord_of(hi));
        let step = self.grid_step();
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| lo + k as f64 * step).collect()
    }

    fn grid_step(&self) -> f64 {
        1.0 / (GRID_POINTS_PER_DECADE - 1) as f64 * if self.is_log() { 1.0 } else { 10.0 }
    }

    pub fn get(&self, s: &ScenarioSettings) -> Result<f64> {
        match self {
            Self::Rho(label) => s.raman_coeff(label),
            Self::LaunchDbm(nm) => s
                .launches
                .iter()
                .find(|l| launch_selected(*nm, l.wavelength_nm, l.attenuable))
                .map(|l| l.effective_dbm())
                .ok_or_else(|| self.missing()),
            Self::MisalignmentError => Ok(s.detector.misalignment_error),
            Self::DarkCountProb => Ok(s.detector.dark_count_prob),
        }
    }

    pub fn set(&self, s: &mut ScenarioSettings, value: f64) -> Result<()> {
        match self {
            Self::Rho(label) => match s.raman.get_mut(label) {
                Some(rho) => *rho = value,
                None => return Err(self.missing()),
            },
            Self::LaunchDbm(nm) => {
                let mut hit = false;
                for l in s.launches.iter_mut().filter(|l| launch_selected(*nm, l.wavelength_nm, l.attenuable)) {
                    l.power_dbm = value + l.attenuation_db;
                    hit = true;
                }
                if !hit {
                    return Err(self.missing());
                }
            }
            Self::MisalignmentError => s.detector.misalignment_error = value,
            Self::DarkCountProb => s.detector.dark_count_prob = value,
        }
        Ok(())
    }

    fn missing(&self) -> Error {
        Error::InvalidInput(format!("free parameter `{self}` does not exist in this scenario"))
    }
}

fn launch_selected(nm: Option<f64>, wavelength_nm: f64, attenuable: bool) -> bool {
    match nm {
        Some(nm) => (wavelength_nm - nm).abs() < 1e-6,
        None => attenuable,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorFit {
    pub anchor: Anchor,
    pub model: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub settings: ScenarioSettings,
    pub fitted: Vec<(FreeParam, f64)>,
    pub residual: f64,
    pub grid_best: f64,
    /// Smallest and largest objective over the coarse grid.
    pub grid_points: usize,
    pub fits: Vec<AnchorFit>,
    pub warnings: Vec<String>,
}

impl fmt::Display for CalibrationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        for (p, v) in &self.fitted {
            let (lo, hi) = p.bounds();
            let near = |b: f64| (v - b).abs() <= 1e-9 * b.abs();
            let edge = if near(lo) || near(hi) {
                "  (at bound)"
            } else {
                ""
            };
            writeln!(f, "fitted {p} = {v:.6e}{edge}")?;
        }
        for fit in &self.fits {
            let a = fit.anchor;
            writeln!(
                f,
                "anchor {} {} km {}: target {:.6e}, model {:.6e}, penalty {:.3e}",
                a.scenario,
                a.length_km,
                a.observable,
                a.target,
                fit.model,
                a.penalty(fit.model)
            )?;
        }
        write!(f, "residual {:.6e} (grid best {:.6e} over {} points)", self.residual, self.grid_best, self.grid_points)
    }
}

/// Model value of every anchor under `settings`.
pub fn anchor_models(settings: &ScenarioSettings, anchors: &AnchorSet) -> Result<Vec<f64>> {
    let scenario = settings.build()?;
    anchors
        .anchors()
        .iter()
        .map(|a| {
            let p = scenario.evaluate_link_lenient(a.length_km)?;
            Ok(match a.observable {
                Observable::Qber => p.yield_gain.e_mu,
                Observable::SecretBps => p.rates.secret_bps,
            })
        })
        .collect()
}

pub fn objective(settings: &ScenarioSettings, anchors: &AnchorSet) -> f64 {
    match anchor_models(settings, anchors) {
        Ok(models) => anchors.anchors().iter().zip(models).map(|(a, m)| a.penalty(m)).sum(),
        Err(_) => f64::INFINITY,
    }
}

struct Problem<'a> {
    base: &'a ScenarioSettings,
    anchors: &'a AnchorSet,
    params: &'a [FreeParam],
}

impl Problem<'_> {
    fn settings_at(&self, u: &[f64]) -> Result<ScenarioSettings> {
        let mut s = self.base.clone();
        for (p, &c) in self.params.iter().zip(u) {
            p.set(&mut s, p.value_at(c))?;
        }
        Ok(s)
    }

    fn eval(&self, u: &[f64]) -> f64 {
        let r = self.settings_at(u).map_or(f64::INFINITY, |s| objective(&s, self.anchors));
        if r.is_nan() { f64::INFINITY } else { r }
    }
}

/// Fits `params` of `base` to the anchors of its scenario: an exhaustive
/// coarse grid over the parameter bounds, then coordinate-wise golden-section
/// refinement within one grid step of the incumbent. Deterministic; parallel
/// grid evaluations are reduced in grid order.
pub fn calibrate(base: &ScenarioSettings, anchors: &AnchorSet, params: &[FreeParam]) -> Result<CalibrationReport> {
    let anchors = anchors.for_scenario(base.kind)?;
    if params.is_empty() {
        return Err(Error::InvalidInput("no free parameters to calibrate".into()));
    }
    for (i, p) in params.iter().enumerate() {
        p.get(base)?;
        if params[..i].contains(p) {
            return Err(Error::InvalidInput(format!("free parameter `{p}` listed twice")));
        }
    }
    let mut warnings = Vec::new();
    if anchors.anchors().len() < params.len() {
        warnings.push(format!(
            "{} anchors for {} free parameters; the fit is not identifiable",
            anchors.anchors().len(),
            params.len()
        ));
    }

    let problem = Problem { base, anchors: &anchors, params };
    let axes: Vec<Vec<f64>> = params.iter().map(FreeParam::grid).collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let point = |mut idx: usize| -> Vec<f64> {
        let mut u = vec![0.0; axes.len()];
        for d in (0..axes.len()).rev() {
            u[d] = axes[d][idx % axes[d].len()];
            idx /= axes[d].len();
        }
        u
    };
    let values: Vec<f64> = (0..total).into_par_iter().map(|i| problem.eval(&point(i))).collect();
    let (best_idx, grid_best) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if !grid_best.is_finite() {
        return Err(Error::InvalidInput("model could not be evaluated anywhere on the calibration grid".into()));
    }

    let mut u = point(best_idx);
    let mut residual = grid_best;
    for _ in 0..REFINE_ROUNDS {
        for d in 0..params.len() {
            let (lo, hi) = params[d].bounds();
            let (lo, hi) = (params[d].coord_of(lo), params[d].coord_of(hi));
            let step = params[d].grid_step();
            let a = (u[d] - step).max(lo);
            let b = (u[d] + step).min(hi);
            let mut trial = u.clone();
            let (x, fx) = golden_section_min(
                |x| {
                    trial[d] = x;
                    problem.eval(&trial)
                },
                a,
                b,
                1e-6 * step,
            );
            if fx < residual {
                u[d] = x;
                residual = fx;
            }
        }
    }
    if residual > MAX_RESIDUAL_RATIO * grid_best {
        return Err(Error::NoImprovement { residual, grid_best });
    }

    let settings = problem.settings_at(&u)?;
    let models = anchor_models(&settings, &anchors)?;
    let fits = anchors.anchors().iter().zip(models).map(|(&anchor, model)| AnchorFit { anchor, model }).collect();
    let fitted = params.iter().zip(&u).map(|(p, &c)| (p.clone(), p.value_at(c))).collect();
    Ok(CalibrationReport { settings, fitted, residual, grid_best, grid_points: total, fits, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANCHORS: &str = "scenario,length_km,observable,target,weight\n\
        gpon,0,qber,0.04,1\n\
        backbone,6,secret_bps,500,1\n";

    #[test]
    fn parses_anchor_csv() {
        let set = AnchorSet::from_csv(ANCHORS.as_bytes()).unwrap();
        assert_eq!(set.anchors().len(), 2);
        assert_eq!(set.anchors()[0].observable, Observable::Qber);
        assert_eq!(set.for_scenario(ScenarioKind::Backbone).unwrap().anchors().len(), 1);
        let bad = "scenario,length_km,observable,target,weight\ngpon,0,loss,1,1\n";
        assert!(matches!(AnchorSet::from_csv(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_anchor_set_rejected() {
        assert!(AnchorSet::new(vec![]).is_err());
        let header_only = "scenario,length_km,observable,target,weight\n";
        assert!(AnchorSet::from_csv(header_only.as_bytes()).is_err());
    }

    #[test]
    fn hinge_for_zero_target() {
        let a = Anchor { scenario: ScenarioKind::Gpon, length_km: 4.5, observable: Observable::SecretBps, target: 0.0, weight: 2.0 };
        assert_eq!(a.penalty(0.0), 0.0);
        assert_eq!(a.penalty(-1.0), 0.0);
        assert_eq!(a.penalty(3.0), 18.0);
        let b = Anchor { target: 100.0, weight: 1.0, ..a };
        assert!((b.penalty(150.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn free_param_names() {
        for s in ["rho:ssmf", "launch_dbm", "launch_dbm:1310", "e_det", "dark_count_prob"] {
            assert_eq!(s.parse::<FreeParam>().unwrap().to_string(), s);
        }
        assert!("rho".parse::<FreeParam>().is_err());
        assert!("gain".parse::<FreeParam>().is_err());
    }

    #[test]
    fn grid_resolution() {
        let rho = FreeParam::Rho("ssmf".into()).grid();
        assert_eq!(rho.len(), 41);
        assert!((rho[10] - rho[0] - 1.0).abs() < 1e-12);
        assert_eq!(FreeParam::LaunchDbm(None).grid().len(), 31);
        assert_eq!(FreeParam::MisalignmentError.grid().len(), 31);
    }

    #[test]
    fn setting_launch_power() {
        let mut s = ScenarioSettings::defaults(ScenarioKind::Gpon);
        s.launches[0].attenuation_db = 2.0;
        FreeParam::LaunchDbm(None).set(&mut s, -4.0).unwrap();
        assert_eq!(s.launches[0].effective_dbm(), -4.0);
        assert_eq!(s.launches[1].power_dbm, -15.0);
        FreeParam::LaunchDbm(Some(1310.0)).set(&mut s, -12.0).unwrap();
        assert_eq!(s.launches[1].effective_dbm(), -12.0);
        assert!(FreeParam::LaunchDbm(Some(1550.0)).set(&mut s, 0.0).is_err());
        assert!(FreeParam::Rho("nzdsf".into()).get(&s).is_err());
    }

    #[test]
    fn recovers_planted_parameter() {
        let mut truth = ScenarioSettings::defaults(ScenarioKind::Gpon);
        FreeParam::LaunchDbm(Some(1310.0)).set(&mut truth, -13.3).unwrap();
        let models = anchor_models(
            &truth,
            &AnchorSet::new(vec![Anchor {
                scenario: ScenarioKind::Gpon,
                length_km: 0.0,
                observable: Observable::Qber,
                target: 1.0,
                weight: 1.0,
            }])
            .unwrap(),
        )
        .unwrap();
        let anchors = AnchorSet::new(vec![Anchor {
            scenario: ScenarioKind::Gpon,
            length_km: 0.0,
            observable: Observable::Qber,
            target: models[0],
            weight: 1.0,
        }])
        .unwrap();
        let base = ScenarioSettings::defaults(ScenarioKind::Gpon);
        let report = calibrate(&base, &anchors, &[FreeParam::LaunchDbm(Some(1310.0))]).unwrap();
        assert!((report.fitted[0].1 + 13.3).abs() < 1e-3, "{}", report);
        assert!(report.residual <= report.grid_best);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn warns_when_underdetermined() {
        let anchors = AnchorSet::from_csv(ANCHORS.as_bytes()).unwrap();
        let base = ScenarioSettings::defaults(ScenarioKind::Gpon);
        let report = calibrate(&base, &anchors, &[FreeParam::LaunchDbm(Some(1310.0)), FreeParam::MisalignmentError]).unwrap();
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn rejects_unknown_or_duplicate_params() {
        let anchors = AnchorSet::from_csv(ANCHORS.as_bytes()).unwrap();
        let base = ScenarioSettings::defaults(ScenarioKind::Gpon);
        assert!(calibrate(&base, &anchors, &[]).is_err());
        assert!(calibrate(&base, &anchors, &[FreeParam::Rho("x".into())]).is_err());
        assert!(calibrate(&base, &anchors, &[FreeParam::MisalignmentError, FreeParam::MisalignmentError]).is_err());
    }
}
