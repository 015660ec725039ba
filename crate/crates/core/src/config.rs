//! Scenario configuration files.
//!
//! The format is line oriented: `[section]` headers followed by
//! `key = value` lines. `#` starts a comment. A key may also be written as
//! `section.key` anywhere in the file. Only `scenario.kind` is required;
//! every other key falls back to the built-in default for that kind.
//!
//! ```text
//! [scenario]
//! kind = backbone
//! [filter]
//! width_nm = 0.4
//! [classical]
//! launch = 1510, -4, co, 0
//! launch = 1470, -4, counter, 0
//! [raman]
//! ssmf = 1e-9
//! [sweep]
//! start_km = 0
//! stop_km = 10
//! step_km = 0.5
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::keyrate::EstimatorMode;
use crate::network::{ClassicalLaunch, Placement, Scenario, ScenarioKind, ScenarioSettings};
use crate::optical_path::{AttenuationTable, Direction};
use crate::sweep::SweepSpec;

const SECTIONS: &[&str] = &["scenario", "detector", "source", "fiber", "filter", "classical", "raman", "sweep"];

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

fn split_entries(text: &str) -> Result<Vec<Entry>> {
    let mut section: Option<String> = None;
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse { line, msg: format!("malformed section header `{content}`") })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Parse { line, msg: format!("unknown section [{name}]") });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("expected `key = value`, found `{content}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Parse { line, msg: "empty key".into() });
        }
        let (sec, key) = match key.split_once('.') {
            Some((prefix, rest)) if SECTIONS.contains(&prefix) => (prefix.to_string(), rest.to_string()),
            _ => match &section {
                Some(s) => (s.clone(), key.to_string()),
                None => return Err(Error::Parse { line, msg: format!("key `{key}` outside any section") }),
            },
        };
        entries.push(Entry { line, section: sec, key, value: value.to_string() });
    }
    Ok(entries)
}

fn num(e: &Entry) -> Result<f64> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse { line: e.line, msg: format!("`{}` is not a number", e.value) })
}

fn boolean(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => Err(Error::Parse { line: e.line, msg: format!("`{v}` is not a boolean") }),
    }
}

fn parse_direction(s: &str) -> Option<Direction> {
    match s {
        "co" => Some(Direction::Co),
        "counter" => Some(Direction::Counter),
        _ => None,
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Co => "co",
        Direction::Counter => "counter",
    }
}

fn parse_launch(e: &Entry, kind: ScenarioKind) -> Result<ClassicalLaunch> {
    let bad = |msg: String| Error::Parse { line: e.line, msg };
    let fields: Vec<&str> = e.value.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(bad(format!(
            "launch expects `wavelength_nm, power_dbm, co|counter, attenuation_db`, found `{}`",
            e.value
        )));
    }
    let number = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(format!("`{s}` is not a number")));
    let wavelength_nm = number(fields[0])?;
    let power_dbm = number(fields[1])?;
    let direction = parse_direction(fields[2]).ok_or_else(|| bad(format!("direction must be co or counter, found `{}`", fields[2])))?;
    let attenuation_db = number(fields[3])?;
    if attenuation_db < 0.0 {
        return Err(bad("launch attenuation must be non-negative".into()));
    }
    // The ONT upstream laser cannot be attenuated.
    let attenuable = !(kind == ScenarioKind::Gpon && wavelength_nm == 1310.0);
    if !attenuable && attenuation_db > 0.0 {
        return Err(bad("the GPON 1310 nm upstream launch is fixed and cannot be attenuated".into()));
    }
    Ok(ClassicalLaunch { wavelength_nm, power_dbm, direction, attenuation_db, attenuable })
}

fn parse_attenuation(e: &Entry) -> Result<AttenuationTable> {
    let bad = |msg: String| Error::Parse { line: e.line, msg };
    let points = e
        .value
        .split(',')
        .map(|pair| {
            let (wl, a) = pair.split_once(':').ok_or_else(|| bad(format!("expected `nm:dB_per_km`, found `{}`", pair.trim())))?;
            let wl = wl.trim().parse::<f64>().map_err(|_| bad(format!("`{}` is not a wavelength", wl.trim())))?;
            let a = a.trim().parse::<f64>().map_err(|_| bad(format!("`{}` is not an attenuation", a.trim())))?;
            Ok((wl, a))
        })
        .collect::<Result<Vec<_>>>()?;
    AttenuationTable::new(points).map_err(|err| bad(err.to_string()))
}

/// Parses a configuration file into scenario settings and a sweep.
pub fn parse_settings(text: &str) -> Result<(ScenarioSettings, SweepSpec)> {
    let entries = split_entries(text)?;
    let kind_entry = entries
        .iter()
        .find(|e| e.section == "scenario" && e.key == "kind")
        .ok_or_else(|| Error::MissingSection("scenario".into()))?;
    let kind: ScenarioKind = kind_entry.value.parse().map_err(|msg| Error::Parse { line: kind_entry.line, msg })?;

    let mut s = ScenarioSettings::defaults(kind);
    let mut sweep = SweepSpec::default();
    let mut launches: Vec<ClassicalLaunch> = Vec::new();
    let mut nu_set = false;
    let mut second_label: Option<String> = None;
    let mut split_km: Option<(usize, f64)> = None;

    for e in &entries {
        let unknown = || Error::UnknownKey { line: e.line, section: e.section.clone(), key: e.key.clone() };
        match (e.section.as_str(), e.key.as_str()) {
            ("scenario", "kind") => {}
            ("scenario", "placement") => {
                s.placement = match e.value.as_str() {
                    "worst_case" => Placement::WorstCase,
                    "even_split" => Placement::EvenSplit,
                    v => return Err(Error::Parse { line: e.line, msg: format!("placement must be worst_case or even_split, found `{v}`") }),
                }
            }
            ("scenario", "fixed_km") => s.fixed_km = num(e)?,
            ("scenario", "splitter_ratio") => {
                s.splitter_ratio = e
                    .value
                    .parse()
                    .map_err(|_| Error::Parse { line: e.line, msg: format!("`{}` is not a splitting ratio", e.value) })?
            }
            ("scenario", "splitter_excess_db") => s.splitter_excess_db = num(e)?,
            ("scenario", "allow_large_split") => s.allow_large_split = boolean(e)?,
            ("scenario", "connector_every_km") => {
                s.connector_every_km = if e.value == "none" { None } else { Some(num(e)?) }
            }
            ("scenario", "connector_loss_db") => s.connector_loss_db = num(e)?,
            ("scenario", "roadm_express_loss_db") => s.roadm_express_loss_db = num(e)?,
            ("scenario", "roadm_add_drop_loss_db") => s.roadm_add_drop_loss_db = num(e)?,
            ("scenario", "roadm_isolation_db") => s.roadm_isolation_db = num(e)?,
            ("scenario", "mux_insertion_loss_db") => s.mux_insertion_loss_db = num(e)?,
            ("scenario", "mux_isolation_db") => s.mux_isolation_db = num(e)?,

            ("detector", "efficiency") => s.detector.efficiency = num(e)?,
            ("detector", "gate_width_s") => s.detector.gate_width_s = num(e)?,
            ("detector", "dark_count_prob") => s.detector.dark_count_prob = num(e)?,
            ("detector", "deadtime_s") => s.detector.deadtime_s = num(e)?,
            ("detector", "misalignment_error") => s.detector.misalignment_error = num(e)?,
            ("detector", "pulse_rate_hz") => s.detector.pulse_rate_hz = num(e)?,

            ("source", "mu") => s.decoy.mu = num(e)?,
            ("source", "nu") => {
                s.decoy.nu = num(e)?;
                nu_set = true;
            }
            ("source", "estimator") => {
                s.decoy.estimator_mode = match e.value.as_str() {
                    "exact_y0" => EstimatorMode::ExactY0,
                    "one_decoy_bound" => EstimatorMode::OneDecoyBound,
                    v => return Err(Error::Parse { line: e.line, msg: format!("estimator must be exact_y0 or one_decoy_bound, found `{v}`") }),
                }
            }
            ("source", "sifting_factor") => s.keyrate.sifting_factor = num(e)?,
            ("source", "ec_efficiency") => s.keyrate.ec_efficiency = num(e)?,
            ("source", "background_error") => s.keyrate.background_error = num(e)?,

            ("fiber", "attenuation") => s.fiber.attenuation = parse_attenuation(e)?,
            ("fiber", "label") => s.fiber.label = e.value.clone(),
            ("fiber", "second_label") => second_label = Some(e.value.clone()),
            ("fiber", "split_km") => split_km = Some((e.line, num(e)?)),

            ("filter", "width_nm") => s.filter.width_nm = num(e)?,
            ("filter", "insertion_loss_db") => s.filter.insertion_loss_db = num(e)?,
            ("filter", "rejection_db") => s.filter.rejection_db = num(e)?,

            ("classical", "launch") => launches.push(parse_launch(e, kind)?),
            ("classical", "duty_cycle") => s.duty_cycle = num(e)?,

            ("raman", label) => {
                if label.is_empty() || label.contains(char::is_whitespace) {
                    return Err(unknown());
                }
                s.raman.insert(label.to_string(), num(e)?);
            }

            ("sweep", "start_km") => sweep.start_km = num(e)?,
            ("sweep", "stop_km") => sweep.stop_km = num(e)?,
            ("sweep", "step_km") => sweep.step_km = num(e)?,
            _ => return Err(unknown()),
        }
    }

    if !nu_set {
        s.decoy.nu = s.decoy.mu / 4.0;
    }
    if !launches.is_empty() {
        s.launches = launches;
    }
    match (second_label, split_km) {
        (Some(label), Some((_, km))) => s.fiber.second = Some((km, label)),
        (None, None) => {}
        (Some(_), None) => return Err(Error::Parse { line: 0, msg: "fiber.second_label needs fiber.split_km".into() }),
        (None, Some((line, _))) => return Err(Error::Parse { line, msg: "fiber.split_km needs fiber.second_label".into() }),
    }
    sweep.validate()?;
    Ok((s, sweep))
}

/// Parses and builds the scenario. Build failures surface as domain errors.
pub fn parse_config(text: &str) -> Result<(Scenario, SweepSpec)> {
    let (settings, sweep) = parse_settings(text)?;
    Ok((settings.build()?, sweep))
}

/// Writes every setting back out in the configuration format.
pub fn render_config(s: &ScenarioSettings, sweep: &SweepSpec) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "[scenario]");
    let _ = writeln!(w, "kind = {}", s.kind);
    let _ = writeln!(
        w,
        "placement = {}",
        match s.placement {
            Placement::WorstCase => "worst_case",
            Placement::EvenSplit => "even_split",
        }
    );
    let _ = writeln!(w, "fixed_km = {}", s.fixed_km);
    let _ = writeln!(w, "splitter_ratio = {}", s.splitter_ratio);
    let _ = writeln!(w, "splitter_excess_db = {}", s.splitter_excess_db);
    let _ = writeln!(w, "allow_large_split = {}", s.allow_large_split);
    match s.connector_every_km {
        Some(km) => {
            let _ = writeln!(w, "connector_every_km = {km}");
        }
        None => {
            let _ = writeln!(w, "connector_every_km = none");
        }
    }
    let _ = writeln!(w, "connector_loss_db = {}", s.connector_loss_db);
    let _ = writeln!(w, "roadm_express_loss_db = {}", s.roadm_express_loss_db);
    let _ = writeln!(w, "roadm_add_drop_loss_db = {}", s.roadm_add_drop_loss_db);
    let _ = writeln!(w, "roadm_isolation_db = {}", s.roadm_isolation_db);
    let _ = writeln!(w, "mux_insertion_loss_db = {}", s.mux_insertion_loss_db);
    let _ = writeln!(w, "mux_isolation_db = {}", s.mux_isolation_db);

    let d = &s.detector;
    let _ = writeln!(w, "\n[detector]");
    let _ = writeln!(w, "efficiency = {}", d.efficiency);
    let _ = writeln!(w, "gate_width_s = {:e}", d.gate_width_s);
    let _ = writeln!(w, "dark_count_prob = {:e}", d.dark_count_prob);
    let _ = writeln!(w, "deadtime_s = {:e}", d.deadtime_s);
    let _ = writeln!(w, "misalignment_error = {}", d.misalignment_error);
    let _ = writeln!(w, "pulse_rate_hz = {:e}", d.pulse_rate_hz);

    let _ = writeln!(w, "\n[source]");
    let _ = writeln!(w, "mu = {}", s.decoy.mu);
    let _ = writeln!(w, "nu = {}", s.decoy.nu);
    let _ = writeln!(
        w,
        "estimator = {}",
        match s.decoy.estimator_mode {
            EstimatorMode::ExactY0 => "exact_y0",
            EstimatorMode::OneDecoyBound => "one_decoy_bound",
        }
    );
    let _ = writeln!(w, "sifting_factor = {}", s.keyrate.sifting_factor);
    let _ = writeln!(w, "ec_efficiency = {}", s.keyrate.ec_efficiency);
    let _ = writeln!(w, "background_error = {}", s.keyrate.background_error);

    let _ = writeln!(w, "\n[fiber]");
    let table: Vec<String> = s.fiber.attenuation.points().iter().map(|(wl, a)| format!("{wl}:{a}")).collect();
    let _ = writeln!(w, "attenuation = {}", table.join(", "));
    let _ = writeln!(w, "label = {}", s.fiber.label);
    if let Some((km, label)) = &s.fiber.second {
        let _ = writeln!(w, "second_label = {label}");
        let _ = writeln!(w, "split_km = {km}");
    }

    let _ = writeln!(w, "\n[raman]");
    for (label, rho) in &s.raman {
        let _ = writeln!(w, "{label} = {rho:e}");
    }

    let _ = writeln!(w, "\n[filter]");
    let _ = writeln!(w, "width_nm = {}", s.filter.width_nm);
    let _ = writeln!(w, "insertion_loss_db = {}", s.filter.insertion_loss_db);
    let _ = writeln!(w, "rejection_db = {}", s.filter.rejection_db);

    let _ = writeln!(w, "\n[classical]");
    for l in &s.launches {
        let _ = writeln!(
            w,
            "launch = {}, {}, {}, {}",
            l.wavelength_nm,
            l.power_dbm,
            direction_name(l.direction),
            l.attenuation_db
        );
    }
    let _ = writeln!(w, "duty_cycle = {}", s.duty_cycle);

    let _ = writeln!(w, "\n[sweep]");
    let _ = writeln!(w, "start_km = {}", sweep.start_km);
    let _ = writeln!(w, "stop_km = {}", sweep.stop_km);
    let _ = writeln!(w, "step_km = {}", sweep.step_km);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "[scenario]\nkind = backbone\n[sweep]\nstart_km = 0\nstop_km = 10\nstep_km = 0.5\n";

    #[test]
    fn minimal_file_uses_defaults() {
        let (s, sweep) = parse_settings(MINIMAL).unwrap();
        assert_eq!(s, ScenarioSettings::defaults(ScenarioKind::Backbone));
        assert_eq!(sweep.lengths().len(), 21);
    }

    #[test]
    fn dotted_keys_and_comments() {
        let text = "filter.width_nm = 0.4   # 50 GHz\n[scenario]\nkind = backbone\n";
        let (s, _) = parse_settings(text).unwrap();
        assert_eq!(s.filter.width_nm, 0.4);
    }

    #[test]
    fn large_split_is_a_domain_error() {
        let text = "[scenario]\nkind = gpon\nsplitter_ratio = 8\n";
        assert!(parse_settings(text).is_ok());
        assert_eq!(parse_config(text).unwrap_err(), Error::SplitTooLarge(8));
        let allowed = format!("{text}allow_large_split = true\n");
        assert!(parse_config(&allowed).is_ok());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_settings("[scenario]\nkind = backbone\nbogus = 1\n").unwrap_err();
        assert_eq!(err, Error::UnknownKey { line: 3, section: "scenario".into(), key: "bogus".into() });
        assert!(matches!(parse_settings("[scenario]\nkind = backbone\n[detector]\nefficiency = lots\n"), Err(Error::Parse { line: 4, .. })));
        assert!(matches!(parse_settings("[scenario]\nkind = ring\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_settings("[nowhere]\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_settings("kind = gpon\n"), Err(Error::Parse { line: 1, .. })));
        assert_eq!(parse_settings("[sweep]\nstart_km = 0\n").unwrap_err(), Error::MissingSection("scenario".into()));
    }

    #[test]
    fn launches_replace_defaults() {
        let text = "[scenario]\nkind = gpon\n[classical]\nlaunch = 1490, 2.5, co, 1.0\n";
        let (s, _) = parse_settings(text).unwrap();
        assert_eq!(s.launches.len(), 1);
        assert_eq!(s.launches[0].effective_dbm(), 1.5);
        let fixed = "[scenario]\nkind = gpon\n[classical]\nlaunch = 1310, 2.0, counter, 3.0\n";
        assert!(matches!(parse_settings(fixed), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn nu_follows_mu_unless_set() {
        let (s, _) = parse_settings("[scenario]\nkind = backbone\n[source]\nmu = 0.6\n").unwrap();
        assert_eq!(s.decoy.nu, 0.15);
        let (s, _) = parse_settings("[scenario]\nkind = backbone\n[source]\nmu = 0.6\nnu = 0.1\n").unwrap();
        assert_eq!(s.decoy.nu, 0.1);
    }

    #[test]
    fn two_fiber_keys() {
        let text = "[scenario]\nkind = backbone\n[fiber]\nsecond_label = commercial\nsplit_km = 4.5\n[raman]\ncommercial = 5e-9\n";
        let (s, _) = parse_settings(text).unwrap();
        assert_eq!(s.fiber.second, Some((4.5, "commercial".to_string())));
        assert!(parse_settings("[scenario]\nkind = backbone\n[fiber]\nsplit_km = 4.5\n").is_err());
    }

    #[test]
    fn render_round_trips_defaults() {
        for kind in [ScenarioKind::Backbone, ScenarioKind::Gpon] {
            let s = ScenarioSettings::defaults(kind);
            let sweep = SweepSpec::default();
            assert_eq!(parse_settings(&render_config(&s, &sweep)).unwrap(), (s, sweep));
        }
    }

    proptest! {
        #[test]
        fn render_round_trips_numbers(
            eff in 0.01..1.0f64,
            rho in 1e-11..1e-7f64,
            width in 0.1..2.0f64,
            power in -20.0..10.0f64,
            duty in 0.0..=1.0f64,
        ) {
            let mut s = ScenarioSettings::defaults(ScenarioKind::Backbone);
            s.detector.efficiency = eff;
            s.raman.insert("ssmf".into(), rho);
            s.filter.width_nm = width;
            s.launches[0].power_dbm = power;
            s.duty_cycle = duty;
            let sweep = SweepSpec::default();
            prop_assert_eq!(parse_settings(&render_config(&s, &sweep)).unwrap(), (s, sweep));
        }
    }
}
