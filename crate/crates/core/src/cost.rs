//! Deployment cost profiles, cost comparison reports and small cost formulas.
//!
//! Costs are computed in `f64` dollars and rounded to whole cents (half up)
//! once, when a report row is built; ratios are taken between those cents.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Average model-run workload for one species, core-hours.
pub const DEFAULT_CORE_HOURS_PER_SPECIES: f64 = 1600.0;

/// The five deployment options of the case study.
pub const CASE_STUDY_PROFILES_CSV: &str = include_str!("../data/case_study_profiles.csv");

pub const PROFILE_HEADER: [&str; 8] = [
    "name",
    "region",
    "rate_basis",
    "compute_rate",
    "cores_per_instance",
    "orchestration_fee",
    "software_fee",
    "headline_cost_override",
];

pub const REPORT_HEADER: [&str; 4] = ["name", "per_species_usd", "per_catalog_usd", "ratio"];

#[derive(Debug, Error)]
pub enum CostError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("profiles header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("profiles line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("profile {0}: per-instance-hour basis needs cores_per_instance >= 1")]
    MissingCores(String),
    #[error("profile {profile}: {message}")]
    InvalidProfile { profile: String, message: String },
    #[error("need at least one profile")]
    NoProfiles,
    #[error("need >= 2 regions, found {0}")]
    TooFewRegions(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateBasis {
    PerCoreHour,
    PerInstanceHour,
}

impl RateBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            RateBasis::PerCoreHour => "per-core-hour",
            RateBasis::PerInstanceHour => "per-instance-hour",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-core-hour" => Some(RateBasis::PerCoreHour),
            "per-instance-hour" => Some(RateBasis::PerInstanceHour),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentProfile {
    pub name: String,
    pub region: String,
    pub rate_basis: RateBasis,
    /// USD per core-hour or per instance-hour, depending on `rate_basis`.
    pub compute_rate: f64,
    pub cores_per_instance: Option<u32>,
    /// USD per instance-hour.
    pub orchestration_fee: f64,
    /// USD per core-hour.
    pub software_fee: f64,
    /// Reported per-species total that replaces the computed one.
    pub headline_cost_override: Option<f64>,
}

impl DeploymentProfile {
    pub fn validate(&self) -> Result<(), CostError> {
        let invalid = |message: String| CostError::InvalidProfile { profile: self.name.clone(), message };
        let rates = [
            ("compute_rate", Some(self.compute_rate)),
            ("orchestration_fee", Some(self.orchestration_fee)),
            ("software_fee", Some(self.software_fee)),
            ("headline_cost_override", self.headline_cost_override),
        ];
        for (field, v) in rates {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(invalid(format!("{field} must be a non-negative number, got {v}")));
                }
            }
        }
        if self.rate_basis == RateBasis::PerInstanceHour && !self.cores_per_instance.is_some_and(|c| c >= 1) {
            return Err(CostError::MissingCores(self.name.clone()));
        }
        if self.cores_per_instance == Some(0) {
            return Err(invalid("cores_per_instance must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-species cost of `core_hours` of work under `profile`.
pub fn profile_cost(profile: &DeploymentProfile, core_hours: f64) -> Result<f64, CostError> {
    if !(core_hours > 0.0) || !core_hours.is_finite() {
        return Err(CostError::InvalidInput(format!("core_hours must be positive, got {core_hours}")));
    }
    profile.validate()?;
    if let Some(cost) = profile.headline_cost_override {
        return Ok(cost);
    }
    let software = profile.software_fee * core_hours;
    Ok(match profile.rate_basis {
        RateBasis::PerCoreHour => profile.compute_rate * core_hours + software,
        RateBasis::PerInstanceHour => {
            let cores = profile.cores_per_instance.ok_or_else(|| CostError::MissingCores(profile.name.clone()))?;
            core_hours / f64::from(cores) * (profile.compute_rate + profile.orchestration_fee) + software
        }
    })
}

/// Round half up to whole cents.
pub fn usd_to_cents(usd: f64) -> i64 {
    (usd * 100.0 + 0.5).floor() as i64
}

pub fn format_cents(cents: i64) -> String {
    let sign = if cents < 0 { "-" } else { "" };
    let c = cents.unsigned_abs();
    format!("{sign}{}.{:02}", c / 100, c % 100)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub name: String,
    pub per_species_cents: i64,
    pub per_catalog_cents: i64,
    /// Per-species cost relative to the cheapest row.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Most expensive first.
    pub rows: Vec<CostRow>,
    pub core_hours: f64,
    pub n_species: u64,
}

impl CostReport {
    /// Cheapest row; ties go to the lexicographically smallest name.
    pub fn cheapest(&self) -> Option<&CostRow> {
        self.rows.iter().min_by(|a, b| a.per_species_cents.cmp(&b.per_species_cents).then_with(|| a.name.cmp(&b.name)))
    }

    pub fn row(&self, name: &str) -> Option<&CostRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

fn build_report(named: Vec<(String, f64)>, core_hours: f64, n_species: u64) -> CostReport {
    let priced: Vec<(String, i64)> = named.into_iter().map(|(n, usd)| (n, usd_to_cents(usd))).collect();
    let min = priced.iter().map(|(_, c)| *c).min().unwrap_or(0);
    let mut rows: Vec<CostRow> = priced
        .into_iter()
        .map(|(name, cents)| {
            let ratio = if cents == min {
                1.0
            } else if min == 0 {
                f64::INFINITY
            } else {
                cents as f64 / min as f64
            };
            CostRow { name, per_species_cents: cents, per_catalog_cents: cents * n_species as i64, ratio }
        })
        .collect();
    rows.sort_by(|a, b| b.per_species_cents.cmp(&a.per_species_cents).then_with(|| a.name.cmp(&b.name)));
    CostReport { rows, core_hours, n_species }
}

/// One row per profile, most expensive first.
pub fn compare_profiles(profiles: &[DeploymentProfile], core_hours: f64, n_species: u64) -> Result<CostReport, CostError> {
    if profiles.is_empty() {
        return Err(CostError::NoProfiles);
    }
    let named = profiles.iter().map(|p| Ok((p.name.clone(), profile_cost(p, core_hours)?))).collect::<Result<_, CostError>>()?;
    Ok(build_report(named, core_hours, n_species))
}

/// One row per region, priced by the region's cheapest profile.
pub fn compare_regions(profiles: &[DeploymentProfile], core_hours: f64) -> Result<CostReport, CostError> {
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for p in profiles {
        let cost = profile_cost(p, core_hours)?;
        best.entry(p.region.as_str()).and_modify(|c| *c = c.min(cost)).or_insert(cost);
    }
    if best.len() < 2 {
        return Err(CostError::TooFewRegions(best.len()));
    }
    Ok(build_report(best.into_iter().map(|(r, c)| (r.to_string(), c)).collect(), core_hours, 1))
}

/// Share of the hourly price that goes to the orchestration fee.
pub fn emr_fraction(compute_rate: f64, orchestration_fee: f64) -> Result<f64, CostError> {
    if !(compute_rate >= 0.0) || !(orchestration_fee >= 0.0) || !compute_rate.is_finite() || !orchestration_fee.is_finite() {
        return Err(CostError::InvalidInput("rates must be non-negative numbers".into()));
    }
    let total = compute_rate + orchestration_fee;
    if total == 0.0 {
        return Err(CostError::InvalidInput("compute rate and fee are both zero".into()));
    }
    Ok(orchestration_fee / total)
}

/// Overall speed-up when a fraction `p` of the work is sped up by `s`.
pub fn amdahl(p: f64, s: f64) -> Result<f64, CostError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CostError::InvalidInput(format!("fraction must lie in [0, 1], got {p}")));
    }
    if !(s > 0.0) || s.is_nan() {
        return Err(CostError::InvalidInput(format!("factor must be positive, got {s}")));
    }
    Ok(1.0 / ((1.0 - p) + p / s))
}

pub fn spot_discount(spot_rate: f64, ondemand_rate: f64) -> Result<f64, CostError> {
    if !(spot_rate >= 0.0) || !spot_rate.is_finite() {
        return Err(CostError::InvalidInput(format!("spot rate must be non-negative, got {spot_rate}")));
    }
    if !(ondemand_rate > 0.0) || !ondemand_rate.is_finite() {
        return Err(CostError::InvalidInput(format!("on-demand rate must be positive, got {ondemand_rate}")));
    }
    Ok(1.0 - spot_rate / ondemand_rate)
}

pub fn read_profiles_from<R: Read>(input: R) -> Result<Vec<DeploymentProfile>, CostError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(PROFILE_HEADER) {
        return Err(CostError::Header {
            expected: PROFILE_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = |message: String| CostError::Row { line, message };
        if rec.len() != PROFILE_HEADER.len() {
            return Err(row(format!("expected {} fields, found {}", PROFILE_HEADER.len(), rec.len())));
        }
        let num = |i: usize| -> Result<f64, CostError> {
            rec[i].parse::<f64>().map_err(|_| row(format!("bad {} {:?}", PROFILE_HEADER[i], &rec[i])))
        };
        let opt_num = |i: usize| if rec[i].is_empty() { Ok(None) } else { num(i).map(Some) };
        let cores = if rec[4].is_empty() {
            None
        } else {
            Some(rec[4].parse::<u32>().map_err(|_| row(format!("bad cores_per_instance {:?}", &rec[4])))?)
        };
        let profile = DeploymentProfile {
            name: rec[0].to_string(),
            region: rec[1].to_string(),
            rate_basis: RateBasis::parse(&rec[2]).ok_or_else(|| row(format!("unknown rate_basis {:?}", &rec[2])))?,
            compute_rate: num(3)?,
            cores_per_instance: cores,
            orchestration_fee: opt_num(5)?.unwrap_or(0.0),
            software_fee: opt_num(6)?.unwrap_or(0.0),
            headline_cost_override: opt_num(7)?,
        };
        if profile.name.is_empty() {
            return Err(row("empty profile name".into()));
        }
        profile.validate().map_err(|e| row(e.to_string()))?;
        out.push(profile);
    }
    Ok(out)
}

pub fn load_profiles(path: &Path) -> Result<Vec<DeploymentProfile>, CostError> {
    read_profiles_from(std::fs::File::open(path)?)
}

pub fn case_study_profiles() -> Vec<DeploymentProfile> {
    read_profiles_from(CASE_STUDY_PROFILES_CSV.as_bytes()).expect("shipped profiles are valid")
}

fn format_ratio(r: f64) -> String {
    if r.is_finite() {
        format!("{r:.4}")
    } else {
        "inf".into()
    }
}

pub fn write_report<W: Write>(report: &CostReport, out: W) -> Result<(), CostError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.name.clone(),
            format_cents(r.per_species_cents),
            format_cents(r.per_catalog_cents),
            format_ratio(r.ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table for terminals.
pub fn render_table(report: &CostReport) -> String {
    let width = report.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
    let mut s = String::new();
    let _ = writeln!(s, "workload: {} core-hours per species, {} species", report.core_hours, report.n_species);
    let _ = writeln!(s, "{:<width$}  {:>14}  {:>18}  {:>8}", "name", "per species", "per catalog", "ratio");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>14}  {:>18}  {:>8}",
            r.name,
            format!("${}", format_cents(r.per_species_cents)),
            format!("${}", format_cents(r.per_catalog_cents)),
            format_ratio(r.ratio)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn per_instance(name: &str, region: &str, rate: f64) -> DeploymentProfile {
        DeploymentProfile {
            name: name.into(),
            region: region.into(),
            rate_basis: RateBasis::PerInstanceHour,
            compute_rate: rate,
            cores_per_instance: Some(16),
            orchestration_fee: 0.0,
            software_fee: 0.0,
            headline_cost_override: None,
        }
    }

    #[test]
    fn shipped_profiles_give_headline_costs() {
        let report = compare_profiles(&case_study_profiles(), DEFAULT_CORE_HOURS_PER_SPECIES, 1).unwrap();
        let cents: Vec<i64> = report.rows.iter().map(|r| r.per_species_cents).collect();
        assert_eq!(cents, vec![37_400, 19_200, 18_000, 7_000, 2_500]);
        assert_eq!(report.cheapest().unwrap().name, "aws-spot-flintrock");
        assert_eq!(report.row("aws-ondemand-emr").unwrap().ratio, 7.2);
        assert_eq!(report.row("hpc").unwrap().ratio, 7.68);
        assert_eq!(report.cheapest().unwrap().ratio, 1.0);
    }

    #[test]
    fn catalog_cost_multiplies_species() {
        let report = compare_profiles(&case_study_profiles(), DEFAULT_CORE_HOURS_PER_SPECIES, 10_313).unwrap();
        assert_eq!(report.row("aws-spot-flintrock").unwrap().per_catalog_cents, 25_782_500);
        let one = compare_profiles(&case_study_profiles()[..1], 1600.0, 1).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert_eq!(one.rows[0].ratio, 1.0);
        assert_eq!(one.rows[0].per_catalog_cents, one.rows[0].per_species_cents);
    }

    #[test]
    fn cost_is_linear_without_override() {
        let azure = &case_study_profiles()[1];
        for h in [1.0, 37.5, 1600.0, 12345.0] {
            assert_eq!(profile_cost(azure, 2.0 * h).unwrap(), 2.0 * profile_cost(azure, h).unwrap());
        }
        let zero = per_instance("free", "x", 0.0);
        assert_eq!(profile_cost(&zero, 1600.0).unwrap(), 0.0);
    }

    #[test]
    fn missing_cores_rejected() {
        let p = DeploymentProfile { cores_per_instance: None, ..per_instance("p", "r", 1.0) };
        assert!(matches!(profile_cost(&p, 10.0), Err(CostError::MissingCores(_))));
        let text = format!("{}\np,r,per-instance-hour,1,,0,0,\n", PROFILE_HEADER.join(","));
        assert!(matches!(read_profiles_from(text.as_bytes()), Err(CostError::Row { line: 2, .. })));
    }

    #[test]
    fn regions_compare_cheapest_profiles() {
        let ps = [per_instance("a", "us-east", 0.13), per_instance("b", "eu-west", 0.15), per_instance("c", "eu-west", 0.9)];
        let r = compare_regions(&ps, 1600.0).unwrap();
        assert_eq!(r.cheapest().unwrap().name, "us-east");
        assert_eq!(r.row("eu-west").unwrap().ratio, 15.0 / 13.0);
        let tie = [per_instance("a", "zeta", 0.13), per_instance("b", "alpha", 0.13)];
        assert_eq!(compare_regions(&tie, 1600.0).unwrap().cheapest().unwrap().name, "alpha");
        let err = compare_regions(&ps[..1], 1600.0).unwrap_err();
        assert_eq!(err.to_string(), "need >= 2 regions, found 1");
    }

    #[test]
    fn formulas() {
        assert!((emr_fraction(0.80, 0.24).unwrap() - 0.2308).abs() < 1e-4);
        assert!((emr_fraction(0.13, 0.24).unwrap() - 0.6486).abs() < 1e-4);
        assert_eq!(emr_fraction(0.5, 0.0).unwrap(), 0.0);
        assert!(emr_fraction(0.0, 0.0).is_err());
        assert_eq!(amdahl(1.0, 6.0).unwrap(), 6.0);
        assert_eq!(amdahl(0.0, 10.0).unwrap(), 1.0);
        assert!((amdahl(0.8, 5.0).unwrap() - 2.7778).abs() < 1e-4);
        assert!(amdahl(1.1, 2.0).is_err() && amdahl(0.5, 0.0).is_err());
        assert_eq!(spot_discount(0.13, 0.80).unwrap(), 0.8375);
        assert_eq!(spot_discount(0.4, 0.4).unwrap(), 0.0);
        assert_eq!(spot_discount(0.0, 0.4).unwrap(), 1.0);
        assert!(spot_discount(-0.1, 0.4).is_err());
    }

    #[test]
    fn report_csv_layout() {
        let report = compare_profiles(&case_study_profiles(), 1600.0, 2).unwrap();
        let mut buf = Vec::new();
        write_report(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("name,per_species_usd,per_catalog_usd,ratio\nazure,374.00,748.00,14.9600\n"), "{text}");
        assert!(render_table(&report).contains("$25.00"));
    }

    #[test]
    fn cents_round_half_up() {
        assert_eq!(usd_to_cents(0.125), 13);
        assert_eq!(usd_to_cents(192.00000000000003), 19_200);
        assert_eq!(format_cents(257_825_00), "257825.00");
        assert_eq!(format_cents(5), "0.05");
    }
}
