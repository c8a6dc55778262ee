//! Machine-readable records and the cross-check harness that evaluates
//! `P[G(m, n) <= η]` by several independent methods and compares them.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detformulas::{cdf_det, CdfQuery};
use crate::error::{Error, Result};
use crate::fredholm::{cdf_biorth, cdf_fredholm, KernelSpec, KernelVariant};
use crate::lpp::{exact_cdf_dp_capped, mc_cdf, RngSeed, DEFAULT_MAX_STATES};
use crate::meixner::{
    bruteforce_terms, meixner_cdf_bruteforce_capped, meixner_cdf_gram, MeixnerEnsembleQuery, DEFAULT_DIGITS,
    DEFAULT_MAX_TERMS,
};
use crate::scalar::{format_rational, rational_to_f64};
use crate::weights::ContourConfig;

/// Declared tolerance of the quadrature-based methods.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

/// Width of the Monte Carlo acceptance band in standard errors.
pub const MC_SIGMAS: f64 = 4.0;

/// Slack for comparing an exact value against its `f64` rounding.
const ROUNDING_SLACK: f64 = 64.0 * f64::EPSILON;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_float(s: &str) -> Option<f64> {
    s.parse().ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Biorth,
    Det,
    Dp,
    Fredholm,
    Mc,
    Meixner,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Biorth,
        Method::Det,
        Method::Dp,
        Method::Fredholm,
        Method::Mc,
        Method::Meixner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Biorth => "biorth",
            Method::Det => "det",
            Method::Dp => "dp",
            Method::Fredholm => "fredholm",
            Method::Mc => "mc",
            Method::Meixner => "meixner",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}; expected one of biorth, det, dp, fredholm, mc, meixner")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdfParams {
    /// `q` as an exact rational literal.
    pub q: String,
    pub m: usize,
    pub n: usize,
    pub eta: i64,
}

impl CdfParams {
    pub fn of(cq: &CdfQuery) -> Self {
        Self {
            q: cq.q.to_string(),
            m: cq.m,
            n: cq.n,
            eta: cq.eta,
        }
    }
}

/// Outcome of one method. Floats are decimal strings with 17 significant
/// digits; `exact` is a rational literal when the method is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    pub method: Method,
    pub value: Option<String>,
    pub exact: Option<String>,
    pub error_estimate: Option<String>,
    /// Half-width used when comparing this method against others.
    pub tolerance: Option<String>,
    /// Wall-clock time; cleared by [`Record::strip_timing`] for reproducible output.
    pub wall_ms: Option<String>,
    pub error: Option<String>,
}

impl MethodEntry {
    pub fn value_f64(&self) -> Option<f64> {
        self.value.as_deref().and_then(parse_float)
    }

    pub fn exact_rational(&self) -> Option<BigRational> {
        self.exact.as_deref().and_then(|s| crate::scalar::parse_rational(s).ok())
    }

    pub fn tolerance_f64(&self) -> f64 {
        self.tolerance.as_deref().and_then(parse_float).unwrap_or(0.0)
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub methods: [Method; 2],
    pub difference: String,
    pub tolerance: String,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfReport {
    pub params: CdfParams,
    /// Sorted by method name.
    pub methods: Vec<MethodEntry>,
    pub pairs: Vec<PairCheck>,
    /// True iff at least two methods succeeded and every pair agrees.
    pub agreement: bool,
}

impl CdfReport {
    pub fn new(params: CdfParams, mut methods: Vec<MethodEntry>) -> Self {
        methods.sort_by_key(|e| e.method);
        let ok: Vec<&MethodEntry> = methods.iter().filter(|e| e.is_ok()).collect();
        let mut pairs = Vec::new();
        for (i, a) in ok.iter().enumerate() {
            for b in &ok[i + 1..] {
                pairs.push(compare(a, b));
            }
        }
        let agreement = ok.len() >= 2 && pairs.iter().all(|p| p.agree);
        Self {
            params,
            methods,
            pairs,
            agreement,
        }
    }

    pub fn entry(&self, method: Method) -> Option<&MethodEntry> {
        self.methods.iter().find(|e| e.method == method)
    }
}

fn compare(a: &MethodEntry, b: &MethodEntry) -> PairCheck {
    let methods = [a.method, b.method];
    if let (Some(x), Some(y)) = (a.exact_rational(), b.exact_rational()) {
        let diff = rational_to_f64(&(x.clone() - y.clone())).abs();
        return PairCheck {
            methods,
            difference: format_float(diff),
            tolerance: format_float(0.0),
            agree: x == y,
        };
    }
    let (x, y) = (a.value_f64().unwrap_or(f64::NAN), b.value_f64().unwrap_or(f64::NAN));
    let diff = (x - y).abs();
    let tolerance = a.tolerance_f64() + b.tolerance_f64() + ROUNDING_SLACK;
    PairCheck {
        methods,
        difference: format_float(diff),
        tolerance: format_float(tolerance),
        agree: diff <= tolerance,
    }
}

/// Result of a single evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    pub params: CdfParams,
    pub entry: MethodEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub q: String,
    pub steps: usize,
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    pub exact: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub q: String,
    pub m: usize,
    pub n: usize,
    pub eta1: i64,
    pub eta2: i64,
    pub truncation: i64,
    pub exact: String,
    pub value: String,
    /// Mass of the terms at the truncation boundary.
    pub last_increment: String,
}

/// One line of CLI output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Cdf(CdfReport),
    Value(ValueReport),
    Transition(TransitionReport),
    Joint(JointReport),
}

impl Record {
    /// Drops wall-clock times so that identical inputs give identical bytes.
    pub fn strip_timing(&mut self) {
        match self {
            Record::Cdf(r) => r.methods.iter_mut().for_each(|e| e.wall_ms = None),
            Record::Value(r) => r.entry.wall_ms = None,
            Record::Transition(_) | Record::Joint(_) => {}
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrosscheckConfig {
    pub samples: u64,
    pub seed: u64,
    pub max_states: u128,
    pub trunc: usize,
    pub variant: KernelVariant,
    /// Radii for the quadrature methods; `None` picks the defaults for `q`.
    pub contour: Option<ContourConfig>,
    pub meixner_max_terms: u128,
    pub meixner_digits: u32,
}

impl Default for CrosscheckConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 0,
            max_states: DEFAULT_MAX_STATES,
            trunc: 32,
            variant: KernelVariant::Derivation,
            contour: None,
            meixner_max_terms: DEFAULT_MAX_TERMS,
            meixner_digits: DEFAULT_DIGITS,
        }
    }
}

struct Outcome {
    value: f64,
    exact: Option<BigRational>,
    error_estimate: Option<f64>,
    tolerance: f64,
}

impl Outcome {
    fn exact(v: BigRational) -> Self {
        Self {
            value: rational_to_f64(&v),
            exact: Some(v),
            error_estimate: Some(0.0),
            tolerance: 0.0,
        }
    }
}

fn kernel_spec(cq: &CdfQuery, cfg: &CrosscheckConfig) -> Result<KernelSpec> {
    let contour = cfg.contour.unwrap_or_else(|| ContourConfig::default_for(&cq.q));
    KernelSpec::new(cq.q.clone(), cq.m, cq.n, cfg.variant, contour)
}

fn evaluate(method: Method, cq: &CdfQuery, cfg: &CrosscheckConfig) -> Result<Outcome> {
    match method {
        Method::Dp => exact_cdf_dp_capped(&cq.q, cq.m, cq.n, cq.eta, cfg.max_states).map(Outcome::exact),
        Method::Det => cdf_det(cq).map(Outcome::exact),
        Method::Meixner => {
            let mq = MeixnerEnsembleQuery::from(cq);
            if bruteforce_terms(&mq) <= cfg.meixner_max_terms {
                meixner_cdf_bruteforce_capped(&mq, cfg.meixner_max_terms).map(Outcome::exact)
            } else {
                let hp = meixner_cdf_gram(&mq, cfg.meixner_digits, true)?;
                let half_ulp = f64::EPSILON * hp.to_f64().abs();
                Ok(Outcome {
                    value: hp.to_f64(),
                    exact: None,
                    error_estimate: Some(10f64.powi(-(hp.digits as i32)) + half_ulp),
                    tolerance: half_ulp,
                })
            }
        }
        Method::Biorth => {
            let spec = kernel_spec(cq, cfg)?;
            Ok(Outcome {
                value: cdf_biorth(&spec, cq.eta)?,
                exact: None,
                error_estimate: None,
                tolerance: QUADRATURE_TOLERANCE,
            })
        }
        Method::Fredholm => {
            let spec = kernel_spec(cq, cfg)?;
            let f = cdf_fredholm(&spec, cq.eta, cfg.trunc)?;
            Ok(Outcome {
                value: f.value,
                exact: None,
                error_estimate: Some(f.last_increment),
                tolerance: QUADRATURE_TOLERANCE,
            })
        }
        Method::Mc => {
            let est = mc_cdf(&cq.q, cq.m, cq.n, cq.eta, cfg.samples, RngSeed(cfg.seed))?;
            // keep a nonzero band when every sample landed on the same side
            let n = est.samples as f64;
            let variance = (est.estimate * (1.0 - est.estimate)).max(1.0 / n);
            Ok(Outcome {
                value: est.estimate,
                exact: None,
                error_estimate: Some(est.stderr),
                tolerance: MC_SIGMAS * (variance / n).sqrt(),
            })
        }
    }
}

/// Runs one method, capturing failures in the entry instead of returning them.
pub fn run_method(method: Method, cq: &CdfQuery, cfg: &CrosscheckConfig) -> MethodEntry {
    let start = Instant::now();
    let outcome = evaluate(method, cq, cfg);
    let wall_ms = Some(format_float(start.elapsed().as_secs_f64() * 1e3));
    match outcome {
        Ok(o) => MethodEntry {
            method,
            value: Some(format_float(o.value)),
            exact: o.exact.as_ref().map(format_rational),
            error_estimate: o.error_estimate.map(format_float),
            tolerance: Some(format_float(o.tolerance)),
            wall_ms,
            error: None,
        },
        Err(e) => MethodEntry {
            method,
            value: None,
            exact: None,
            error_estimate: None,
            tolerance: None,
            wall_ms,
            error: Some(e.to_string()),
        },
    }
}

/// Evaluates `methods` concurrently and assembles a report sorted by method.
pub fn crosscheck(cq: &CdfQuery, methods: &[Method], cfg: &CrosscheckConfig) -> Result<CdfReport> {
    let mut unique = methods.to_vec();
    unique.sort();
    unique.dedup();
    if unique.len() < 2 {
        return Err(Error::InvalidParameter("a cross-check needs at least two distinct methods".into()));
    }
    let entries = unique.par_iter().map(|&m| run_method(m, cq, cfg)).collect();
    Ok(CdfReport::new(CdfParams::of(cq), entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::GeometricParameter;

    fn query(m: usize, n: usize, eta: i64) -> CdfQuery {
        CdfQuery::new(GeometricParameter::from_ratio(1, 2).unwrap(), m, n, eta).unwrap()
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, 1.0, 0.1, 1.0 / 3.0, 5e-300, 123456.789] {
            let s = format_float(v);
            assert_eq!(parse_float(&s), Some(v));
            let mantissa: String = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("gue".parse::<Method>().is_err());
    }

    #[test]
    fn five_way_agreement() {
        let cfg = CrosscheckConfig { samples: 200_000, ..Default::default() };
        let report = crosscheck(&query(2, 2, 1), &Method::ALL, &cfg).unwrap();
        assert!(report.agreement, "{report:#?}");
        let names: Vec<Method> = report.methods.iter().map(|e| e.method).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert_eq!(report.pairs.len(), 15);
    }

    #[test]
    fn scalar_case_is_one_half() {
        let cfg = CrosscheckConfig { samples: 100_000, ..Default::default() };
        let report = crosscheck(&query(3, 1, 2), &Method::ALL, &cfg).unwrap();
        for e in &report.methods {
            if e.method == Method::Mc {
                continue;
            }
            assert!((e.value_f64().unwrap() - 0.5).abs() < 1e-8, "{e:?}");
        }
        assert_eq!(report.entry(Method::Dp).unwrap().exact.as_deref(), Some("1/2"));
        assert!(report.agreement);
    }

    #[test]
    fn printed_kernel_disagrees() {
        let cfg = CrosscheckConfig { variant: KernelVariant::Printed, ..Default::default() };
        let report = crosscheck(&query(4, 2, 3), &[Method::Dp, Method::Fredholm], &cfg).unwrap();
        assert!(!report.agreement);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let cfg = CrosscheckConfig { max_states: 3, ..Default::default() };
        let report = crosscheck(&query(3, 2, 4), &[Method::Dp, Method::Det, Method::Meixner], &cfg).unwrap();
        let dp = report.entry(Method::Dp).unwrap();
        assert!(dp.error.is_some() && dp.value.is_none());
        assert!(report.entry(Method::Det).unwrap().is_ok());
        assert!(report.agreement);
        assert!(crosscheck(&query(3, 2, 4), &[Method::Dp, Method::Dp], &cfg).is_err());
    }

    #[test]
    fn records_are_tagged() {
        let report = crosscheck(&query(2, 1, 0), &[Method::Dp, Method::Det], &CrosscheckConfig::default()).unwrap();
        let json = serde_json::to_value(Record::Cdf(report.clone())).unwrap();
        assert_eq!(json["kind"], "cdf");
        assert_eq!(json["params"]["q"], "1/2");
        let back: Record = serde_json::from_value(json).unwrap();
        assert_eq!(back, Record::Cdf(report));
    }
}
