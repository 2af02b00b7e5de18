//! Assembly of the `classes`, `series` and `verify` outputs.

use crate::{Failure, RunConfig};
use serde::Serialize;
use std::f64::consts::PI;
use windtrace::cycles::{generating_series, l0, TraceTable};
use windtrace::modfun::ThirdKindForm;
use windtrace::qforms::{enumerate_classes, genus_character, GenusCharContext};
use windtrace::theta::{theta_lower, theta_star, CoeffFn, CoeffTerm, ThetaTable};
use windtrace::verify::{
    run_all, run_criterion, CriterionReport, Precision, VerifyOptions, VerifyReport, SCHEMA_VERSION,
};
use windtrace::weil::e;
use windtrace::Complex64;

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable output");
    out.push(b'\n');
    out
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory writer")
}

#[derive(Serialize)]
pub struct ClassRow {
    pub d: i64,
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(rename = "D")]
    pub disc: i64,
    pub classes: Vec<[i64; 3]>,
    pub chi: Vec<i32>,
}

#[derive(Serialize)]
pub struct ClassesOut {
    pub schema_version: u32,
    pub command: &'static str,
    #[serde(rename = "Delta")]
    pub delta: i64,
    #[serde(rename = "N")]
    pub n: i64,
    pub r: i64,
    pub d_max: i64,
    pub rows: Vec<ClassRow>,
}

pub fn classes(cfg: &RunConfig) -> Result<ClassesOut, Failure> {
    let ctx = GenusCharContext::new(cfg.delta, cfg.r, cfg.n)?;
    let mut rows = Vec::new();
    for d in 1..=cfg.d_max {
        let disc = -d * cfg.delta;
        let mut forms = enumerate_classes(cfg.n, disc)?;
        forms.sort_by_key(|f| (f.a, f.b, f.c));
        rows.push(ClassRow {
            d,
            n: cfg.n,
            disc,
            chi: forms.iter().map(|f| genus_character(&ctx, f)).collect(),
            classes: forms.iter().map(|f| [f.a, f.b, f.c]).collect(),
        });
    }
    Ok(ClassesOut {
        schema_version: SCHEMA_VERSION,
        command: "classes",
        delta: cfg.delta,
        n: cfg.n,
        r: cfg.r,
        d_max: cfg.d_max,
        rows,
    })
}

pub fn classes_csv(t: &ClassesOut) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["Delta", "N", "r", "d", "D", "A", "B", "C", "chi"]).unwrap();
    for row in &t.rows {
        let head = [t.delta, t.n, t.r, row.d, row.disc].map(|x| x.to_string());
        if row.classes.is_empty() {
            w.write_record(head.iter().map(String::as_str).chain(["", "", "", ""])).unwrap();
        }
        for (f, chi) in row.classes.iter().zip(&row.chi) {
            let tail = [f[0], f[1], f[2], *chi as i64].map(|x| x.to_string());
            w.write_record(head.iter().chain(tail.iter())).unwrap();
        }
    }
    finish_csv(w)
}

#[derive(Serialize)]
pub struct ThetaOut {
    /// exact constant term
    pub constant_term: String,
    /// complete for Im tau >= v_min up to tol
    pub v_min: f64,
    pub entries: Vec<CoeffRow>,
}

#[derive(Serialize)]
pub struct CoeffRow {
    pub d: i64,
    pub coeff: CoeffFn,
}

impl From<&ThetaTable> for ThetaOut {
    fn from(t: &ThetaTable) -> Self {
        ThetaOut {
            constant_term: t.constant_term.to_string(),
            v_min: t.v_min,
            entries: t.entries.iter().map(|(d, c)| CoeffRow { d: *d, coeff: c.clone() }).collect(),
        }
    }
}

#[derive(Serialize)]
pub struct Sample {
    /// [Re tau, Im tau]
    pub tau: [f64; 2],
    /// truncated holomorphic series, [re, im]
    pub g: [f64; 2],
    pub theta_star: [f64; 2],
    pub theta: [f64; 2],
}

#[derive(Serialize)]
pub struct SeriesOut {
    pub schema_version: u32,
    pub command: &'static str,
    #[serde(rename = "Delta")]
    pub delta: i64,
    #[serde(rename = "N")]
    pub n: i64,
    pub r: i64,
    pub d_max: i64,
    pub tol: f64,
    pub precision: Precision,
    pub g: TraceTable,
    pub theta_star: ThetaOut,
    pub theta: ThetaOut,
    pub samples: Vec<Sample>,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn series(cfg: &RunConfig) -> Result<SeriesOut, Failure> {
    let tol = match cfg.precision {
        Precision::Standard => cfg.tol,
        Precision::High => (cfg.tol * 1e-2).max(1e-13),
    };
    let eta = ThirdKindForm::with_sign(-1);
    let d_max = cfg.d_max.max(3);
    let g = generating_series(cfg.delta, cfg.r, cfg.n, &eta, d_max, tol)?;
    let v_min = cfg.taus.iter().map(|t| t.im).fold(f64::INFINITY, f64::min);
    let star = theta_star(cfg.delta, cfg.r, cfg.n, &eta, cfg.d_max, v_min, tol)?;
    let low = theta_lower(cfg.delta, cfg.r, cfg.n, &eta, cfg.d_max, v_min, tol)?;
    let constant = match cfg.n {
        1 => l0(cfg.delta).map(|q| *q.numer() as f64 / *q.denom() as f64)?,
        _ => 0.0,
    };
    let samples = cfg
        .taus
        .iter()
        .map(|&tau| {
            let mut gv = Complex64::new(constant, 0.0);
            for entry in g.entries.iter().filter(|en| en.d <= cfg.d_max) {
                let d = entry.d as f64;
                gv += entry.trace * e(d * tau.re) * (-2.0 * PI * d * tau.im).exp();
            }
            Sample { tau: pair(tau), g: pair(gv), theta_star: pair(star.eval(tau)), theta: pair(low.eval(tau)) }
        })
        .collect();
    let mut g = g;
    g.entries.retain(|en| en.d <= cfg.d_max);
    Ok(SeriesOut {
        schema_version: SCHEMA_VERSION,
        command: "series",
        delta: cfg.delta,
        n: cfg.n,
        r: cfg.r,
        d_max: cfg.d_max,
        tol: cfg.tol,
        precision: cfg.precision,
        g,
        theta_star: (&star).into(),
        theta: (&low).into(),
        samples,
    })
}

/// Shortest round-trip form, with an exponent for small and large values.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn term_fields(t: &CoeffTerm) -> [String; 3] {
    match *t {
        CoeffTerm::Const { re, im } => ["const".into(), fmt(re), fmt(im)],
        CoeffTerm::Erfc { sign, scale } => ["erfc".into(), fmt(sign), fmt(scale)],
        CoeffTerm::Gauss { amp, scale } => ["gauss".into(), fmt(amp), fmt(scale)],
    }
}

pub fn series_csv(t: &SeriesOut) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "d", "term", "a", "b"]).unwrap();
    let ct = t.g.constant_term.clone().unwrap_or_default();
    w.write_record(["g", "0", "constant", ct.as_str(), ""]).unwrap();
    for en in &t.g.entries {
        w.write_record(["g", &en.d.to_string(), "trace", &fmt(en.trace), ""]).unwrap();
    }
    for (name, th) in [("theta_star", &t.theta_star), ("theta", &t.theta)] {
        w.write_record([name, "0", "constant", th.constant_term.as_str(), ""]).unwrap();
        for row in &th.entries {
            for term in &row.coeff.terms {
                let [kind, a, b] = term_fields(term);
                w.write_record([name, &row.d.to_string(), &kind, &a, &b]).unwrap();
            }
        }
    }
    finish_csv(w)
}

#[derive(Serialize)]
pub struct VerifyOut {
    pub schema_version: u32,
    pub command: &'static str,
    pub precision: Precision,
    pub all_pass: bool,
    pub criteria: Vec<CriterionReport>,
}

pub fn verify(opts: &VerifyOptions, only: &[u8]) -> Result<VerifyOut, Failure> {
    let report = if only.is_empty() {
        run_all(opts)
    } else {
        let mut ids = only.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let criteria = ids.iter().map(|&id| run_criterion(id, opts)).collect::<windtrace::Result<Vec<_>>>()?;
        VerifyReport {
            schema_version: SCHEMA_VERSION,
            precision: opts.precision,
            all_pass: criteria.iter().all(|c| c.pass),
            criteria,
        }
    };
    Ok(VerifyOut {
        schema_version: report.schema_version,
        command: "verify",
        precision: report.precision,
        all_pass: report.all_pass,
        criteria: report.criteria,
    })
}

pub fn verify_csv(t: &VerifyOut) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "name", "pass", "label", "value", "tolerance"]).unwrap();
    for c in &t.criteria {
        let (id, pass) = (c.id.to_string(), c.pass.to_string());
        for r in &c.residuals {
            w.write_record([&id, c.name, &pass, &r.label, &fmt(r.value), &fmt(r.tolerance)]).unwrap();
        }
        if let Some(limit) = c.time_limit_ms {
            w.write_record([&id, c.name, &pass, "elapsed_ms", &c.elapsed_ms.to_string(), &limit.to_string()]).unwrap();
        }
        if let Some(err) = &c.error {
            w.write_record([&id, c.name, &pass, &format!("error:{}", err.kind), &err.message, ""]).unwrap();
        }
    }
    finish_csv(w)
}
