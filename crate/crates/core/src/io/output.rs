//! rows.csv, aggregate.json, verdicts.json and manifest.json.
//!
//! Floats are written with 17 significant digits so that every value reads
//! back bit for bit. Files are written to a temporary sibling and renamed
//! into place.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{EosError, Result};
use crate::functionals::DTerms;
use crate::harness::{AggregateReport, ExperimentConfig, ReplicationRow, RowStatus, ScenarioSummary, Verdict};
use crate::rng::RNG_ALGORITHM;

use super::config::{config_hash, serialize_config};

pub const ROWS_FILE: &str = "rows.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const VERDICTS_FILE: &str = "verdicts.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Pretty JSON with every float at 17 significant digits.
struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name =
        path.file_name().ok_or_else(|| EosError::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

fn triangle_names(prefix: &str, d: usize) -> Vec<String> {
    let mut out = Vec::new();
    for a in 1..=d {
        for b in a..=d {
            out.push(format!("{prefix}_{a}{b}"));
        }
    }
    out
}

fn vector_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|a| format!("{prefix}_{a}")).collect()
}

/// Column names for parameter dimension `d`. The leading block is the
/// per-replication loss schema; auxiliary statistics follow.
pub fn csv_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = ["scenario_id", "n", "beta", "seed", "b_g", "b_t", "g_g", "g_t", "v", "waic", "tic_n"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(vector_names("w_map", d));
    h.extend(vector_names("w_mle", d));
    h.extend((1..=6).map(|k| format!("d{k}")));
    h.push("rep".into());
    h.push("s_emp".into());
    h.extend(vector_names("score_mean", d));
    h.extend(triangle_names("in_w0", d));
    h.extend(triangle_names("jn_w0", d));
    h.extend(triangle_names("laplace_cov", d));
    h.extend(vector_names("post_mean_dev", d));
    h.extend(triangle_names("post_cov_map", d));
    h.extend(triangle_names("post_cov_w0", d));
    h.push("post_abs3".into());
    h.push("status".into());
    h
}

fn row_record(r: &ReplicationRow) -> Vec<String> {
    let mut rec = vec![r.scenario_id.clone(), r.n.to_string(), r.beta.to_string(), r.seed.to_string()];
    for v in [r.b_g, r.b_t, r.g_g, r.g_t, r.v, r.waic, r.tic_n] {
        rec.push(fmt_f64(v));
    }
    let vecs: [&[f64]; 2] = [&r.w_map, &r.w_mle];
    rec.extend(vecs.iter().flat_map(|v| v.iter().map(|x| fmt_f64(*x))));
    rec.extend(r.d_terms.as_array().iter().map(|x| fmt_f64(*x)));
    rec.push(r.rep.to_string());
    rec.push(fmt_f64(r.s_emp));
    let rest: [&[f64]; 7] =
        [&r.score_mean, &r.in_w0, &r.jn_w0, &r.laplace_cov, &r.post_mean_dev, &r.post_cov_map, &r.post_cov_w0];
    rec.extend(rest.iter().flat_map(|v| v.iter().map(|x| fmt_f64(*x))));
    rec.push(fmt_f64(r.post_abs3));
    rec.push(r.status.as_str().to_string());
    rec
}

/// CSV text of `rows` for parameter dimension `d` (header only when empty).
pub fn rows_to_csv(rows: &[ReplicationRow], d: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_header(d))?;
    for r in rows {
        w.write_record(row_record(r))?;
    }
    let bytes = w.into_inner().map_err(|e| EosError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

/// Sequential reader over the fields of one CSV record.
struct Fields<'r> {
    it: csv::StringRecordIter<'r>,
    line: usize,
}

impl Fields<'_> {
    fn err(&self, what: &str) -> EosError {
        EosError::Parse { line: self.line, message: format!("invalid {what}") }
    }

    fn text(&mut self) -> Result<&str> {
        let line = self.line;
        self.it.next().ok_or(EosError::Parse { line, message: "short record".into() })
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let raw = self.text()?;
        raw.parse().map_err(|_| self.err(what))
    }

    fn float(&mut self) -> Result<f64> {
        self.parse("number")
    }

    fn floats(&mut self, k: usize) -> Result<Vec<f64>> {
        (0..k).map(|_| self.float()).collect()
    }
}

/// Parses rows written by [`rows_to_csv`].
pub fn read_rows_csv(text: &str) -> Result<Vec<ReplicationRow>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    let d = header.iter().filter(|h| h.starts_with("w_map_")).count();
    if header != csv_header(d) {
        return Err(EosError::Parse { line: 1, message: "unexpected rows.csv header".into() });
    }
    let t = d * (d + 1) / 2;
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut f = Fields { it: rec.iter(), line: idx + 2 };
        let scenario_id = f.text()?.to_string();
        let n = f.parse("n")?;
        let beta = f.parse("beta")?;
        let seed = f.parse("seed")?;
        let s = f.floats(7)?;
        let w_map = f.floats(d)?;
        let w_mle = f.floats(d)?;
        let dv = f.floats(6)?;
        rows.push(ReplicationRow {
            scenario_id,
            n,
            beta,
            seed,
            b_g: s[0],
            b_t: s[1],
            g_g: s[2],
            g_t: s[3],
            v: s[4],
            waic: s[5],
            tic_n: s[6],
            w_map,
            w_mle,
            d_terms: DTerms::from_array([dv[0], dv[1], dv[2], dv[3], dv[4], dv[5]]),
            rep: f.parse("rep")?,
            s_emp: f.float()?,
            score_mean: f.floats(d)?,
            in_w0: f.floats(t)?,
            jn_w0: f.floats(t)?,
            laplace_cov: f.floats(t)?,
            post_mean_dev: f.floats(d)?,
            post_cov_map: f.floats(t)?,
            post_cov_w0: f.floats(t)?,
            post_abs3: f.float()?,
            status: RowStatus::parse(f.text()?),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Manifest and results

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub config: String,
    pub scenario: ScenarioSummary,
    pub rng_algorithm: String,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, scenario: ScenarioSummary) -> Self {
        Self {
            config_hash: config_hash(config),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            config: serialize_config(config),
            scenario,
            rng_algorithm: RNG_ALGORITHM.to_string(),
        }
    }
}

pub fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join(MANIFEST_FILE), to_json_string(manifest)?.as_bytes())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes rows.csv and aggregate.json, and verdicts.json when given.
pub fn emit_results(
    out_dir: &Path,
    d: usize,
    rows: &[ReplicationRow],
    aggregate: &AggregateReport,
    verdicts: Option<&[Verdict]>,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join(ROWS_FILE), rows_to_csv(rows, d)?.as_bytes())?;
    write_atomic(&out_dir.join(AGGREGATE_FILE), to_json_string(aggregate)?.as_bytes())?;
    if let Some(v) = verdicts {
        write_atomic(&out_dir.join(VERDICTS_FILE), to_json_string(&v)?.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta::Beta;
    use crate::harness::{run_replications, ExperimentConfig};

    fn small_run(id: &str) -> crate::harness::replicate::StudyRun {
        let mut c = ExperimentConfig::new(id);
        c.n_grid = vec![30, 60];
        c.beta_grid = vec![Beta::Finite(1.0), Beta::Infinite];
        c.replications = 3;
        run_replications(&c, 1).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        for id in ["gauss-wide", "gauss-scaleloc-laplace"] {
            let run = small_run(id);
            let text = rows_to_csv(&run.rows, run.summary.d).unwrap();
            let back = read_rows_csv(&text).unwrap();
            assert_eq!(back.len(), run.rows.len());
            for (a, b) in back.iter().zip(&run.rows) {
                assert_eq!(format!("{a:?}"), format!("{b:?}"));
            }
            let agg_a = AggregateReport::from_rows(&run.rows, &run.summary);
            let agg_b = AggregateReport::from_rows(&back, &run.summary);
            assert_eq!(to_json_string(&agg_a).unwrap(), to_json_string(&agg_b).unwrap());
        }
    }

    #[test]
    fn empty_rows_give_header_only() {
        let text = rows_to_csv(&[], 1).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("scenario_id,n,beta,seed,b_g,b_t,g_g,g_t,v,waic,tic_n,w_map_1,w_mle_1,d1,"));
        assert!(read_rows_csv(&text).unwrap().is_empty());
    }

    #[test]
    fn json_uses_seventeen_digits() {
        let s = to_json_string(&vec![0.1f64, f64::NAN]).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("null"));
        let back: Vec<Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back[0], Some(0.1));
    }

    #[test]
    fn emit_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let run = small_run("gauss-wide");
        let cfg = ExperimentConfig::new("gauss-wide");
        let m = RunManifest::new(&cfg, run.summary.clone());
        write_manifest(dir.path(), &m).unwrap();
        assert_eq!(read_manifest(dir.path()).unwrap(), m);
        let agg = AggregateReport::from_rows(&run.rows, &run.summary);
        emit_results(dir.path(), 1, &run.rows, &agg, Some(&[])).unwrap();
        let first = std::fs::read(dir.path().join(ROWS_FILE)).unwrap();
        emit_results(dir.path(), 1, &run.rows, &agg, None).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join(ROWS_FILE)).unwrap());
        let names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert!(names.iter().all(|n| !n.contains(".tmp-")), "{names:?}");
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(matches!(read_rows_csv("a,b\n1,2\n"), Err(EosError::Parse { line: 1, .. })));
    }
}
