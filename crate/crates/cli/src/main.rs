//! `mubcert`: batch front end for dimension tables, per-weight verdicts,
//! f-table builds, Hadamard equivalence, MUB checks, Monte Carlo and the
//! oracle suite.
//!
//! Exit status: 0 on success, 1 when a checked mathematical statement fails,
//! 2 on usage or operational errors.

mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_complex::Complex64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use mubcert::certify::{verify_degree_bound, verify_weight, FTables, Report, Status, Verdict};
use mubcert::hadamard::{
    difference_classes, equivalent, fourier, h0_haar_integral, mub_construction, mub_defect, tensor, ButsonMatrix,
    HMatrix, Phases, UnitaryJson, UnitaryMatrixF, Witness,
};
use mubcert::smatrix::{build_ftable, FTable, SMatrixError};
use mubcert::zeroweight::{dims_table, pattern_violations, Weight};

const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "mubcert",
    version,
    about = "Exact dual-certificate checks for mutually unbiased bases"
)]
struct Cli {
    /// Directory for f-table caches.
    #[arg(long, env = "MUBCERT_CACHE_DIR", default_value = ".mubcert-cache", global = true)]
    cache_dir: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Zero-weight dimensions for all candidate weights with |w| ≤ max.
    Dims {
        #[arg(long)]
        d: usize,
        #[arg(long = "max")]
        max_abs_w: i64,
        /// Include rows with dimension zero.
        #[arg(long)]
        all: bool,
    },
    /// Verify the degree bound (--k) or a single weight (--w).
    Verify {
        #[arg(long)]
        d: usize,
        #[arg(long, conflicts_with = "w", required_unless_present = "w")]
        k: Option<i64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        w: Option<Vec<i64>>,
        /// Skip unreadable cache lines instead of failing.
        #[arg(long)]
        lax: bool,
        /// Do not read or write f-table caches.
        #[arg(long)]
        no_cache: bool,
    },
    /// Build the f-table of all canonical S-matrix classes for (d, s).
    FsTable {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        s: u32,
        /// Continue from an existing cache file.
        #[arg(long)]
        resume: bool,
        /// With --resume, skip corrupt cache lines.
        #[arg(long, requires = "resume")]
        lax: bool,
        /// Lift the class-count guard.
        #[arg(long)]
        allow_large: bool,
        /// Output path; defaults to the cache directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for an equivalence witness between two Hadamard matrices.
    ///
    /// Matrices are `fourier:N`, `tensor:A,B,...` (Fourier factors),
    /// `identity:N`, or a JSON file ({d,k,exponents} or {d,re,im}).
    HadamardEquiv {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Exit 1 unless the outcome matches.
        #[arg(long, value_enum)]
        expect: Option<Expect>,
    },
    /// Construct d+1 MUBs and classify all differences.
    MubCheck {
        #[arg(long)]
        d: usize,
    },
    /// Monte Carlo estimate of the Haar integral of h0.
    WelchMc {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run the independent cross-checks.
    OracleSuite {
        /// Smaller parameter ranges.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expect {
    Equivalent,
    Inequivalent,
}

/// What a command hands back for printing.
struct Outcome {
    json: Value,
    text: String,
    csv: Option<String>,
    ok: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    match run(&cli) {
        Ok(mut out) => {
            if let Value::Object(m) = &mut out.json {
                m.insert("wall_clock_ms".into(), json!(start.elapsed().as_millis() as u64));
            }
            let body = match cli.format {
                Format::Json => serde_json::to_string_pretty(&out.json).expect("report serializes") + "\n",
                Format::Text => out.text,
                Format::Csv => match out.csv {
                    Some(c) => c,
                    None => {
                        eprintln!("error: this command has no csv output");
                        return ExitCode::from(2);
                    }
                },
            };
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(body.as_bytes());
            ExitCode::from(if out.ok { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn envelope(command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(format!("mubcert.{command}.v{SCHEMA}")));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Dims { d, max_abs_w, all } => cmd_dims(*d, *max_abs_w, *all),
        Command::Verify { d, k, w, lax, no_cache } => {
            let cache = (!no_cache).then_some(cli.cache_dir.as_path());
            cmd_verify(*d, *k, w.as_deref(), cache, *lax)
        }
        Command::FsTable {
            d,
            s,
            resume,
            lax,
            allow_large,
            out,
        } => {
            let path = match out {
                Some(p) => p.clone(),
                None => ftable_path(&cli.cache_dir, *d, *s),
            };
            cmd_fs_table(*d, *s, &path, *resume, *lax, *allow_large)
        }
        Command::HadamardEquiv { a, b, expect } => cmd_equiv(a, b, *expect),
        Command::MubCheck { d } => cmd_mub(*d),
        Command::WelchMc { d, samples, seed } => cmd_welch(*d, *samples, *seed),
        Command::OracleSuite { quick, seed } => cmd_oracle(*quick, *seed),
    }
}

fn weight_str(w: &Weight) -> String {
    let parts: Vec<String> = w.as_slice().iter().map(i64::to_string).collect();
    format!("({})", parts.join(","))
}

fn cmd_dims(d: usize, max_abs_w: i64, all: bool) -> Result<Outcome> {
    if d == 0 || max_abs_w < 0 {
        bail!("need d ≥ 1 and max ≥ 0");
    }
    let rows: Vec<_> = dims_table(d, max_abs_w)?
        .into_iter()
        .filter(|r| all || r.dim > 0)
        .collect();
    let mut m = envelope("dims");
    m.insert("d".into(), json!(d));
    m.insert("max_abs_w".into(), json!(max_abs_w));
    m.insert(
        "rows".into(),
        json!(rows
            .iter()
            .map(|r| json!({"w": r.w, "abs_w": r.w.norm1(), "dim": r.dim}))
            .collect::<Vec<_>>()),
    );
    let violations = pattern_violations(&rows);
    m.insert("pattern_violations".into(), json!(violations));
    let mut text = format!("d = {d}, |w| ≤ {max_abs_w}\n");
    let mut csv = String::from("abs_w,w,dim\n");
    for r in &rows {
        text.push_str(&format!("{:>3}  {:<28} {}\n", r.w.norm1(), weight_str(&r.w), r.dim));
        csv.push_str(&format!("{},\"{}\",{}\n", r.w.norm1(), weight_str(&r.w), r.dim));
    }
    for w in &violations {
        text.push_str(&format!("pattern violation: {}\n", weight_str(w)));
    }
    Ok(Outcome {
        json: Value::Object(m),
        text,
        csv: Some(csv),
        ok: true,
    })
}

fn ftable_path(dir: &Path, d: usize, s: u32) -> PathBuf {
    dir.join(format!("ftable-d{d}-s{s}.jsonl"))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Loads every cached f-table for `d`, keyed by `s`.
fn load_tables(dir: &Path, d: usize, s_values: &[u32], lax: bool) -> Result<(FTables, Vec<Value>)> {
    let mut tables = FTables::new();
    let mut skipped = Vec::new();
    for &s in s_values {
        let p = ftable_path(dir, d, s);
        if !p.exists() {
            continue;
        }
        match FTable::load(d, s, &p, lax) {
            Ok((t, bad)) => {
                for b in bad {
                    skipped.push(json!({"file": p.display().to_string(), "line": b.line, "msg": b.msg}));
                }
                tables.insert(s, t);
            }
            Err(SMatrixError::CorruptLine { line, msg }) => {
                bail!(
                    "{}: corrupt cache line {line}: {msg} (rerun with --lax to skip)",
                    p.display()
                )
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((tables, skipped))
}

fn save_tables(dir: &Path, tables: &FTables) -> Result<BTreeMap<String, String>> {
    fs::create_dir_all(dir).with_context(|| format!("creating cache directory {}", dir.display()))?;
    let mut digests = BTreeMap::new();
    for (s, t) in tables {
        if t.is_empty() {
            continue;
        }
        let p = ftable_path(dir, t.d(), *s);
        t.save(&p).with_context(|| format!("writing {}", p.display()))?;
        digests.insert(
            p.file_name().expect("file name").to_string_lossy().into_owned(),
            sha256_file(&p)?,
        );
    }
    Ok(digests)
}

fn verdict_line(v: &Verdict) -> String {
    let lambda = match (&v.lambda, v.lambda_float) {
        (Some(q), _) => format!("  λ = {q}"),
        (None, Some(x)) => format!("  λ ≈ {x:.6}"),
        _ => String::new(),
    };
    format!("{:<24} dim {:<2} {:?}{lambda}\n", weight_str(&v.w), v.dim, v.status)
}

fn verdict_csv(v: &Verdict) -> String {
    let opt = |x: &Option<BigInt>| x.as_ref().map(|b| b.to_string()).unwrap_or_default();
    format!(
        "\"{}\",{},{:?},{},{},{}\n",
        weight_str(&v.w),
        v.dim,
        v.status,
        opt(&v.a_h),
        opt(&v.a_i),
        v.lambda.as_ref().map(|q| q.to_string()).unwrap_or_default()
    )
}

fn cmd_verify(d: usize, k: Option<i64>, w: Option<&[i64]>, cache: Option<&Path>, lax: bool) -> Result<Outcome> {
    if d < 2 {
        bail!("need d ≥ 2");
    }
    let s_values: Vec<u32> = match (k, w) {
        (Some(k), _) => (0..=(k.max(0) / 2) as u32).collect(),
        (None, Some(w)) => vec![w.iter().map(|x| -x).max().unwrap_or(0).max(0) as u32],
        _ => unreachable!("clap requires one of --k, --w"),
    };
    let (mut tables, skipped) = match cache {
        Some(dir) => load_tables(dir, d, &s_values, lax)?,
        None => (FTables::new(), Vec::new()),
    };
    let mut m = envelope("verify");
    m.insert("d".into(), json!(d));
    let mut text = String::new();
    let mut csv = String::from("w,dim,status,A_H,A_I,lambda\n");
    let ok;
    match (k, w) {
        (Some(k), _) => {
            let report: Report = verify_degree_bound(d, k, &mut tables, |v| {
                eprintln!("{}", verdict_line(v).trim_end());
            })?;
            for v in &report.weights {
                text.push_str(&verdict_line(v));
                csv.push_str(&verdict_csv(v));
            }
            text.push_str(&format!("{}\n", report.conclusion));
            ok = report.pass;
            m.insert("k".into(), json!(k));
            m.insert("report".into(), serde_json::to_value(&report)?);
            m.insert("conclusion".into(), json!(report.conclusion));
            m.insert("pass".into(), json!(report.pass));
        }
        (None, Some(w)) => {
            if w.len() != d {
                bail!("--w has {} entries, expected {d}", w.len());
            }
            let mut sorted = w.to_vec();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            let weight = Weight::new(sorted)?;
            let v = verify_weight(d, &weight, &mut tables)?;
            if v.status == Status::OutOfScope {
                bail!("weight {} has dim {} ≥ 2; not handled", weight_str(&weight), v.dim);
            }
            text.push_str(&verdict_line(&v));
            csv.push_str(&verdict_csv(&v));
            ok = v.status.is_pass();
            m.insert("verdict".into(), serde_json::to_value(&v)?);
            m.insert("pass".into(), json!(ok));
        }
        _ => unreachable!(),
    }
    let digests = match cache {
        Some(dir) => save_tables(dir, &tables)?,
        None => BTreeMap::new(),
    };
    m.insert("cache_digests".into(), json!(digests));
    m.insert("skipped_cache_lines".into(), json!(skipped));
    Ok(Outcome {
        json: Value::Object(m),
        text,
        csv: Some(csv),
        ok,
    })
}

fn cmd_fs_table(d: usize, s: u32, path: &Path, resume: bool, lax: bool, allow_large: bool) -> Result<Outcome> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating cache directory {}", dir.display()))?;
    }
    let mut last = 0;
    let (table, stats) = build_ftable(d, s, Some(path), resume, lax, allow_large, |done, total| {
        if done * 10 / total.max(1) != last {
            last = done * 10 / total.max(1);
            eprintln!("f-table d={d} s={s}: {done}/{total}");
        }
    })
    .map_err(|e| match e {
        SMatrixError::CorruptLine { line, msg } => {
            anyhow!(
                "{}: corrupt cache line {line}: {msg} (use --resume --lax to skip)",
                path.display()
            )
        }
        other => other.into(),
    })?;
    let digest = sha256_file(path)?;
    let mut m = envelope("fs-table");
    m.insert("d".into(), json!(d));
    m.insert("s".into(), json!(s));
    m.insert("path".into(), json!(path.display().to_string()));
    m.insert("canonical_classes".into(), json!(stats.parametrized_entries));
    m.insert("distinct_keys".into(), json!(stats.distinct_keys));
    m.insert("reused".into(), json!(stats.reused));
    m.insert("computed".into(), json!(stats.computed));
    m.insert(
        "skipped_cache_lines".into(),
        json!(stats
            .skipped_lines
            .iter()
            .map(|(l, msg)| json!({"line": l, "msg": msg}))
            .collect::<Vec<_>>()),
    );
    m.insert("records".into(), json!(table.len()));
    m.insert(
        "cache_digests".into(),
        json!({ path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(): digest }),
    );
    let text = format!(
        "d = {d}, s = {s}: {} canonical classes, {} distinct keys ({} reused, {} computed) -> {}\n",
        stats.parametrized_entries,
        stats.distinct_keys,
        stats.reused,
        stats.computed,
        path.display()
    );
    Ok(Outcome {
        json: Value::Object(m),
        text,
        csv: None,
        ok: true,
    })
}

fn parse_matrix(desc: &str) -> Result<HMatrix> {
    let parse_n = |x: &str| -> Result<usize> {
        let n: usize = x.trim().parse().with_context(|| format!("bad dimension {x:?}"))?;
        if n == 0 {
            bail!("dimension must be positive");
        }
        Ok(n)
    };
    if let Some(n) = desc.strip_prefix("fourier:") {
        return Ok(HMatrix::Butson(fourier(parse_n(n)?)));
    }
    if let Some(n) = desc.strip_prefix("identity:") {
        return Ok(HMatrix::Float(UnitaryMatrixF::identity(parse_n(n)?)));
    }
    if let Some(list) = desc.strip_prefix("tensor:") {
        let mut acc: Option<ButsonMatrix> = None;
        for part in list.split(',') {
            let f = fourier(parse_n(part)?);
            acc = Some(match acc {
                Some(a) => tensor(&a, &f),
                None => f,
            });
        }
        return acc.map(HMatrix::Butson).ok_or_else(|| anyhow!("empty tensor list"));
    }
    let text = fs::read_to_string(desc).with_context(|| format!("reading matrix file {desc}"))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {desc}"))?;
    if v.get("exponents").is_some() {
        let b: ButsonMatrix = serde_json::from_value(v)?;
        return Ok(HMatrix::Butson(ButsonMatrix::new(b.d, b.k, b.exponents)?));
    }
    let u: UnitaryJson = serde_json::from_value(v)?;
    Ok(HMatrix::Float(UnitaryMatrixF::from_json(&u)?))
}

fn witness_json(w: &Witness) -> Value {
    let phases = match &w.phases {
        Phases::Exact { k, rows, cols } => json!({"kind": "exact", "k": k, "rows": rows, "cols": cols}),
        Phases::Float { rows, cols } => {
            let ri = |v: &[Complex64]| {
                (
                    v.iter().map(|z| z.re).collect::<Vec<_>>(),
                    v.iter().map(|z| z.im).collect::<Vec<_>>(),
                )
            };
            let (rr, rim) = ri(rows);
            let (cr, cim) = ri(cols);
            json!({"kind": "float", "rows_re": rr, "rows_im": rim, "cols_re": cr, "cols_im": cim})
        }
    };
    json!({"row_perm": w.row_perm, "col_perm": w.col_perm, "phases": phases})
}

fn cmd_equiv(a: &str, b: &str, expect: Option<Expect>) -> Result<Outcome> {
    let ha = parse_matrix(a)?;
    let hb = parse_matrix(b)?;
    if ha.d() != hb.d() {
        bail!("dimensions differ: {} vs {}", ha.d(), hb.d());
    }
    let w = equivalent(&ha, &hb);
    let found = w.is_some();
    let ok = match expect {
        Some(Expect::Equivalent) => found,
        Some(Expect::Inequivalent) => !found,
        None => true,
    };
    let mut m = envelope("hadamard-equiv");
    m.insert("a".into(), json!(a));
    m.insert("b".into(), json!(b));
    m.insert("equivalent".into(), json!(found));
    m.insert(
        "exact".into(),
        json!(matches!((&ha, &hb), (HMatrix::Butson(_), HMatrix::Butson(_)))),
    );
    m.insert("witness".into(), w.as_ref().map(witness_json).unwrap_or(Value::Null));
    let text = if found {
        format!("{a} ~ {b} (witness verified by reconstruction)\n")
    } else {
        format!("{a} and {b} are not equivalent\n")
    };
    Ok(Outcome {
        json: Value::Object(m),
        text,
        csv: None,
        ok,
    })
}

fn expected_class(d: usize) -> String {
    if d == 4 {
        "F_2⊗F_2".into()
    } else {
        format!("F_{d}")
    }
}

fn cmd_mub(d: usize) -> Result<Outcome> {
    let bases = mub_construction(d)?;
    let defect = mub_defect(&bases);
    let classes = difference_classes(&bases);
    let want = expected_class(d);
    let all_hadamard = classes.iter().all(|c| c.hadamard);
    let all_expected = classes.iter().all(|c| c.class.as_deref() == Some(want.as_str()));
    let ok = defect <= 1e-12 && all_hadamard && all_expected;
    let mut m = envelope("mub-check");
    m.insert("d".into(), json!(d));
    m.insert("bases".into(), json!(bases.len()));
    m.insert("max_defect".into(), json!(defect));
    m.insert("expected_class".into(), json!(want));
    m.insert("differences".into(), serde_json::to_value(&classes)?);
    m.insert("pass".into(), json!(ok));
    let text = format!(
        "d = {d}: {} bases, max unbiasedness defect {defect:.2e}, {} ordered differences, all Hadamard: {all_hadamard}, all ~ {want}: {all_expected}\n",
        bases.len(),
        classes.len()
    );
    Ok(Outcome {
        json: Value::Object(m),
        text,
        csv: None,
        ok,
    })
}

fn cmd_welch(d: usize, samples: usize, seed: u64) -> Result<Outcome> {
    if d == 0 {
        bail!("need d ≥ 1");
    }
    let est = h0_haar_integral(d, samples, seed)?;
    let ok = (est.mean - est.target).abs() <= 3.0 * est.std_err;
    let mut m = envelope("welch-mc");
    m.insert("estimate".into(), serde_json::to_value(&est)?);
    m.insert("within_3_se".into(), json!(ok));
    let text = format!(
        "d = {d}: mean h0 = {:.6} ± {:.6} (target {:.6}, seed {seed}, {samples} samples)\n",
        est.mean, est.std_err, est.target
    );
    Ok(Outcome {
        json: Value::Object(m),
        text,
        csv: None,
        ok,
    })
}

fn cmd_oracle(quick: bool, seed: u64) -> Result<Outcome> {
    let checks = oracle::run_all(quick, seed);
    let ok = checks.iter().all(|c| c.pass);
    let mut m = envelope("oracle-suite");
    m.insert("seed".into(), json!(seed));
    m.insert("checks".into(), serde_json::to_value(&checks)?);
    m.insert("pass".into(), json!(ok));
    let mut text = String::new();
    for c in &checks {
        text.push_str(&format!(
            "{} {}: {}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    Ok(Outcome {
        json: Value::Object(m),
        text,
        csv: None,
        ok,
    })
}
