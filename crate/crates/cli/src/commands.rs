use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use fbe_core::commitment::{
    checksum_line, emit_checksum_table, fingerprint, parse_checksum_file, parse_fragment,
    render_fragment, verify as verify_bytes, ForecastDocument, SealedForecast,
};
use fbe_core::ensemble::{build_ensemble, make_forecast, Status};
use fbe_core::postanalysis::{
    max_drawdown, metric_csv, odd_window, sg_derivative, up_day_fraction,
};
use fbe_core::scanner::{scan as scan_windows, select_candidates, successful_fits, WindowFit};
use fbe_core::timeseries::{offset_to_date, parse_csv, PriceSeries};

use crate::config::{parse_list, RunConfig};
use crate::{GlobalArgs, SeriesArgs};

/// Console output that tolerates a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! put {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Outcome {
    Success = 0,
    Negative = 1,
}

fn run_config(global: &GlobalArgs, top_k: Option<usize>) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(k) = top_k {
        cfg.scan.top_k = k;
    }
    cfg.finish()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into())
}

fn load_series(args: &SeriesArgs) -> Result<(PriceSeries, String)> {
    let bytes =
        fs::read(&args.csv).with_context(|| format!("cannot read {}", args.csv.display()))?;
    let name = stem(&args.csv);
    let asset = args.asset.clone().unwrap_or_else(|| name.clone());
    let series = parse_csv(&bytes, &asset).with_context(|| format!("{}", args.csv.display()))?;
    Ok((series, name))
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn fmt_date(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn scan_table(cfg: &RunConfig, series: &PriceSeries, results: &[WindowFit]) -> String {
    let mut s = cfg.provenance();
    let _ = writeln!(
        s,
        "# asset={} origin={}",
        series.asset_id(),
        fmt_date(series.origin())
    );
    s.push_str("t1,t2,A,B,C,alpha,omega,phi,tc,cost,rmse,qualified\n");
    for w in results {
        let (t1, t2) = w.window;
        match &w.outcome {
            Ok(f) => {
                let p = &f.params;
                let _ = writeln!(
                    s,
                    "{t1},{t2},{},{},{},{},{},{},{},{},{},{}",
                    p.a, p.b, p.c, p.alpha, p.omega, p.phi, p.tc, f.cost, f.rmse, f.qualified
                );
            }
            Err(_) => {
                let _ = writeln!(s, "{t1},{t2},,,,,,,,,,false");
            }
        }
    }
    s
}

pub fn scan(global: &GlobalArgs, args: &SeriesArgs, top_k: Option<usize>) -> Result<Outcome> {
    let cfg = run_config(global, top_k)?;
    let (series, name) = load_series(args)?;
    let results = scan_windows(&series, &cfg.scan, &cfg.fit)?;
    let path = write_output(
        &global.output_dir,
        &format!("{name}.scan.csv"),
        &scan_table(&cfg, &series, &results),
    )?;

    let fits = successful_fits(&results);
    let top = select_candidates(&fits, cfg.scan.top_k);
    say!(
        "{}: {} windows, {} fitted, {} qualified -> {}",
        series.asset_id(),
        results.len(),
        fits.len(),
        fits.iter().filter(|f| f.qualified).count(),
        path.display()
    );
    for f in &top {
        say!(
            "  {}..{}  tc {} ({:.1})  alpha {:.3}  omega {:.2}  rmse {:.5}",
            fmt_date(offset_to_date(series.origin(), f.window.0)),
            fmt_date(offset_to_date(series.origin(), f.window.1)),
            fmt_date(offset_to_date(series.origin(), f.params.tc.round() as i64)),
            f.params.tc,
            f.params.alpha,
            f.params.omega,
            f.rmse
        );
    }
    Ok(if top.is_empty() {
        Outcome::Negative
    } else {
        Outcome::Success
    })
}

pub fn forecast(global: &GlobalArgs, args: &SeriesArgs, top_k: Option<usize>) -> Result<Outcome> {
    let cfg = run_config(global, top_k)?;
    let (series, name) = load_series(args)?;
    let results = scan_windows(&series, &cfg.scan, &cfg.fit)?;
    let candidates = select_candidates(&successful_fits(&results), cfg.scan.top_k);
    if candidates.is_empty() {
        say!("{}: no qualified fits", series.asset_id());
        return Ok(Outcome::Negative);
    }
    let ensemble = build_ensemble(&candidates, &series, &cfg.bootstrap, &cfg.fit)?;
    let record = make_forecast(&ensemble);
    let fragment = render_fragment(&record);
    let path = write_output(
        &global.output_dir,
        &format!("{name}.forecast.txt"),
        &format!("{}{fragment}", cfg.provenance()),
    )?;
    put!("{fragment}");
    say!("-> {}", path.display());
    Ok(match record.status {
        Status::H2 => Outcome::Success,
        Status::H1 => Outcome::Negative,
    })
}

pub fn analyze(
    global: &GlobalArgs,
    args: &SeriesArgs,
    from: NaiveDate,
    windows: Option<&str>,
) -> Result<Outcome> {
    let mut cfg = run_config(global, None)?;
    if let Some(w) = windows {
        cfg.up_windows = parse_list("windows", w)?;
        cfg = cfg.finish()?;
    }
    let (series, name) = load_series(args)?;
    if from > series.last_date() {
        bail!(
            "from date {} is after the last observation {}",
            fmt_date(from),
            fmt_date(series.last_date())
        );
    }
    let dd = max_drawdown(&series, from)?;
    let dir = &global.output_dir;
    let prov = cfg.provenance();

    let mut report = prov.clone();
    let _ = writeln!(report, "asset: {}", series.asset_id());
    let _ = writeln!(report, "from_date: {}", fmt_date(from));
    let _ = writeln!(report, "last_observation: {}", fmt_date(series.last_date()));
    let _ = writeln!(
        report,
        "drawdown_peak: {} {}",
        fmt_date(dd.peak_date),
        dd.peak_price
    );
    let _ = writeln!(
        report,
        "drawdown_trough: {} {}",
        fmt_date(dd.trough_date),
        dd.trough_price
    );
    let _ = writeln!(report, "drawdown_relative: {}", dd.relative_drop);
    let _ = writeln!(report, "drawdown_absolute: {}", dd.absolute_drop);

    for &w in &cfg.up_windows {
        let pts: Vec<_> = up_day_fraction(&series, w)
            .with_context(|| format!("up-day fraction over {w} returns"))?
            .into_iter()
            .filter(|p| p.date >= from)
            .map(|p| (p.date, p.fraction))
            .collect();
        let file = format!("{name}.up_{w}.csv");
        write_output(
            dir,
            &file,
            &format!("{prov}{}", metric_csv(pts.iter().copied())),
        )?;
        let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len().max(1) as f64;
        let _ = writeln!(
            report,
            "up_fraction_{w}: {} points, mean {mean} -> {file}",
            pts.len()
        );
    }
    for &w in &cfg.sg_windows {
        let m = odd_window(w);
        let pts: Vec<_> = sg_derivative(&series, w, cfg.poly_order)
            .with_context(|| format!("growth rate over {m} observations"))?
            .into_iter()
            .filter(|p| p.date >= from)
            .map(|p| (p.date, p.growth_rate))
            .collect();
        let file = format!("{name}.sg_{m}.csv");
        write_output(
            dir,
            &file,
            &format!("{prov}{}", metric_csv(pts.iter().copied())),
        )?;
        let _ = writeln!(report, "growth_rate_{m}: {} points -> {file}", pts.len());
    }
    let path = write_output(dir, &format!("{name}.analysis.txt"), &report)?;
    put!(
        "{}",
        report
            .lines()
            .skip(1)
            .map(|l| format!("{l}\n"))
            .collect::<String>()
    );
    say!("-> {}", path.display());
    Ok(Outcome::Success)
}

pub fn compose(
    global: &GlobalArgs,
    fragments: &[PathBuf],
    created_on: NaiveDate,
    h1: &[String],
    notes: Option<&Path>,
    name: &str,
) -> Result<Outcome> {
    let cfg = run_config(global, None)?;
    let mut records = Vec::new();
    for f in fragments {
        let text = fs::read_to_string(f).with_context(|| format!("cannot read {}", f.display()))?;
        records.push(parse_fragment(&text).with_context(|| format!("{}", f.display()))?);
    }
    let mut note_text = match notes {
        Some(p) => fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?,
        None => String::new(),
    };
    if !note_text.is_empty() && !note_text.ends_with('\n') {
        note_text.push('\n');
    }
    note_text.push_str(cfg.provenance().trim_start_matches("# "));
    let doc = ForecastDocument {
        created_on,
        h1_assets: h1.to_vec(),
        h2_records: records,
        notes: note_text,
    };
    let bytes = doc.canonical_serialize();
    let path = write_output(&global.output_dir, name, std::str::from_utf8(&bytes)?)?;
    say!("-> {}", path.display());
    Ok(Outcome::Success)
}

pub fn seal(
    global: &GlobalArgs,
    document: &Path,
    dates: Option<(NaiveDate, NaiveDate)>,
) -> Result<Outcome> {
    let cfg = run_config(global, None)?;
    let bytes =
        fs::read(document).with_context(|| format!("cannot read {}", document.display()))?;
    let file = document
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .with_context(|| format!("{} has no file name", document.display()))?;
    let rec = fingerprint(&bytes).with_filename(file.clone());
    let table = match dates {
        Some((sealed, due)) => SealedForecast::new(rec.clone(), sealed, due)?.render(),
        None => emit_checksum_table(&rec),
    };
    let dir = &global.output_dir;
    let prov = cfg.provenance();
    write_output(
        dir,
        &format!("{file}.sha256"),
        &checksum_line(&rec.sha256_hex, &file),
    )?;
    write_output(
        dir,
        &format!("{file}.sha512"),
        &checksum_line(&rec.sha512_hex, &file),
    )?;
    let sums = format!(
        "{prov}{}{}",
        checksum_line(&rec.sha256_hex, &file),
        checksum_line(&rec.sha512_hex, &file)
    );
    write_output(dir, &format!("{file}.checksums"), &sums)?;
    write_output(dir, &format!("{file}.table.txt"), &format!("{prov}{table}"))?;
    put!("{table}");
    Ok(Outcome::Success)
}

pub fn verify(document: &Path, checksums: &Path) -> Result<Outcome> {
    let text = fs::read_to_string(checksums)
        .with_context(|| format!("cannot read {}", checksums.display()))?;
    let claimed = parse_checksum_file(&text).with_context(|| format!("{}", checksums.display()))?;
    let bytes =
        fs::read(document).with_context(|| format!("cannot read {}", document.display()))?;
    let v = verify_bytes(&bytes, &claimed)?;
    let word = |ok: bool| if ok { "OK" } else { "MISMATCH" };
    say!("SHA-256: {}", word(v.sha256_match));
    say!("SHA-512: {}", word(v.sha512_match));
    Ok(if v.passed() {
        Outcome::Success
    } else {
        Outcome::Negative
    })
}
