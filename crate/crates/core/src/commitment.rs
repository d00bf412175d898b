//! Sealed forecasts: canonical forecast documents, SHA-256/SHA-512
//! fingerprints, checksum tables and verification.
//!
//! A document is committed by publishing the digests of its canonical bytes
//! and revealed later; anyone holding the revealed bytes can recompute the
//! digests. The canonical text form is:
//!
//! ```text
//! fbe-forecast-document: 1
//! created_on: 2010-05-12
//!
//! [h1]
//! asset: Cotton future, CHF
//!
//! [record]
//! asset: Palladium future, CHF
//! status: H2
//! last_observation: 2010-05-07
//! ensemble_size: 33
//! 20/80%: 2010-06-05/2010-07-05
//! 5/95%: 2010-05-16/2010-07-22
//!
//! [notes]
//! free text
//! ```

use std::fmt::Write as _;

use chrono::NaiveDate;
use sha2::{Digest, Sha256, Sha512};
use thiserror::Error;

use crate::ensemble::{ForecastRecord, QuantileWindows, Status};

pub const DOCUMENT_HEADER: &str = "fbe-forecast-document: 1";
const DATE_FMT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommitError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("malformed {algorithm} digest: expected {expected} hex characters, got `{got}`")]
    MalformedHex {
        algorithm: &'static str,
        expected: usize,
        got: String,
    },
    #[error("checksum file lists no {0} digest")]
    MissingDigest(&'static str),
    #[error("checksum file names both `{0}` and `{1}`")]
    FilenameMismatch(String, String),
    #[error("sealed on {sealed_on}, after the reveal date {reveal_due}")]
    RevealBeforeSeal {
        sealed_on: NaiveDate,
        reveal_due: NaiveDate,
    },
}

fn parse_err(line: usize, reason: impl Into<String>) -> CommitError {
    CommitError::Parse {
        line,
        reason: reason.into(),
    }
}

/// Collapses a value onto one line without surrounding whitespace.
fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fmt_date(d: NaiveDate) -> String {
    d.format(DATE_FMT).to_string()
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate, CommitError> {
    NaiveDate::parse_from_str(s, DATE_FMT)
        .map_err(|_| parse_err(line, format!("invalid date `{s}`")))
}

fn parse_window(s: &str, line: usize) -> Result<(NaiveDate, NaiveDate), CommitError> {
    let (a, b) = s
        .split_once('/')
        .ok_or_else(|| parse_err(line, format!("expected <date>/<date>, got `{s}`")))?;
    Ok((parse_date(a, line)?, parse_date(b, line)?))
}

/// The `key: value` lines of one record, without the `[record]` marker.
pub fn render_record(rec: &ForecastRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "asset: {}", one_line(&rec.asset_id));
    let _ = writeln!(s, "status: {}", rec.status);
    let _ = writeln!(s, "last_observation: {}", fmt_date(rec.last_observation));
    let _ = writeln!(s, "ensemble_size: {}", rec.ensemble_size);
    if let Some(w) = &rec.windows {
        let _ = writeln!(s, "20/80%: {}/{}", fmt_date(w.q20), fmt_date(w.q80));
        let _ = writeln!(s, "5/95%: {}/{}", fmt_date(w.q05), fmt_date(w.q95));
    }
    s
}

/// A standalone record fragment as written by a forecast run.
pub fn render_fragment(rec: &ForecastRecord) -> String {
    format!("[record]\n{}", render_record(rec))
}

/// Parses numbered record lines. Lines
/// starting with `#` and blank lines are skipped.
fn parse_record_lines<'a, I>(lines: I) -> Result<ForecastRecord, CommitError>
where
    I: IntoIterator<Item = (usize, &'a str)>,
{
    let mut asset = None;
    let mut status = None;
    let mut last = None;
    let mut size = None;
    let mut w2080 = None;
    let mut w0595 = None;
    let mut last_line = 0;
    for (no, raw) in lines {
        last_line = no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| parse_err(no, format!("expected `key: value`, got `{line}`")))?;
        let value = value.trim();
        let slot_taken = |taken: bool| {
            if taken {
                Err(parse_err(no, format!("duplicate key `{key}`")))
            } else {
                Ok(())
            }
        };
        match key.trim() {
            "asset" => {
                slot_taken(asset.is_some())?;
                asset = Some(value.to_string());
            }
            "status" => {
                slot_taken(status.is_some())?;
                status = Some(value.parse::<Status>().map_err(|e| parse_err(no, e))?);
            }
            "last_observation" => {
                slot_taken(last.is_some())?;
                last = Some(parse_date(value, no)?);
            }
            "ensemble_size" => {
                slot_taken(size.is_some())?;
                size = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| parse_err(no, format!("invalid ensemble size `{value}`")))?,
                );
            }
            "20/80%" => {
                slot_taken(w2080.is_some())?;
                w2080 = Some(parse_window(value, no)?);
            }
            "5/95%" => {
                slot_taken(w0595.is_some())?;
                w0595 = Some(parse_window(value, no)?);
            }
            other => return Err(parse_err(no, format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| parse_err(last_line, format!("record lacks `{k}`"));
    let status = status.ok_or_else(|| missing("status"))?;
    let windows = match (status, w2080, w0595) {
        (Status::H2, Some((q20, q80)), Some((q05, q95))) => {
            if !(q05 <= q20 && q20 <= q80 && q80 <= q95) {
                return Err(parse_err(last_line, "quantile dates are not ordered"));
            }
            Some(QuantileWindows { q05, q20, q80, q95 })
        }
        (Status::H2, _, _) => {
            return Err(parse_err(
                last_line,
                "H2 record needs both quantile windows",
            ))
        }
        (Status::H1, None, None) => None,
        (Status::H1, _, _) => {
            return Err(parse_err(last_line, "H1 record carries quantile windows"))
        }
    };
    Ok(ForecastRecord {
        asset_id: asset.ok_or_else(|| missing("asset"))?,
        status,
        last_observation: last.ok_or_else(|| missing("last_observation"))?,
        ensemble_size: size.ok_or_else(|| missing("ensemble_size"))?,
        windows,
    })
}

/// Parses a fragment produced by [`render_fragment`].
pub fn parse_fragment(text: &str) -> Result<ForecastRecord, CommitError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .skip_while(|(_, l)| {
            let t = l.trim();
            t.is_empty() || t.starts_with('#')
        });
    match lines.next() {
        Some((_, l)) if l.trim() == "[record]" => parse_record_lines(lines),
        Some((no, l)) => Err(parse_err(
            no,
            format!("expected `[record]`, got `{}`", l.trim()),
        )),
        None => Err(parse_err(0, "empty fragment")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForecastDocument {
    pub created_on: NaiveDate,
    pub h1_assets: Vec<String>,
    pub h2_records: Vec<ForecastRecord>,
    pub notes: String,
}

fn record_key(r: &ForecastRecord) -> (String, NaiveDate, Option<QuantileWindows>, usize) {
    (
        one_line(&r.asset_id),
        r.last_observation,
        r.windows,
        r.ensemble_size,
    )
}

fn canonical_notes(notes: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = notes.lines().map(str::trim_end).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let lead = lines.iter().take_while(|l| l.is_empty()).count();
    lines.drain(..lead);
    lines
}

impl ForecastDocument {
    /// Canonical UTF-8 bytes: fixed key order, assets and records sorted by
    /// name, LF line endings, no trailing whitespace.
    pub fn canonical_serialize(&self) -> Vec<u8> {
        let mut s = String::new();
        let _ = writeln!(s, "{DOCUMENT_HEADER}");
        let _ = writeln!(s, "created_on: {}", fmt_date(self.created_on));

        let mut h1: Vec<String> = self.h1_assets.iter().map(|a| one_line(a)).collect();
        h1.sort();
        s.push_str("\n[h1]\n");
        for a in &h1 {
            let _ = writeln!(s, "asset: {a}");
        }

        let mut recs: Vec<&ForecastRecord> = self.h2_records.iter().collect();
        recs.sort_by_cached_key(|r| record_key(r));
        for r in recs {
            s.push_str("\n[record]\n");
            s.push_str(&render_record(r));
        }

        let notes = canonical_notes(&self.notes);
        if !notes.is_empty() {
            s.push_str("\n[notes]\n");
            for l in notes {
                s.push_str(l);
                s.push('\n');
            }
        }
        s.into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CommitError> {
        let text =
            std::str::from_utf8(bytes).map_err(|e| parse_err(0, format!("not UTF-8: {e}")))?;
        let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
        let mut it = lines.iter().copied().peekable();

        match it.next() {
            Some((_, l)) if l.trim_end() == DOCUMENT_HEADER => {}
            Some((no, l)) => {
                return Err(parse_err(
                    no,
                    format!("expected `{DOCUMENT_HEADER}`, got `{l}`"),
                ))
            }
            None => return Err(parse_err(0, "empty document")),
        }
        let created_on = match it.next() {
            Some((no, l)) => {
                let v = l
                    .trim()
                    .strip_prefix("created_on:")
                    .ok_or_else(|| parse_err(no, "expected `created_on: <date>`"))?;
                parse_date(v.trim(), no)?
            }
            None => return Err(parse_err(1, "missing created_on")),
        };

        let mut doc = ForecastDocument {
            created_on,
            h1_assets: Vec::new(),
            h2_records: Vec::new(),
            notes: String::new(),
        };
        let mut seen_h1 = false;
        while let Some((no, l)) = it.next() {
            let line = l.trim();
            if line.is_empty() {
                continue;
            }
            let mut body = Vec::new();
            if line == "[notes]" {
                let rest: Vec<&str> = it.by_ref().map(|(_, l)| l).collect();
                doc.notes = rest.join("\n");
                break;
            }
            while let Some(&(n, l)) = it.peek() {
                if l.trim().starts_with('[') {
                    break;
                }
                body.push((n, l));
                it.next();
            }
            match line {
                "[h1]" if !seen_h1 => {
                    seen_h1 = true;
                    for (n, l) in body {
                        let t = l.trim();
                        if t.is_empty() || t.starts_with('#') {
                            continue;
                        }
                        let a = t.strip_prefix("asset:").ok_or_else(|| {
                            parse_err(n, format!("expected `asset: <name>`, got `{t}`"))
                        })?;
                        doc.h1_assets.push(a.trim().to_string());
                    }
                }
                "[record]" => doc.h2_records.push(parse_record_lines(body)?),
                other => return Err(parse_err(no, format!("unexpected section `{other}`"))),
            }
        }
        Ok(doc)
    }
}

/// SHA-256 and SHA-512 digests of a named file, as lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChecksumRecord {
    pub sha256_hex: String,
    pub sha512_hex: String,
    pub filename: String,
}

fn check_hex(algorithm: &'static str, expected: usize, s: &str) -> Result<String, CommitError> {
    if s.len() == expected && s.bytes().all(|b| b.is_ascii_hexdigit()) {
        Ok(s.to_ascii_lowercase())
    } else {
        Err(CommitError::MalformedHex {
            algorithm,
            expected,
            got: s.to_string(),
        })
    }
}

impl ChecksumRecord {
    /// Validates digest lengths and lowercases them.
    pub fn new(
        sha256_hex: &str,
        sha512_hex: &str,
        filename: impl Into<String>,
    ) -> Result<Self, CommitError> {
        Ok(Self {
            sha256_hex: check_hex("SHA-256", 64, sha256_hex)?,
            sha512_hex: check_hex("SHA-512", 128, sha512_hex)?,
            filename: filename.into(),
        })
    }

    pub fn validate(&self) -> Result<(), CommitError> {
        check_hex("SHA-256", 64, &self.sha256_hex)?;
        check_hex("SHA-512", 128, &self.sha512_hex)?;
        Ok(())
    }

    pub fn with_filename(mut self, filename: impl Into<String>) -> Self {
        self.filename = filename.into();
        self
    }
}

/// Digests of `bytes`; the filename is left empty.
pub fn fingerprint(bytes: &[u8]) -> ChecksumRecord {
    ChecksumRecord {
        sha256_hex: hex::encode(Sha256::digest(bytes)),
        sha512_hex: hex::encode(Sha512::digest(bytes)),
        filename: String::new(),
    }
}

/// One `<hex>  <filename>` line, the format read by `sha256sum -c`.
pub fn checksum_line(hex: &str, filename: &str) -> String {
    format!("{}  {}\n", hex.to_ascii_lowercase(), filename)
}

/// Two-row table with a document name header, followed by one checksum-file
/// line per algorithm.
pub fn emit_checksum_table(rec: &ChecksumRecord) -> String {
    let sha256 = rec.sha256_hex.to_ascii_lowercase();
    let sha512 = rec.sha512_hex.to_ascii_lowercase();
    let mut s = String::new();
    let _ = writeln!(s, "Document name  {}", rec.filename);
    let _ = writeln!(s, "SHA256SUM      {sha256}");
    let _ = writeln!(s, "SHA512SUM      {sha512}");
    s.push('\n');
    s.push_str(&checksum_line(&sha256, &rec.filename));
    s.push_str(&checksum_line(&sha512, &rec.filename));
    s
}

fn set_digest(
    slot: &mut Option<String>,
    v: String,
    no: usize,
    alg: &str,
) -> Result<(), CommitError> {
    match slot {
        Some(prev) if *prev != v => Err(parse_err(no, format!("conflicting {alg} digests"))),
        _ => {
            *slot = Some(v);
            Ok(())
        }
    }
}

/// Reads checksum lines, and the table rows of [`emit_checksum_table`] if
/// present. A `<hex>  <filename>` line whose digest has neither 64 nor 128
/// hex characters is an error, as is any conflict between entries.
pub fn parse_checksum_file(text: &str) -> Result<ChecksumRecord, CommitError> {
    let mut sha256: Option<String> = None;
    let mut sha512: Option<String> = None;
    let mut filename: Option<String> = None;

    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix("Document name") {
            let name = name.trim().to_string();
            match &filename {
                Some(f) if *f != name => {
                    return Err(CommitError::FilenameMismatch(f.clone(), name))
                }
                _ => filename = Some(name),
            }
            continue;
        }
        if let Some(v) = line.strip_prefix("SHA256SUM") {
            set_digest(
                &mut sha256,
                check_hex("SHA-256", 64, v.trim())?,
                no,
                "SHA-256",
            )?;
            continue;
        }
        if let Some(v) = line.strip_prefix("SHA512SUM") {
            set_digest(
                &mut sha512,
                check_hex("SHA-512", 128, v.trim())?,
                no,
                "SHA-512",
            )?;
            continue;
        }
        let (hex_part, name) = line
            .split_once("  ")
            .or_else(|| line.split_once(" *"))
            .ok_or_else(|| parse_err(no, format!("expected `<hex>  <filename>`, got `{line}`")))?;
        match hex_part.len() {
            128 => set_digest(
                &mut sha512,
                check_hex("SHA-512", 128, hex_part)?,
                no,
                "SHA-512",
            )?,
            _ => set_digest(
                &mut sha256,
                check_hex("SHA-256", 64, hex_part)?,
                no,
                "SHA-256",
            )?,
        }
        match &filename {
            Some(f) if f != name => {
                return Err(CommitError::FilenameMismatch(f.clone(), name.to_string()))
            }
            _ => filename = Some(name.to_string()),
        }
    }
    Ok(ChecksumRecord {
        sha256_hex: sha256.ok_or(CommitError::MissingDigest("SHA-256"))?,
        sha512_hex: sha512.ok_or(CommitError::MissingDigest("SHA-512"))?,
        filename: filename.unwrap_or_default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verification {
    pub sha256_match: bool,
    pub sha512_match: bool,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.sha256_match && self.sha512_match
    }
}

/// Recomputes both digests of `doc_bytes` and compares them with `claimed`.
pub fn verify(doc_bytes: &[u8], claimed: &ChecksumRecord) -> Result<Verification, CommitError> {
    claimed.validate()?;
    let actual = fingerprint(doc_bytes);
    Ok(Verification {
        sha256_match: actual.sha256_hex.eq_ignore_ascii_case(&claimed.sha256_hex),
        sha512_match: actual.sha512_hex.eq_ignore_ascii_case(&claimed.sha512_hex),
    })
}

/// A published fingerprint and the promised reveal date of its document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedForecast {
    pub checksum: ChecksumRecord,
    pub sealed_on: NaiveDate,
    pub reveal_due: NaiveDate,
}

impl SealedForecast {
    pub fn new(
        checksum: ChecksumRecord,
        sealed_on: NaiveDate,
        reveal_due: NaiveDate,
    ) -> Result<Self, CommitError> {
        if sealed_on > reveal_due {
            return Err(CommitError::RevealBeforeSeal {
                sealed_on,
                reveal_due,
            });
        }
        Ok(Self {
            checksum,
            sealed_on,
            reveal_due,
        })
    }

    pub fn render(&self) -> String {
        format!(
            "sealed_on: {}\nreveal_due: {}\n{}",
            fmt_date(self.sealed_on),
            fmt_date(self.reveal_due),
            emit_checksum_table(&self.checksum)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TABLE_SHA256: &str = "d8b1345dca3a1ff3952d5f8f74595b83accb7b8bcefd163a7552512b5b4cda8e";
    const TABLE_SHA512: &str = "3f529ca27ea8f06934b3ecb01f07b08d648f3d98dbc1253ebb70e8c52a368a9d441f641afc0c621f208b509a102caf75337ce321e732d9e8c6cd584434f50880";

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FMT).unwrap()
    }

    fn palladium() -> ForecastRecord {
        ForecastRecord {
            asset_id: "Palladium future, CHF (Bloomberg: PA1 COMB Comdty)".into(),
            status: Status::H2,
            last_observation: d("2010-05-07"),
            ensemble_size: 33,
            windows: Some(QuantileWindows {
                q05: d("2010-05-16"),
                q20: d("2010-06-05"),
                q80: d("2010-07-05"),
                q95: d("2010-07-22"),
            }),
        }
    }

    fn platinum() -> ForecastRecord {
        ForecastRecord {
            asset_id: "Platinum future, CHF".into(),
            status: Status::H2,
            last_observation: d("2010-05-07"),
            ensemble_size: 22,
            windows: Some(QuantileWindows {
                q05: d("2010-05-23"),
                q20: d("2010-06-02"),
                q80: d("2010-08-04"),
                q95: d("2010-09-16"),
            }),
        }
    }

    fn document() -> ForecastDocument {
        ForecastDocument {
            created_on: d("2010-05-12"),
            h1_assets: vec![
                "Oil future, CHF".into(),
                "Cotton future, CHF".into(),
                "Gold future, CHF".into(),
            ],
            h2_records: vec![platinum(), palladium()],
            notes: "Quantile windows from bootstrap ensembles.  \r\nSecond line\n\n".into(),
        }
    }

    #[test]
    fn palladium_fragment_layout() {
        let frag = render_fragment(&palladium());
        assert!(frag.lines().any(|l| l == "20/80%: 2010-06-05/2010-07-05"));
        assert!(frag.lines().any(|l| l == "5/95%: 2010-05-16/2010-07-22"));
        assert_eq!(parse_fragment(&frag).unwrap(), palladium());
        let commented = format!("# fbe 0.1.0 seed=1\n{frag}");
        assert_eq!(parse_fragment(&commented).unwrap(), palladium());
    }

    #[test]
    fn fragment_rejects_bad_records() {
        let frag = render_fragment(&palladium());
        let unordered = frag.replace("2010-05-16/2010-07-22", "2010-06-16/2010-07-22");
        assert!(parse_fragment(&unordered).is_err());
        let no_window = frag.replace("5/95%: 2010-05-16/2010-07-22\n", "");
        assert!(parse_fragment(&no_window).is_err());
        assert!(parse_fragment("asset: x\n").is_err());
        let h1 = ForecastRecord {
            status: Status::H1,
            windows: None,
            ..palladium()
        };
        assert_eq!(parse_fragment(&render_fragment(&h1)).unwrap(), h1);
    }

    #[test]
    fn document_round_trip_is_byte_identical() {
        let bytes = document().canonical_serialize();
        let text = std::str::from_utf8(&bytes).unwrap();
        assert!(text.starts_with(
            "fbe-forecast-document: 1\ncreated_on: 2010-05-12\n\n[h1]\nasset: Cotton future, CHF\n"
        ));
        assert!(!text.contains('\r'));
        assert!(text.lines().all(|l| l == l.trim_end()));
        let parsed = ForecastDocument::parse(&bytes).unwrap();
        assert_eq!(parsed.canonical_serialize(), bytes);
    }

    #[test]
    fn field_order_does_not_matter() {
        let mut other = document();
        other.h1_assets.reverse();
        other.h2_records.reverse();
        assert_eq!(
            other.canonical_serialize(),
            document().canonical_serialize()
        );
    }

    #[test]
    fn single_date_change_changes_bytes() {
        let mut other = document();
        other.h2_records[1].windows.as_mut().unwrap().q80 = d("2010-07-06");
        assert_ne!(
            other.canonical_serialize(),
            document().canonical_serialize()
        );
    }

    #[test]
    fn empty_document_round_trip() {
        let doc = ForecastDocument {
            created_on: d("2026-01-01"),
            h1_assets: vec![],
            h2_records: vec![],
            notes: String::new(),
        };
        let bytes = doc.canonical_serialize();
        assert_eq!(ForecastDocument::parse(&bytes).unwrap(), doc);
    }

    #[test]
    fn sha2_test_vectors() {
        let empty = fingerprint(b"");
        assert_eq!(
            empty.sha256_hex,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            empty.sha512_hex,
            "cf83e1357eefb8bdf1542850d66d8007d620e4050b5715dc83f4a921d36ce9ce47d0d13c5d85f2b0ff8318d2877eec2f63b931bd47417a81a538327af927da3e"
        );
        let abc = fingerprint(b"abc");
        assert_eq!(
            abc.sha256_hex,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            abc.sha512_hex,
            "ddaf35a193617abacc417349ae20413112e6fa4e89a97ea20a9eeee64b55d39a2192992a274fc1a836ba3c23a3feebbd454d4423643ce80e2a9ac94fa54ca49f"
        );
        let million_a = fingerprint(&vec![b'a'; 1_000_000]);
        assert_eq!(
            million_a.sha256_hex,
            "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0"
        );
        assert_eq!(
            million_a.sha512_hex,
            "e718483d0ce769644e2e42c7bc15b4638e1f98b13b2044285632a803afa973ebde0ff244877ea60a4cb0432ce577c31beb009c5c2c49aa2e4eadb217ad8cc09b"
        );
        let mib: Vec<u8> = (0..1usize << 20).map(|i| (i % 251) as u8).collect();
        let big = fingerprint(&mib);
        assert_eq!(
            big.sha256_hex,
            "631b84027d6b9e52b539c4e8373622d23032dfadc64d60af87339c9037e4f769"
        );
        assert_eq!(
            big.sha512_hex,
            "67dad569eefc986a3b2424f5516d5a0284bb53d7b52d75f5ed881a6830a95765ccc82bc48752fb693422579f11dc9a400561ec1885af9eeef703dbbd312d4fd0"
        );
    }

    #[test]
    fn table_row_and_checksum_lines_round_trip() {
        let rec =
            ChecksumRecord::new(TABLE_SHA256, TABLE_SHA512, "forecast_assets.txt").unwrap();
        let table = emit_checksum_table(&rec);
        let row = table.lines().find(|l| l.starts_with("SHA256SUM")).unwrap();
        assert_eq!(row.split_whitespace().nth(1), Some(TABLE_SHA256));
        assert!(table.contains(&format!("{TABLE_SHA256}  forecast_assets.txt\n")));
        assert_eq!(parse_checksum_file(&table).unwrap(), rec);
        let lines_only: String = table.lines().skip(4).map(|l| format!("{l}\n")).collect();
        assert_eq!(parse_checksum_file(&lines_only).unwrap(), rec);
    }

    #[test]
    fn uppercase_hex_is_lowered() {
        let rec = ChecksumRecord {
            sha256_hex: TABLE_SHA256.to_uppercase(),
            sha512_hex: TABLE_SHA512.to_uppercase(),
            filename: "doc".into(),
        };
        let table = emit_checksum_table(&rec);
        assert!(table.contains(TABLE_SHA256) && table.contains(TABLE_SHA512));
        assert!(!table.contains(&TABLE_SHA256.to_uppercase()));
        assert_eq!(
            ChecksumRecord::new(&rec.sha256_hex, &rec.sha512_hex, "doc")
                .unwrap()
                .sha256_hex,
            TABLE_SHA256
        );
    }

    #[test]
    fn malformed_checksums_are_errors() {
        let short = &TABLE_SHA256[..63];
        assert!(matches!(
            ChecksumRecord::new(short, TABLE_SHA512, "x"),
            Err(CommitError::MalformedHex { expected: 64, .. })
        ));
        let claim = ChecksumRecord {
            sha256_hex: short.into(),
            sha512_hex: TABLE_SHA512.into(),
            filename: "x".into(),
        };
        assert!(verify(b"abc", &claim).is_err());
        let table =
            emit_checksum_table(&ChecksumRecord::new(TABLE_SHA256, TABLE_SHA512, "x").unwrap());
        let truncated = &table[..table.len() - 20];
        assert!(parse_checksum_file(truncated).is_err());
        assert!(parse_checksum_file(&format!("{short}  x\n")).is_err());
        assert_eq!(
            parse_checksum_file(&checksum_line(TABLE_SHA256, "x")),
            Err(CommitError::MissingDigest("SHA-512"))
        );
        assert!(parse_checksum_file(&format!("{TABLE_SHA256}  a\n{TABLE_SHA512}  b\n")).is_err());
    }

    #[test]
    fn verify_own_fingerprint_and_flipped_bits() {
        let bytes = document().canonical_serialize();
        let rec = fingerprint(&bytes);
        assert!(verify(&bytes, &rec).unwrap().passed());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let mut m = bytes.clone();
            let i = rng.random_range(0..m.len());
            m[i] ^= 1 << rng.random_range(0..8);
            let v = verify(&m, &rec).unwrap();
            assert!(!v.sha256_match && !v.sha512_match);
        }
    }

    #[test]
    fn sealed_dates_are_ordered() {
        let rec = fingerprint(b"x").with_filename("x");
        assert!(SealedForecast::new(rec.clone(), d("2010-05-12"), d("2010-11-01")).is_ok());
        assert!(SealedForecast::new(rec, d("2010-11-02"), d("2010-11-01")).is_err());
    }

    fn arb_date() -> impl Strategy<Value = NaiveDate> {
        (0i64..5000).prop_map(|k| d("2000-01-01") + chrono::Duration::days(k))
    }

    fn arb_record() -> impl Strategy<Value = ForecastRecord> {
        (
            "[A-Za-z][A-Za-z0-9 ,()]{0,20}",
            arb_date(),
            0usize..500,
            prop::option::of(prop::collection::vec(0i64..400, 4)),
        )
            .prop_map(|(name, last, size, qs)| {
                let windows = qs.map(|mut q| {
                    q.sort();
                    let at = |k: i64| last + chrono::Duration::days(k);
                    QuantileWindows {
                        q05: at(q[0]),
                        q20: at(q[1]),
                        q80: at(q[2]),
                        q95: at(q[3]),
                    }
                });
                ForecastRecord {
                    asset_id: name,
                    status: if windows.is_some() {
                        Status::H2
                    } else {
                        Status::H1
                    },
                    last_observation: last,
                    ensemble_size: size,
                    windows,
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn serialize_parse_serialize_is_stable(
            created in arb_date(),
            h1 in prop::collection::vec("[A-Za-z][A-Za-z0-9 ,]{0,16}", 0..5),
            recs in prop::collection::vec(arb_record(), 0..5),
            notes in "[ -~\n]{0,80}",
        ) {
            let doc = ForecastDocument { created_on: created, h1_assets: h1, h2_records: recs, notes };
            let bytes = doc.canonical_serialize();
            let again = ForecastDocument::parse(&bytes).unwrap().canonical_serialize();
            prop_assert_eq!(again, bytes);
        }
    }
}
