//! CSV exchange formats: data panels and grid summaries.
//!
//! Data files carry `id,y1,...,yT[,aux]` with an empty field for a missing
//! cell. Values are written in shortest round-trip form so that reading a
//! file back reproduces the panel bit for bit.
//!
//! Summary files open with a `# schema: ...` comment line followed by a
//! header with the columns in [`SUMMARY_COLUMNS`]. Numbers use six
//! significant digits; undefined quantities are empty fields.

use std::io::{Read, Write};

use crate::amputation::Mechanism;
use crate::datagen::LongData;
use crate::error::{Error, Result};
use crate::gcm::Param;
use crate::harness::{BiasKind, Method, SimSummary};
use crate::linalg::Mat;

pub const SUMMARY_SCHEMA: &str = "gcmsim-summary/1";

pub const SUMMARY_COLUMNS: [&str; 10] =
    ["N", "rate", "mechanism", "method", "parameter", "bias_type", "bias", "mc_se", "coverage", "convergence_rate"];

pub fn write_data<W: Write>(data: &LongData<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let t = data.n_occasions();
    let mut header = vec!["id".to_string()];
    header.extend((1..=t).map(|k| format!("y{k}")));
    if data.aux.is_some() {
        header.push("aux".into());
    }
    w.write_record(&header)?;
    for i in 0..data.n_rows() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend((0..t).map(|k| data.get(i, k).map(|v| v.to_string()).unwrap_or_default()));
        if let Some(aux) = &data.aux {
            rec.push(aux[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_data<R: Read>(input: R) -> Result<LongData<f64>> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.first() != Some(&"id") {
        return Err(Error::Validation("data file must start with an id column".into()));
    }
    let has_aux = names.last() == Some(&"aux");
    let t = names.len() - 1 - has_aux as usize;
    for (k, name) in names[1..=t].iter().enumerate() {
        if *name != format!("y{}", k + 1) {
            return Err(Error::Validation(format!("unexpected column {name:?}")));
        }
    }
    let mut cells = Vec::new();
    let mut mask = Vec::new();
    let mut aux = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        for k in 1..=t {
            let field = &rec[k];
            if field.is_empty() {
                cells.push(f64::NAN);
                mask.push(false);
            } else {
                cells.push(parse_number(field)?);
                mask.push(true);
            }
        }
        if has_aux {
            aux.push(parse_number(&rec[t + 1])?);
        }
    }
    let n = mask.len() / t.max(1);
    let y = Mat::from_fn(n, t, |i, k| cells[i * t + k]);
    let mut data = LongData::with_mask(y, mask)?;
    if has_aux {
        data.aux = Some(aux);
    }
    Ok(data)
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Validation(format!("not a number: {s:?}")))
}

/// `%g`-style formatting with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let fixed = format!("{:.*}", (5 - exp).max(0) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_field(v: Option<f64>) -> String {
    v.map(format_sig6).unwrap_or_default()
}

pub fn write_summary<W: Write>(rows: &[SimSummary], mut out: W) -> Result<()> {
    writeln!(out, "# schema: {SUMMARY_SCHEMA}")?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for s in rows {
        w.write_record([
            s.cell.n.to_string(),
            format_sig6(s.cell.rate),
            s.cell.mechanism.name().to_string(),
            s.cell.method.name().to_string(),
            s.param.name().to_string(),
            s.bias_kind.name().to_string(),
            opt_field(s.bias),
            opt_field(s.mc_se),
            opt_field(s.coverage),
            format_sig6(s.convergence_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed line of a summary file.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub n: usize,
    pub rate: f64,
    pub mechanism: Mechanism,
    pub method: Method,
    pub param: Param,
    pub bias_kind: BiasKind,
    pub bias: Option<f64>,
    pub mc_se: Option<f64>,
    pub coverage: Option<f64>,
    pub convergence_rate: f64,
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRecord>> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text)?;
    let first = text.lines().next().unwrap_or_default();
    let expected = format!("# schema: {SUMMARY_SCHEMA}");
    if first != expected {
        return Err(Error::Validation(format!("expected {expected:?} as the first line, found {first:?}")));
    }
    let body = &text[first.len()..];
    let mut r = csv::ReaderBuilder::new().from_reader(body.trim_start_matches('\n').as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SUMMARY_COLUMNS {
        return Err(Error::Validation(format!("unexpected summary columns {header:?}")));
    }
    let opt = |s: &str| if s.is_empty() { Ok(None) } else { parse_number(s).map(Some) };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let bias_kind = match &rec[5] {
            "relative" => BiasKind::Relative,
            "raw" => BiasKind::Raw,
            other => return Err(Error::Validation(format!("unknown bias type {other:?}"))),
        };
        out.push(SummaryRecord {
            n: rec[0].parse().map_err(|_| Error::Validation(format!("bad N {:?}", &rec[0])))?,
            rate: parse_number(&rec[1])?,
            mechanism: rec[2].parse()?,
            method: rec[3].parse()?,
            param: Param::from_name(&rec[4]).ok_or_else(|| Error::Validation(format!("unknown parameter {:?}", &rec[4])))?,
            bias_kind,
            bias: opt(&rec[6])?,
            mc_se: opt(&rec[7])?,
            coverage: opt(&rec[8])?,
            convergence_rate: parse_number(&rec[9])?,
        });
    }
    Ok(out)
}
