//! Plain-text snapshot and front files.
//!
//! A snapshot is a header line `# nx ntheta x_min x_max theta_min theta_max
//! time` followed by `ntheta` rows of `nx` comma-separated values, θ slow.
//! Numbers are written in shortest round-trip form, so reading a file back
//! reproduces the field bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fronts::FrontSeries;
use crate::grid::{Field, GridSpec};

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes so that e.g. `1e-300` stays short.
pub fn fmt_num(out: &mut String, v: f64) {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        write!(out, "{v}").unwrap();
    } else {
        write!(out, "{v:e}").unwrap();
    }
}

pub fn num(v: f64) -> String {
    let mut s = String::new();
    fmt_num(&mut s, v);
    s
}

pub fn format_snapshot(field: &Field) -> String {
    let s = &field.spec;
    let mut out = String::with_capacity(field.values.len() * 20 + 128);
    writeln!(
        out,
        "# {} {} {} {} {} {} {}",
        s.nx, s.ntheta, s.x_min, s.x_max, s.theta_min, s.theta_max, field.time
    )
    .unwrap();
    for j in 0..s.ntheta {
        for (i, v) in field.row(j).iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            fmt_num(&mut out, *v);
        }
        out.push('\n');
    }
    out
}

fn parse_num<T: std::str::FromStr>(tok: &str, what: &str, line: usize) -> Result<T> {
    tok.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} '{tok}'")))
}

pub fn parse_snapshot(text: &str) -> Result<Field> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty snapshot".into()))?;
    let body = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("snapshot header must start with '#'".into()))?;
    let toks: Vec<&str> = body.split_whitespace().collect();
    if toks.len() != 7 {
        return Err(Error::Parse(format!(
            "snapshot header needs 7 fields, got {}",
            toks.len()
        )));
    }
    let nx: usize = parse_num(toks[0], "nx", 1)?;
    let nt: usize = parse_num(toks[1], "ntheta", 1)?;
    let nums: Vec<f64> = toks[2..]
        .iter()
        .map(|t| parse_num(t, "header value", 1))
        .collect::<Result<_>>()?;
    let spec = GridSpec::new(nums[0], nums[1], nx, nums[2], nums[3], nt)?;
    let mut values = Vec::with_capacity(spec.len());
    let mut rows = 0;
    for (k, line) in lines {
        let before = values.len();
        for tok in line.split(',') {
            values.push(parse_num::<f64>(tok, "value", k + 1)?);
        }
        if values.len() - before != nx {
            return Err(Error::Parse(format!(
                "line {}: expected {nx} values, got {}",
                k + 1,
                values.len() - before
            )));
        }
        rows += 1;
    }
    if rows != nt {
        return Err(Error::Parse(format!("expected {nt} rows, got {rows}")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("non-finite value {v} in snapshot")));
    }
    Field::from_values(spec, values, nums[4])
}

pub fn write_snapshot(path: impl AsRef<Path>, field: &Field) -> Result<()> {
    fs::write(path, format_snapshot(field))?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Field> {
    parse_snapshot(&fs::read_to_string(path)?)
}

/// `time,front_x,front_theta[,front_rho]`, one row per sample.
pub fn format_fronts(series: &FrontSeries) -> String {
    let mut out = String::from("time,front_x,front_theta");
    if series.front_rho.is_some() {
        out.push_str(",front_rho");
    }
    out.push('\n');
    for k in 0..series.times.len() {
        let mut row = vec![series.times[k], series.front_x[k], series.front_theta[k]];
        if let Some(r) = &series.front_rho {
            row.push(r[k]);
        }
        for (i, v) in row.into_iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            fmt_num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Reads a fronts file; fits are left empty. `level` is not stored in the
/// file and must be supplied.
pub fn parse_fronts(text: &str, level: f64) -> Result<FrontSeries> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty fronts file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_rho = match cols.as_slice() {
        ["time", "front_x", "front_theta"] => false,
        ["time", "front_x", "front_theta", "front_rho"] => true,
        _ => return Err(Error::Parse(format!("unexpected fronts header '{header}'"))),
    };
    let mut series = FrontSeries::new(level);
    if with_rho {
        series.front_rho = Some(Vec::new());
    }
    for (k, line) in lines {
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| parse_num(t, "value", k + 1))
            .collect::<Result<_>>()?;
        if vals.len() != cols.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} columns",
                k + 1,
                cols.len()
            )));
        }
        if series.times.last().is_some_and(|t| vals[0] <= *t) {
            return Err(Error::Parse(format!("line {}: times must increase", k + 1)));
        }
        series.times.push(vals[0]);
        series.front_x.push(vals[1]);
        series.front_theta.push(vals[2]);
        if let Some(r) = &mut series.front_rho {
            r.push(vals[3]);
        }
    }
    Ok(series)
}

pub fn write_fronts(path: impl AsRef<Path>, series: &FrontSeries) -> Result<()> {
    fs::write(path, format_fronts(series))?;
    Ok(())
}

pub fn read_fronts(path: impl AsRef<Path>, level: f64) -> Result<FrontSeries> {
    parse_fronts(&fs::read_to_string(path)?, level)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_exact() {
        let spec = GridSpec::new(-1.5, 2.0, 7, 1.0, 3.0, 4).unwrap();
        let mut f = Field::from_fn(spec, |x, t| (x * t).sin() / 3.0);
        f.time = 12.25;
        let back = parse_snapshot(&format_snapshot(&f)).unwrap();
        assert_eq!(back.spec, f.spec);
        assert_eq!(back.time, f.time);
        assert_eq!(back.checksum(), f.checksum());
    }

    #[test]
    fn extreme_magnitudes_stay_short_and_exact() {
        for v in [
            1e-300,
            -3.5e-7,
            2.5e20,
            0.25,
            -0.0,
            123456.0,
            f64::NEG_INFINITY,
            5e-324,
        ] {
            let s = num(v);
            assert!(s.len() < 26, "{s}");
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn header_layout() {
        let spec = GridSpec::new(0.0, 1.0, 3, 1.0, 2.0, 3).unwrap();
        let text = format_snapshot(&Field::zeros(spec));
        assert_eq!(text.lines().next().unwrap(), "# 3 3 0 1 1 2 0");
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(1).unwrap(), "0,0,0");
    }

    #[test]
    fn malformed_snapshots_are_rejected() {
        assert!(matches!(parse_snapshot(""), Err(Error::Parse(_))));
        assert!(matches!(
            parse_snapshot("3 3 0 1 1 2 0\n"),
            Err(Error::Parse(_))
        ));
        let short_row = "# 3 3 0 1 1 2 0\n0,0,0\n0,0\n0,0,0\n";
        assert!(matches!(parse_snapshot(short_row), Err(Error::Parse(_))));
        let missing_row = "# 3 3 0 1 1 2 0\n0,0,0\n0,0,0\n";
        assert!(matches!(parse_snapshot(missing_row), Err(Error::Parse(_))));
        let nan = "# 3 3 0 1 1 2 0\n0,0,0\n0,NaN,0\n0,0,0\n";
        assert!(parse_snapshot(nan).is_err());
    }

    #[test]
    fn fronts_round_trip_with_sentinels() {
        let mut s = FrontSeries::new(0.3);
        s.times = vec![0.0, 0.5, 1.0];
        s.front_x = vec![f64::NEG_INFINITY, 1.25, 2.5];
        s.front_theta = vec![16.0, 16.5, 17.0];
        s.front_rho = Some(vec![0.1, 0.2, 0.3]);
        let back = parse_fronts(&format_fronts(&s), 0.3).unwrap();
        assert_eq!(back.times, s.times);
        assert_eq!(back.front_x, s.front_x);
        assert_eq!(back.front_rho, s.front_rho);
        let plain = "time,front_x,front_theta\n0,1,2\n1,2,3\n";
        assert!(parse_fronts(plain, 0.5).unwrap().front_rho.is_none());
        assert!(parse_fronts("time,front_x,front_theta\n1,1,1\n0,1,1\n", 0.5).is_err());
        assert!(parse_fronts("t,x\n", 0.5).is_err());
    }
}
