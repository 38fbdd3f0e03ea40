//! CSV schemas written by the commands, with matching readers.
//!
//! Fixed-schema files (metrics, pieces, ranking, summary) go through serde;
//! steps and trajectory files carry one column per zone or segment, so their
//! headers depend on the configuration.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::HarnessError;

pub trait CsvRecord: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub steps: usize,
    pub mean_return: Option<f64>,
    pub trailing100_return: Option<f64>,
    pub pi_loss: f64,
    pub v_loss: f64,
    pub kl: f64,
    pub clip_frac: f64,
}

impl CsvRecord for MetricsRow {
    const HEADER: &'static [&'static str] = &[
        "epoch",
        "steps",
        "mean_return",
        "trailing100_return",
        "pi_loss",
        "v_loss",
        "kl",
        "clip_frac",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceRow {
    pub episode: usize,
    pub piece_index: usize,
    pub exit_time: f64,
    pub min_temp: f64,
    pub mean_temp: f64,
    pub max_temp: f64,
}

impl CsvRecord for PieceRow {
    const HEADER: &'static [&'static str] = &[
        "episode",
        "piece_index",
        "exit_time",
        "min_temp",
        "mean_temp",
        "max_temp",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    /// Turn durations joined by `-`, e.g. `64-60-60-64`.
    pub pattern: String,
    pub feasible: bool,
    pub score_c: Option<f64>,
}

impl CsvRecord for RankingRow {
    const HEADER: &'static [&'static str] = &["pattern", "feasible", "score_c"];
}

impl RankingRow {
    pub fn durations(&self) -> Result<Vec<f64>, HarnessError> {
        self.pattern
            .split('-')
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|d| d.is_finite() && *d > 0.0)
                    .ok_or_else(|| {
                        HarnessError::Schema(format!("bad turn duration `{s}` in ranking"))
                    })
            })
            .collect()
    }
}

pub fn format_pattern(d: &[f64]) -> String {
    d.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// Evaluation summary; fractions are over all sheared pieces, classified by mean temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: String,
    pub episodes: usize,
    pub pieces: usize,
    pub frac_below: f64,
    pub frac_required: f64,
    pub frac_above: f64,
    pub frac_desired: f64,
    /// Pieces with any segment above the hard limit.
    pub overheat_pieces: usize,
    /// Episodes in which any segment exceeded the hard limit.
    pub overheat_episodes: usize,
    pub mean_return: f64,
}

impl CsvRecord for SummaryRow {
    const HEADER: &'static [&'static str] = &[
        "mode",
        "episodes",
        "pieces",
        "frac_below",
        "frac_required",
        "frac_above",
        "frac_desired",
        "overheat_pieces",
        "overheat_episodes",
        "mean_return",
    ];
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Csv(e)
}

pub fn write_records<T: CsvRecord, W: Write>(w: W, rows: &[T]) -> Result<(), HarnessError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(T::HEADER).map_err(csv_err)?;
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

fn check_header(got: &csv::StringRecord, want: &[&str]) -> Result<(), HarnessError> {
    if got.iter().ne(want.iter().copied()) {
        return Err(HarnessError::Schema(format!(
            "expected header `{}`, found `{}`",
            want.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub fn read_records<T: CsvRecord, R: Read>(r: R) -> Result<Vec<T>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(rdr.headers().map_err(csv_err)?, T::HEADER)?;
    rdr.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// One environment step of an evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub episode: usize,
    pub t: f64,
    pub r_total: f64,
    pub r_even: f64,
    pub r_heat: f64,
    pub r_move: f64,
    /// Applied power per learnable zone, W.
    pub powers: Vec<f64>,
    pub max_temp: f64,
}

const STEP_LEAD: [&str; 6] = ["episode", "t", "r_total", "r_even", "r_heat", "r_move"];

/// Column name for the power of zone `index` (0-based) in W.
pub fn power_column(index: usize) -> String {
    format!("p_zone{}_w", index + 1)
}

fn num<T: std::str::FromStr>(s: &str, col: &str, line: u64) -> Result<T, HarnessError> {
    s.parse().map_err(|_| HarnessError::Row {
        line,
        reason: format!("column `{col}`: cannot parse `{s}`"),
    })
}

/// `zone_indices` name the power columns (0-based zone numbers).
pub fn write_steps<W: Write>(
    w: W,
    zone_indices: &[usize],
    rows: &[StepRow],
) -> Result<(), HarnessError> {
    let mut out = csv::WriterBuilder::new().from_writer(w);
    let mut header: Vec<String> = STEP_LEAD.iter().map(|s| s.to_string()).collect();
    header.extend(zone_indices.iter().map(|&i| power_column(i)));
    header.push("max_temp".into());
    out.write_record(&header).map_err(csv_err)?;
    for r in rows {
        if r.powers.len() != zone_indices.len() {
            return Err(HarnessError::Schema(
                "step row has the wrong number of powers".into(),
            ));
        }
        let mut rec = vec![
            r.episode.to_string(),
            fmt(r.t),
            fmt(r.r_total),
            fmt(r.r_even),
            fmt(r.r_heat),
            fmt(r.r_move),
        ];
        rec.extend(r.powers.iter().map(|p| fmt(*p)));
        rec.push(fmt(r.max_temp));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

/// Shortest round-tripping representation.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn power_block(header: &csv::StringRecord, from: usize) -> usize {
    header
        .iter()
        .skip(from)
        .take_while(|h| h.starts_with("p_zone") && h.ends_with("_w"))
        .count()
}

pub fn read_steps<R: Read>(r: R) -> Result<Vec<StepRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let lead_ok = header
        .iter()
        .take(STEP_LEAD.len())
        .eq(STEP_LEAD.iter().copied());
    let np = power_block(&header, STEP_LEAD.len());
    if !lead_ok
        || header.len() != STEP_LEAD.len() + np + 1
        || &header[header.len() - 1] != "max_temp"
    {
        return Err(HarnessError::Schema("not a steps file".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| num::<f64>(&rec[i], &header[i], line);
        rows.push(StepRow {
            episode: num(&rec[0], "episode", line)?,
            t: f(1)?,
            r_total: f(2)?,
            r_even: f(3)?,
            r_heat: f(4)?,
            r_move: f(5)?,
            powers: (6..6 + np).map(f).collect::<Result<_, _>>()?,
            max_temp: f(6 + np)?,
        });
    }
    Ok(rows)
}

/// One simulator step of an open-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub head_pos: f64,
    /// Power of every zone, W.
    pub powers: Vec<f64>,
    /// Segment temperatures, head first, °C.
    pub temps: Vec<f64>,
}

pub fn write_trajectory<W: Write>(w: W, rows: &[TrajectoryRow]) -> Result<(), HarnessError> {
    let mut out = csv::WriterBuilder::new().from_writer(w);
    let (nz, ns) = rows
        .first()
        .map_or((0, 0), |r| (r.powers.len(), r.temps.len()));
    let mut header = vec!["t".to_string(), "head_pos".to_string()];
    header.extend((0..nz).map(power_column));
    header.extend((0..ns).map(|i| format!("temp_{i}")));
    out.write_record(&header).map_err(csv_err)?;
    for r in rows {
        if r.powers.len() != nz || r.temps.len() != ns {
            return Err(HarnessError::Schema(
                "trajectory rows differ in width".into(),
            ));
        }
        let mut rec = vec![fmt(r.t), fmt(r.head_pos)];
        rec.extend(r.powers.iter().chain(&r.temps).map(|v| fmt(*v)));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

pub fn read_trajectory<R: Read>(r: R) -> Result<Vec<TrajectoryRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() < 2 || &header[0] != "t" || &header[1] != "head_pos" {
        return Err(HarnessError::Schema("not a trajectory file".into()));
    }
    let nz = power_block(&header, 2);
    let ns = header.len() - 2 - nz;
    if !(0..ns).all(|i| header[2 + nz + i] == format!("temp_{i}")) {
        return Err(HarnessError::Schema(
            "trajectory temperature columns out of order".into(),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| num::<f64>(&rec[i], &header[i], line);
        rows.push(TrajectoryRow {
            t: f(0)?,
            head_pos: f(1)?,
            powers: (2..2 + nz).map(f).collect::<Result<_, _>>()?,
            temps: (2 + nz..2 + nz + ns).map(f).collect::<Result<_, _>>()?,
        });
    }
    Ok(rows)
}

/// Per-step power schedule for the learnable zones: a header row naming the
/// zones, then one row of watts per simulator step.
pub fn read_schedule<R: Read>(
    r: R,
    n_zones: usize,
    p_max: f64,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() != n_zones {
        return Err(HarnessError::Schema(format!(
            "schedule has {} columns, expected one per learnable zone ({n_zones})",
            header.len()
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .zip(header.iter())
            .map(|(v, col)| {
                let p: f64 = num(v, col, line)?;
                if !(0.0..=p_max).contains(&p) {
                    return Err(HarnessError::Row {
                        line,
                        reason: format!("column `{col}`: power {v} W outside [0, {p_max}]"),
                    });
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::Schema("schedule has no rows".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_round_trip_with_missing_returns() {
        let rows = vec![
            MetricsRow {
                epoch: 0,
                steps: 200,
                mean_return: None,
                trailing100_return: None,
                pi_loss: -0.0,
                v_loss: 1.25,
                kl: 1e-5,
                clip_frac: 0.0,
            },
            MetricsRow {
                epoch: 1,
                steps: 400,
                mean_return: Some(-12.5),
                trailing100_return: Some(-12.5),
                pi_loss: 0.1,
                v_loss: 0.3,
                kl: -2e-4,
                clip_frac: 0.125,
            },
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epoch,steps,mean_return,trailing100_return,"));
        assert_eq!(read_records::<MetricsRow, _>(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn wrong_header_rejected() {
        let csv = "epoch,steps\n1,2\n";
        assert!(matches!(
            read_records::<MetricsRow, _>(csv.as_bytes()),
            Err(HarnessError::Schema(_))
        ));
    }

    #[test]
    fn steps_round_trip() {
        let rows = vec![StepRow {
            episode: 3,
            t: 1.0,
            r_total: 2.5,
            r_even: -0.5,
            r_heat: 0.0,
            r_move: 3.0,
            powers: vec![0.1e6, 0.0, 0.4e6],
            max_temp: 1081.123456789,
        }];
        let mut buf = Vec::new();
        write_steps(&mut buf, &[2, 3, 4], &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text
            .lines()
            .next()
            .unwrap()
            .contains("p_zone3_w,p_zone4_w,p_zone5_w,max_temp"));
        assert_eq!(read_steps(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn trajectory_round_trip() {
        let rows = vec![
            TrajectoryRow {
                t: 1.0,
                head_pos: 25.54,
                powers: vec![2e6, 4.2e6, 1.0],
                temps: vec![1080.0, 1079.5],
            },
            TrajectoryRow {
                t: 2.0,
                head_pos: 25.58,
                powers: vec![2e6, 4.2e6, 0.0],
                temps: vec![1079.9, 1079.4],
            },
        ];
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &rows).unwrap();
        assert_eq!(read_trajectory(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn schedule_parsing() {
        let ok = "zone3_w,zone4_w,zone5_w\n0,1e5, 400000\n2e5,2e5,2e5\n";
        let s = read_schedule(ok.as_bytes(), 3, 0.4e6).unwrap();
        assert_eq!(s, vec![vec![0.0, 1e5, 4e5], vec![2e5; 3]]);
        let too_high = "a,b,c\n0,0,5e5\n";
        let err = read_schedule(too_high.as_bytes(), 3, 0.4e6).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(read_schedule("a,b\n1,2\n".as_bytes(), 3, 0.4e6).is_err());
        assert!(read_schedule("a,b,c\n".as_bytes(), 3, 0.4e6).is_err());
        assert!(read_schedule("a,b,c\n1,x,2\n".as_bytes(), 3, 0.4e6).is_err());
        assert!(read_schedule("a,b,c\n1,2\n".as_bytes(), 3, 0.4e6).is_err());
    }

    #[test]
    fn ranking_pattern_round_trip() {
        let d = vec![64.0, 60.0, 60.0, 64.0];
        let row = RankingRow {
            pattern: format_pattern(&d),
            feasible: true,
            score_c: Some(3.5),
        };
        assert_eq!(row.pattern, "64-60-60-64");
        assert_eq!(row.durations().unwrap(), d);
        let bad = RankingRow {
            pattern: "64--60".into(),
            ..row
        };
        assert!(bad.durations().is_err());
    }
}
