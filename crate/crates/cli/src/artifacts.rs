//! Plot-ready data from run reports: a per-call summary, the omitted-bits
//! series of each run, per-point error histograms and, given loss matrices,
//! a calls x bits heatmap of the worse stuck-at loss.

use std::path::{Path, PathBuf};

use dpscale::metrics::error_distribution;
use dpscale::{AccLossMatrices, RunReport};
use serde::{Deserialize, Serialize};

use crate::commands::{data, num, to_json, write_output};
use crate::{CliError, ReportArgs, ReportFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub report: String,
    pub workload: String,
    pub policy: String,
    pub parameter: f64,
    pub mre: f64,
    pub energy_savings: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedSeries {
    pub report: String,
    pub static_fns: Vec<String>,
    pub omitted: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub report: String,
    pub thresholds: Vec<f64>,
    /// `[0, t0)`, `[t0, t1)`, ..., `[t_last, inf)`
    pub buckets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub static_fns: Vec<String>,
    pub num_bits: u32,
    /// `None` where either polarity produced an invalid result.
    pub max_loss: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub runs: Vec<RunSummary>,
    pub series: Vec<OmittedSeries>,
    pub histograms: Vec<Histogram>,
    pub heatmap: Option<Heatmap>,
}

fn heatmap(m: &AccLossMatrices) -> Heatmap {
    Heatmap {
        static_fns: m.static_fns().to_vec(),
        num_bits: m.num_bits(),
        max_loss: (0..m.num_calls())
            .map(|i| (0..m.num_bits()).map(|b| m.max_loss(i, b)).collect())
            .collect(),
    }
}

fn label(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn collect(
    reports: &[(String, RunReport)],
    matrices: Option<&AccLossMatrices>,
    thresholds: &[f64],
) -> Result<Artifacts, CliError> {
    let mut out = Artifacts {
        runs: Vec::new(),
        series: Vec::new(),
        histograms: Vec::new(),
        heatmap: matrices.map(heatmap),
    };
    for (name, r) in reports {
        out.runs.push(RunSummary {
            report: name.clone(),
            workload: r.workload.name.clone(),
            policy: r.schedule.policy.to_string(),
            parameter: r.schedule.parameter,
            mre: r.accuracy.mre,
            energy_savings: r.energy.savings,
        });
        out.series.push(OmittedSeries {
            report: name.clone(),
            static_fns: r.static_fns.clone(),
            omitted: r.omitted.clone(),
        });
        let d = error_distribution(&r.accuracy, thresholds).map_err(|e| CliError::Usage(e.to_string()))?;
        out.histograms.push(Histogram {
            report: name.clone(),
            thresholds: d.thresholds,
            buckets: d.buckets,
        });
    }
    Ok(out)
}

fn csv_text(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(data)?;
    for r in rows {
        w.write_record(&r).map_err(data)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(data)?).expect("csv output is utf-8"))
}

fn write_csv_dir(dir: &Path, a: &Artifacts) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| data(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<(), CliError> {
        let p = dir.join(name);
        write_output(Some(&p), &text)?;
        files.push(p);
        Ok(())
    };

    let head = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    emit(
        "runs.csv",
        csv_text(
            head(&["report", "workload", "policy", "parameter", "mre", "energy_savings"]),
            a.runs
                .iter()
                .map(|r| {
                    vec![
                        r.report.clone(),
                        r.workload.clone(),
                        r.policy.clone(),
                        r.parameter.to_string(),
                        num(r.mre),
                        num(r.energy_savings),
                    ]
                })
                .collect(),
        )?,
    )?;
    emit(
        "omitted_bits.csv",
        csv_text(
            head(&["report", "call", "static_fn", "omitted"]),
            a.series
                .iter()
                .flat_map(|s| {
                    s.omitted.iter().enumerate().map(move |(i, k)| {
                        let f = s.static_fns.get(i).cloned().unwrap_or_default();
                        vec![s.report.clone(), i.to_string(), f, k.to_string()]
                    })
                })
                .collect(),
        )?,
    )?;
    emit(
        "histogram.csv",
        csv_text(
            head(&["report", "lower", "upper", "fraction"]),
            a.histograms
                .iter()
                .flat_map(|h| {
                    h.buckets.iter().enumerate().map(move |(i, f)| {
                        let lower = if i == 0 { 0.0 } else { h.thresholds[i - 1] };
                        let upper = h.thresholds.get(i).map_or("inf".to_string(), |t| t.to_string());
                        vec![h.report.clone(), lower.to_string(), upper, num(*f)]
                    })
                })
                .collect(),
        )?,
    )?;
    if let Some(h) = &a.heatmap {
        let mut header = head(&["call", "static_fn"]);
        header.extend((0..h.num_bits).map(|b| format!("bit{b}")));
        let rows = h
            .max_loss
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = vec![i.to_string(), h.static_fns[i].clone()];
                r.extend(row.iter().map(|v| v.map_or("NA".to_string(), num)));
                r
            })
            .collect();
        emit("heatmap.csv", csv_text(header, rows)?)?;
    }
    Ok(files)
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let mut reports = Vec::with_capacity(a.run_reports.len());
    for p in &a.run_reports {
        let text = std::fs::read_to_string(p).map_err(|e| data(format!("cannot read {}: {e}", p.display())))?;
        let r: RunReport = serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", p.display())))?;
        reports.push((label(p), r));
    }
    let matrices = match &a.matrices {
        Some(prefix) => Some(AccLossMatrices::read_files(prefix).map_err(data)?),
        None => None,
    };
    let artifacts = collect(&reports, matrices.as_ref(), &a.thresholds)?;
    match a.format {
        ReportFormat::Json => write_output(a.out.as_deref(), &to_json(&artifacts)),
        ReportFormat::Csv => {
            let dir = a
                .out
                .as_deref()
                .ok_or_else(|| CliError::Usage("--format csv needs --out <directory>".into()))?;
            for f in write_csv_dir(dir, &artifacts)? {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_lossless() {
        let m = AccLossMatrices::from_losses(
            vec!["f".into(), "g".into()],
            &[vec![Some(0.1), None], vec![Some(1.0 / 3.0), Some(0.0)]],
            &[vec![Some(0.2), Some(1e-300)], vec![Some(0.7), Some(2.0f64.sqrt() / 10.0)]],
        )
        .unwrap();
        let a = Artifacts {
            runs: vec![RunSummary {
                report: "r".into(),
                workload: "w".into(),
                policy: "dps".into(),
                parameter: 0.15,
                mre: 0.1 + 0.2,
                energy_savings: std::f64::consts::PI / 10.0,
            }],
            series: vec![OmittedSeries {
                report: "r".into(),
                static_fns: vec!["f".into(), "g".into()],
                omitted: vec![3, 0],
            }],
            histograms: vec![Histogram {
                report: "r".into(),
                thresholds: vec![0.05, 0.1],
                buckets: vec![1.0 / 3.0, 2.0 / 3.0, 0.0],
            }],
            heatmap: Some(heatmap(&m)),
        };
        let back: Artifacts = serde_json::from_str(&to_json(&a)).unwrap();
        assert_eq!(back, a);
        assert_eq!(a.heatmap.unwrap().max_loss[0], vec![Some(0.2), None]);
    }
}
