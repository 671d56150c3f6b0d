//! Feature and score CSV files.
//!
//! Features: `sample_id,label,f1,...,fk`. Scores:
//! `sample_id,label,decision,score,prediction`. Floats are written in the
//! shortest form that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::ocsvm::Prediction;
use crate::synth::DefectKind;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sample_id: String,
    pub label: DefectKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub sample_id: String,
    pub label: DefectKind,
    /// Signed SVM decision value, positive on the inlier side.
    pub decision: f64,
    /// Anomaly score, `-decision`.
    pub score: f64,
    pub prediction: Prediction,
}

fn invalid(msg: String) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg)
}

pub fn features_csv_string(rows: &[FeatureRow]) -> std::io::Result<String> {
    let k = rows.first().map(|r| r.values.len()).ok_or_else(|| invalid("no feature rows to write".into()))?;
    let mut out = String::from("sample_id,label");
    for j in 1..=k {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for r in rows {
        if r.values.len() != k {
            return Err(invalid(format!("row {} has {} features, expected {k}", r.sample_id, r.values.len())));
        }
        out.push_str(&r.sample_id);
        out.push(',');
        out.push_str(r.label.as_str());
        for v in &r.values {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_features_csv(rows: &[FeatureRow], path: &Path) -> std::io::Result<()> {
    fs::write(path, features_csv_string(rows)?)
}

fn reader(path: &Path) -> std::io::Result<csv::Reader<fs::File>> {
    csv::Reader::from_path(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

pub fn read_features_csv(path: &Path) -> std::io::Result<Vec<FeatureRow>> {
    let mut rd = reader(path)?;
    let headers = rd.headers().map_err(|e| invalid(e.to_string()))?.clone();
    let k = headers.len().saturating_sub(2);
    let expected: Vec<String> = ["sample_id".to_string(), "label".to_string()].into_iter().chain((1..=k).map(|j| format!("f{j}"))).collect();
    if k == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(invalid(format!("{}: unexpected header {headers:?}", path.display())));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| invalid(e.to_string()))?;
        let label = rec[1].parse().map_err(|e: String| invalid(e))?;
        let values = (2..rec.len()).map(|j| rec[j].parse::<f64>().map_err(|_| invalid(format!("bad number {:?}", &rec[j])))).collect::<Result<_, _>>()?;
        rows.push(FeatureRow { sample_id: rec[0].to_string(), label, values });
    }
    Ok(rows)
}

fn prediction_str(p: Prediction) -> &'static str {
    match p {
        Prediction::Inlier => "inlier",
        Prediction::Outlier => "outlier",
    }
}

pub fn write_scores_csv(rows: &[ScoreRow], path: &Path) -> std::io::Result<()> {
    let mut out = String::from("sample_id,label,decision,score,prediction\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:?},{:?},{}", r.sample_id, r.label, r.decision, r.score, prediction_str(r.prediction));
    }
    fs::write(path, out)
}

pub fn read_scores_csv(path: &Path) -> std::io::Result<Vec<ScoreRow>> {
    let mut rd = reader(path)?;
    let headers = rd.headers().map_err(|e| invalid(e.to_string()))?.clone();
    if headers.iter().ne(["sample_id", "label", "decision", "score", "prediction"]) {
        return Err(invalid(format!("{}: unexpected header {headers:?}", path.display())));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| invalid(e.to_string()))?;
        let num = |j: usize| rec[j].parse::<f64>().map_err(|_| invalid(format!("bad number {:?}", &rec[j])));
        let prediction = match &rec[4] {
            "inlier" => Prediction::Inlier,
            "outlier" => Prediction::Outlier,
            other => return Err(invalid(format!("bad prediction {other:?}"))),
        };
        rows.push(ScoreRow { sample_id: rec[0].to_string(), label: rec[1].parse().map_err(|e: String| invalid(e))?, decision: num(2)?, score: num(3)?, prediction });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, label: DefectKind, values: Vec<f64>) -> FeatureRow {
        FeatureRow { sample_id: id.into(), label, values }
    }

    #[test]
    fn single_point_has_two_lines() {
        let text = features_csv_string(&[row("s00000", DefectKind::Ok, vec![0.5, 0.25])]).unwrap();
        assert_eq!(text, "sample_id,label,f1,f2\ns00000,OK,0.5,0.25\n");
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn round_trip_keeps_every_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let rows = vec![
            row("a", DefectKind::ColorDefect, vec![0.1 + 0.2, 1e-300, -0.0, 123456.789e10]),
            row("b", DefectKind::NotComplete, vec![f64::MIN_POSITIVE, 1.0 / 3.0, 2.0, -7.5]),
        ];
        write_features_csv(&rows, &path).unwrap();
        let back = read_features_csv(&path).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.sample_id, b.sample_id);
            assert_eq!(a.label, b.label);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.values), bits(&b.values));
        }
    }

    #[test]
    fn rejects_ragged_and_empty() {
        assert!(features_csv_string(&[]).is_err());
        assert!(features_csv_string(&[row("a", DefectKind::Ok, vec![1.0]), row("b", DefectKind::Ok, vec![1.0, 2.0])]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "id,label,x\na,OK,1\n").unwrap();
        assert!(read_features_csv(&path).is_err());
    }

    #[test]
    fn scores_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![
            ScoreRow { sample_id: "x".into(), label: DefectKind::Ok, decision: 0.25, score: -0.25, prediction: Prediction::Inlier },
            ScoreRow { sample_id: "y".into(), label: DefectKind::StrangeObject, decision: -1e-7, score: 1e-7, prediction: Prediction::Outlier },
        ];
        write_scores_csv(&rows, &path).unwrap();
        assert_eq!(read_scores_csv(&path).unwrap(), rows);
    }
}
