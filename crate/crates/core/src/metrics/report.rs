use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metrics of one reconstructed image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub dataset: String,
    pub family: String,
    pub acceleration: f64,
    pub model: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub family: String,
    pub acceleration: f64,
    pub model: String,
    /// Mean over the finite per-image values; `+inf` if none were finite.
    pub psnr_db: f64,
    pub ssim: f64,
    pub n: usize,
    /// Images left out of the PSNR mean because they were reconstructed exactly.
    pub n_infinite: usize,
}

impl ReportRow {
    fn group(&self) -> (&str, &str, f64) {
        (&self.dataset, &self.family, self.acceleration)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<ReportRow>,
}

/// Sum of the values in sorted order, so the result does not depend on
/// the order results arrived in.
fn stable_mean(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Groups by (dataset, family, acceleration, model) in first-seen order.
pub fn aggregate_report(results: &[ImageResult]) -> Result<MetricReport> {
    if results.is_empty() {
        return Err(Error::Empty("no per-image results to aggregate".into()));
    }
    let mut keys: Vec<(&str, &str, f64, &str)> = Vec::new();
    for r in results {
        let k = (r.dataset.as_str(), r.family.as_str(), r.acceleration, r.model.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let rows = keys
        .into_iter()
        .map(|(dataset, family, acceleration, model)| {
            let members: Vec<&ImageResult> = results
                .iter()
                .filter(|r| r.dataset == dataset && r.family == family && r.acceleration == acceleration && r.model == model)
                .collect();
            let finite: Vec<f64> = members.iter().map(|r| r.psnr).filter(|p| p.is_finite()).collect();
            let n_infinite = members.len() - finite.len();
            ReportRow {
                dataset: dataset.into(),
                family: family.into(),
                acceleration,
                model: model.into(),
                psnr_db: if finite.is_empty() { f64::INFINITY } else { stable_mean(finite) },
                ssim: stable_mean(members.iter().map(|r| r.ssim).collect()),
                n: members.len(),
                n_infinite,
            }
        })
        .collect();
    Ok(MetricReport { rows })
}

fn fmt_psnr(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p:.2}")
    }
}

impl MetricReport {
    /// `dataset,family,acc,model,psnr_db,ssim,n`
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "family", "acc", "model", "psnr_db", "ssim", "n"])?;
        for r in &self.rows {
            let psnr = if r.psnr_db.is_infinite() { "inf".to_string() } else { format!("{:.4}", r.psnr_db) };
            w.write_record([
                r.dataset.clone(),
                r.family.clone(),
                r.acceleration.to_string(),
                r.model.clone(),
                psnr,
                format!("{:.6}", r.ssim),
                r.n.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// One row per model, one `PSNR [dB] | SSIM` column pair per
    /// (dataset, family, acceleration) group.
    pub fn to_markdown(&self) -> String {
        let mut groups: Vec<(&str, &str, f64)> = Vec::new();
        let mut models: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !groups.contains(&r.group()) {
                groups.push(r.group());
            }
            if !models.contains(&r.model.as_str()) {
                models.push(&r.model);
            }
        }
        let mut out = String::from("| Model |");
        for (d, f, a) in &groups {
            write!(out, " {d} {f} ACC={a}X PSNR [dB] | SSIM |").unwrap();
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|---:|".repeat(groups.len()));
        out.push('\n');

        let mut excluded = 0;
        for m in &models {
            write!(out, "| {m} |").unwrap();
            for g in &groups {
                match self.rows.iter().find(|r| r.model == *m && r.group() == *g) {
                    Some(r) => {
                        let mark = if r.n_infinite > 0 { "*" } else { "" };
                        excluded += r.n_infinite;
                        write!(out, " {}{mark} | {:.4} |", fmt_psnr(r.psnr_db), r.ssim).unwrap();
                    }
                    None => out.push_str(" - | - |"),
                }
            }
            out.push('\n');
        }
        if excluded > 0 {
            write!(
                out,
                "\n\\* {excluded} exactly reconstructed image(s) (infinite PSNR) excluded from the PSNR mean.\n"
            )
            .unwrap();
        }
        out
    }
}
