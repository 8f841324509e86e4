use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{analyze_pair, DegradationStats, Dominance, Quartiles, TIE_TOLERANCE};
use crate::imagestack::Image;
use crate::{Error, Result};

/// A clean/degraded pair tagged with its task name.
#[derive(Clone, Debug)]
pub struct TaggedPair {
    pub task: String,
    pub clean: Image,
    pub degraded: Image,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single observation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len();
        if n == 0 {
            return MeanStd::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub task: String,
    pub index: usize,
    pub stats: DegradationStats,
    pub margin: f64,
    /// `None` when the margin is within the tie tolerance.
    pub label: Option<Dominance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: String,
    pub count: usize,
    pub err_vec_swap: MeanStd,
    pub err_val_swap: MeanStd,
    pub margin: MeanStd,
    pub sv_quartiles_clean: Quartiles,
    pub sv_quartiles_degraded: Quartiles,
    /// Mean over images of the per-order vector difference; `None` where no
    /// image contributed a value.
    pub order_diff: Vec<Option<f64>>,
    pub vector_votes: usize,
    pub value_votes: usize,
    pub ties: usize,
    pub majority: Option<Dominance>,
    /// Fraction of images whose label equals the majority.
    pub agreement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub tasks: Vec<TaskSummary>,
    pub images: Vec<ImageRecord>,
}

fn mean_quartiles(qs: impl Iterator<Item = Quartiles>) -> Quartiles {
    let mut acc = [0.0; 5];
    let mut n = 0usize;
    for q in qs {
        for (a, v) in acc.iter_mut().zip(q.as_array()) {
            *a += v;
        }
        n += 1;
    }
    Quartiles::from_array(acc.map(|a| a / n.max(1) as f64))
}

fn summarize(task: &str, recs: &[&ImageRecord]) -> TaskSummary {
    let col = |f: fn(&ImageRecord) -> f64| recs.iter().map(|r| f(r)).collect::<Vec<_>>();
    let vector_votes = recs
        .iter()
        .filter(|r| r.label == Some(Dominance::VectorDominated))
        .count();
    let value_votes = recs
        .iter()
        .filter(|r| r.label == Some(Dominance::ValueDominated))
        .count();
    let margin = MeanStd::of(&col(|r| r.margin));
    let majority = match vector_votes.cmp(&value_votes) {
        std::cmp::Ordering::Greater => Some(Dominance::VectorDominated),
        std::cmp::Ordering::Less => Some(Dominance::ValueDominated),
        std::cmp::Ordering::Equal if margin.mean > TIE_TOLERANCE => Some(Dominance::VectorDominated),
        std::cmp::Ordering::Equal if margin.mean < -TIE_TOLERANCE => Some(Dominance::ValueDominated),
        std::cmp::Ordering::Equal => None,
    };
    let agreeing = recs
        .iter()
        .filter(|r| majority.is_some() && r.label == majority)
        .count();
    let k = recs.iter().map(|r| r.stats.order_diff.len()).max().unwrap_or(0);
    let order_diff = (0..k)
        .map(|i| {
            let vals: Vec<f64> = recs
                .iter()
                .filter_map(|r| r.stats.order_diff.get(i).copied().flatten())
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    TaskSummary {
        task: task.to_string(),
        count: recs.len(),
        err_vec_swap: MeanStd::of(&col(|r| r.stats.err_vec_swap)),
        err_val_swap: MeanStd::of(&col(|r| r.stats.err_val_swap)),
        margin,
        sv_quartiles_clean: mean_quartiles(recs.iter().map(|r| r.stats.sv_quartiles_clean)),
        sv_quartiles_degraded: mean_quartiles(recs.iter().map(|r| r.stats.sv_quartiles_degraded)),
        order_diff,
        vector_votes,
        value_votes,
        ties: recs.len() - vector_votes - value_votes,
        majority,
        agreement: agreeing as f64 / recs.len().max(1) as f64,
    }
}

/// Analyze every pair (in parallel, results kept in input order) and
/// summarize per task. Tasks appear in order of first occurrence.
pub fn corpus_report(pairs: &[TaggedPair]) -> Result<CorpusReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let stats: Vec<DegradationStats> = pairs
        .par_iter()
        .map(|p| analyze_pair(&p.clean, &p.degraded))
        .collect::<Result<_>>()?;
    let mut order: Vec<String> = Vec::new();
    let mut counters: Vec<usize> = Vec::new();
    let mut images = Vec::with_capacity(pairs.len());
    for (p, s) in pairs.iter().zip(stats) {
        let slot = match order.iter().position(|t| *t == p.task) {
            Some(i) => i,
            None => {
                order.push(p.task.clone());
                counters.push(0);
                order.len() - 1
            }
        };
        let margin = s.margin();
        let label = (margin.abs() > TIE_TOLERANCE).then_some({
            if margin > 0.0 {
                Dominance::VectorDominated
            } else {
                Dominance::ValueDominated
            }
        });
        images.push(ImageRecord {
            task: p.task.clone(),
            index: counters[slot],
            stats: s,
            margin,
            label,
        });
        counters[slot] += 1;
    }
    let tasks = order
        .iter()
        .map(|t| {
            let recs: Vec<&ImageRecord> = images.iter().filter(|r| r.task == *t).collect();
            summarize(t, &recs)
        })
        .collect();
    Ok(CorpusReport { tasks, images })
}

fn fmt_label(l: Option<Dominance>) -> String {
    l.map(|d| d.to_string()).unwrap_or_else(|| "Tie".into())
}

impl CorpusReport {
    pub fn task(&self, name: &str) -> Option<&TaskSummary> {
        self.tasks.iter().find(|t| t.task == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per task.
    pub fn write_task_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record([
            "task",
            "count",
            "err_vec_swap_mean",
            "err_vec_swap_std",
            "err_val_swap_mean",
            "err_val_swap_std",
            "margin_mean",
            "margin_std",
            "clean_min",
            "clean_q1",
            "clean_median",
            "clean_q3",
            "clean_max",
            "degraded_min",
            "degraded_q1",
            "degraded_median",
            "degraded_q3",
            "degraded_max",
            "vector_votes",
            "value_votes",
            "ties",
            "majority",
            "agreement",
        ])?;
        for t in &self.tasks {
            let mut row = vec![
                t.task.clone(),
                t.count.to_string(),
                t.err_vec_swap.mean.to_string(),
                t.err_vec_swap.std.to_string(),
                t.err_val_swap.mean.to_string(),
                t.err_val_swap.std.to_string(),
                t.margin.mean.to_string(),
                t.margin.std.to_string(),
            ];
            row.extend(t.sv_quartiles_clean.as_array().iter().map(f64::to_string));
            row.extend(t.sv_quartiles_degraded.as_array().iter().map(f64::to_string));
            row.extend([
                t.vector_votes.to_string(),
                t.value_votes.to_string(),
                t.ties.to_string(),
                fmt_label(t.majority),
                t.agreement.to_string(),
            ]);
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// One row per image.
    pub fn write_image_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["task", "index", "err_vec_swap", "err_val_swap", "margin", "label"])?;
        for r in &self.images {
            wr.write_record([
                r.task.clone(),
                r.index.to_string(),
                r.stats.err_vec_swap.to_string(),
                r.stats.err_val_swap.to_string(),
                r.margin.to_string(),
                fmt_label(r.label),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Box plot of the mean singular-value quartiles, clean and degraded side
    /// by side for each task, on a log axis.
    pub fn boxplot_svg(&self) -> String {
        let (w, h, pad) = (120.0 * self.tasks.len().max(1) as f64 + 80.0, 360.0, 40.0);
        let all: Vec<f64> = self
            .tasks
            .iter()
            .flat_map(|t| {
                t.sv_quartiles_clean
                    .as_array()
                    .into_iter()
                    .chain(t.sv_quartiles_degraded.as_array())
            })
            .map(|v| v.max(1e-6))
            .collect();
        let lo = all.iter().cloned().fold(f64::INFINITY, f64::min).log10().floor();
        let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max).log10().ceil();
        let span = (hi - lo).max(1.0);
        let y = |v: f64| h - pad - (v.max(1e-6).log10() - lo) / span * (h - 2.0 * pad);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        for e in (lo as i32)..=(hi as i32) {
            let yy = y(10f64.powi(e));
            let _ = writeln!(
                s,
                r##"<line x1="{pad}" x2="{}" y1="{yy:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="4" y="{:.1}">1e{e}</text>"##,
                w - 10.0,
                yy + 4.0
            );
        }
        for (i, t) in self.tasks.iter().enumerate() {
            let x0 = 60.0 + 120.0 * i as f64;
            for (j, (q, color)) in [(t.sv_quartiles_clean, "#4c72b0"), (t.sv_quartiles_degraded, "#dd8452")]
                .into_iter()
                .enumerate()
            {
                let x = x0 + 45.0 * j as f64;
                let cx = x + 15.0;
                let _ = writeln!(
                    s,
                    r#"<line x1="{cx}" x2="{cx}" y1="{:.1}" y2="{:.1}" stroke="{color}"/>"#,
                    y(q.max),
                    y(q.min)
                );
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{:.1}" width="30" height="{:.1}" fill="{color}" fill-opacity="0.4" stroke="{color}"/>"#,
                    y(q.q3),
                    (y(q.q1) - y(q.q3)).max(0.5)
                );
                let _ = writeln!(
                    s,
                    r#"<line x1="{x}" x2="{}" y1="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/>"#,
                    x + 30.0,
                    y(q.median),
                    y(q.median)
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{x0}" y="{:.1}">{}</text>"#,
                h - 12.0,
                xml_escape(&t.task)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
