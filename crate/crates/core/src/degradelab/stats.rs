use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::imagestack::Image;
use crate::lindecomp::{recompose, relative_error, svd, SvdFactors};
use crate::{Error, Result};

/// Relative gap `|σ_i − σ_{i±1}| / σ_1` below which the singular vectors of
/// order `i` are treated as ambiguous.
pub const REPEATED_SIGMA_GAP: f64 = 1e-6;

/// Margins with magnitude at or below this are reported as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Five-number summary of a singular-value spectrum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    /// Linear-interpolation quantiles (the common "type 7" definition).
    pub fn of(values: &[f64]) -> Quartiles {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            if v.is_empty() {
                return 0.0;
            }
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Quartiles {
            min: q(0.0),
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: q(1.0),
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.min, self.q1, self.median, self.q3, self.max]
    }

    pub fn from_array(a: [f64; 5]) -> Quartiles {
        Quartiles {
            min: a[0],
            q1: a[1],
            median: a[2],
            q3: a[3],
            max: a[4],
        }
    }

    fn mean(qs: &[Quartiles]) -> Quartiles {
        let mut acc = [0.0; 5];
        for q in qs {
            for (a, v) in acc.iter_mut().zip(q.as_array()) {
                *a += v;
            }
        }
        let n = qs.len().max(1) as f64;
        Quartiles::from_array(acc.map(|a| a / n))
    }
}

/// Recomposition analysis of one clean/degraded pair, averaged over channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationStats {
    /// Error of (clean vectors, degraded values) against the clean image.
    pub err_vec_swap: f64,
    /// Error of (degraded vectors, clean values) against the clean image.
    pub err_val_swap: f64,
    pub sv_quartiles_clean: Quartiles,
    pub sv_quartiles_degraded: Quartiles,
    /// `‖u_i^deg v_i^degᵀ − u_i^cle v_i^cleᵀ‖_F` per order; `None` where every
    /// channel had a near-repeated singular value at that order.
    pub order_diff: Vec<Option<f64>>,
}

impl DegradationStats {
    pub fn margin(&self) -> f64 {
        self.err_val_swap - self.err_vec_swap
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dominance {
    /// Removed by swapping in the clean singular vectors (rain, noise, blur).
    VectorDominated,
    /// Removed by swapping in the clean singular values (haze, low light).
    ValueDominated,
}

impl fmt::Display for Dominance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dominance::VectorDominated => "VectorDominated",
            Dominance::ValueDominated => "ValueDominated",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceLabel {
    pub label: Dominance,
    /// `err_val_swap − err_vec_swap`; positive means vector-dominated.
    pub margin: f64,
}

impl DominanceLabel {
    pub fn from_margin(margin: f64) -> Result<Self> {
        if !margin.is_finite() {
            return Err(Error::NonFinite("dominance margin"));
        }
        if margin.abs() <= TIE_TOLERANCE {
            return Err(Error::Ambiguous { margin });
        }
        let label = if margin > 0.0 {
            Dominance::VectorDominated
        } else {
            Dominance::ValueDominated
        };
        Ok(DominanceLabel { label, margin })
    }
}

struct ChannelStats {
    err_vec: f64,
    err_val: f64,
    q_clean: Quartiles,
    q_degraded: Quartiles,
    order_diff: Vec<Option<f64>>,
}

fn ambiguous_orders(sigma: &[f64]) -> Vec<bool> {
    let s1 = sigma.first().copied().unwrap_or(0.0);
    (0..sigma.len())
        .map(|i| {
            if s1 <= 0.0 {
                return true;
            }
            let near = |j: usize| (sigma[i] - sigma[j]).abs() / s1 < REPEATED_SIGMA_GAP;
            (i > 0 && near(i - 1)) || (i + 1 < sigma.len() && near(i + 1))
        })
        .collect()
}

/// `‖a bᵀ − c dᵀ‖_F` for unit vectors, `√(2 − 2 (a·c)(b·d))`.
fn rank_one_distance(fd: &SvdFactors, fc: &SvdFactors, i: usize) -> f64 {
    let uu = fd.u().column(i).dot(&fc.u().column(i));
    let vv = fd.v().column(i).dot(&fc.v().column(i));
    (2.0 - 2.0 * uu * vv).max(0.0).sqrt()
}

fn analyze_channel(clean: &DMatrix<f64>, degraded: &DMatrix<f64>) -> Result<ChannelStats> {
    let fc = svd(clean)?;
    let fd = svd(degraded)?;
    let err_vec = relative_error(&recompose(&fc, &fd)?, clean);
    let err_val = relative_error(&recompose(&fd, &fc)?, clean);
    let amb_c = ambiguous_orders(fc.sigma());
    let amb_d = ambiguous_orders(fd.sigma());
    let order_diff = (0..fc.rank_bound())
        .map(|i| (!amb_c[i] && !amb_d[i]).then(|| rank_one_distance(&fd, &fc, i)))
        .collect();
    Ok(ChannelStats {
        err_vec,
        err_val,
        q_clean: Quartiles::of(fc.sigma()),
        q_degraded: Quartiles::of(fd.sigma()),
        order_diff,
    })
}

/// Per-channel recomposition analysis, averaged over channels.
pub fn analyze_pair(clean: &Image, degraded: &Image) -> Result<DegradationStats> {
    if !clean.same_shape(degraded) {
        return Err(Error::ShapeMismatch(format!(
            "clean {:?} vs degraded {:?}",
            clean.shape(),
            degraded.shape()
        )));
    }
    let per_channel: Vec<ChannelStats> = (0..clean.channels())
        .map(|c| analyze_channel(&clean.plane(c), &degraded.plane(c)))
        .collect::<Result<_>>()?;
    let n = per_channel.len() as f64;
    let k = per_channel[0].order_diff.len();
    let order_diff = (0..k)
        .map(|i| {
            let vals: Vec<f64> = per_channel.iter().filter_map(|c| c.order_diff[i]).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    let qc: Vec<Quartiles> = per_channel.iter().map(|c| c.q_clean).collect();
    let qd: Vec<Quartiles> = per_channel.iter().map(|c| c.q_degraded).collect();
    Ok(DegradationStats {
        err_vec_swap: per_channel.iter().map(|c| c.err_vec).sum::<f64>() / n,
        err_val_swap: per_channel.iter().map(|c| c.err_val).sum::<f64>() / n,
        sv_quartiles_clean: Quartiles::mean(&qc),
        sv_quartiles_degraded: Quartiles::mean(&qd),
        order_diff,
    })
}

pub fn classify(clean: &Image, degraded: &Image) -> Result<DominanceLabel> {
    DominanceLabel::from_margin(analyze_pair(clean, degraded)?.margin())
}
