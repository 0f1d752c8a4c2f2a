//! Distribution distances over degree histograms and MSE-style graph
//! property comparisons.
//!
//! The four distances (Jensen-Shannon, Hellinger, Bhattacharyya,
//! Wasserstein-1) operate on probability vectors aligned to a shared
//! support. JS uses base-2 logarithms and is reported as the square-root
//! metric so both JS and Hellinger live in [0, 1]; Bhattacharyya may be
//! infinite on disjoint supports and serializes as the string "Inf".

use crate::error::MetricsError;
use crate::graph::{self, DegreeDistribution, DirectedGraph};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

/// Threshold for binarizing generated weights before structural metrics.
pub const BINARIZE_THRESHOLD: f64 = 0.5;

/// The four degree-distribution distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub js: f64,
    pub hellinger: f64,
    pub bhattacharyya: f64,
    pub wasserstein: f64,
}

impl Serialize for DistanceReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("DistanceReport", 4)?;
        s.serialize_field("js", &self.js)?;
        s.serialize_field("hellinger", &self.hellinger)?;
        if self.bhattacharyya.is_infinite() {
            s.serialize_field("bhattacharyya", "Inf")?;
        } else {
            s.serialize_field("bhattacharyya", &self.bhattacharyya)?;
        }
        s.serialize_field("wasserstein", &self.wasserstein)?;
        s.end()
    }
}

/// Pairwise mean squared errors of graph properties plus the pooled degree
/// Wasserstein distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyMseReport {
    pub density_mse: f64,
    pub average_degree_mse: f64,
    /// None when reciprocity was undefined (edgeless graph) on every pair.
    pub reciprocity_mse: Option<f64>,
    pub degree_wasserstein: f64,
    /// Pairs skipped because reciprocity was undefined on either side.
    pub reciprocity_excluded_pairs: usize,
}

/// Expands two distributions onto the sorted union of their supports.
pub fn align(p: &DegreeDistribution, q: &DegreeDistribution) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let mut support: Vec<usize> = p.support.iter().chain(q.support.iter()).copied().collect();
    support.sort_unstable();
    support.dedup();
    let fill = |d: &DegreeDistribution| -> Vec<f64> {
        let mut out = vec![0.0; support.len()];
        for (s, &prob) in d.support.iter().zip(&d.probabilities) {
            let idx = support.binary_search(s).expect("support contains every point");
            out[idx] = prob;
        }
        out
    };
    let pa = fill(p);
    let qa = fill(q);
    (support, pa, qa)
}

fn kl_base2(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &mi)| pi * (pi / mi).log2())
        .sum()
}

/// Square root of the base-2 Jensen-Shannon divergence; ranges over [0, 1].
pub fn js_distance(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let m: Vec<f64> = p.iter().zip(q).map(|(&a, &b)| 0.5 * (a + b)).collect();
    let jsd = 0.5 * kl_base2(p, &m) + 0.5 * kl_base2(q, &m);
    jsd.max(0.0).sqrt()
}

fn bhattacharyya_coefficient(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| (a * b).sqrt()).sum()
}

/// sqrt(1 - sum_i sqrt(p_i q_i)); ranges over [0, 1].
pub fn hellinger(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    (1.0 - bhattacharyya_coefficient(p, q)).max(0.0).sqrt()
}

/// -ln(sum_i sqrt(p_i q_i)); +infinity when the supports are disjoint.
pub fn bhattacharyya(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let bc = bhattacharyya_coefficient(p, q);
    if bc <= 0.0 {
        f64::INFINITY
    } else {
        -(bc.min(1.0)).ln()
    }
}

/// 1-D earth mover's distance over an integer support: the CDF gap summed
/// over the widths between consecutive support points.
pub fn wasserstein1(support: &[usize], p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(support.len(), p.len());
    debug_assert_eq!(support.len(), q.len());
    let mut cdf_p = 0.0;
    let mut cdf_q = 0.0;
    let mut total = 0.0;
    for t in 0..support.len().saturating_sub(1) {
        cdf_p += p[t];
        cdf_q += q[t];
        total += (cdf_p - cdf_q).abs() * (support[t + 1] - support[t]) as f64;
    }
    total
}

/// All four distances between two degree distributions.
pub fn distance_report(p: &DegreeDistribution, q: &DegreeDistribution) -> DistanceReport {
    let (support, pa, qa) = align(p, q);
    DistanceReport {
        js: js_distance(&pa, &qa),
        hellinger: hellinger(&pa, &qa),
        bhattacharyya: bhattacharyya(&pa, &qa),
        wasserstein: wasserstein1(&support, &pa, &qa),
    }
}

/// Total-degree histogram pooled over a collection, on the binarized view.
pub fn pooled_degree_histogram(graphs: &[DirectedGraph]) -> DegreeDistribution {
    let mut degrees = Vec::new();
    for g in graphs {
        let b = graph::binarize(g, BINARIZE_THRESHOLD).expect("nonnegative threshold");
        degrees.extend(graph::total_degrees(&b));
    }
    DegreeDistribution::from_degrees(&degrees)
}

/// Distances between the pooled degree distributions of two collections.
pub fn degree_distance_report(
    generated: &[DirectedGraph],
    real: &[DirectedGraph],
) -> Result<DistanceReport, MetricsError> {
    if generated.is_empty() || real.is_empty() {
        return Err(MetricsError::EmptyCollection);
    }
    Ok(distance_report(&pooled_degree_histogram(generated), &pooled_degree_histogram(real)))
}

/// Pairwise property MSEs between index-aligned collections, plus the
/// pooled degree Wasserstein distance.
pub fn property_mse_report(
    generated: &[DirectedGraph],
    real: &[DirectedGraph],
) -> Result<PropertyMseReport, MetricsError> {
    if generated.is_empty() || real.is_empty() {
        return Err(MetricsError::EmptyCollection);
    }
    if generated.len() != real.len() {
        return Err(MetricsError::LengthMismatch { left: generated.len(), right: real.len() });
    }
    let count = generated.len() as f64;
    let mut density_sq = 0.0;
    let mut avg_deg_sq = 0.0;
    let mut recip_sq = 0.0;
    let mut recip_pairs = 0usize;
    for (g, r) in generated.iter().zip(real) {
        let gb = graph::binarize(g, BINARIZE_THRESHOLD).expect("nonnegative threshold");
        let rb = graph::binarize(r, BINARIZE_THRESHOLD).expect("nonnegative threshold");
        let dg = graph::density(&gb).map_err(|_| MetricsError::EmptyCollection)?;
        let dr = graph::density(&rb).map_err(|_| MetricsError::EmptyCollection)?;
        density_sq += (dg - dr).powi(2);
        avg_deg_sq += (graph::average_degree(&gb) - graph::average_degree(&rb)).powi(2);
        if let (Ok(rg), Ok(rr)) = (graph::reciprocity(&gb), graph::reciprocity(&rb)) {
            recip_sq += (rg - rr).powi(2);
            recip_pairs += 1;
        }
    }
    let report = degree_distance_report(generated, real)?;
    Ok(PropertyMseReport {
        density_mse: density_sq / count,
        average_degree_mse: avg_deg_sq / count,
        reciprocity_mse: (recip_pairs > 0).then(|| recip_sq / recip_pairs as f64),
        degree_wasserstein: report.wasserstein,
        reciprocity_excluded_pairs: generated.len() - recip_pairs,
    })
}

/// Edge-increasing ratio (|E(y)| - |E(x)|) / |E(x)| on binarized graphs.
pub fn estimate_k(g_x: &DirectedGraph, g_y: &DirectedGraph) -> Result<f64, MetricsError> {
    let bx = graph::binarize(g_x, BINARIZE_THRESHOLD).expect("nonnegative threshold");
    let by = graph::binarize(g_y, BINARIZE_THRESHOLD).expect("nonnegative threshold");
    let ex = bx.edge_count();
    if ex == 0 {
        return Err(MetricsError::EdgelessInput);
    }
    Ok((by.edge_count() as f64 - ex as f64) / ex as f64)
}
