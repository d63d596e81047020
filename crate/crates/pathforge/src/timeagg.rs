//! Aggregation of full hourly series into weighted typical periods.
//!
//! The year is partitioned into candidate periods of consecutive hours,
//! clustered with k-medoids on min-max-normalized stacked series. Medoids
//! preserve realizable hourly patterns; weights are cluster sizes. The
//! hour-to-(period, step) map is kept for later expansion back to 8760 hours.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::HOURS_PER_YEAR;
use crate::{Error, Result};

/// Aggregated representation of a set of hourly series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalPeriodSet {
    pub n_periods: usize,
    pub steps_per_period: usize,
    /// Hours represented by each typical period, as a count of candidate
    /// periods in its cluster.
    pub weights: Vec<u32>,
    /// series id -> period-major values: `values[id][p * steps_per_period + s]`.
    pub values: BTreeMap<String, Vec<f64>>,
    /// original hour -> (period, step); length 8760.
    pub hour_map: Vec<(u16, u16)>,
    pub seed: u64,
}

impl TypicalPeriodSet {
    pub fn value(&self, series: &str, period: usize, step: usize) -> f64 {
        self.values[series][period * self.steps_per_period + step]
    }

    pub fn try_value(&self, series: &str, period: usize, step: usize) -> Result<f64> {
        let vals = self
            .values
            .get(series)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown series '{series}'")))?;
        Ok(vals[period * self.steps_per_period + step])
    }

    pub fn n_steps(&self) -> usize {
        self.n_periods * self.steps_per_period
    }

    /// Iterates (period, step, weight-in-hours) in deterministic order.
    pub fn steps(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_periods).flat_map(move |p| {
            (0..self.steps_per_period).map(move |s| (p, s, self.weights[p] as f64))
        })
    }

    /// A trivial single-step set for constant-only models; every hour maps
    /// to the same step with weight 8760.
    pub fn single_step(seed: u64) -> Self {
        TypicalPeriodSet {
            n_periods: 1,
            steps_per_period: 1,
            weights: vec![HOURS_PER_YEAR as u32],
            values: BTreeMap::new(),
            hour_map: vec![(0, 0); HOURS_PER_YEAR],
            seed,
        }
    }
}

/// Clusters the year into `n_periods` typical periods of
/// `steps_per_period` consecutive hours each. Deterministic for fixed
/// inputs and seed: greedy medoid initialization and best-improvement swap
/// with index-order tie-breaking.
pub fn aggregate(
    series: &BTreeMap<String, Vec<f64>>,
    n_periods: usize,
    steps_per_period: usize,
    seed: u64,
) -> Result<TypicalPeriodSet> {
    if n_periods == 0 || steps_per_period == 0 {
        return Err(Error::InvalidArgument(
            "n_periods and steps_per_period must be at least 1".into(),
        ));
    }
    if n_periods * steps_per_period > HOURS_PER_YEAR {
        return Err(Error::InvalidArgument(format!(
            "{n_periods} periods x {steps_per_period} hours exceed the year"
        )));
    }
    for (id, vals) in series {
        if vals.len() != HOURS_PER_YEAR {
            return Err(Error::InvalidArgument(format!(
                "series '{id}' has {} values, expected {HOURS_PER_YEAR}",
                vals.len()
            )));
        }
    }

    let n_candidates = HOURS_PER_YEAR / steps_per_period;
    let k = n_periods.min(n_candidates);

    // Min-max normalize each series over the full year, then stack the
    // candidate windows into one vector per candidate.
    let ids: Vec<&String> = series.keys().collect();
    let dim = ids.len() * steps_per_period;
    let mut points = vec![0.0f64; n_candidates * dim];
    for (si, id) in ids.iter().enumerate() {
        let vals = &series[*id];
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        for c in 0..n_candidates {
            for s in 0..steps_per_period {
                let v = vals[c * steps_per_period + s];
                let norm = if range > 0.0 { (v - min) / range } else { 0.0 };
                points[c * dim + si * steps_per_period + s] = norm;
            }
        }
    }

    let dist = |a: usize, b: usize| -> f64 {
        let pa = &points[a * dim..(a + 1) * dim];
        let pb = &points[b * dim..(b + 1) * dim];
        pa.iter()
            .zip(pb)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };

    let (medoids, assignment) = if k == n_candidates {
        // Identity aggregation: every candidate is its own cluster.
        ((0..n_candidates).collect::<Vec<_>>(), (0..n_candidates).collect::<Vec<_>>())
    } else {
        k_medoids(n_candidates, k, &dist)
    };

    let mut weights = vec![0u32; medoids.len()];
    for &cluster in &assignment {
        weights[cluster] += 1;
    }

    let mut values = BTreeMap::new();
    for id in &ids {
        let vals = &series[*id];
        let mut typical = Vec::with_capacity(medoids.len() * steps_per_period);
        for &m in &medoids {
            typical.extend_from_slice(&vals[m * steps_per_period..(m + 1) * steps_per_period]);
        }
        values.insert((**id).clone(), typical);
    }

    let mut hour_map = vec![(0u16, 0u16); HOURS_PER_YEAR];
    for c in 0..n_candidates {
        for s in 0..steps_per_period {
            hour_map[c * steps_per_period + s] = (assignment[c] as u16, s as u16);
        }
    }
    // Trailing remainder hours (year not divisible by the period length) are
    // outside every candidate; map them to the nearest medoid on the
    // available prefix, ties to the lowest period index.
    let remainder_start = n_candidates * steps_per_period;
    for h in remainder_start..HOURS_PER_YEAR {
        let offset = h - remainder_start;
        let mut best = (f64::INFINITY, 0usize);
        for (mi, &m) in medoids.iter().enumerate() {
            let mut d = 0.0;
            for (si, id) in ids.iter().enumerate() {
                let vals = &series[*id];
                let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let range = max - min;
                let norm = |v: f64| if range > 0.0 { (v - min) / range } else { 0.0 };
                for s in 0..=offset {
                    let dv =
                        norm(vals[remainder_start + s]) - norm(vals[m * steps_per_period + s]);
                    d += dv * dv;
                }
                let _ = si;
            }
            if d < best.0 {
                best = (d, mi);
            }
        }
        hour_map[h] = (best.1 as u16, offset.min(steps_per_period - 1) as u16);
    }

    Ok(TypicalPeriodSet {
        n_periods: medoids.len(),
        steps_per_period,
        weights,
        values,
        hour_map,
        seed,
    })
}

/// Greedy PAM: BUILD picks medoids one by one minimizing total assignment
/// distance; SWAP applies best-improvement (medoid, candidate) exchanges
/// until none improves. All ties break on the lowest index.
fn k_medoids(
    n: usize,
    k: usize,
    dist: &dyn Fn(usize, usize) -> f64,
) -> (Vec<usize>, Vec<usize>) {
    // Cache the distance matrix when it fits comfortably.
    let cached: Option<Vec<f64>> = if n <= 4096 {
        let mut m = vec![0.0f64; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist(i, j);
                m[i * n + j] = d;
                m[j * n + i] = d;
            }
        }
        Some(m)
    } else {
        None
    };
    let d = |i: usize, j: usize| -> f64 {
        match &cached {
            Some(m) => m[i * n + j],
            None => dist(i, j),
        }
    };

    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    // nearest-medoid distance per point
    let mut nearest = vec![f64::INFINITY; n];

    // BUILD
    for _ in 0..k {
        let mut best = (f64::INFINITY, usize::MAX);
        for cand in 0..n {
            if medoids.contains(&cand) {
                continue;
            }
            let mut total = 0.0;
            for p in 0..n {
                total += nearest[p].min(d(p, cand));
            }
            if total < best.0 - 1e-15 {
                best = (total, cand);
            }
        }
        let chosen = best.1;
        medoids.push(chosen);
        for p in 0..n {
            nearest[p] = nearest[p].min(d(p, chosen));
        }
    }

    let objective = |medoids: &[usize]| -> f64 {
        (0..n)
            .map(|p| {
                medoids
                    .iter()
                    .map(|&m| d(p, m))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    };

    // SWAP
    let mut current = objective(&medoids);
    let max_swaps = 200;
    for _ in 0..max_swaps {
        let mut best: Option<(f64, usize, usize)> = None;
        for mi in 0..medoids.len() {
            for cand in 0..n {
                if medoids.contains(&cand) {
                    continue;
                }
                let saved = medoids[mi];
                medoids[mi] = cand;
                let obj = objective(&medoids);
                medoids[mi] = saved;
                if obj < current - 1e-12 {
                    let better = match &best {
                        None => true,
                        Some((b, _, _)) => obj < *b - 1e-15,
                    };
                    if better {
                        best = Some((obj, mi, cand));
                    }
                }
            }
        }
        match best {
            Some((obj, mi, cand)) => {
                medoids[mi] = cand;
                current = obj;
            }
            None => break,
        }
    }

    // Stable presentation: order clusters by medoid index.
    medoids.sort_unstable();
    let assignment: Vec<usize> = (0..n)
        .map(|p| {
            let mut best = (f64::INFINITY, 0usize);
            for (mi, &m) in medoids.iter().enumerate() {
                let dd = d(p, m);
                if dd < best.0 {
                    best = (dd, mi);
                }
            }
            best.1
        })
        .collect();
    (medoids, assignment)
}

/// Per-series RMS reconstruction error of the aggregation, normalized by the
/// series range; zero for identity aggregation and constant series.
pub fn reconstruction_error(
    original: &BTreeMap<String, Vec<f64>>,
    tps: &TypicalPeriodSet,
) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (id, vals) in original {
        let typical = match tps.values.get(id) {
            Some(t) => t,
            None => continue,
        };
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        if range <= 0.0 {
            out.insert(id.clone(), 0.0);
            continue;
        }
        let mut sq = 0.0;
        for (h, v) in vals.iter().enumerate() {
            let (p, s) = tps.hour_map[h];
            let t = typical[p as usize * tps.steps_per_period + s as usize];
            sq += (v - t) * (v - t);
        }
        out.insert(id.clone(), (sq / vals.len() as f64).sqrt() / range);
    }
    out
}

/// Annual sum of a series as represented by the aggregation:
/// sum of value x weight over all (period, step).
pub fn annual_total(tps: &TypicalPeriodSet, series: &str) -> Result<f64> {
    let vals = tps
        .values
        .get(series)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown series '{series}'")))?;
    let mut total = 0.0;
    for p in 0..tps.n_periods {
        let w = tps.weights[p] as f64;
        for s in 0..tps.steps_per_period {
            total += w * vals[p * tps.steps_per_period + s];
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_series(c: f64) -> BTreeMap<String, Vec<f64>> {
        BTreeMap::from([("flat".to_string(), vec![c; HOURS_PER_YEAR])])
    }

    /// 12h day / 12h night alternating series: exactly two distinct
    /// 24-hour patterns exist when offset by 12 hours; with 24-hour periods
    /// there is a single repeating pattern.
    fn alternating_series(lo: f64, hi: f64, block: usize) -> BTreeMap<String, Vec<f64>> {
        let vals: Vec<f64> = (0..HOURS_PER_YEAR)
            .map(|h| if (h / block) % 2 == 0 { hi } else { lo })
            .collect();
        BTreeMap::from([("alt".to_string(), vals)])
    }

    #[test]
    fn constant_series_aggregates_to_the_constant() {
        let series = constant_series(3.5);
        let tps = aggregate(&series, 4, 6, 0).unwrap();
        for v in &tps.values["flat"] {
            assert_eq!(*v, 3.5);
        }
        let total_weight: u32 = tps.weights.iter().sum();
        assert_eq!(total_weight as usize, HOURS_PER_YEAR / 6);
        assert!((annual_total(&tps, "flat").unwrap() - 3.5 * 8760.0).abs() < 1e-9);
        assert_eq!(reconstruction_error(&series, &tps)["flat"], 0.0);
    }

    #[test]
    fn two_distinct_patterns_are_recovered_exactly() {
        // 6-hour candidates, alternating 6-hour blocks of 1 and 9: every
        // candidate is either all-1 or all-9, so 2 clusters recover both
        // archetypes with zero reconstruction error.
        let series = alternating_series(1.0, 9.0, 6);
        let tps = aggregate(&series, 2, 6, 7).unwrap();
        assert_eq!(tps.n_periods, 2);
        let mut archetypes: Vec<Vec<f64>> = (0..2)
            .map(|p| (0..6).map(|s| tps.value("alt", p, s)).collect())
            .collect();
        archetypes.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(archetypes[0], vec![1.0; 6]);
        assert_eq!(archetypes[1], vec![9.0; 6]);
        let errs = reconstruction_error(&series, &tps);
        assert_eq!(errs["alt"], 0.0);
        // medoids are symmetric, so the annual total is exact
        let true_total: f64 = series["alt"].iter().sum();
        assert!((annual_total(&tps, "alt").unwrap() - true_total).abs() < 1e-9);
    }

    #[test]
    fn identity_aggregation_when_every_candidate_is_a_cluster() {
        let mut vals = vec![0.0; HOURS_PER_YEAR];
        for (h, v) in vals.iter_mut().enumerate() {
            *v = (h % 97) as f64 + (h / 1000) as f64;
        }
        let series = BTreeMap::from([("s".to_string(), vals.clone())]);
        let n_candidates = HOURS_PER_YEAR / 24;
        let tps = aggregate(&series, n_candidates, 24, 0).unwrap();
        assert_eq!(tps.n_periods, n_candidates);
        assert!(tps.weights.iter().all(|w| *w == 1));
        for (h, v) in vals.iter().enumerate() {
            let (p, s) = tps.hour_map[h];
            assert_eq!(tps.value("s", p as usize, s as usize), *v);
        }
        assert_eq!(reconstruction_error(&series, &tps)["s"], 0.0);
        let true_total: f64 = vals.iter().sum();
        assert!((annual_total(&tps, "s").unwrap() - true_total).abs() < 1e-6);
    }

    #[test]
    fn one_cluster_alternating_has_half_range_error() {
        // Two equally frequent levels collapsed to one medoid: half the
        // hours are off by the full range, so the range-normalized RMS is
        // sqrt(1/2).
        let series = alternating_series(0.0, 2.0, 6);
        let tps = aggregate(&series, 1, 6, 0).unwrap();
        let err = reconstruction_error(&series, &tps)["alt"];
        assert!((err - 0.5f64.sqrt()).abs() < 1e-9, "err = {err}");
    }

    #[test]
    fn series_length_mismatch_is_rejected() {
        let series = BTreeMap::from([("short".to_string(), vec![1.0; 100])]);
        assert!(aggregate(&series, 2, 6, 0).is_err());
    }

    #[test]
    fn deterministic_for_identical_inputs() {
        let mut vals = vec![0.0; HOURS_PER_YEAR];
        for (h, v) in vals.iter_mut().enumerate() {
            *v = ((h as f64 * 0.7).sin() * 10.0).round() + (h % 24) as f64;
        }
        let series = BTreeMap::from([("s".to_string(), vals)]);
        let a = aggregate(&series, 6, 6, 42).unwrap();
        let b = aggregate(&series, 6, 6, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weights_cover_the_year_within_one_period() {
        let series = constant_series(1.0);
        // 7-hour periods do not divide 8760 (8760 = 7*1251 + 3)
        let tps = aggregate(&series, 3, 7, 0).unwrap();
        let covered: usize = tps.weights.iter().map(|w| *w as usize * 7).sum();
        assert!(covered <= HOURS_PER_YEAR);
        assert!(covered >= HOURS_PER_YEAR - 7);
        // every hour still maps somewhere valid
        for (p, s) in &tps.hour_map {
            assert!((*p as usize) < tps.n_periods);
            assert!((*s as usize) < tps.steps_per_period);
        }
    }
}
