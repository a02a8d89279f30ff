//! Zero-crossing peak detection on derivative spectra.
//!
//! A positive-to-negative crossing of D(ṽ) marks a maximum of I(ṽ). Its
//! significance A(ṽ) is the sum of |D| over the samples lying strictly
//! between the neighbouring crossings on either side (of any direction).
//! Crossings without a neighbour on both sides sit in an incomplete region
//! at the spectrum edge and are dropped.
//!
//! Areas are plain sample sums, so they scale with grid resolution.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::spectrum::DerivativeSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PosToNeg,
    NegToPos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCrossing {
    /// Last sample at or before the crossing.
    pub index: usize,
    /// Linearly interpolated crossing position, cm⁻¹.
    pub position: f64,
    /// Interpolated signal value at the crossing; zero by construction.
    pub value: f64,
    pub direction: Direction,
    /// Fractional offset of the crossing past `index`, in samples.
    pub offset: f64,
    /// True when the crossing falls exactly on sample `index`.
    pub on_sample: bool,
}

impl ZeroCrossing {
    pub fn fractional_index(&self) -> f64 {
        self.index as f64 + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub position: f64,
    pub rounded_index: usize,
    pub area: f64,
}

/// Peaks ranked by area, largest first; equal areas by ascending position.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SigPeaks {
    pub records: Vec<PeakRecord>,
}

impl SigPeaks {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Sign changes of `values` sampled on `grid`, ordered by position.
///
/// Adjacent nonzero samples of opposite sign give an interpolated crossing.
/// A sample that is exactly zero between opposite-signed nonzero neighbours
/// gives one crossing on that sample. Runs of zeros give none.
pub fn zero_crossings(grid: &[f64], values: &[f64]) -> Vec<ZeroCrossing> {
    assert_eq!(grid.len(), values.len(), "grid and values differ in length");
    let n = values.len();
    let mut out = Vec::new();
    for i in 0..n.saturating_sub(1) {
        let (a, b) = (values[i], values[i + 1]);
        let (sa, sb) = (sign(a), sign(b));
        if sa != 0 && sb != 0 && sa != sb {
            let t = a / (a - b);
            out.push(ZeroCrossing {
                index: i,
                position: grid[i] + (grid[i + 1] - grid[i]) * t,
                value: 0.0,
                direction: if sa > 0 {
                    Direction::PosToNeg
                } else {
                    Direction::NegToPos
                },
                offset: t,
                on_sample: false,
            });
        } else if sa != 0 && sb == 0 && i + 2 < n {
            let sc = sign(values[i + 2]);
            if sc != 0 && sc != sa {
                out.push(ZeroCrossing {
                    index: i + 1,
                    position: grid[i + 1],
                    value: 0.0,
                    direction: if sa > 0 {
                        Direction::PosToNeg
                    } else {
                        Direction::NegToPos
                    },
                    offset: 0.0,
                    on_sample: true,
                });
            }
        }
    }
    out
}

pub fn find_zero_crossings(d: &DerivativeSpectrum) -> Vec<ZeroCrossing> {
    zero_crossings(d.grid().values(), d.values())
}

/// Sample range strictly between two crossings.
fn enclosed(prev: &ZeroCrossing, next: &ZeroCrossing) -> std::ops::Range<usize> {
    let start = prev.index + 1;
    let end = if next.on_sample {
        next.index
    } else {
        next.index + 1
    };
    start..end.max(start)
}

/// Areas around every bracketed crossing of the given direction, in
/// position order.
pub fn areas_for(
    values: &[f64],
    crossings: &[ZeroCrossing],
    direction: Direction,
) -> Vec<PeakRecord> {
    crossings
        .windows(3)
        .filter(|w| w[1].direction == direction)
        .map(|w| {
            let area = values[enclosed(&w[0], &w[2])].iter().map(|v| v.abs()).sum();
            PeakRecord {
                position: w[1].position,
                rounded_index: w[1].fractional_index().round() as usize,
                area,
            }
        })
        .collect()
}

/// A(ṽ) for each bracketed positive-to-negative crossing.
pub fn peak_areas(d: &DerivativeSpectrum, crossings: &[ZeroCrossing]) -> Vec<PeakRecord> {
    areas_for(d.values(), crossings, Direction::PosToNeg)
}

fn by_significance(a: &PeakRecord, b: &PeakRecord) -> Ordering {
    b.area
        .total_cmp(&a.area)
        .then_with(|| a.position.total_cmp(&b.position))
}

pub fn rank_peaks(mut records: Vec<PeakRecord>) -> SigPeaks {
    records.sort_by(by_significance);
    SigPeaks { records }
}

/// The first `min(k, len)` ranked peaks.
pub fn top_k(s: &SigPeaks, k: usize) -> Vec<PeakRecord> {
    s.records.iter().take(k).copied().collect()
}

/// Crossings, areas and ranking in one pass over raw arrays.
pub fn detect(grid: &[f64], values: &[f64]) -> SigPeaks {
    let crossings = zero_crossings(grid, values);
    rank_peaks(areas_for(values, &crossings, Direction::PosToNeg))
}

pub fn detect_spectrum(d: &DerivativeSpectrum) -> SigPeaks {
    detect(d.grid().values(), d.values())
}

/// Exhaustive re-implementation of [`detect`] used as an oracle.
///
/// Crossing events are gathered independently, sorted explicitly, and each
/// peak's area is found by scanning every sample and testing whether its
/// fractional index lies strictly inside the bracketing events.
pub mod reference {
    use super::{by_significance, PeakRecord, SigPeaks};

    #[derive(Debug, Clone, Copy)]
    struct Event {
        at: f64,
        position: f64,
        falling: bool,
    }

    fn events(grid: &[f64], values: &[f64]) -> Vec<Event> {
        let n = values.len();
        let s = |j: usize| (values[j] > 0.0) as i32 - (values[j] < 0.0) as i32;
        let mut ev = Vec::new();
        for j in 0..n {
            if j + 1 < n && s(j) * s(j + 1) == -1 {
                let t = values[j] / (values[j] - values[j + 1]);
                ev.push(Event {
                    at: j as f64 + t,
                    position: grid[j] + (grid[j + 1] - grid[j]) * t,
                    falling: s(j) == 1,
                });
            }
            if j >= 1 && j + 1 < n && s(j) == 0 && s(j - 1) * s(j + 1) == -1 {
                ev.push(Event {
                    at: j as f64,
                    position: grid[j],
                    falling: s(j - 1) == 1,
                });
            }
        }
        ev.sort_by(|a, b| a.at.total_cmp(&b.at));
        ev
    }

    pub fn detect(grid: &[f64], values: &[f64]) -> SigPeaks {
        let ev = events(grid, values);
        let mut records = Vec::new();
        for e in ev.iter().filter(|e| e.falling) {
            let before = ev
                .iter()
                .filter(|o| o.at < e.at)
                .map(|o| o.at)
                .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a))));
            let after = ev
                .iter()
                .filter(|o| o.at > e.at)
                .map(|o| o.at)
                .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))));
            let (Some(lo), Some(hi)) = (before, after) else {
                continue;
            };
            let mut area = 0.0;
            for (j, v) in values.iter().enumerate() {
                let x = j as f64;
                if x > lo && x < hi {
                    area += v.abs();
                }
            }
            records.push(PeakRecord {
                position: e.position,
                rounded_index: e.at.round() as usize,
                area,
            });
        }
        records.sort_by(by_significance);
        SigPeaks { records }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    #[test]
    fn no_crossings_in_single_signed_signal() {
        assert!(zero_crossings(&idx_grid(4), &[1.0, 2.0, 0.5, 3.0]).is_empty());
    }

    #[test]
    fn single_interpolated_crossing() {
        let c = zero_crossings(&[0.0, 1.0], &[1.0, -1.0]);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].position, 0.5);
        assert_eq!(c[0].direction, Direction::PosToNeg);
        assert_eq!(c[0].value, 0.0);
    }

    #[test]
    fn exact_zero_sample_rules() {
        let c = zero_crossings(&idx_grid(3), &[2.0, 0.0, -1.0]);
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].index, c[0].position, c[0].on_sample), (1, 1.0, true));

        assert!(zero_crossings(&idx_grid(3), &[2.0, 0.0, 1.0]).is_empty());
        assert!(zero_crossings(&idx_grid(4), &[2.0, 0.0, 0.0, -1.0]).is_empty());
        assert!(zero_crossings(&idx_grid(3), &[0.0, 1.0, 2.0]).is_empty());
    }

    #[test]
    fn sine_roots() {
        let h = 0.1;
        let n = (4.0 * std::f64::consts::PI / h).floor() as usize + 1;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let values: Vec<f64> = grid.iter().map(|t| t.sin()).collect();
        let c = zero_crossings(&grid, &values);
        assert_eq!(c.len(), 3);
        for (k, cross) in c.iter().enumerate() {
            let root = (k + 1) as f64 * std::f64::consts::PI;
            assert!(
                (cross.position - root).abs() < 5e-3,
                "{} vs {root}",
                cross.position
            );
        }
    }

    #[test]
    fn boundary_peak_is_discarded() {
        assert!(detect(&idx_grid(3), &[-1.0, 1.0, -1.0]).is_empty());
    }

    #[test]
    fn bracketed_peak_area() {
        let values = [-1.0, 2.0, -1.0, 1.0, -1.0];
        let peaks = detect(&idx_grid(5), &values);
        assert_eq!(peaks.len(), 1);
        let p = peaks.records[0];
        assert!((p.position - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(p.area, 3.0);
        assert_eq!(p.rounded_index, 2);
    }

    #[test]
    fn sine_periods_have_equal_areas() {
        let h = 2.0 * std::f64::consts::PI / 100.0;
        let grid: Vec<f64> = (0..203).map(|j| -0.1 + j as f64 * h).collect();
        let values: Vec<f64> = grid.iter().map(|t| t.sin()).collect();
        let peaks = detect(&grid, &values);
        assert_eq!(peaks.len(), 2);
        assert!((peaks.records[0].area - peaks.records[1].area).abs() < 1e-9);
    }

    #[test]
    fn ranking_rules() {
        assert!(rank_peaks(vec![]).is_empty());
        let rec = |position, area| PeakRecord {
            position,
            rounded_index: 0,
            area,
        };
        let r = rank_peaks(vec![rec(1.0, 1.0), rec(2.0, 3.0), rec(3.0, 2.0)]);
        let areas: Vec<f64> = r.records.iter().map(|p| p.area).collect();
        assert_eq!(areas, [3.0, 2.0, 1.0]);

        let r = rank_peaks(vec![rec(1521.0, 4.0), rec(742.0, 4.0)]);
        assert_eq!(r.records[0].position, 742.0);

        assert_eq!(top_k(&r, 5).len(), 2);
        assert_eq!(top_k(&r, 1)[0].position, 742.0);
    }

    #[test]
    fn negation_swaps_peaks_and_valleys() {
        let values = [0.3, -1.0, 2.0, -0.5, 1.5, -2.0, 0.7, -0.1];
        let grid = idx_grid(values.len());
        let neg: Vec<f64> = values.iter().map(|v| -v).collect();
        let valleys = areas_for(
            &values,
            &zero_crossings(&grid, &values),
            Direction::NegToPos,
        );
        let peaks_of_neg = areas_for(&neg, &zero_crossings(&grid, &neg), Direction::PosToNeg);
        assert_eq!(valleys, peaks_of_neg);
    }

    #[test]
    fn reference_agrees_on_fixed_cases() {
        let cases: [&[f64]; 4] = [
            &[-1.0, 2.0, -1.0, 1.0, -1.0],
            &[1.0, 0.0, -1.0, 0.0, 1.0, -3.0, 0.0, 0.0, 2.0, -1.0, 1.0],
            &[0.0, 0.0, 0.0],
            &[-0.5, 0.5, 0.0, -0.5, 0.25, -0.25, 1.0],
        ];
        for values in cases {
            let grid = idx_grid(values.len());
            assert_eq!(detect(&grid, values), reference::detect(&grid, values));
        }
    }
}
