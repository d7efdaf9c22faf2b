//! Scoring landmarks against reference placards.
//!
//! Placards hang on walls meeting at right angles, so a measured heading is
//! compared with the nearest of four wall directions a quarter turn apart,
//! derived from the dominant direction of a baseline set.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};
use std::fmt::Write as _;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::aggregation::{circular_mean, PlacardLandmark};
use crate::wrap_angle;

/// Half-width of the window used to find the dominant baseline direction.
pub const CLUSTER_WINDOW: f64 = FRAC_PI_8;

/// Ground-truth (or hand-surveyed) placard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencePlacard {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta_rad: f64,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalParams {
    pub max_match_dist: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            max_match_dist: 0.5,
        }
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.max_match_dist > 0.0) {
            return Err("evaluation.max_match_dist must be positive".into());
        }
        Ok(())
    }
}

/// Four wall directions `θ₀ + kπ/2` (wrapped), `θ₀` being the circular mean
/// of the largest window of baseline angles within ±π/8 of one of them.
pub fn wall_directions(baseline: &[f64]) -> [f64; 4] {
    assert!(!baseline.is_empty(), "baseline must not be empty");
    let mut best: Vec<f64> = Vec::new();
    for &b in baseline {
        let window: Vec<f64> = baseline
            .iter()
            .copied()
            .filter(|&a| wrap_angle(a - b).abs() <= CLUSTER_WINDOW)
            .collect();
        if window.len() > best.len() {
            best = window;
        }
    }
    let theta0 = circular_mean(&best);
    std::array::from_fn(|k| wrap_angle(theta0 + k as f64 * FRAC_PI_2))
}

/// Pairs every angle with its nearest wall direction; exact ties go to the
/// lower lattice index.
pub fn snap_theta(thetas: &[f64], baseline: &[f64]) -> Vec<(f64, f64)> {
    let lattice = wall_directions(baseline);
    thetas
        .iter()
        .map(|&t| {
            let mut star = lattice[0];
            let mut err = wrap_angle(t - star).abs();
            for &cand in &lattice[1..] {
                let e = wrap_angle(t - cand).abs();
                if e < err {
                    err = e;
                    star = cand;
                }
            }
            (t, star)
        })
        .collect()
}

/// Landmark-to-reference bookkeeping. Indices refer to the landmark and
/// reference lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Correspondence {
    pub matches: Vec<(usize, usize)>,
    pub duplicates: Vec<(usize, usize)>,
    pub false_positives: Vec<usize>,
    pub missed: Vec<usize>,
}

fn planar_dist(l: &PlacardLandmark, r: &ReferencePlacard) -> f64 {
    (l.x - r.x).hypot(l.y - r.y)
}

/// Greedy matching in landmark order. Each landmark picks the nearest
/// reference within `max_match_dist`, preferring references with the same
/// non-empty label. The first landmark to claim a reference is its match,
/// later ones are duplicates.
pub fn correspond(
    landmarks: &[PlacardLandmark],
    reference: &[ReferencePlacard],
    max_match_dist: f64,
) -> Correspondence {
    let mut out = Correspondence::default();
    let mut claimed = vec![false; reference.len()];
    for (li, l) in landmarks.iter().enumerate() {
        let mut best: Option<(bool, f64, usize)> = None;
        for (ri, r) in reference.iter().enumerate() {
            let d = planar_dist(l, r);
            if d > max_match_dist {
                continue;
            }
            let agree = !l.label.is_empty() && l.label == r.label;
            let better = match best {
                None => true,
                Some((ba, bd, _)) => (agree && !ba) || (agree == ba && d < bd),
            };
            if better {
                best = Some((agree, d, ri));
            }
        }
        match best {
            None => out.false_positives.push(li),
            Some((_, _, ri)) if claimed[ri] => out.duplicates.push((li, ri)),
            Some((_, _, ri)) => {
                claimed[ri] = true;
                out.matches.push((li, ri));
            }
        }
    }
    out.missed = (0..reference.len()).filter(|&i| !claimed[i]).collect();
    out
}

/// Reads a hand-made correspondence file: CSV rows
/// `landmark_id, reference_id` where `landmark_id` is the landmark's index
/// and `reference_id` the reference placard's `id`. A non-numeric first
/// row is taken as a header. Repeated references become duplicates.
pub fn correspondence_from_csv(
    text: &str,
    landmark_count: usize,
    reference: &[ReferencePlacard],
) -> anyhow::Result<Correspondence> {
    let mut out = Correspondence::default();
    let mut claimed = vec![false; reference.len()];
    let mut listed = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            bail!("line {}: expected two fields", n + 1);
        }
        let (Ok(li), Ok(rid)) = (fields[0].parse::<usize>(), fields[1].parse::<u32>()) else {
            if n == 0 {
                continue;
            }
            bail!("line {}: expected integer ids", n + 1);
        };
        if li >= landmark_count {
            bail!("line {}: landmark {li} does not exist", n + 1);
        }
        let ri = reference
            .iter()
            .position(|r| r.id == rid)
            .with_context(|| format!("line {}: reference {rid} does not exist", n + 1))?;
        if !listed.insert(li) {
            bail!("line {}: landmark {li} listed twice", n + 1);
        }
        if claimed[ri] {
            out.duplicates.push((li, ri));
        } else {
            claimed[ri] = true;
            out.matches.push((li, ri));
        }
    }
    out.false_positives = (0..landmark_count)
        .filter(|i| !listed.contains(i))
        .collect();
    out.missed = (0..reference.len()).filter(|&i| !claimed[i]).collect();
    Ok(out)
}

/// Per-match error row; `distance_from_origin` is the reference placard's
/// planar distance from the trajectory origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchRow {
    pub landmark: usize,
    pub reference_id: u32,
    pub distance_from_origin: f64,
    pub displacement_error: f64,
    pub theta_error_deg: f64,
    pub label_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub reference_count: usize,
    pub observed_count: usize,
    pub matched_count: usize,
    pub missed_count: usize,
    pub duplicate_count: usize,
    pub false_positive_count: usize,
    pub displacement_mean: f64,
    pub displacement_std: f64,
    pub theta_err_mean: f64,
    pub theta_err_std: f64,
    pub label_accuracy: f64,
    pub rows: Vec<MatchRow>,
}

/// Mean and population standard deviation; zeros for an empty slice.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fraction of matched landmarks whose label equals the reference label.
pub fn label_accuracy(
    landmarks: &[PlacardLandmark],
    reference: &[ReferencePlacard],
    corr: &Correspondence,
) -> f64 {
    if corr.matches.is_empty() {
        return 0.0;
    }
    let correct = corr
        .matches
        .iter()
        .filter(|&&(l, r)| landmarks[l].label == reference[r].label)
        .count();
    correct as f64 / corr.matches.len() as f64
}

/// Error statistics over matched pairs. `theta_star[i]` is the snapped
/// heading of landmark `i`.
pub fn compute_metrics(
    landmarks: &[PlacardLandmark],
    reference: &[ReferencePlacard],
    corr: &Correspondence,
    theta_star: &[f64],
    origin: [f64; 2],
) -> EvalReport {
    let rows: Vec<MatchRow> = corr
        .matches
        .iter()
        .map(|&(li, ri)| {
            let l = &landmarks[li];
            let r = &reference[ri];
            MatchRow {
                landmark: li,
                reference_id: r.id,
                distance_from_origin: (r.x - origin[0]).hypot(r.y - origin[1]),
                displacement_error: planar_dist(l, r),
                theta_error_deg: wrap_angle(l.theta_rad - theta_star[li]).abs().to_degrees(),
                label_correct: l.label == r.label,
            }
        })
        .collect();
    let disp: Vec<f64> = rows.iter().map(|r| r.displacement_error).collect();
    let theta: Vec<f64> = rows.iter().map(|r| r.theta_error_deg).collect();
    let (displacement_mean, displacement_std) = mean_std(&disp);
    let (theta_err_mean, theta_err_std) = mean_std(&theta);
    let report = EvalReport {
        reference_count: reference.len(),
        observed_count: landmarks.len(),
        matched_count: corr.matches.len(),
        missed_count: corr.missed.len(),
        duplicate_count: corr.duplicates.len(),
        false_positive_count: corr.false_positives.len(),
        displacement_mean,
        displacement_std,
        theta_err_mean,
        theta_err_std,
        label_accuracy: label_accuracy(landmarks, reference, corr),
        rows,
    };
    assert_eq!(
        report.observed_count,
        report.matched_count + report.duplicate_count + report.false_positive_count,
        "correspondence does not account for every landmark"
    );
    report
}

/// Snaps landmark headings against the reference headings and scores the
/// correspondence.
pub fn evaluate(
    landmarks: &[PlacardLandmark],
    reference: &[ReferencePlacard],
    corr: &Correspondence,
    origin: [f64; 2],
) -> EvalReport {
    let thetas: Vec<f64> = landmarks.iter().map(|l| l.theta_rad).collect();
    let theta_star: Vec<f64> = if reference.is_empty() {
        thetas.clone()
    } else {
        let baseline: Vec<f64> = reference.iter().map(|r| r.theta_rad).collect();
        snap_theta(&thetas, &baseline)
            .into_iter()
            .map(|(_, s)| s)
            .collect()
    };
    compute_metrics(landmarks, reference, corr, &theta_star, origin)
}

impl EvalReport {
    /// Plain-text summary table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let rows: [(&str, String); 11] = [
            ("Reference placards", self.reference_count.to_string()),
            ("Observed", self.observed_count.to_string()),
            ("Matched", self.matched_count.to_string()),
            ("Missed", self.missed_count.to_string()),
            ("Duplicates", self.duplicate_count.to_string()),
            ("False positives", self.false_positive_count.to_string()),
            (
                "Displacement mean (m)",
                format!("{:.4}", self.displacement_mean),
            ),
            (
                "Displacement std (m)",
                format!("{:.4}", self.displacement_std),
            ),
            (
                "Theta error mean (deg)",
                format!("{:.3}", self.theta_err_mean),
            ),
            (
                "Theta error std (deg)",
                format!("{:.3}", self.theta_err_std),
            ),
            ("Label accuracy", format!("{:.3}", self.label_accuracy)),
        ];
        for (name, value) in rows {
            let _ = writeln!(s, "{name:<24}{value:>10}");
        }
        s
    }

    /// Scatter rows as CSV: distance from origin against displacement.
    pub fn scatter_csv(&self) -> String {
        let mut s = String::from("distance_from_origin,displacement_error,theta_error_deg\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.6},{:.6},{:.6}",
                r.distance_from_origin, r.displacement_error, r.theta_error_deg
            );
        }
        s
    }
}

/// Spearman rank correlation (average ranks for ties). `None` when either
/// series is constant or shorter than two.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    if a.len() < 2 {
        return None;
    }
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, sa) = mean_std(&ra);
    let (mb, sb) = mean_std(&rb);
    if sa == 0.0 || sb == 0.0 {
        return None;
    }
    let cov = ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / ra.len() as f64;
    Some(cov / (sa * sb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn lm(x: f64, y: f64, theta: f64, label: &str) -> PlacardLandmark {
        PlacardLandmark {
            x,
            y,
            z: 1.0,
            theta_rad: theta,
            label: label.into(),
            support: 1,
            members: vec![],
        }
    }

    fn rf(id: u32, x: f64, y: f64, theta: f64, label: &str) -> ReferencePlacard {
        ReferencePlacard {
            id,
            x,
            y,
            z: 1.0,
            theta_rad: theta,
            label: label.into(),
        }
    }

    #[test]
    fn snap_with_zero_baseline() {
        let dirs = wall_directions(&[0.01, -0.01, 0.0]);
        let expect = [0.0, FRAC_PI_2, PI, -FRAC_PI_2];
        for (d, e) in dirs.iter().zip(expect) {
            assert!(wrap_angle(d - e).abs() < 1e-12, "{dirs:?}");
        }
        let s = snap_theta(&[0.05], &[0.0]);
        assert_eq!(s[0].1, 0.0);
    }

    #[test]
    fn snap_tie_goes_to_lower_index() {
        let s = snap_theta(&[FRAC_PI_4], &[0.0]);
        assert_eq!(s[0].1, 0.0);
    }

    #[test]
    fn snap_uses_largest_cluster() {
        // two headings near 0.2 rad outweigh one stray at 1.0
        let dirs = wall_directions(&[0.2, 0.21, 0.19, 1.0]);
        assert!((dirs[0] - 0.2).abs() < 1e-9);
    }

    #[test]
    fn identical_lists_match_fully() {
        let refs = vec![rf(0, 0.0, 0.0, 0.0, "3.112"), rf(1, 3.0, 0.0, PI, "MEN")];
        let lms = vec![lm(0.0, 0.0, 0.0, "3.112"), lm(3.0, 0.0, PI, "MEN")];
        let c = correspond(&lms, &refs, 0.5);
        assert_eq!(c.matches, vec![(0, 0), (1, 1)]);
        assert!(c.duplicates.is_empty() && c.false_positives.is_empty() && c.missed.is_empty());
        let r = evaluate(&lms, &refs, &c, [0.0, 0.0]);
        assert_eq!(
            (r.displacement_mean, r.theta_err_mean, r.label_accuracy),
            (0.0, 0.0, 1.0)
        );
    }

    #[test]
    fn duplicates_false_positives_and_misses() {
        let refs = vec![rf(0, 0.0, 0.0, 0.0, "3.112"), rf(1, 10.0, 0.0, 0.0, "")];
        let lms = vec![
            lm(0.1, 0.0, 0.0, ""),
            lm(-0.1, 0.0, 0.0, ""),
            lm(5.0, 5.0, 0.0, ""),
        ];
        let c = correspond(&lms, &refs, 0.5);
        assert_eq!(c.matches, vec![(0, 0)]);
        assert_eq!(c.duplicates, vec![(1, 0)]);
        assert_eq!(c.false_positives, vec![2]);
        assert_eq!(c.missed, vec![1]);
        let r = evaluate(&lms, &refs, &c, [0.0, 0.0]);
        assert_eq!(
            r.observed_count,
            r.matched_count + r.duplicate_count + r.false_positive_count
        );
    }

    #[test]
    fn label_agreement_preferred() {
        let refs = vec![rf(0, 0.0, 0.0, 0.0, "3.112"), rf(1, 0.3, 0.0, 0.0, "3.114")];
        let c = correspond(&[lm(0.1, 0.0, 0.0, "3.114")], &refs, 0.5);
        assert_eq!(c.matches, vec![(0, 1)]);
    }

    #[test]
    fn single_offset_match() {
        let refs = vec![rf(0, 0.0, 0.0, 0.0, "")];
        let lms = vec![lm(0.3, 0.0, 0.0, "")];
        let c = correspond(&lms, &refs, 0.5);
        let r = evaluate(&lms, &refs, &c, [0.0, 0.0]);
        assert!((r.displacement_mean - 0.3).abs() < 1e-12);
        assert_eq!(r.displacement_std, 0.0);
    }

    #[test]
    fn label_accuracy_fractions() {
        let refs: Vec<_> = (0..34)
            .map(|i| rf(i, i as f64, 0.0, 0.0, "3.112"))
            .collect();
        let lms: Vec<_> = (0..34)
            .map(|i| lm(i as f64, 0.0, 0.0, if i < 13 { "3.112" } else { "" }))
            .collect();
        let c = correspond(&lms, &refs, 0.4);
        assert!((label_accuracy(&lms, &refs, &c) - 13.0 / 34.0).abs() < 1e-12);
        let blank: Vec<_> = (0..34).map(|i| lm(i as f64, 0.0, 0.0, "")).collect();
        let c = correspond(&blank, &refs, 0.4);
        assert_eq!(label_accuracy(&blank, &refs, &c), 0.0);
    }

    #[test]
    fn csv_correspondence() {
        let refs = vec![rf(7, 0.0, 0.0, 0.0, ""), rf(9, 1.0, 0.0, 0.0, "")];
        let c =
            correspondence_from_csv("landmark_id, reference_id\n0, 7\n2, 7\n", 4, &refs).unwrap();
        assert_eq!(c.matches, vec![(0, 0)]);
        assert_eq!(c.duplicates, vec![(2, 0)]);
        assert_eq!(c.false_positives, vec![1, 3]);
        assert_eq!(c.missed, vec![1]);
        assert!(correspondence_from_csv("0, 8\n", 1, &refs).is_err());
        assert!(correspondence_from_csv("5, 7\n", 1, &refs).is_err());
    }

    #[test]
    fn spearman_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn text_report_lists_counts() {
        let refs = vec![rf(0, 0.0, 0.0, 0.0, "")];
        let lms = vec![lm(0.0, 0.0, 0.0, "")];
        let r = evaluate(&lms, &refs, &correspond(&lms, &refs, 0.5), [0.0, 0.0]);
        let t = r.to_text();
        assert!(t.contains("Observed") && t.contains("Duplicates"));
        assert_eq!(r.scatter_csv().lines().count(), 2);
    }

    proptest! {
        #[test]
        fn snap_rotates_with_quarter_turn(
            thetas in prop::collection::vec(-PI..PI, 1..20),
            baseline in prop::collection::vec(-PI..PI, 1..20),
        ) {
            let a = snap_theta(&thetas, &baseline);
            let shift = |v: &[f64]| v.iter().map(|t| wrap_angle(t + FRAC_PI_2)).collect::<Vec<_>>();
            let b = snap_theta(&shift(&thetas), &shift(&baseline));
            for ((t, s), (t2, s2)) in a.iter().zip(&b) {
                let e1 = wrap_angle(t - s).abs();
                let e2 = wrap_angle(t2 - s2).abs();
                prop_assert!((e1 - e2).abs() < 1e-9, "{e1} vs {e2}");
            }
        }

        #[test]
        fn metrics_invariant_under_reordering(
            pts in prop::collection::vec((0.0..20.0f64, 0.0..20.0f64, -0.2..0.2f64), 1..15),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let refs: Vec<_> = pts.iter().enumerate()
                .map(|(i, p)| rf(i as u32, p.0, p.1, 0.0, "")).collect();
            let lms: Vec<_> = pts.iter().map(|p| lm(p.0 + p.2, p.1, p.2, "")).collect();
            let mut order: Vec<usize> = (0..lms.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let c = Correspondence {
                matches: (0..lms.len()).map(|i| (i, i)).collect(),
                ..Default::default()
            };
            let shuffled = Correspondence {
                matches: order.iter().map(|&i| (i, i)).collect(),
                ..Default::default()
            };
            let a = evaluate(&lms, &refs, &c, [0.0, 0.0]);
            let b = evaluate(&lms, &refs, &shuffled, [0.0, 0.0]);
            prop_assert!((a.displacement_mean - b.displacement_mean).abs() < 1e-12);
            prop_assert!((a.displacement_std - b.displacement_std).abs() < 1e-12);
            prop_assert!((a.theta_err_mean - b.theta_err_mean).abs() < 1e-12);
            prop_assert!((a.theta_err_std - b.theta_err_std).abs() < 1e-12);
        }
    }
}
