//! Nearest-neighbor descriptor matching with Lowe's ratio test.

use super::{Descriptor, MatchPair};

/// Matches `a` against `b`: nearest and second-nearest by L2, kept when
/// `nearest / second < ratio_thresh`, optionally cross-checked to mutual
/// nearest neighbors. Ties break deterministically toward the lower index.
pub fn match_descriptors(
    a: &[Descriptor],
    b: &[Descriptor],
    ratio_thresh: f64,
    cross_check: bool,
) -> Vec<MatchPair> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let nearest_in_b: Vec<(usize, f64, f64)> = a
        .iter()
        .map(|da| nearest_two(da, b))
        .collect();
    let nearest_in_a: Vec<usize> = if cross_check {
        b.iter().map(|db| nearest_two(db, a).0).collect()
    } else {
        Vec::new()
    };

    let mut out = Vec::new();
    for (ia, &(ib, d1_sq, d2_sq)) in nearest_in_b.iter().enumerate() {
        let d1 = d1_sq.sqrt();
        let d2 = d2_sq.sqrt();
        let ratio = if d2_sq.is_infinite() {
            // Single candidate: unambiguous by construction.
            0.0
        } else if d2 == 0.0 {
            1.0
        } else {
            d1 / d2
        };
        if ratio >= ratio_thresh {
            continue;
        }
        if cross_check && nearest_in_a[ib] != ia {
            continue;
        }
        out.push(MatchPair {
            index_a: ia,
            index_b: ib,
            distance: d1,
            ratio,
        });
    }
    out
}

/// Index of the nearest candidate plus the two smallest squared distances.
fn nearest_two(query: &Descriptor, candidates: &[Descriptor]) -> (usize, f64, f64) {
    let mut best = 0usize;
    let mut d1 = f64::INFINITY;
    let mut d2 = f64::INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let d = query.l2_distance_sq(c);
        if d < d1 {
            d2 = d1;
            d1 = d;
            best = i;
        } else if d < d2 {
            d2 = d;
        }
    }
    (best, d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DESCRIPTOR_LEN;

    fn unit(axis: usize) -> Descriptor {
        let mut v = [0.0f32; DESCRIPTOR_LEN];
        v[axis] = 1.0;
        Descriptor::from_values(v)
    }

    #[test]
    fn empty_candidates_give_empty_matches() {
        let a = vec![unit(0)];
        assert!(match_descriptors(&a, &[], 0.75, true).is_empty());
        assert!(match_descriptors(&[], &a, 0.75, true).is_empty());
    }

    #[test]
    fn injected_duplicate_matches_at_distance_zero() {
        // Disjoint orthonormal sets with one shared vector injected in both.
        let a = vec![unit(0), unit(5)];
        let b = vec![unit(1), unit(5)];
        let matches = match_descriptors(&a, &b, 0.75, true);
        assert_eq!(matches.len(), 1);
        let m = &matches[0];
        assert_eq!((m.index_a, m.index_b), (1, 1));
        assert_eq!(m.distance, 0.0);
        assert_eq!(m.ratio, 0.0);
    }

    #[test]
    fn ratio_test_rejects_ambiguous_pairs() {
        // Two identical candidates: nearest and second-nearest tie.
        let a = vec![unit(0)];
        let b = vec![unit(0), unit(0)];
        assert!(match_descriptors(&a, &b, 0.75, false).is_empty());
    }

    #[test]
    fn cross_check_requires_mutual_nearest() {
        let mut close_to_zero = [0.0f32; DESCRIPTOR_LEN];
        close_to_zero[0] = 0.9;
        close_to_zero[1] = (1.0f32 - 0.81).sqrt();
        // b[0] is nearest to both a-entries, but its own nearest is a[0].
        let a = vec![unit(0), Descriptor::from_values(close_to_zero)];
        let b = vec![unit(0), unit(7)];
        let matches = match_descriptors(&a, &b, 1.01, true);
        assert_eq!(matches.len(), 1);
        assert_eq!((matches[0].index_a, matches[0].index_b), (0, 0));
    }

    #[test]
    fn single_candidate_passes_ratio_test() {
        let a = vec![unit(3)];
        let b = vec![unit(3)];
        let matches = match_descriptors(&a, &b, 0.75, true);
        assert_eq!(matches.len(), 1);
        assert_eq!(matches[0].distance, 0.0);
    }

    #[test]
    fn matching_is_deterministic_with_ties() {
        let a = vec![unit(0)];
        // Two equally distant candidates; lower index wins, then the ratio
        // test rejects the ambiguous pair.
        let b = vec![unit(1), unit(2)];
        let m1 = match_descriptors(&a, &b, 1.01, false);
        let m2 = match_descriptors(&a, &b, 1.01, false);
        assert_eq!(m1, m2);
        if let Some(m) = m1.first() {
            assert_eq!(m.index_b, 0);
        }
    }
}
