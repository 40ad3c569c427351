use crate::predictor::PairJudge;

/// Outcome of a fallible comparison `cmp(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    FirstBetter,
    SecondBetter,
    Incomparable,
}

/// Both query orders must agree; otherwise the pair is incomparable.
pub fn judge_relation(judge: &(impl PairJudge + ?Sized), a: usize, b: usize) -> Relation {
    let ab = judge.p_first(a, b) > 0.5;
    let ba = judge.p_first(b, a) > 0.5;
    match (ab, ba) {
        (true, false) => Relation::FirstBetter,
        (false, true) => Relation::SecondBetter,
        _ => Relation::Incomparable,
    }
}

/// Insertion sort, best first, with a comparator that may abstain.
///
/// Each new element scans the sorted prefix from its worst end. Beating an
/// element moves the insertion point in front of it; losing to one stops
/// the scan; an incomparable element is skipped. An element that is
/// incomparable to everything keeps the end position, so an always
/// abstaining comparator leaves the input order unchanged.
pub fn arch_graph_zero<T: Copy>(cands: &[T], mut cmp: impl FnMut(T, T) -> Relation) -> Vec<T> {
    let mut sorted: Vec<T> = Vec::with_capacity(cands.len());
    for &x in cands {
        let mut pos = sorted.len();
        for j in (0..sorted.len()).rev() {
            match cmp(x, sorted[j]) {
                Relation::FirstBetter => pos = j,
                Relation::SecondBetter => break,
                Relation::Incomparable => {}
            }
        }
        sorted.insert(pos, x);
    }
    sorted
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(a: i32, b: i32) -> Relation {
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => Relation::FirstBetter,
            std::cmp::Ordering::Less => Relation::SecondBetter,
            std::cmp::Ordering::Equal => Relation::Incomparable,
        }
    }

    #[test]
    fn perfect_comparator_sorts() {
        let input = [3, 9, 1, 4, 0, 8, 2, 7, 5, 6];
        assert_eq!(arch_graph_zero(&input, exact), vec![9, 8, 7, 6, 5, 4, 3, 2, 1, 0]);
    }

    #[test]
    fn abstaining_comparator_keeps_order() {
        let input = [3, 9, 1, 4];
        assert_eq!(arch_graph_zero(&input, |_, _| Relation::Incomparable), input.to_vec());
    }

    #[test]
    fn skips_incomparable_elements() {
        // 5 cannot be compared with 7 but beats 1, so it lands in front of 1 only.
        let cmp =
            |a: i32, b: i32| if (a, b) == (5, 7) || (a, b) == (7, 5) { Relation::Incomparable } else { exact(a, b) };
        assert_eq!(arch_graph_zero(&[7, 1, 5], cmp), vec![7, 5, 1]);
        assert_eq!(arch_graph_zero(&[1, 7, 5], cmp), vec![7, 5, 1]);
    }
}
