//! Closest-timestamp pairing between streams.

/// Index into ascending `sorted` of the timestamp closest to `target`; ties go to the earlier one.
pub fn pair_closest(target: i64, sorted: &[i64]) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let i = sorted.partition_point(|&s| s < target);
    let value = match (i.checked_sub(1).map(|j| sorted[j]), sorted.get(i)) {
        (Some(b), Some(&a)) if target - b <= a - target => b,
        (Some(b), None) => b,
        (_, Some(&a)) => a,
        (None, None) => unreachable!(),
    };
    // First index holding the chosen value.
    Some(sorted.partition_point(|&s| s < value))
}
