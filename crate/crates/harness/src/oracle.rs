use funnelselect::SelectionReport;

/// Reference answer: sort a copy and index it at the queried ranks.
pub fn oracle_multiselect<T: Ord + Copy>(s: &[T], ranks: &[usize]) -> SelectionReport<T> {
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    SelectionReport {
        entries: ranks.iter().map(|&r| (r, sorted[r - 1])).collect(),
    }
}
