use serde::{Deserialize, Serialize};

use crate::ratio::Ratio;

/// Per-iteration bonuses of the three non-cutters; one row per core run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BonusTable<T = Ratio> {
    pub rows: Vec<Vec<T>>,
}

impl<T> BonusTable<T> {
    pub fn new(rows: Vec<Vec<T>>) -> BonusTable<T> {
        BonusTable { rows }
    }
}

/// Index of a row none of whose entries is the unique maximum of its column.
/// For non-negative entries no entry of that row exceeds the sum of the rest
/// of its column.
///
/// Every row holding the unique maximum of some column is eliminated; with
/// more rows than columns at least one row survives, and the smallest
/// surviving index is returned. Falls back to 0 if nothing survives, which
/// cannot happen for tables with more rows than columns.
pub fn select_compromise_iteration<T: Ord>(t: &BonusTable<T>) -> usize {
    let rows = &t.rows;
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut alive = vec![true; rows.len()];
    for c in 0..cols {
        let Some(best) = rows.iter().map(|r| &r[c]).max() else { continue };
        let holders: Vec<usize> = (0..rows.len()).filter(|&k| rows[k][c] == *best).collect();
        if holders.len() == 1 {
            alive[holders[0]] = false;
        }
    }
    alive.iter().position(|&x| x).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ops::Add;

    use num::Zero;

    use crate::ratio::r;

    /// Whether row `k` satisfies the column-sum condition.
    fn row_is_compromise<T>(t: &BonusTable<T>, k: usize) -> bool
    where
        T: Ord + Clone + Zero + Add<Output = T>,
    {
        let rows = &t.rows;
        (0..rows[k].len()).all(|c| {
            let rest = (0..rows.len())
                .filter(|&j| j != k)
                .fold(T::zero(), |acc, j| acc + rows[j][c].clone());
            rows[k][c] <= rest
        })
    }

    fn table(rows: &[[i64; 3]]) -> BonusTable {
        BonusTable::new(rows.iter().map(|row| row.iter().map(|&x| r(x, 1)).collect()).collect())
    }

    #[test]
    fn all_zero_picks_first_row() {
        assert_eq!(select_compromise_iteration(&table(&[[0, 0, 0]; 4])), 0);
    }

    #[test]
    fn eliminates_unique_maxima() {
        let t = table(&[[5, 1, 0], [1, 5, 0], [2, 2, 0], [0, 0, 9]]);
        assert_eq!(select_compromise_iteration(&t), 2);
        assert!(row_is_compromise(&t, 2));
    }

    #[test]
    fn identical_rows() {
        assert_eq!(select_compromise_iteration(&table(&[[1, 1, 1]; 4])), 0);
    }

    #[test]
    fn works_over_plain_integers() {
        let t = BonusTable::new(vec![vec![3u32, 0, 0], vec![0, 3, 0], vec![0, 0, 3], vec![1, 1, 1]]);
        assert_eq!(select_compromise_iteration(&t), 3);
    }
}
