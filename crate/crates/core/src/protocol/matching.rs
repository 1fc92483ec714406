use crate::ratio::Ratio;

/// Indices of the maximal entries of `values`.
pub(crate) fn argmax_set(values: &[Ratio]) -> Vec<usize> {
    let Some(best) = values.iter().max() else { return Vec::new() };
    (0..values.len()).filter(|&q| values[q] == *best).collect()
}

/// Assigns each agent (row) a distinct most preferred piece (column), if
/// possible. Among all such assignments the lexicographically smallest one,
/// read in agent order, is returned.
pub fn top_piece_matching(prefs: &[Vec<Ratio>]) -> Option<Vec<usize>> {
    let sets: Vec<Vec<usize>> = prefs.iter().map(|v| argmax_set(v)).collect();
    let mut chosen = Vec::with_capacity(sets.len());
    if search(&sets, &mut chosen) {
        Some(chosen)
    } else {
        None
    }
}

fn search(sets: &[Vec<usize>], chosen: &mut Vec<usize>) -> bool {
    let a = chosen.len();
    if a == sets.len() {
        return true;
    }
    for &q in &sets[a] {
        if chosen.contains(&q) {
            continue;
        }
        chosen.push(q);
        if search(sets, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Pieces ordered from most to least preferred; ties go to the lower index.
pub(crate) fn ranking(values: &[Ratio]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[y].cmp(&values[x]).then(x.cmp(&y)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::r;

    fn row(xs: &[i64]) -> Vec<Ratio> {
        xs.iter().map(|&x| r(x, 1)).collect()
    }

    // every assignment of one piece per agent, checked directly
    fn oracle(prefs: &[Vec<Ratio>]) -> Option<Vec<usize>> {
        let m = prefs[0].len();
        let n = prefs.len();
        let total = m.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut pick = vec![0; n];
            for a in (0..n).rev() {
                pick[a] = c % m;
                c /= m;
            }
            let distinct = (0..n).all(|a| (0..a).all(|b| pick[a] != pick[b]));
            let tops = (0..n).all(|a| prefs[a].iter().all(|v| *v <= prefs[a][pick[a]]));
            if distinct && tops {
                return Some(pick);
            }
        }
        None
    }

    #[test]
    fn all_equal_gives_identity() {
        let p = vec![row(&[1, 1, 1, 1]); 3];
        assert_eq!(top_piece_matching(&p), Some(vec![0, 1, 2]));
    }

    #[test]
    fn common_unique_favourite_has_no_matching() {
        let p = vec![row(&[0, 5, 1, 1]); 3];
        assert_eq!(top_piece_matching(&p), None);
    }

    #[test]
    fn mixed_argmax_sets() {
        let p = vec![row(&[3, 3, 1, 0]), row(&[1, 3, 1, 0]), row(&[0, 2, 2, 1])];
        assert_eq!(top_piece_matching(&p), Some(vec![0, 1, 2]));
        assert_eq!(top_piece_matching(&p), oracle(&p));
    }

    #[test]
    fn matches_exhaustive_oracle_on_small_profiles() {
        // values in {0,1,2} for 3 agents over 4 pieces, sampled on a lattice
        let mut count = 0;
        for code in (0u32..3u32.pow(12)).step_by(37) {
            let mut c = code;
            let p: Vec<Vec<Ratio>> = (0..3)
                .map(|_| {
                    (0..4)
                        .map(|_| {
                            let v = c % 3;
                            c /= 3;
                            r(v as i64, 1)
                        })
                        .collect()
                })
                .collect();
            assert_eq!(top_piece_matching(&p), oracle(&p));
            count += 1;
        }
        assert!(count > 1000);
    }

    #[test]
    fn ranking_breaks_ties_low() {
        assert_eq!(ranking(&row(&[2, 5, 5, 1])), vec![1, 2, 0, 3]);
    }
}
