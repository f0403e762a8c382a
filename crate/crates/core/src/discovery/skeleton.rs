use std::collections::BTreeSet;

use itertools::Itertools;

use super::SepsetTable;
use crate::citests::CiTester;
use crate::error::Result;

/// Undirected adjacency left after the level-wise search, plus sepsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub adj: Vec<BTreeSet<usize>>,
    pub sepsets: SepsetTable,
}

impl Skeleton {
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains(&j)
    }

    pub fn edges(&self) -> BTreeSet<(usize, usize)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }
}

/// Order-independent level-wise skeleton search. Within a level every pair
/// draws conditioning sets from the adjacency frozen at the start of that level.
pub fn skeleton(d: usize, n: usize, tester: &CiTester) -> Result<Skeleton> {
    let mut adj: Vec<BTreeSet<usize>> = (0..d).map(|i| (0..d).filter(|&j| j != i).collect()).collect();
    let mut sepsets = SepsetTable::default();
    let mut level = 0usize;
    while level + 3 < n {
        let frozen = adj.clone();
        let mut any_testable = false;
        for i in 0..d {
            for &j in frozen[i].iter().filter(|&&j| j > i) {
                if !adj[i].contains(&j) {
                    continue;
                }
                let mut separated = None;
                for (a, b) in [(i, j), (j, i)] {
                    let pool: Vec<usize> = frozen[a].iter().copied().filter(|&k| k != b).collect();
                    if pool.len() < level {
                        continue;
                    }
                    any_testable = true;
                    for s in pool.into_iter().combinations(level) {
                        if tester.test(i, j, &s)?.independent {
                            separated = Some(s);
                            break;
                        }
                    }
                    if separated.is_some() {
                        break;
                    }
                }
                if let Some(s) = separated {
                    adj[i].remove(&j);
                    adj[j].remove(&i);
                    sepsets.insert(i, j, s);
                }
            }
        }
        if !any_testable {
            break;
        }
        level += 1;
    }
    Ok(Skeleton { adj, sepsets })
}
