//! Complete-linkage agglomerative clustering of series, using the pairwise
//! multiscale maxima as distances, and estimation of the number of groups.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiscale::{minimal_intervals, PairMaxima, TestReport};
use crate::panel::LocationScalePoint;

/// Partitions with at most this many groups on both sides are matched by
/// brute-force enumeration in [`classification_errors`].
pub const ENUMERATION_LIMIT: usize = 8;

/// One agglomeration step. Leaves are `0..n`; the cluster created by merge
/// `r` (0-based) gets id `n + r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub new_id: usize,
}

/// Full merge history of the agglomerative algorithm (`n - 1` merges).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTree {
    pub n: usize,
    pub merges: Vec<Merge>,
}

/// A partition of `0..n` in canonical form: members sorted within groups,
/// groups ordered by smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition(Vec<Vec<usize>>);

impl Partition {
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut groups: Vec<Vec<usize>> = groups.into_iter().filter(|g| !g.is_empty()).collect();
        groups.iter_mut().for_each(|g| g.sort_unstable());
        groups.sort_by_key(|g| g[0]);
        let mut all: Vec<usize> = groups.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.iter().enumerate().any(|(k, &v)| k != v) {
            return Err(Error::Config("groups do not partition 0..n".into()));
        }
        Ok(Self(groups))
    }

    /// Consecutive blocks of the given sizes: `[0..s0), [s0..s0+s1), ...`.
    pub fn blocks(sizes: &[usize]) -> Self {
        let mut start = 0;
        let groups = sizes
            .iter()
            .map(|&s| {
                let g: Vec<usize> = (start..start + s).collect();
                start += s;
                g
            })
            .collect();
        Self(groups)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of elements partitioned.
    pub fn n(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    /// Group index of every element.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n()];
        for (l, g) in self.0.iter().enumerate() {
            for &i in g {
                labels[i] = l;
            }
        }
        labels
    }
}

/// Complete-linkage dissimilarity: the largest `psi_max(i, j)` over `i` in `s`,
/// `j` in `t`, `i != j`. Passing the same set twice gives its internal
/// dissimilarity; a singleton has none and yields `-inf`.
pub fn dissimilarity(s: &[usize], t: &[usize], table: &PairMaxima) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for &i in s {
        for &j in t {
            if i != j {
                best = best.max(table.get(i, j));
            }
        }
    }
    best
}

/// Runs the agglomerative algorithm to completion. Among equally close
/// cluster pairs, the one with the lexicographically smallest
/// `(smaller id, larger id)` is merged.
pub fn hac_tree(table: &PairMaxima) -> Result<ClusterTree> {
    let n = table.n();
    if n < 2 {
        return Err(Error::TooFewSeries(n));
    }
    let total = 2 * n - 1;
    // Complete linkage satisfies d(a+b, c) = max(d(a, c), d(b, c)).
    let mut dist = vec![f64::NAN; total * total];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                dist[i * total + j] = table.get(i, j);
            }
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for (ka, &a) in active.iter().enumerate() {
            for &b in &active[ka + 1..] {
                let d = dist[a * total + b];
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (height, left, right) = best.expect("at least two active clusters");
        let new_id = n + step;
        active.retain(|&c| c != left && c != right);
        for &c in &active {
            let d = dist[left * total + c].max(dist[right * total + c]);
            dist[new_id * total + c] = d;
            dist[c * total + new_id] = d;
        }
        active.push(new_id);
        merges.push(Merge {
            left,
            right,
            height,
            new_id,
        });
    }
    Ok(ClusterTree { n, merges })
}

/// The partition into `r` clusters obtained after the first `n - r` merges.
pub fn partition_at(tree: &ClusterTree, r: usize) -> Result<Partition> {
    let n = tree.n;
    if r < 1 || r > n {
        return Err(Error::Range {
            what: "number of clusters",
            value: r,
            range: format!("1..={n}"),
        });
    }
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    members.resize(2 * n - 1, None);
    for m in &tree.merges[..n - r] {
        let mut joined = members[m.left].take().expect("left cluster alive");
        joined.extend(members[m.right].take().expect("right cluster alive"));
        members[m.new_id] = Some(joined);
    }
    Partition::new(members.into_iter().flatten().collect())
}

/// Smallest `r` such that every cluster of the `r`-partition has internal
/// dissimilarity at most `q`.
pub fn estimate_num_groups(tree: &ClusterTree, table: &PairMaxima, q: f64) -> usize {
    for r in 1..=tree.n {
        let partition = partition_at(tree, r).expect("r in range");
        let worst = partition
            .groups()
            .iter()
            .map(|g| dissimilarity(g, g, table))
            .fold(f64::NEG_INFINITY, f64::max);
        if worst <= q {
            return r;
        }
    }
    tree.n
}

/// Union of the pairwise rejection sets between every two groups
/// `l < l'`, deduplicated and ordered by scale then location. With `minimal`
/// the union is reduced to its minimal intervals.
pub fn group_difference_intervals(
    partition: &Partition,
    report: &TestReport,
    minimal: bool,
) -> BTreeMap<(usize, usize), Vec<LocationScalePoint>> {
    let groups = partition.groups();
    let mut out = BTreeMap::new();
    for l in 0..groups.len() {
        for m in l + 1..groups.len() {
            let mut union: Vec<LocationScalePoint> = Vec::new();
            for &i in &groups[l] {
                for &j in &groups[m] {
                    union.extend_from_slice(&report.pair(i, j).rejected);
                }
            }
            union.sort_by(|a, b| a.h().total_cmp(&b.h()).then(a.u().total_cmp(&b.u())));
            union.dedup_by(|a, b| a.u().to_bits() == b.u().to_bits() && a.h().to_bits() == b.h().to_bits());
            if minimal {
                union = minimal_intervals(&union);
            }
            out.insert((l, m), union);
        }
    }
    out
}

/// Number of misclassified elements: `sum_l |G_l \ Ghat_pi(l)|` minimised over
/// matchings `pi` of true to estimated groups (unmatched groups count fully).
pub fn classification_errors(estimated: &Partition, truth: &Partition) -> usize {
    let overlap: Vec<Vec<i64>> = truth
        .groups()
        .iter()
        .map(|g| {
            estimated
                .groups()
                .iter()
                .map(|e| g.iter().filter(|i| e.binary_search(i).is_ok()).count() as i64)
                .collect()
        })
        .collect();
    let best = if truth.len().max(estimated.len()) <= ENUMERATION_LIMIT {
        max_matching_enumerate(&overlap)
    } else {
        max_matching_hungarian(&overlap)
    };
    truth.n() - best as usize
}

/// Maximum total weight of an injective matching, by enumerating all
/// assignments of rows to distinct columns (or to nothing).
fn max_matching_enumerate(w: &[Vec<i64>]) -> i64 {
    fn go(w: &[Vec<i64>], row: usize, used: &mut Vec<bool>) -> i64 {
        if row == w.len() {
            return 0;
        }
        let mut best = go(w, row + 1, used);
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.max(w[row][c] + go(w, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    let cols = w.first().map_or(0, Vec::len);
    go(w, 0, &mut vec![false; cols])
}

/// Maximum total weight of a matching via the Hungarian algorithm on the
/// zero-padded square cost matrix.
fn max_matching_hungarian(w: &[Vec<i64>]) -> i64 {
    let rows = w.len();
    let cols = w.first().map_or(0, Vec::len);
    let k = rows.max(cols);
    if k == 0 {
        return 0;
    }
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            -w[i][j]
        } else {
            0
        }
    };
    // Potentials-based O(k^3) formulation, 1-based with a virtual column 0.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=k)
        .filter(|&j| p[j] != 0)
        .map(|j| -cost(p[j] - 1, j - 1))
        .sum()
}

/// Estimated group structure together with group-level interval sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    pub n_groups: usize,
    pub groups: Partition,
    /// Internal dissimilarity per group; `None` for singletons.
    pub within_max: Vec<Option<f64>>,
    pub between_intervals: BTreeMap<(usize, usize), Vec<LocationScalePoint>>,
}

/// Clusters the series of a test report. The number of groups is estimated
/// from the report's critical value unless `known_groups` is given.
pub fn cluster_report(
    report: &TestReport,
    known_groups: Option<usize>,
    minimal: bool,
) -> Result<(ClusterTree, GroupStructure)> {
    let table = PairMaxima::from_fn(report.n, |i, j| report.pair(i, j).psi_max);
    let tree = hac_tree(&table)?;
    let n_groups = match known_groups {
        Some(r) => r,
        None => estimate_num_groups(&tree, &table, report.critical_value.q),
    };
    let groups = partition_at(&tree, n_groups)?;
    let within_max = groups
        .groups()
        .iter()
        .map(|g| Some(dissimilarity(g, g, &table)).filter(|d| d.is_finite()))
        .collect();
    let between_intervals = group_difference_intervals(&groups, report, minimal);
    Ok((
        tree,
        GroupStructure {
            n_groups,
            groups,
            within_max,
            between_intervals,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_point_table() -> PairMaxima {
        // d(0,1) = 1, d(0,2) = 5, d(1,2) = 4
        PairMaxima::new(3, vec![1.0, 5.0, 4.0]).unwrap()
    }

    #[test]
    fn dissimilarity_examples() {
        let t = PairMaxima::new(3, vec![3.2, 5.0, 4.0]).unwrap();
        assert_eq!(dissimilarity(&[0], &[1], &t), 3.2);
        assert_eq!(dissimilarity(&[0, 1], &[2], &t), 5.0);
        assert_eq!(dissimilarity(&[2], &[0, 1], &t), 5.0);
        assert_eq!(dissimilarity(&[1], &[1], &t), f64::NEG_INFINITY);
        assert_eq!(dissimilarity(&[0, 1, 2], &[0, 1, 2], &t), 5.0);
    }

    #[test]
    fn worked_complete_linkage() {
        let tree = hac_tree(&three_point_table()).unwrap();
        assert_eq!(
            tree.merges,
            vec![
                Merge { left: 0, right: 1, height: 1.0, new_id: 3 },
                Merge { left: 2, right: 3, height: 5.0, new_id: 4 },
            ]
        );
        assert_eq!(partition_at(&tree, 2).unwrap(), Partition::new(vec![vec![0, 1], vec![2]]).unwrap());
        assert_eq!(partition_at(&tree, 3).unwrap().len(), 3);
        assert_eq!(partition_at(&tree, 1).unwrap(), Partition::blocks(&[3]));
        assert!(partition_at(&tree, 0).is_err());
        assert!(partition_at(&tree, 4).is_err());
    }

    #[test]
    fn ties_merge_smallest_ids_first() {
        let t = PairMaxima::from_fn(4, |_, _| 2.0);
        let tree = hac_tree(&t).unwrap();
        assert_eq!((tree.merges[0].left, tree.merges[0].right), (0, 1));
        assert_eq!((tree.merges[1].left, tree.merges[1].right), (2, 3));
        assert_eq!((tree.merges[2].left, tree.merges[2].right), (4, 5));
    }

    #[test]
    fn num_groups_extremes() {
        let t = three_point_table();
        let tree = hac_tree(&t).unwrap();
        assert_eq!(estimate_num_groups(&tree, &t, 10.0), 1);
        assert_eq!(estimate_num_groups(&tree, &t, 0.5), 3);
        assert_eq!(estimate_num_groups(&tree, &t, 1.0), 2);
    }

    #[test]
    fn classification_error_examples() {
        let truth = Partition::blocks(&[5, 5, 5]);
        assert_eq!(classification_errors(&truth, &truth), 0);
        let merged = Partition::new(vec![(0..10).collect(), (10..15).collect()]).unwrap();
        assert_eq!(classification_errors(&merged, &truth), 5);
        let relabelled = Partition::new(vec![(10..15).collect(), (0..5).collect(), (5..10).collect()]).unwrap();
        assert_eq!(classification_errors(&relabelled, &truth), 0);
        let singletons = Partition::new((0..15).map(|i| vec![i]).collect()).unwrap();
        assert_eq!(classification_errors(&singletons, &truth), 12);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![vec![0, 2], vec![1]]).is_ok());
        assert!(Partition::new(vec![vec![0, 1], vec![1]]).is_err());
        assert!(Partition::new(vec![vec![0, 3]]).is_err());
        assert_eq!(Partition::blocks(&[2, 1]).labels(), vec![0, 0, 1]);
    }

    fn random_partition(labels: &[usize]) -> Partition {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            groups[l].push(i);
        }
        Partition::new(groups).unwrap()
    }

    proptest! {
        #[test]
        fn heights_are_monotone(values in proptest::collection::vec(0.0f64..10.0, 28)) {
            let t = PairMaxima::new(8, values).unwrap();
            let tree = hac_tree(&t).unwrap();
            prop_assert_eq!(tree.merges.len(), 7);
            for w in tree.merges.windows(2) {
                prop_assert!(w[0].height <= w[1].height);
            }
            let mut children: Vec<usize> = tree.merges.iter().flat_map(|m| [m.left, m.right]).collect();
            children.sort_unstable();
            prop_assert_eq!(children, (0..14).collect::<Vec<_>>());
        }

        #[test]
        fn dissimilarity_is_symmetric(values in proptest::collection::vec(-3.0f64..10.0, 21), mask in 0u32..128) {
            let t = PairMaxima::new(7, values).unwrap();
            let s: Vec<usize> = (0..7).filter(|i| mask >> i & 1 == 1).collect();
            let r: Vec<usize> = (0..7).filter(|i| mask >> i & 1 == 0).collect();
            prop_assert_eq!(dissimilarity(&s, &r, &t), dissimilarity(&r, &s, &t));
        }

        #[test]
        fn num_groups_monotone_in_q(values in proptest::collection::vec(0.0f64..10.0, 15), q1 in 0.0f64..10.0, q2 in 0.0f64..10.0) {
            let t = PairMaxima::new(6, values).unwrap();
            let tree = hac_tree(&t).unwrap();
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            prop_assert!(estimate_num_groups(&tree, &t, hi) <= estimate_num_groups(&tree, &t, lo));
        }

        #[test]
        fn matching_strategies_agree(
            a in proptest::collection::vec(0usize..7, 12),
            b in proptest::collection::vec(0usize..7, 12),
        ) {
            let pa = random_partition(&canonical(&a));
            let pb = random_partition(&canonical(&b));
            let overlap: Vec<Vec<i64>> = pb.groups().iter().map(|g| {
                pa.groups().iter().map(|e| g.iter().filter(|i| e.contains(i)).count() as i64).collect()
            }).collect();
            prop_assert_eq!(max_matching_enumerate(&overlap), max_matching_hungarian(&overlap));
            prop_assert_eq!(classification_errors(&pa, &pa), 0);
        }
    }

    /// Relabels so that labels are 0..k without gaps.
    fn canonical(labels: &[usize]) -> Vec<usize> {
        let mut map = BTreeMap::new();
        labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect()
    }
}
