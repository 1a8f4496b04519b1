use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Euclidean, Metric::Cosine];

    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
        }
        match self {
            Metric::Euclidean => Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()),
            Metric::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na == 0.0 || nb == 0.0 {
                    return Err(Error::Geometry("cosine distance is undefined for a zero-norm vector".into()));
                }
                Ok(1.0 - dot / (na.sqrt() * nb.sqrt()))
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            _ => Err(Error::Config(format!("unknown metric `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub index: usize,
    pub distance: f64,
}

struct Candidate<'a> {
    distance: f64,
    id: &'a str,
    index: usize,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance.total_cmp(&other.distance).then_with(|| self.id.cmp(other.id))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

/// The `k` points nearest to `query`, ascending by distance with ties broken
/// by id. `exclude` removes one sample index (the query itself).
pub fn nearest<P: AsRef<[f64]>>(
    points: &[P],
    ids: &[String],
    query: &[f64],
    k: usize,
    metric: Metric,
    exclude: Option<usize>,
) -> Result<Vec<Neighbor>> {
    let available = points.len() - usize::from(exclude.is_some_and(|e| e < points.len()));
    if k < 1 || k > available {
        return Err(Error::Config(format!("k = {k} out of range 1..={available}")));
    }
    // Bounded max-heap keeps the k best seen so far.
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    for (index, p) in points.iter().enumerate() {
        if Some(index) == exclude {
            continue;
        }
        let c = Candidate { distance: metric.distance(query, p.as_ref())?, id: &ids[index], index };
        if heap.len() < k {
            heap.push(c);
        } else if c < *heap.peek().expect("heap is full") {
            heap.pop();
            heap.push(c);
        }
    }
    Ok(heap
        .into_sorted_vec()
        .into_iter()
        .map(|c| Neighbor { id: c.id.to_string(), index: c.index, distance: c.distance })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub k: usize,
    pub metric: Metric,
    pub accuracy: f64,
}

pub const SWEEP_KS: [usize; 6] = [5, 10, 15, 20, 25, 30];

/// Majority vote over neighbors; a tie goes to the tied label seen nearest.
pub fn vote(neighbors: &[Neighbor], labels: &[Label]) -> Label {
    let mut counts = [0usize; 2];
    for n in neighbors {
        counts[labels[n.index].class_index()] += 1;
    }
    let best = *counts.iter().max().expect("two classes");
    let tied: Vec<usize> = (0..2).filter(|&c| counts[c] == best).collect();
    if tied.len() == 1 {
        return Label::from_class_index(tied[0]);
    }
    neighbors
        .iter()
        .map(|n| labels[n.index])
        .find(|l| tied.contains(&l.class_index()))
        .expect("non-empty neighbor list")
}

/// Leave-one-out k-NN accuracy for every (k, metric) pair.
pub fn knn_classifier_sweep<P: AsRef<[f64]>>(
    points: &[P],
    ids: &[String],
    labels: &[Label],
    ks: &[usize],
    metrics: &[Metric],
) -> Result<Vec<SweepCell>> {
    if labels.len() != points.len() || ids.len() != points.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), actual: labels.len() });
    }
    let mut cells = Vec::with_capacity(ks.len() * metrics.len());
    for &k in ks {
        for &metric in metrics {
            let mut hits = 0;
            for (i, p) in points.iter().enumerate() {
                let neighbors = nearest(points, ids, p.as_ref(), k, metric, Some(i))?;
                if vote(&neighbors, labels) == labels[i] {
                    hits += 1;
                }
            }
            cells.push(SweepCell { k, metric, accuracy: hits as f64 / points.len() as f64 });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Common,
    UniqueRom,
    UniqueComp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborSets {
    pub common: Vec<String>,
    pub unique_rom: Vec<String>,
    pub unique_comp: Vec<String>,
}

impl NeighborSets {
    /// Neighbors present in both lists, and what each list has alone. Order
    /// follows the ROM list for `common`, each source list otherwise.
    pub fn partition(rom: &[String], comp: &[String]) -> Self {
        let rom_set: HashSet<&str> = rom.iter().map(String::as_str).collect();
        let comp_set: HashSet<&str> = comp.iter().map(String::as_str).collect();
        Self {
            common: rom.iter().filter(|id| comp_set.contains(id.as_str())).cloned().collect(),
            unique_rom: rom.iter().filter(|id| !comp_set.contains(id.as_str())).cloned().collect(),
            unique_comp: comp.iter().filter(|id| !rom_set.contains(id.as_str())).cloned().collect(),
        }
    }

    pub fn membership(&self, id: &str) -> Option<Membership> {
        if self.common.iter().any(|x| x == id) {
            Some(Membership::Common)
        } else if self.unique_rom.iter().any(|x| x == id) {
            Some(Membership::UniqueRom)
        } else if self.unique_comp.iter().any(|x| x == id) {
            Some(Membership::UniqueComp)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:02}")).collect()
    }

    /// Brute force: every distance, full sort on (distance, id).
    fn oracle(
        points: &[Vec<f64>],
        ids: &[String],
        q: &[f64],
        k: usize,
        m: Metric,
        exclude: Option<usize>,
    ) -> Vec<(String, f64)> {
        let mut all: Vec<(String, f64)> = points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, p)| (ids[i].clone(), m.distance(q, p).unwrap()))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    #[test]
    fn identity_query_exclusion() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![5.0, 5.0]];
        let names = ids(3);
        let with_self = nearest(&pts, &names, &pts[0], 1, Metric::Euclidean, None).unwrap();
        assert_eq!((with_self[0].index, with_self[0].distance), (0, 0.0));
        let without = nearest(&pts, &names, &pts[0], 1, Metric::Euclidean, Some(0)).unwrap();
        assert_eq!(without[0].index, 1);
    }

    #[test]
    fn k_out_of_range() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(nearest(&pts, &ids(2), &[0.0], 0, Metric::Euclidean, None).is_err());
        assert!(nearest(&pts, &ids(2), &[0.0], 2, Metric::Euclidean, Some(0)).is_err());
    }

    #[test]
    fn cosine_zero_norm_rejected() {
        assert!(Metric::Cosine.distance(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn ties_broken_by_id() {
        let pts = vec![vec![1.0], vec![-1.0], vec![1.0]];
        let names = vec!["c".to_string(), "a".to_string(), "b".to_string()];
        let r = nearest(&pts, &names, &[0.0], 3, Metric::Euclidean, None).unwrap();
        let order: Vec<&str> = r.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(order, ["a", "b", "c"]);
    }

    proptest! {
        #[test]
        fn matches_exhaustive_sort(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 20),
            q in prop::collection::vec(-5.0f64..5.0, 3),
            k in 1usize..=19,
            exclude in prop::option::of(0usize..20),
        ) {
            let names = ids(pts.len());
            for m in Metric::ALL {
                let got: Vec<(String, f64)> = nearest(&pts, &names, &q, k, m, exclude).unwrap()
                    .into_iter().map(|n| (n.id, n.distance)).collect();
                prop_assert_eq!(got, oracle(&pts, &names, &q, k, m, exclude));
            }
        }

        #[test]
        fn invariant_under_input_permutation(
            pts in prop::collection::vec(prop::collection::vec(-3i32..3, 2), 12),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect();
            let names = ids(pts.len());
            let mut order: Vec<usize> = (0..pts.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| pts[i].clone()).collect();
            let shuffled_names: Vec<String> = order.iter().map(|&i| names[i].clone()).collect();
            let q = [0.5, -0.5];
            let a: Vec<String> = nearest(&pts, &names, &q, 6, Metric::Euclidean, None).unwrap().into_iter().map(|n| n.id).collect();
            let b: Vec<String> = nearest(&shuffled, &shuffled_names, &q, 6, Metric::Euclidean, None).unwrap().into_iter().map(|n| n.id).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn perfectly_clustered_sweep() {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let (cx, l) = if i < 20 { (0.0, Label::Correct) } else { (100.0, Label::Impaired) };
            pts.push(vec![cx + (i % 20) as f64 * 0.01, 1.0 + (i % 7) as f64 * 0.01]);
            labels.push(l);
        }
        let cells = knn_classifier_sweep(&pts, &ids(40), &labels, &[5, 10, 15], &Metric::ALL).unwrap();
        assert_eq!(cells.len(), 6);
        assert!(cells.iter().all(|c| c.accuracy == 1.0), "{cells:?}");
    }

    #[test]
    fn hand_built_sweep_matches_vote_oracle() {
        // 12 points on a line; labels alternate in runs so votes differ by k.
        let xs = [0.0, 1.0, 2.0, 3.5, 4.0, 6.0, 6.5, 7.0, 9.0, 10.5, 11.0, 13.0];
        let ls = [0, 0, 1, 1, 0, 1, 1, 1, 0, 0, 1, 0];
        let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, 1.0]).collect();
        let labels: Vec<Label> = ls.iter().map(|&l| Label::from_class_index(l)).collect();
        let names = ids(12);
        let cells = knn_classifier_sweep(&pts, &names, &labels, &[1, 3, 4], &[Metric::Euclidean]).unwrap();
        for cell in &cells {
            let mut hits = 0;
            for i in 0..12 {
                let nn = oracle(&pts, &names, &pts[i], cell.k, Metric::Euclidean, Some(i));
                let idx: Vec<usize> = nn.iter().map(|(id, _)| names.iter().position(|n| n == id).unwrap()).collect();
                let ones = idx.iter().filter(|&&j| ls[j] == 1).count();
                let zeros = idx.len() - ones;
                let pred = match ones.cmp(&zeros) {
                    Ordering::Greater => 1,
                    Ordering::Less => 0,
                    Ordering::Equal => ls[idx[0]],
                };
                if pred == ls[i] {
                    hits += 1;
                }
            }
            assert_eq!(cell.accuracy, hits as f64 / 12.0, "k = {}", cell.k);
        }
    }

    #[test]
    fn set_algebra() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let p = NeighborSets::partition(&s(&["a", "b", "c", "d", "e"]), &s(&["c", "d", "e", "f", "g"]));
        assert_eq!(p.common, s(&["c", "d", "e"]));
        assert_eq!(p.unique_rom, s(&["a", "b"]));
        assert_eq!(p.unique_comp, s(&["f", "g"]));
        let same = NeighborSets::partition(&s(&["a", "b"]), &s(&["b", "a"]));
        assert_eq!(same.common.len(), 2);
        assert!(same.unique_rom.is_empty() && same.unique_comp.is_empty());
        let disjoint = NeighborSets::partition(&s(&["a"]), &s(&["b"]));
        assert!(disjoint.common.is_empty());
        assert_eq!(disjoint.membership("b"), Some(Membership::UniqueComp));
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_and_covers_union(
            rom in prop::collection::hash_set(0u8..20, 0..8),
            comp in prop::collection::hash_set(0u8..20, 0..8),
        ) {
            let rom: Vec<String> = rom.into_iter().map(|x| x.to_string()).collect();
            let comp: Vec<String> = comp.into_iter().map(|x| x.to_string()).collect();
            let p = NeighborSets::partition(&rom, &comp);
            let c: HashSet<&String> = p.common.iter().collect();
            let ur: HashSet<&String> = p.unique_rom.iter().collect();
            let uc: HashSet<&String> = p.unique_comp.iter().collect();
            prop_assert!(c.is_disjoint(&ur) && c.is_disjoint(&uc) && ur.is_disjoint(&uc));
            let union: HashSet<&String> = rom.iter().chain(&comp).collect();
            let parts: HashSet<&String> = c.union(&ur).copied().chain(uc.iter().copied()).collect();
            prop_assert_eq!(union, parts);
        }
    }
}
