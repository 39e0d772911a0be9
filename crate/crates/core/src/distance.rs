//! The distance between two Mapper functions on the same cover and domain.
//!
//! `D_M(f, g)` is the smallest fraction of points whose label sets differ,
//! taken over all ways of matching the clusters of `f` and `g` bin by bin.
//! Bins with different cluster counts are padded with empty clusters.

use pathfinding::prelude::{kuhn_munkres, Matrix};
use serde::{Deserialize, Serialize};

use crate::clustering::{Label, UNASSIGNED};
use crate::dataset::IndexSubset;
use crate::error::{Error, Result};
use crate::mapper::MapperFunction;

/// Largest product of per-bin permutation counts the brute-force oracle accepts.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
struct Bits {
    words: Vec<u64>,
}

impl Bits {
    fn zeros(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
        }
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `self = base ∪ (a △ b)`, returning the new count.
    fn union_xor(&mut self, base: &Bits, a: &Bits, b: &Bits) -> usize {
        let mut total = 0;
        for (((o, &m), &x), &y) in self.words.iter_mut().zip(&base.words).zip(&a.words).zip(&b.words) {
            *o = m | (x ^ y);
            total += o.count_ones() as usize;
        }
        total
    }

    fn or_assign(&mut self, other: &Bits) {
        for (o, &w) in self.words.iter_mut().zip(&other.words) {
            *o |= w;
        }
    }

    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(k, &w)| (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| k * 64 + b))
    }
}

/// One cluster of one bin, as a set of domain positions. Padding clusters
/// have no label.
#[derive(Clone, Debug)]
struct Cluster {
    label: Option<Label>,
    size: usize,
    bits: Bits,
}

/// Clusters of `f`, per bin, sorted by decreasing size then label.
fn bin_clusters(f: &MapperFunction, n: usize) -> Vec<Vec<Cluster>> {
    f.bins
        .iter()
        .map(|b| {
            let mut by_label: std::collections::BTreeMap<Label, Bits> = Default::default();
            for (x, &l) in b.members.iter().zip(&b.labels) {
                if l == UNASSIGNED {
                    continue;
                }
                let p = f.domain.position(x).expect("bin members lie in the domain");
                by_label.entry(l).or_insert_with(|| Bits::zeros(n)).set(p);
            }
            let mut out: Vec<Cluster> = by_label
                .into_iter()
                .map(|(l, bits)| Cluster {
                    label: Some(l),
                    size: bits.count(),
                    bits,
                })
                .collect();
            out.sort_by(|a, b| b.size.cmp(&a.size).then(a.label.cmp(&b.label)));
            out
        })
        .collect()
}

fn pad(clusters: &mut Vec<Cluster>, k: usize, n: usize) {
    while clusters.len() < k {
        clusters.push(Cluster {
            label: None,
            size: 0,
            bits: Bits::zeros(n),
        });
    }
}

/// Both functions must share the cover bins and the domain.
fn check_compatible(f: &MapperFunction, g: &MapperFunction) -> Result<()> {
    if f.n_bins() != g.n_bins() {
        return Err(Error::CoverMismatch(format!(
            "{} bins against {}",
            f.n_bins(),
            g.n_bins()
        )));
    }
    if f.domain != g.domain {
        return Err(Error::DomainMismatch(
            "the two functions are defined on different points".into(),
        ));
    }
    for (i, (a, b)) in f.bins.iter().zip(&g.bins).enumerate() {
        if a.members != b.members {
            return Err(Error::CoverMismatch(format!("bin {i} holds different points")));
        }
    }
    Ok(())
}

/// Cluster pairs chosen in one bin; `None` is a padding cluster.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinMatching {
    pub pairs: Vec<(Option<Label>, Option<Label>)>,
}

struct Prepared {
    n: usize,
    f: Vec<Vec<Cluster>>,
    g: Vec<Vec<Cluster>>,
}

impl Prepared {
    fn new(f: &MapperFunction, g: &MapperFunction) -> Result<Self> {
        check_compatible(f, g)?;
        let n = f.domain.len();
        let mut fc = bin_clusters(f, n);
        let mut gc = bin_clusters(g, n);
        for (a, b) in fc.iter_mut().zip(gc.iter_mut()) {
            let k = a.len().max(b.len());
            pad(a, k, n);
            pad(b, k, n);
        }
        Ok(Self { n, f: fc, g: gc })
    }

    fn matching(&self, bin: usize, assignment: &[usize]) -> BinMatching {
        BinMatching {
            pairs: assignment
                .iter()
                .enumerate()
                .map(|(fi, &gi)| (self.f[bin][fi].label, self.g[bin][gi].label))
                .collect(),
        }
    }

    fn mismatch_of(&self, assignment: &[Vec<usize>]) -> Bits {
        let mut out = Bits::zeros(self.n);
        let mut tmp = Bits::zeros(self.n);
        for (bin, a) in assignment.iter().enumerate() {
            for (fi, &gi) in a.iter().enumerate() {
                let base = out.clone();
                tmp.union_xor(&base, &self.f[bin][fi].bits, &self.g[bin][gi].bits);
                std::mem::swap(&mut out, &mut tmp);
            }
        }
        out
    }
}

/// Optimal matching within one bin: maximises the points kept by matched
/// pairs. Returns the `g`-index for each `f`-index and the mismatch set.
fn hungarian(f: &[Cluster], g: &[Cluster], n: usize) -> (Vec<usize>, Bits) {
    let k = f.len();
    if k == 0 {
        return (Vec::new(), Bits::zeros(n));
    }
    let mut weights = Matrix::new(k, k, 0i64);
    for (i, c) in f.iter().enumerate() {
        for (j, s) in g.iter().enumerate() {
            weights[(i, j)] = c
                .bits
                .words
                .iter()
                .zip(&s.bits.words)
                .map(|(a, b)| (a & b).count_ones() as i64)
                .sum();
        }
    }
    let (_, assignment) = kuhn_munkres(&weights);
    let mut bits = Bits::zeros(n);
    let mut tmp = Bits::zeros(n);
    for (i, &j) in assignment.iter().enumerate() {
        tmp.union_xor(&bits, &f[i].bits, &g[j].bits);
        std::mem::swap(&mut bits, &mut tmp);
    }
    (assignment, bits)
}

/// Upper bound from optimal per-bin matchings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeededBound {
    /// Points mismatched by the union of the per-bin optimal matchings.
    pub mismatched: usize,
    /// Optimal mismatch count of each bin on its own.
    pub per_bin: Vec<usize>,
    pub matching: Vec<BinMatching>,
}

impl SeededBound {
    /// No matching can do better than the worst single bin.
    pub fn lower_bound(&self) -> usize {
        self.per_bin.iter().copied().max().unwrap_or(0)
    }
}

fn seed(p: &Prepared) -> (SeededBound, Vec<Vec<usize>>) {
    let mut union = Bits::zeros(p.n);
    let mut per_bin = Vec::with_capacity(p.f.len());
    let mut assignments = Vec::with_capacity(p.f.len());
    for (f, g) in p.f.iter().zip(&p.g) {
        let (a, bits) = hungarian(f, g, p.n);
        per_bin.push(bits.count());
        union.or_assign(&bits);
        assignments.push(a);
    }
    let matching = (0..p.f.len()).map(|b| p.matching(b, &assignments[b])).collect();
    (
        SeededBound {
            mismatched: union.count(),
            per_bin,
            matching,
        },
        assignments,
    )
}

/// Solves each bin optimally on its own and unions the mismatch sets. The
/// count is never below the exact optimum and equals it with a single bin.
pub fn seeded_upper_bound(f: &MapperFunction, g: &MapperFunction) -> Result<SeededBound> {
    Ok(seed(&Prepared::new(f, g)?).0)
}

/// Optimal matching of two clusterings of the same points, as a mismatch
/// fraction. Labels equal to [`UNASSIGNED`] belong to no cluster.
pub fn matching_distance(a: &[Label], b: &[Label]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Parameter(format!("{} labels against {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let n = a.len();
    let group = |labels: &[Label]| {
        let mut m: std::collections::BTreeMap<Label, Bits> = Default::default();
        for (p, &l) in labels.iter().enumerate() {
            if l != UNASSIGNED {
                m.entry(l).or_insert_with(|| Bits::zeros(n)).set(p);
            }
        }
        m.into_iter()
            .map(|(l, bits)| Cluster {
                label: Some(l),
                size: bits.count(),
                bits,
            })
            .collect::<Vec<_>>()
    };
    let (mut fa, mut fb) = (group(a), group(b));
    let k = fa.len().max(fb.len());
    pad(&mut fa, k, n);
    pad(&mut fb, k, n);
    let (_, bits) = hungarian(&fa, &fb, n);
    Ok(bits.count() as f64 / n as f64)
}

/// Settings for [`mapper_mismatch`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchOptions {
    /// Start the search with this many mismatches as an attainable value.
    pub initial_bound: Option<usize>,
    /// Stop as soon as a matching with at most this many mismatches is found.
    pub floor: usize,
    /// Give up after this many candidate pairs.
    pub max_nodes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Best mismatch count found; `None` when the search proved nothing
    /// below the initial bound.
    pub mismatched: Option<usize>,
    /// Candidate `(f-cluster, g-cluster)` pairs evaluated.
    pub nodes: u64,
    /// False when the node budget ran out.
    pub complete: bool,
    pub matching: Option<Vec<BinMatching>>,
}

struct Search<'a> {
    p: &'a Prepared,
    order: Vec<(usize, usize)>,
    used: Vec<Vec<bool>>,
    current: Vec<Vec<usize>>,
    best: Option<Vec<Vec<usize>>>,
    bound: usize,
    floor: usize,
    nodes: u64,
    max_nodes: Option<u64>,
    stopped: bool,
    aborted: bool,
    scratch: Vec<Bits>,
}

impl Search<'_> {
    fn run(&mut self, level: usize, mismatch: &Bits) {
        let (bin, fi) = self.order[level];
        let last = level + 1 == self.order.len();
        let mut next = std::mem::replace(&mut self.scratch[level], Bits::zeros(0));
        let mut phantom_tried = false;
        for gi in 0..self.p.g[bin].len() {
            if self.used[bin][gi] {
                continue;
            }
            if self.p.g[bin][gi].label.is_none() {
                if phantom_tried {
                    continue;
                }
                phantom_tried = true;
            }
            if self.stopped {
                break;
            }
            self.nodes += 1;
            if self.max_nodes.is_some_and(|m| self.nodes > m) {
                self.stopped = true;
                self.aborted = true;
                break;
            }
            let count = next.union_xor(mismatch, &self.p.f[bin][fi].bits, &self.p.g[bin][gi].bits);
            if count >= self.bound {
                continue;
            }
            self.current[bin][fi] = gi;
            if last {
                self.bound = count;
                self.best = Some(self.current.clone());
                if count <= self.floor {
                    self.stopped = true;
                }
            } else {
                self.used[bin][gi] = true;
                self.run(level + 1, &next);
                self.used[bin][gi] = false;
            }
        }
        self.scratch[level] = next;
    }
}

fn search(p: &Prepared, opts: &SearchOptions) -> (SearchOutcome, Option<Vec<Vec<usize>>>) {
    let mut order: Vec<(usize, usize)> =
        p.f.iter()
            .enumerate()
            .flat_map(|(b, cs)| (0..cs.len()).map(move |i| (b, i)))
            .collect();
    order.sort_by(|&(b1, i1), &(b2, i2)| {
        let (c1, c2) = (&p.f[b1][i1], &p.f[b2][i2]);
        c2.size
            .cmp(&c1.size)
            .then(c1.label.is_none().cmp(&c2.label.is_none()))
            .then(b1.cmp(&b2))
            .then(c1.label.cmp(&c2.label))
            .then(i1.cmp(&i2))
    });
    let bound = opts.initial_bound.map_or(p.n + 1, |b| b + 1);
    if order.is_empty() {
        let found = (bound > 0).then_some(0);
        let best = found.map(|_| vec![Vec::new(); p.f.len()]);
        return (
            SearchOutcome {
                mismatched: found,
                nodes: 0,
                complete: true,
                matching: best.as_ref().map(|_| vec![BinMatching::default(); p.f.len()]),
            },
            best,
        );
    }
    let mut s = Search {
        p,
        scratch: vec![Bits::zeros(p.n); order.len()],
        used: p.g.iter().map(|cs| vec![false; cs.len()]).collect(),
        current: p.f.iter().map(|cs| vec![0; cs.len()]).collect(),
        order,
        best: None,
        bound,
        floor: opts.floor,
        nodes: 0,
        max_nodes: opts.max_nodes,
        stopped: false,
        aborted: false,
    };
    s.run(0, &Bits::zeros(p.n));
    let matching = s
        .best
        .as_ref()
        .map(|a| (0..p.f.len()).map(|b| p.matching(b, &a[b])).collect());
    (
        SearchOutcome {
            mismatched: s.best.as_ref().map(|_| s.bound),
            nodes: s.nodes,
            complete: !s.aborted,
            matching,
        },
        s.best,
    )
}

/// Branch-and-bound search over cluster matchings.
///
/// `f`-clusters are visited from largest to smallest across all bins; each is
/// tried against every unmatched `g`-cluster of its bin, largest first. A
/// branch is cut as soon as the running mismatch set is no smaller than the
/// best complete matching so far.
pub fn mapper_mismatch(f: &MapperFunction, g: &MapperFunction, opts: &SearchOptions) -> Result<SearchOutcome> {
    let p = Prepared::new(f, g)?;
    Ok(search(&p, opts).0)
}

/// Full result of [`mapper_distance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub distance: f64,
    pub mismatched: usize,
    pub n_points: usize,
    pub seeded_bound: usize,
    pub lower_bound: usize,
    pub nodes: u64,
    /// False only when a node budget stopped the search early; the value is
    /// then an upper bound.
    pub exact: bool,
    pub matching: Vec<BinMatching>,
}

/// `D_M(f, g)`, seeded with [`seeded_upper_bound`].
pub fn mapper_distance(f: &MapperFunction, g: &MapperFunction) -> Result<Distance> {
    mapper_distance_with(f, g, None)
}

/// [`mapper_distance`] with an optional node budget.
pub fn mapper_distance_with(f: &MapperFunction, g: &MapperFunction, max_nodes: Option<u64>) -> Result<Distance> {
    let p = Prepared::new(f, g)?;
    let (bound, _) = seed(&p);
    let lower = bound.lower_bound();
    let n = p.n;
    let frac = |m: usize| if n == 0 { 0.0 } else { m as f64 / n as f64 };
    if bound.mismatched <= lower {
        return Ok(Distance {
            distance: frac(bound.mismatched),
            mismatched: bound.mismatched,
            n_points: n,
            seeded_bound: bound.mismatched,
            lower_bound: lower,
            nodes: 0,
            exact: true,
            matching: bound.matching,
        });
    }
    let opts = SearchOptions {
        initial_bound: Some(bound.mismatched),
        floor: lower,
        max_nodes,
    };
    let (out, _) = search(&p, &opts);
    let mismatched = out.mismatched.unwrap_or(bound.mismatched);
    Ok(Distance {
        distance: frac(mismatched),
        mismatched,
        n_points: n,
        seeded_bound: bound.mismatched,
        lower_bound: lower,
        nodes: out.nodes,
        exact: out.complete,
        matching: out.matching.unwrap_or(bound.matching),
    })
}

/// Points of the domain whose label sets differ under `matching`.
pub fn mismatched_points(f: &MapperFunction, g: &MapperFunction, matching: &[BinMatching]) -> Result<IndexSubset> {
    let p = Prepared::new(f, g)?;
    if matching.len() != p.f.len() {
        return Err(Error::Parameter("one matching per bin is required".into()));
    }
    let mut assignment = Vec::with_capacity(p.f.len());
    for (bin, m) in matching.iter().enumerate() {
        let mut a = vec![usize::MAX; p.f[bin].len()];
        let mut g_used = vec![false; p.g[bin].len()];
        for &(lf, lg) in &m.pairs {
            let fi = find_slot(&p.f[bin], lf, &a.iter().map(|&x| x != usize::MAX).collect::<Vec<_>>())
                .ok_or_else(|| Error::Parameter(format!("bin {bin}: unknown or repeated f-cluster")))?;
            let gi = find_slot(&p.g[bin], lg, &g_used)
                .ok_or_else(|| Error::Parameter(format!("bin {bin}: unknown or repeated g-cluster")))?;
            a[fi] = gi;
            g_used[gi] = true;
        }
        if a.contains(&usize::MAX) {
            return Err(Error::Parameter(format!("bin {bin}: matching is incomplete")));
        }
        assignment.push(a);
    }
    let bits = p.mismatch_of(&assignment);
    Ok(bits.ones().map(|q| f.domain.as_slice()[q]).collect())
}

fn find_slot(cs: &[Cluster], label: Option<Label>, taken: &[bool]) -> Option<usize> {
    (0..cs.len()).find(|&i| !taken[i] && cs[i].label == label)
}

/// Number of per-bin permutation combinations the oracle would enumerate.
pub fn brute_force_size(f: &MapperFunction, g: &MapperFunction) -> Result<u128> {
    let p = Prepared::new(f, g)?;
    Ok(combinations(&p))
}

fn combinations(p: &Prepared) -> u128 {
    p.f.iter().fold(1u128, |acc, cs| {
        let fact = (1..=cs.len() as u128)
            .try_fold(1u128, |a, k| a.checked_mul(k))
            .unwrap_or(u128::MAX);
        acc.saturating_mul(fact)
    })
}

/// Reference value of `D_M` by trying every combination of per-bin
/// permutations. Refuses instances above [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_mapper_distance(f: &MapperFunction, g: &MapperFunction) -> Result<f64> {
    let p = Prepared::new(f, g)?;
    let size = combinations(&p);
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::GuardExceeded {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if p.n == 0 {
        return Ok(0.0);
    }
    // mismatch set of every permutation, per bin
    let per_bin: Vec<Vec<Bits>> =
        p.f.iter()
            .zip(&p.g)
            .map(|(fc, gc)| {
                let mut sets = Vec::new();
                let mut perm: Vec<usize> = (0..fc.len()).collect();
                permutations(&mut perm, 0, &mut |perm| {
                    let mut bits = Bits::zeros(p.n);
                    let mut tmp = Bits::zeros(p.n);
                    for (i, &j) in perm.iter().enumerate() {
                        tmp.union_xor(&bits, &fc[i].bits, &gc[j].bits);
                        std::mem::swap(&mut bits, &mut tmp);
                    }
                    sets.push(bits);
                });
                sets
            })
            .collect();
    let mut best = usize::MAX;
    let mut acc = vec![Bits::zeros(p.n); per_bin.len() + 1];
    combine(&per_bin, 0, &mut acc, &mut best);
    Ok(best as f64 / p.n as f64)
}

fn permutations(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k + 1 >= perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permutations(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

fn combine(per_bin: &[Vec<Bits>], bin: usize, acc: &mut [Bits], best: &mut usize) {
    if bin == per_bin.len() {
        *best = (*best).min(acc[bin].count());
        return;
    }
    for set in &per_bin[bin] {
        let mut next = acc[bin].clone();
        next.or_assign(set);
        acc[bin + 1] = next;
        combine(per_bin, bin + 1, acc, best);
    }
}
