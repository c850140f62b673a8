//! Fusion of ambiguous per-group candidates into the final directions.
//!
//! Distances are measured as `|sin θ₁ - sin θ₂|`, which is uniform over the
//! ambiguity lattice. Thresholds given in degrees are converted with
//! `sin(·)`, i.e. they are exact at broadside.

use crate::esprit::{CandidateAngle, CandidateAngleSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionMethod {
    Omc,
    Wgmd,
    Wlmd,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 3] = [FusionMethod::Omc, FusionMethod::Wgmd, FusionMethod::Wlmd];

    pub fn tag(self) -> &'static str {
        match self {
            FusionMethod::Omc => "omc",
            FusionMethod::Wgmd => "wgmd",
            FusionMethod::Wlmd => "wlmd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    /// Radians, ascending.
    pub angles: Vec<f64>,
    /// Support of each angle (cluster weight, or inverse combination score).
    pub support: Vec<f64>,
    pub method: FusionMethod,
    /// Distance evaluations plus weight updates spent.
    pub op_count: u64,
    /// Set when the result cannot discriminate (e.g. a single group).
    pub low_confidence: bool,
}

fn degrees_to_sine_gap(deg: f64) -> f64 {
    deg.to_radians().sin()
}

fn sorted_result(mut pairs: Vec<(f64, f64)>, method: FusionMethod, op_count: u64, low_confidence: bool) -> FusionResult {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    FusionResult {
        angles: pairs.iter().map(|p| p.0).collect(),
        support: pairs.iter().map(|p| p.1).collect(),
        method,
        op_count,
        low_confidence,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmcParams {
    /// Absorption radius, degrees.
    pub radius_deg: f64,
    /// Weight decay per arrival.
    pub decay: f64,
    /// Clusters whose weight falls below this are dropped.
    pub eviction_floor: f64,
    /// Final clusters closer than this are merged, degrees.
    pub merge_deg: f64,
}

impl Default for OmcParams {
    fn default() -> Self {
        Self {
            radius_deg: 0.5,
            decay: 0.995,
            eviction_floor: 0.05,
            merge_deg: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroCluster {
    /// Centroid in the sine domain.
    pub centroid: f64,
    /// Weight as of `last_update`; decays by `γ^(now - last_update)`.
    pub weight: f64,
    pub member_count: usize,
    /// Arrival index of the last absorption.
    pub last_update: u64,
}

impl MicroCluster {
    pub fn centroid_angle(&self) -> f64 {
        self.centroid.clamp(-1.0, 1.0).asin()
    }

    pub fn weight_at(&self, now: u64, decay: f64) -> f64 {
        self.weight * decay.powi((now - self.last_update) as i32)
    }
}

/// Streaming micro-cluster state. Clusters are kept sorted by centroid so
/// the nearest one is found by bisection; decay is applied lazily through
/// the last-update stamp.
#[derive(Debug, Clone)]
pub struct OmcState {
    params: OmcParams,
    radius: f64,
    clusters: Vec<MicroCluster>,
    now: u64,
    ops: u64,
    next_prune: u64,
}

impl OmcState {
    pub fn new(params: OmcParams) -> Result<Self> {
        if !(params.radius_deg > 0.0 && params.radius_deg < 90.0) {
            return Err(Error::Config("OMC radius must lie in (0, 90) degrees".into()));
        }
        if !(params.decay > 0.0 && params.decay <= 1.0) {
            return Err(Error::Config("OMC decay must lie in (0, 1]".into()));
        }
        if !(params.eviction_floor >= 0.0 && params.merge_deg >= 0.0) {
            return Err(Error::Config("OMC floor and merge threshold must be non-negative".into()));
        }
        Ok(Self {
            params,
            radius: degrees_to_sine_gap(params.radius_deg),
            clusters: Vec::new(),
            now: 0,
            ops: 0,
            next_prune: 16,
        })
    }

    pub fn clusters(&self) -> &[MicroCluster] {
        &self.clusters
    }

    pub fn processed(&self) -> u64 {
        self.now
    }

    pub fn op_count(&self) -> u64 {
        self.ops
    }

    /// Total current weight of live clusters.
    pub fn total_weight(&self) -> f64 {
        self.clusters.iter().map(|c| c.weight_at(self.now, self.params.decay)).sum()
    }

    pub fn push(&mut self, angle: f64) {
        let s = angle.sin();
        self.now += 1;
        let t = self.now;
        let decay = self.params.decay;
        let idx = self.clusters.partition_point(|c| c.centroid < s);
        let mut best: Option<(usize, f64)> = None;
        for j in [idx.wrapping_sub(1), idx] {
            if let Some(c) = self.clusters.get(j) {
                self.ops += 1;
                let d = (c.centroid - s).abs();
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        self.ops += 1;
        match best {
            Some((j, d)) if d <= self.radius => {
                let c = &mut self.clusters[j];
                let w = c.weight * decay.powi((t - c.last_update) as i32);
                c.centroid = (w * c.centroid + s) / (w + 1.0);
                c.weight = w + 1.0;
                c.member_count += 1;
                c.last_update = t;
                // the centroid moved toward s but cannot pass a neighbour
                // by more than a rounding error; keep order exact anyway
                self.restore_order(j);
            }
            _ => {
                self.clusters.insert(
                    idx,
                    MicroCluster {
                        centroid: s,
                        weight: 1.0,
                        member_count: 1,
                        last_update: t,
                    },
                );
            }
        }
        if t >= self.next_prune {
            self.prune();
            self.next_prune = t + (self.clusters.len() as u64).max(16);
        }
    }

    fn restore_order(&mut self, mut j: usize) {
        while j > 0 && self.clusters[j - 1].centroid > self.clusters[j].centroid {
            self.clusters.swap(j - 1, j);
            j -= 1;
        }
        while j + 1 < self.clusters.len() && self.clusters[j + 1].centroid < self.clusters[j].centroid {
            self.clusters.swap(j, j + 1);
            j += 1;
        }
    }

    fn prune(&mut self) {
        let (now, decay, floor) = (self.now, self.params.decay, self.params.eviction_floor);
        self.ops += self.clusters.len() as u64;
        self.clusters.retain(|c| c.weight_at(now, decay) >= floor);
    }

    /// Evicts, merges close clusters and returns the `A` heaviest centroids.
    pub fn finish(mut self, num_sources: usize) -> Result<FusionResult> {
        self.prune();
        let (now, decay) = (self.now, self.params.decay);
        let merge = degrees_to_sine_gap(self.params.merge_deg);
        let mut merged: Vec<(f64, f64)> = Vec::new(); // (centroid, weight)
        for c in &self.clusters {
            let w = c.weight_at(now, decay);
            self.ops += 1;
            match merged.last_mut() {
                Some(last) if (c.centroid - last.0).abs() < merge => {
                    last.0 = (last.0 * last.1 + c.centroid * w) / (last.1 + w);
                    last.1 += w;
                }
                _ => merged.push((c.centroid, w)),
            }
        }
        if merged.len() < num_sources {
            return Err(Error::InsufficientSupport {
                found: merged.len(),
                needed: num_sources,
            });
        }
        merged.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.abs().total_cmp(&b.0.abs())));
        let top = merged
            .into_iter()
            .take(num_sources)
            .map(|(s, w)| (s.clamp(-1.0, 1.0).asin(), w))
            .collect();
        Ok(sorted_result(top, FusionMethod::Omc, self.ops, false))
    }
}

/// Online micro-clustering over the candidates in their stored order.
pub fn omc_fuse(candidates: &[CandidateAngle], num_sources: usize, params: &OmcParams) -> Result<FusionResult> {
    check_request(candidates.len(), num_sources)?;
    let mut state = OmcState::new(*params)?;
    for c in candidates {
        state.push(c.angle);
    }
    state.finish(num_sources)
}

fn check_request(n: usize, num_sources: usize) -> Result<()> {
    if num_sources == 0 {
        return Err(Error::Input("at least one source must be requested".into()));
    }
    if n == 0 {
        return Err(Error::Input("empty candidate stream".into()));
    }
    Ok(())
}

/// Per-candidate weight used by the minimum-distance fusers.
pub trait CandidateWeight {
    fn weight(&self, c: &CandidateAngle) -> f64;
}

/// Every candidate weighs 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformWeight;

impl CandidateWeight for UniformWeight {
    fn weight(&self, _: &CandidateAngle) -> f64 {
        1.0
    }
}

struct Combination {
    members: Vec<usize>,
    score: f64,
}

fn groups_of(set: &CandidateAngleSet) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); set.num_groups()];
    for (i, c) in set.candidates.iter().enumerate() {
        groups[c.group].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

fn pair_score(set: &CandidateAngleSet, members: &[usize], w: &dyn CandidateWeight, ops: &mut u64) -> f64 {
    let mut score = 0.0;
    for a in 0..members.len() {
        for b in a + 1..members.len() {
            let (ca, cb) = (&set.candidates[members[a]], &set.candidates[members[b]]);
            *ops += 1;
            score += w.weight(ca) * w.weight(cb) * (ca.sin() - cb.sin()).abs();
        }
    }
    score
}

fn weighted_centroid(set: &CandidateAngleSet, members: &[usize], w: &dyn CandidateWeight) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &i in members {
        let c = &set.candidates[i];
        let wi = w.weight(c);
        num += wi * c.sin();
        den += wi;
    }
    (num / den).clamp(-1.0, 1.0).asin()
}

/// Picks `A` combinations with the smallest scores that share no candidate.
fn greedy_select(
    set: &CandidateAngleSet,
    mut combos: Vec<Combination>,
    num_sources: usize,
    w: &dyn CandidateWeight,
    method: FusionMethod,
    ops: u64,
    low_confidence: bool,
) -> Result<FusionResult> {
    combos.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then_with(|| a.members.cmp(&b.members))
    });
    let mut used = vec![false; set.len()];
    let mut picked = Vec::new();
    for c in combos {
        if picked.len() == num_sources {
            break;
        }
        if c.members.iter().any(|&i| used[i]) {
            continue;
        }
        for &i in &c.members {
            used[i] = true;
        }
        let theta = weighted_centroid(set, &c.members, w);
        picked.push((theta, 1.0 / (c.score + 1e-12)));
    }
    if picked.len() < num_sources {
        return Err(Error::InsufficientSupport {
            found: picked.len(),
            needed: num_sources,
        });
    }
    Ok(sorted_result(picked, method, ops, low_confidence))
}

/// Weighted global minimum distance: scores every one-per-group combination
/// by the weighted sum of its pairwise distances.
pub fn wgmd_fuse(set: &CandidateAngleSet, num_sources: usize, w: &dyn CandidateWeight) -> Result<FusionResult> {
    check_request(set.len(), num_sources)?;
    let groups = groups_of(set);
    let mut ops = 0;
    let mut combos = Vec::new();
    let mut idx = vec![0usize; groups.len()];
    'outer: loop {
        let members: Vec<usize> = idx.iter().zip(&groups).map(|(&i, g)| g[i]).collect();
        let score = pair_score(set, &members, w, &mut ops);
        combos.push(Combination { members, score });
        for d in (0..groups.len()).rev() {
            idx[d] += 1;
            if idx[d] < groups[d].len() {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    greedy_select(set, combos, num_sources, w, FusionMethod::Wgmd, ops, groups.len() < 2)
}

/// Weighted local minimum distance: every candidate of the first group is
/// joined by its nearest candidate in each other group.
pub fn wlmd_fuse(set: &CandidateAngleSet, num_sources: usize, w: &dyn CandidateWeight) -> Result<FusionResult> {
    check_request(set.len(), num_sources)?;
    let groups = groups_of(set);
    let mut ops = 0;
    let mut combos = Vec::new();
    for &anchor in &groups[0] {
        let s0 = set.candidates[anchor].sin();
        let mut members = vec![anchor];
        for g in &groups[1..] {
            let mut best = g[0];
            let mut bd = f64::INFINITY;
            for &i in g {
                ops += 1;
                let d = (set.candidates[i].sin() - s0).abs();
                if d < bd {
                    bd = d;
                    best = i;
                }
            }
            members.push(best);
        }
        let score = pair_score(set, &members, w, &mut ops);
        combos.push(Combination { members, score });
    }
    greedy_select(set, combos, num_sources, w, FusionMethod::Wlmd, ops, groups.len() < 2)
}

pub fn fuse(method: FusionMethod, set: &CandidateAngleSet, num_sources: usize, omc: &OmcParams) -> Result<FusionResult> {
    match method {
        FusionMethod::Omc => omc_fuse(&set.candidates, num_sources, omc),
        FusionMethod::Wgmd => wgmd_fuse(set, num_sources, &UniformWeight),
        FusionMethod::Wlmd => wlmd_fuse(set, num_sources, &UniformWeight),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialScore {
    /// Per true angle: matched error in radians, `None` when outside the gate.
    pub errors: Vec<Option<f64>>,
}

impl TrialScore {
    pub fn all_correct(&self) -> bool {
        self.errors.iter().all(Option::is_some)
    }
}

/// Pairs estimates to the truth (both ascending) by the assignment with the
/// smallest total absolute error, then applies the gate.
pub fn score_trial(estimates: &[f64], truth: &[f64], gate: f64) -> TrialScore {
    let n = truth.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut perm: Vec<usize> = Vec::new();
    fn search(
        perm: &mut Vec<usize>,
        est: &[f64],
        truth: &[f64],
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if perm.len() == truth.len().min(est.len()) {
            let cost: f64 = perm.iter().enumerate().map(|(i, &j)| (est[j] - truth[i]).abs()).sum();
            if best.as_ref().map_or(true, |b| cost < b.0) {
                *best = Some((cost, perm.clone()));
            }
            return;
        }
        for j in 0..est.len() {
            if !perm.contains(&j) {
                perm.push(j);
                search(perm, est, truth, best);
                perm.pop();
            }
        }
    }
    search(&mut perm, estimates, truth, &mut best);
    let assign = best.map(|b| b.1).unwrap_or_default();
    let errors = (0..n)
        .map(|i| {
            assign.get(i).and_then(|&j| {
                let e = estimates[j] - truth[i];
                (e.abs() <= gate).then_some(e)
            })
        })
        .collect();
    TrialScore { errors }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRmse {
    /// Fraction of trials where every angle fell inside the gate.
    pub accuracy: f64,
    /// Per-angle fraction of trials inside the gate.
    pub per_angle_accuracy: Vec<f64>,
    /// Per-angle RMSE over gated trials, degrees; NaN when none.
    pub rmse_deg: Vec<f64>,
    pub trials: usize,
}

/// Aggregates trial scores. Failed trials (`None`) count as incorrect.
pub fn accuracy_and_rmse(trials: &[Option<TrialScore>], num_angles: usize) -> AccuracyRmse {
    let n = trials.len();
    let mut ok_all = 0;
    let mut hits = vec![0usize; num_angles];
    let mut sq = vec![0.0; num_angles];
    for t in trials.iter().flatten() {
        if t.all_correct() {
            ok_all += 1;
        }
        for (i, e) in t.errors.iter().enumerate().take(num_angles) {
            if let Some(e) = e {
                hits[i] += 1;
                sq[i] += e.to_degrees().powi(2);
            }
        }
    }
    let frac = |k: usize| if n == 0 { f64::NAN } else { k as f64 / n as f64 };
    AccuracyRmse {
        accuracy: frac(ok_all),
        per_angle_accuracy: hits.iter().map(|&h| frac(h)).collect(),
        rmse_deg: hits
            .iter()
            .zip(&sq)
            .map(|(&h, &s)| if h == 0 { f64::NAN } else { (s / h as f64).sqrt() })
            .collect(),
        trials: n,
    }
}
