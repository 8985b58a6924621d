//! User association as a one-to-many matching game with externalities.
//!
//! Ground users are matched to UAVs with a common utility: the system sum
//! rate, where each pair's rate depends on the whole matching through
//! co-channel interference and OFDMA sharing. The two-phase strategy (TMA)
//! seeds a deferred-acceptance matching from distance preferences, re-runs
//! deferred acceptance on rates computed under that seed, and then applies
//! improving swaps until no swap-blocking pair remains.
//!
//! Tie-breaking is by ascending ground-user id, then ascending UAV id.

use std::collections::VecDeque;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{shannon_rate, ChannelError, GainMatrix, LinkGeometry, RadioParams};
use crate::scenario::Layout;

/// Relative tolerance a swap must beat to count as a strict improvement.
pub const SWAP_IMPROVEMENT_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum MatchingError {
    #[error("unknown association strategy `{0}`")]
    UnknownStrategy(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("problem dimensions disagree: {0}")]
    Dimensions(String),
}

/// The matching X for one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    gu_to_uav: Vec<Option<usize>>,
    uav_to_gus: Vec<Vec<usize>>,
    pub slot: usize,
}

impl Association {
    pub fn new(num_uavs: usize, num_gus: usize) -> Self {
        Self {
            gu_to_uav: vec![None; num_gus],
            uav_to_gus: vec![Vec::new(); num_uavs],
            slot: 0,
        }
    }

    pub fn num_uavs(&self) -> usize {
        self.uav_to_gus.len()
    }

    pub fn num_gus(&self) -> usize {
        self.gu_to_uav.len()
    }

    pub fn uav_of(&self, gu: usize) -> Option<usize> {
        self.gu_to_uav.get(gu).copied().flatten()
    }

    /// X(u), ascending.
    pub fn served_by(&self, uav: usize) -> &[usize] {
        &self.uav_to_gus[uav]
    }

    /// s_u.
    pub fn load(&self, uav: usize) -> usize {
        self.uav_to_gus[uav].len()
    }

    pub fn is_empty(&self) -> bool {
        self.uav_to_gus.iter().all(Vec::is_empty)
    }

    pub fn num_pairs(&self) -> usize {
        self.uav_to_gus.iter().map(Vec::len).sum()
    }

    /// Associates `gu` with `uav`, detaching it from any previous UAV.
    pub fn assign(&mut self, gu: usize, uav: usize) {
        if gu >= self.gu_to_uav.len() {
            self.gu_to_uav.resize(gu + 1, None);
        }
        self.unassign(gu);
        self.gu_to_uav[gu] = Some(uav);
        let list = &mut self.uav_to_gus[uav];
        let at = list.partition_point(|&x| x < gu);
        list.insert(at, gu);
    }

    pub fn unassign(&mut self, gu: usize) {
        if let Some(u) = self.gu_to_uav.get_mut(gu).and_then(Option::take) {
            let list = &mut self.uav_to_gus[u];
            if let Ok(at) = list.binary_search(&gu) {
                list.remove(at);
            }
        }
    }

    /// Exchanges the UAVs of two users; either may be unassociated.
    pub fn swap_users(&mut self, a: usize, b: usize) {
        let ua = self.uav_of(a);
        let ub = self.uav_of(b);
        self.unassign(a);
        self.unassign(b);
        if let Some(u) = ub {
            self.assign(a, u);
        }
        if let Some(u) = ua {
            self.assign(b, u);
        }
    }

    /// (gu, uav) pairs in ascending user order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.gu_to_uav
            .iter()
            .enumerate()
            .filter_map(|(g, u)| u.map(|u| (g, u)))
    }

    /// Checks type compatibility, capacity, and two-way consistency.
    pub fn violations(&self, layout: &Layout, capacity: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.num_uavs() != layout.num_uavs() || self.num_gus() != layout.num_gus() {
            out.push(format!(
                "shape {}x{} does not match layout {}x{}",
                self.num_uavs(),
                self.num_gus(),
                layout.num_uavs(),
                layout.num_gus()
            ));
            return out;
        }
        for (g, u) in self.pairs() {
            if !layout.compatible(u, g) {
                out.push(format!("user {g} associated with incompatible UAV {u}"));
            }
            if !self.uav_to_gus[u].contains(&g) {
                out.push(format!("user {g} -> UAV {u} missing from UAV side"));
            }
        }
        for (u, list) in self.uav_to_gus.iter().enumerate() {
            if list.len() > capacity {
                out.push(format!("UAV {u} serves {} > {capacity}", list.len()));
            }
            for &g in list {
                if self.uav_of(g) != Some(u) {
                    out.push(format!("UAV {u} lists user {g} which maps elsewhere"));
                }
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                out.push(format!("UAV {u} list not strictly ascending"));
            }
        }
        out
    }

    /// Rows of (slot, gu, uav).
    pub fn write_csv_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<(), csv::Error> {
        for (g, u) in self.pairs() {
            w.write_record(&[self.slot.to_string(), g.to_string(), u.to_string()])?;
        }
        Ok(())
    }
}

/// The association strategies compared in the effectiveness study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Random feasible matching.
    Random,
    /// Deferred acceptance on distance.
    DistanceGs,
    /// Deferred acceptance on rates under the distance seed.
    RateGs,
    /// Swap matching from a random matching.
    SwapRandomInit,
    /// Swap matching from the distance-based matching.
    SwapDistanceInit,
    /// Rate-based seed followed by swap matching.
    #[default]
    Tma,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Random,
        StrategyKind::DistanceGs,
        StrategyKind::RateGs,
        StrategyKind::SwapRandomInit,
        StrategyKind::SwapDistanceInit,
        StrategyKind::Tma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::DistanceGs => "distance_gs",
            StrategyKind::RateGs => "rate_gs",
            StrategyKind::SwapRandomInit => "swap_random_init",
            StrategyKind::SwapDistanceInit => "swap_distance_init",
            StrategyKind::Tma => "tma",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = MatchingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| MatchingError::UnknownStrategy(s.to_string()))
    }
}

/// One slot's association inputs: who may be matched and what the links
/// look like.
#[derive(Debug, Clone)]
pub struct AssociationProblem {
    pub layout: Layout,
    /// N_u^max.
    pub capacity: usize,
    pub radio: RadioParams<f64>,
    pub gains: GainMatrix<f64>,
    /// UAV-major 3D distances.
    distances: Vec<f64>,
    pub powers: Vec<f64>,
    /// Users allowed to take part this slot.
    pub eligible: Vec<bool>,
}

impl AssociationProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn from_positions(
        layout: Layout,
        capacity: usize,
        radio: RadioParams<f64>,
        altitude: f64,
        uav_xy: &[[f64; 2]],
        gu_xy: &[[f64; 2]],
        powers: Vec<f64>,
        eligible: Vec<bool>,
    ) -> Result<Self, MatchingError> {
        if uav_xy.len() != layout.num_uavs() || gu_xy.len() != layout.num_gus() {
            return Err(MatchingError::Dimensions(format!(
                "{} UAV and {} user positions for layout {:?}",
                uav_xy.len(),
                gu_xy.len(),
                layout
            )));
        }
        if powers.len() != gu_xy.len() || eligible.len() != gu_xy.len() {
            return Err(MatchingError::Dimensions(
                "powers and eligibility need one entry per user".into(),
            ));
        }
        let gains = GainMatrix::compute(uav_xy, gu_xy, altitude, &radio)?;
        let distances = uav_xy
            .iter()
            .flat_map(|u| {
                gu_xy
                    .iter()
                    .map(move |g| LinkGeometry::new(*u, altitude, *g, radio.elevation).distance)
            })
            .collect();
        Ok(Self {
            layout,
            capacity,
            radio,
            gains,
            distances,
            powers,
            eligible,
        })
    }

    pub fn distance(&self, uav: usize, gu: usize) -> f64 {
        self.distances[uav * self.layout.num_gus() + gu]
    }

    pub fn empty_association(&self) -> Association {
        Association::new(self.layout.num_uavs(), self.layout.num_gus())
    }

    /// R_Mth for MEC users, R_Dth for DC users.
    pub fn threshold(&self, gu: usize) -> f64 {
        if self.layout.is_mec_user(gu) {
            self.radio.rate_threshold_mec
        } else {
            self.radio.rate_threshold_dc
        }
    }

    fn interference(&self, assoc: &Association, uav: usize, skip: Option<usize>) -> f64 {
        let mut total = 0.0;
        for other in 0..assoc.num_uavs() {
            if other == uav {
                continue;
            }
            for &l in assoc.served_by(other) {
                if Some(l) != skip {
                    total += self.powers[l] * self.gains.get(uav, l);
                }
            }
        }
        total
    }

    /// Rate of an associated user at its UAV under `assoc`.
    pub fn rate(&self, assoc: &Association, gu: usize) -> Option<f64> {
        let u = assoc.uav_of(gu)?;
        Some(shannon_rate(
            self.powers[gu] * self.gains.get(u, gu),
            self.interference(assoc, u, None),
            assoc.load(u),
            &self.radio,
        ))
    }

    /// Rate `gu` would get at `uav` if it joined `uav` while the rest of
    /// `assoc` stays as is.
    pub fn prospective_rate(&self, assoc: &Association, gu: usize, uav: usize) -> f64 {
        let already = assoc.uav_of(gu) == Some(uav);
        let served = assoc.load(uav) + usize::from(!already);
        shannon_rate(
            self.powers[gu] * self.gains.get(uav, gu),
            self.interference(assoc, uav, Some(gu)),
            served,
            &self.radio,
        )
    }

    /// Per-user rate at the associated UAV; 0 for unassociated users.
    pub fn pair_rates(&self, assoc: &Association) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.num_gus()];
        for u in 0..assoc.num_uavs() {
            if assoc.load(u) == 0 {
                continue;
            }
            let interference = self.interference(assoc, u, None);
            for &g in assoc.served_by(u) {
                out[g] = shannon_rate(
                    self.powers[g] * self.gains.get(u, g),
                    interference,
                    assoc.load(u),
                    &self.radio,
                );
            }
        }
        out
    }

    /// Σ over X(u) of rates that meet their threshold.
    pub fn uav_utility(&self, assoc: &Association, uav: usize) -> f64 {
        let served = assoc.served_by(uav);
        if served.is_empty() {
            return 0.0;
        }
        let interference = self.interference(assoc, uav, None);
        served
            .iter()
            .map(|&g| {
                let r = shannon_rate(
                    self.powers[g] * self.gains.get(uav, g),
                    interference,
                    served.len(),
                    &self.radio,
                );
                if r >= self.threshold(g) {
                    r
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// System sum rate U(X). Pairs below their rate threshold add nothing.
pub fn utility(assoc: &Association, problem: &AssociationProblem) -> f64 {
    (0..assoc.num_uavs()).map(|u| problem.uav_utility(assoc, u)).sum()
}

/// Deferred acceptance for MEC users over fixed per-user preference lists.
///
/// `prefs[m]` lists MEC-UAVs best first; `score(u, m)` ranks users at a UAV
/// (higher kept). `admit(u, m)` gates each request.
fn deferred_acceptance(
    problem: &AssociationProblem,
    assoc: &mut Association,
    prefs: &[Vec<usize>],
    score: impl Fn(usize, usize) -> f64,
    admit: impl Fn(usize, usize) -> bool,
) {
    let layout = problem.layout;
    let mut next = vec![0usize; layout.num_mec_users];
    let mut free: VecDeque<usize> = layout
        .mec_users()
        .filter(|&m| problem.eligible[m])
        .collect();
    while let Some(m) = free.pop_front() {
        let Some(&u) = prefs[m].get(next[m]) else {
            continue;
        };
        if !admit(u, m) {
            // Preferences are best-first, so nothing further passes either.
            next[m] = prefs[m].len();
            continue;
        }
        assoc.assign(m, u);
        if assoc.load(u) > problem.capacity {
            let reject = worst_of(assoc.served_by(u), |g| score(u, g));
            assoc.unassign(reject);
            next[reject] += 1;
            free.push_back(reject);
        }
    }
}

/// Lowest score; among ties the highest id goes.
fn worst_of(list: &[usize], score: impl Fn(usize) -> f64) -> usize {
    let mut worst = list[0];
    let mut worst_score = score(worst);
    for &g in &list[1..] {
        let s = score(g);
        if s <= worst_score {
            worst = g;
            worst_score = s;
        }
    }
    worst
}

fn sorted_by<F: Fn(usize) -> f64>(mut items: Vec<usize>, key: F) -> Vec<usize> {
    items.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    items
}

/// Distance-based evaluation: nearest-first deferred acceptance for MEC
/// users, and the nearest eligible DC users for the DC-UAV.
pub fn distance_based_evaluation(problem: &AssociationProblem) -> Association {
    let layout = problem.layout;
    let mut assoc = problem.empty_association();
    let prefs: Vec<Vec<usize>> = layout
        .mec_users()
        .map(|m| sorted_by(layout.mec_uavs().collect(), |u| problem.distance(u, m)))
        .collect();
    deferred_acceptance(
        problem,
        &mut assoc,
        &prefs,
        |u, g| -problem.distance(u, g),
        |_, _| true,
    );
    let dc = layout.dc_uav();
    for n in layout.dc_users() {
        if !problem.eligible[n] {
            continue;
        }
        assoc.assign(n, dc);
        if assoc.load(dc) > problem.capacity {
            let far = worst_of(assoc.served_by(dc), |g| -problem.distance(dc, g));
            assoc.unassign(far);
        }
    }
    assoc
}

/// Rate-based evaluation: deferred acceptance on rates computed under the
/// distance-based seed, admitting only pairs at or above threshold.
pub fn rate_based_evaluation(problem: &AssociationProblem) -> Association {
    let layout = problem.layout;
    let seed = distance_based_evaluation(problem);
    let nu = layout.num_uavs();
    let mut rates = vec![0.0; nu * layout.num_gus()];
    for g in 0..layout.num_gus() {
        if !problem.eligible[g] {
            continue;
        }
        for u in 0..nu {
            if layout.compatible(u, g) {
                rates[u * layout.num_gus() + g] = problem.prospective_rate(&seed, g, u);
            }
        }
    }
    let rate = |u: usize, g: usize| rates[u * layout.num_gus() + g];

    let mut assoc = problem.empty_association();
    let prefs: Vec<Vec<usize>> = layout
        .mec_users()
        .map(|m| sorted_by(layout.mec_uavs().collect(), |u| -rate(u, m)))
        .collect();
    let mec_th = problem.radio.rate_threshold_mec;
    deferred_acceptance(problem, &mut assoc, &prefs, rate, |u, m| {
        rate(u, m) >= mec_th
    });

    let dc = layout.dc_uav();
    for n in layout.dc_users() {
        if !problem.eligible[n] || rate(dc, n) < problem.radio.rate_threshold_dc {
            continue;
        }
        assoc.assign(n, dc);
        if assoc.load(dc) > problem.capacity {
            let low = worst_of(assoc.served_by(dc), |g| rate(dc, g));
            assoc.unassign(low);
        }
    }
    assoc
}

/// A random feasible matching: eligible users in random order, each placed
/// at a uniformly chosen compatible UAV with spare capacity.
pub fn random_association<R: Rng + ?Sized>(problem: &AssociationProblem, rng: &mut R) -> Association {
    let layout = problem.layout;
    let mut assoc = problem.empty_association();
    let mut mec: Vec<usize> = layout.mec_users().filter(|&m| problem.eligible[m]).collect();
    mec.shuffle(rng);
    for m in mec {
        let open: Vec<usize> = layout
            .mec_uavs()
            .filter(|&u| assoc.load(u) < problem.capacity)
            .collect();
        if open.is_empty() {
            break;
        }
        assoc.assign(m, open[rng.random_range(0..open.len())]);
    }
    let mut dc: Vec<usize> = layout.dc_users().filter(|&n| problem.eligible[n]).collect();
    dc.shuffle(rng);
    for n in dc.into_iter().take(problem.capacity) {
        assoc.assign(n, layout.dc_uav());
    }
    assoc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapScope {
    /// Two MEC users at different MEC-UAVs exchange UAVs.
    Mec,
    /// A DC user at the DC-UAV trades places with an eligible unassociated
    /// DC user.
    Dc,
}

/// How a candidate swap's utility is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// Recompute only the UAVs whose rates the swap can change.
    #[default]
    Incremental,
    /// Recompute the whole utility every time.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapPair {
    pub gu_a: usize,
    pub gu_b: usize,
    pub utility_delta: f64,
}

/// Swap search state with cached per-UAV utilities.
struct SwapSearch<'p> {
    problem: &'p AssociationProblem,
    mode: EvalMode,
    per_uav: Vec<f64>,
    evaluations: u64,
}

impl<'p> SwapSearch<'p> {
    fn new(problem: &'p AssociationProblem, assoc: &Association, mode: EvalMode) -> Self {
        let per_uav = (0..assoc.num_uavs())
            .map(|u| problem.uav_utility(assoc, u))
            .collect();
        Self {
            problem,
            mode,
            per_uav,
            evaluations: 0,
        }
    }

    fn total(&self) -> f64 {
        self.per_uav.iter().sum()
    }

    /// UAVs whose utility a swap between `a` and `b` can change.
    fn affected(&self, assoc: &Association, scope: SwapScope, a: usize, b: usize) -> Vec<usize> {
        match (self.mode, scope) {
            (EvalMode::Incremental, SwapScope::Mec) => {
                let mut v = vec![assoc.uav_of(a).unwrap(), assoc.uav_of(b).unwrap()];
                v.sort_unstable();
                v
            }
            _ => (0..assoc.num_uavs()).collect(),
        }
    }

    /// Utility after swapping `a` and `b`, or None if a moved user would
    /// fall below its threshold. Leaves `assoc` unchanged.
    fn evaluate(&mut self, assoc: &mut Association, scope: SwapScope, a: usize, b: usize) -> Option<f64> {
        self.evaluations += 1;
        let affected = self.affected(assoc, scope, a, b);
        assoc.swap_users(a, b);
        let moved_ok = [a, b].iter().all(|&g| match self.problem.rate(assoc, g) {
            Some(r) => r >= self.problem.threshold(g),
            None => true,
        });
        let result = moved_ok.then(|| {
            let mut total = self.total();
            for &u in &affected {
                total += self.problem.uav_utility(assoc, u) - self.per_uav[u];
            }
            total
        });
        assoc.swap_users(a, b);
        result
    }

    fn candidates(&self, assoc: &Association, scope: SwapScope) -> Vec<(usize, usize)> {
        let layout = self.problem.layout;
        let mut out = Vec::new();
        match scope {
            SwapScope::Mec => {
                for a in layout.mec_users() {
                    let Some(ua) = assoc.uav_of(a) else { continue };
                    for b in a + 1..layout.num_mec_users {
                        if let Some(ub) = assoc.uav_of(b) {
                            if ub != ua {
                                out.push((a, b));
                            }
                        }
                    }
                }
            }
            SwapScope::Dc => {
                for a in layout.dc_users() {
                    if assoc.uav_of(a).is_none() {
                        continue;
                    }
                    for b in layout.dc_users() {
                        if b != a && assoc.uav_of(b).is_none() && self.problem.eligible[b] {
                            out.push((a, b));
                        }
                    }
                }
            }
        }
        out
    }

    fn find(&mut self, assoc: &mut Association, scope: SwapScope) -> Option<SwapPair> {
        let base = self.total();
        let bar = SWAP_IMPROVEMENT_TOL * base.abs().max(1.0);
        for (a, b) in self.candidates(assoc, scope) {
            if let Some(v) = self.evaluate(assoc, scope, a, b) {
                if v - base > bar {
                    return Some(SwapPair {
                        gu_a: a,
                        gu_b: b,
                        utility_delta: v - base,
                    });
                }
            }
        }
        None
    }

    fn apply(&mut self, assoc: &mut Association, scope: SwapScope, pair: &SwapPair) {
        let affected = self.affected(assoc, scope, pair.gu_a, pair.gu_b);
        assoc.swap_users(pair.gu_a, pair.gu_b);
        for u in affected {
            self.per_uav[u] = self.problem.uav_utility(assoc, u);
        }
    }
}

/// First swap-blocking pair in ascending (a, b) order within `scope`.
pub fn find_swap_blocking_pair(
    assoc: &Association,
    problem: &AssociationProblem,
    scope: SwapScope,
) -> Option<SwapPair> {
    find_swap_blocking_pair_with(assoc, problem, scope, EvalMode::Incremental)
}

pub fn find_swap_blocking_pair_with(
    assoc: &Association,
    problem: &AssociationProblem,
    scope: SwapScope,
    mode: EvalMode,
) -> Option<SwapPair> {
    let mut work = assoc.clone();
    SwapSearch::new(problem, &work, mode).find(&mut work, scope)
}

/// Result of an association strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub association: Association,
    /// Swap phase stopped at the iteration cap with blocking pairs left.
    pub capped: bool,
    pub swaps: usize,
    /// Candidate swap evaluations performed.
    pub evaluations: u64,
    /// Utility before the swap phase.
    pub initial_utility: f64,
    pub utility: f64,
    /// Utility after each applied swap, in order.
    pub trace: Vec<f64>,
}

/// Applies improving swaps (MEC scope, then DC scope, repeated) until
/// neither scope has a blocking pair or `cap` swaps have been applied.
pub fn swap_matching(
    problem: &AssociationProblem,
    init: Association,
    cap: usize,
    mode: EvalMode,
) -> MatchOutcome {
    let mut assoc = init;
    let mut search = SwapSearch::new(problem, &assoc, mode);
    let initial_utility = search.total();
    let mut trace = Vec::new();
    let mut capped = false;
    'outer: loop {
        for scope in [SwapScope::Mec, SwapScope::Dc] {
            let mut changed = false;
            loop {
                if trace.len() >= cap {
                    capped = search.find(&mut assoc, SwapScope::Mec).is_some()
                        || search.find(&mut assoc, SwapScope::Dc).is_some();
                    break 'outer;
                }
                let Some(pair) = search.find(&mut assoc, scope) else {
                    break;
                };
                search.apply(&mut assoc, scope, &pair);
                trace.push(search.total());
                changed = true;
            }
            if scope == SwapScope::Dc && !changed {
                break 'outer;
            }
        }
    }
    MatchOutcome {
        utility: utility(&assoc, problem),
        association: assoc,
        capped,
        swaps: trace.len(),
        evaluations: search.evaluations,
        initial_utility,
        trace,
    }
}

/// Two-phase matching-based association.
pub fn tma(problem: &AssociationProblem, iteration_cap: usize) -> MatchOutcome {
    swap_matching(problem, rate_based_evaluation(problem), iteration_cap, EvalMode::Incremental)
}

fn no_swaps(problem: &AssociationProblem, association: Association) -> MatchOutcome {
    let u = utility(&association, problem);
    MatchOutcome {
        association,
        capped: false,
        swaps: 0,
        evaluations: 0,
        initial_utility: u,
        utility: u,
        trace: Vec::new(),
    }
}

/// Dispatches to the named strategy.
pub fn strategy_variant<R: Rng + ?Sized>(
    kind: StrategyKind,
    problem: &AssociationProblem,
    rng: &mut R,
    iteration_cap: usize,
) -> MatchOutcome {
    let mode = EvalMode::Incremental;
    match kind {
        StrategyKind::Random => no_swaps(problem, random_association(problem, rng)),
        StrategyKind::DistanceGs => no_swaps(problem, distance_based_evaluation(problem)),
        StrategyKind::RateGs => no_swaps(problem, rate_based_evaluation(problem)),
        StrategyKind::SwapRandomInit => {
            swap_matching(problem, random_association(problem, rng), iteration_cap, mode)
        }
        StrategyKind::SwapDistanceInit => {
            swap_matching(problem, distance_based_evaluation(problem), iteration_cap, mode)
        }
        StrategyKind::Tma => tma(problem, iteration_cap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{uplink_rate, RateContext};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layout(mec_uavs: usize, m: usize, n: usize) -> Layout {
        Layout {
            num_mec_uavs: mec_uavs,
            num_mec_users: m,
            num_dc_users: n,
        }
    }

    fn problem(
        l: Layout,
        capacity: usize,
        uavs: &[[f64; 2]],
        gus: &[[f64; 2]],
        power: f64,
    ) -> AssociationProblem {
        let n = gus.len();
        AssociationProblem::from_positions(
            l,
            capacity,
            RadioParams::default(),
            100.0,
            uavs,
            gus,
            vec![power; n],
            vec![true; n],
        )
        .unwrap()
    }

    fn random_problem(seed: u64, mec_uavs: usize, m: usize, n: usize, half: f64) -> AssociationProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = layout(mec_uavs, m, n);
        let mut pt = || [rng.random_range(-half..half), rng.random_range(-half..half)];
        let uavs: Vec<_> = (0..l.num_uavs()).map(|_| pt()).collect();
        let gus: Vec<_> = (0..l.num_gus()).map(|_| pt()).collect();
        let powers = (0..l.num_gus()).map(|_| rng.random_range(0.05..0.5)).collect();
        AssociationProblem::from_positions(
            l,
            4,
            RadioParams::default(),
            100.0,
            &uavs,
            &gus,
            powers,
            vec![true; l.num_gus()],
        )
        .unwrap()
    }

    /// Sum of gated rates recomputed through the channel module.
    fn brute_utility(a: &Association, p: &AssociationProblem) -> f64 {
        let ctx = RateContext { association: a, powers: &p.powers, gains: &p.gains };
        a.pairs()
            .map(|(g, u)| {
                let r = uplink_rate(g, u, &ctx, &p.radio).unwrap();
                if r >= p.threshold(g) { r } else { 0.0 }
            })
            .sum()
    }

    #[test]
    fn empty_association_has_zero_utility() {
        let p = random_problem(0, 2, 3, 2, 300.0);
        assert_eq!(utility(&p.empty_association(), &p), 0.0);
    }

    #[test]
    fn single_pair_utility_is_its_rate() {
        let p = problem(layout(1, 1, 0), 4, &[[0.0, 0.0], [500.0, 0.0]], &[[10.0, 0.0]], 0.5);
        let mut a = p.empty_association();
        a.assign(0, 0);
        let ctx = RateContext { association: &a, powers: &p.powers, gains: &p.gains };
        let r = uplink_rate(0, 0, &ctx, &p.radio).unwrap();
        assert!((utility(&a, &p) - r).abs() < 1e-6);
    }

    #[test]
    fn utility_matches_channel_module() {
        for seed in 0..20 {
            let p = random_problem(seed, 2, 3, 1, 400.0);
            let a = distance_based_evaluation(&p);
            let u = utility(&a, &p);
            let b = brute_utility(&a, &p);
            assert!((u - b).abs() <= 1e-9 * b.max(1.0), "{u} vs {b}");
        }
    }

    #[test]
    fn distance_capacity_slack() {
        let p = problem(
            layout(1, 2, 0),
            4,
            &[[0.0, 0.0], [700.0, 700.0]],
            &[[10.0, 0.0], [-30.0, 5.0]],
            0.5,
        );
        let a = distance_based_evaluation(&p);
        assert_eq!(a.served_by(0), &[0, 1]);
    }

    #[test]
    fn distance_rejects_farthest() {
        let gus = [[10.0, 0.0], [0.0, 40.0], [-90.0, 0.0], [0.0, -20.0], [60.0, 60.0]];
        let p = problem(layout(1, 5, 0), 4, &[[0.0, 0.0], [700.0, 700.0]], &gus, 0.5);
        let a = distance_based_evaluation(&p);
        // Horizontal distances: 10, 40, 90, 20, 84.85 -> user 2 is farthest.
        assert_eq!(a.uav_of(2), None);
        assert_eq!(a.served_by(0), &[0, 1, 3, 4]);
    }

    #[test]
    fn distance_rejected_user_moves_on() {
        let gus = [[10.0, 0.0], [20.0, 0.0], [30.0, 0.0]];
        let p = problem(layout(2, 3, 0), 2, &[[0.0, 0.0], [300.0, 0.0], [-700.0, 700.0]], &gus, 0.5);
        let a = distance_based_evaluation(&p);
        assert_eq!(a.served_by(0), &[0, 1]);
        assert_eq!(a.served_by(1), &[2]);
    }

    #[test]
    fn ineligible_dc_user_never_associated() {
        let gus = [[10.0, 0.0], [20.0, 0.0]];
        let mut p = problem(layout(1, 1, 1), 4, &[[0.0, 0.0], [20.0, 0.0]], &gus, 0.5);
        p.eligible[1] = false;
        for a in [distance_based_evaluation(&p), rate_based_evaluation(&p), tma(&p, 500).association] {
            assert_eq!(a.uav_of(1), None);
        }
    }

    #[test]
    fn everything_below_threshold_is_empty() {
        let mut p = random_problem(3, 2, 4, 2, 300.0);
        p.radio.rate_threshold_mec = 1e12;
        p.radio.rate_threshold_dc = 1e12;
        assert!(rate_based_evaluation(&p).is_empty());
    }

    #[test]
    fn rate_based_prefers_stronger_uav() {
        // No interference with a single user; UAV 1 sits right above it.
        let p = problem(
            layout(2, 1, 0),
            4,
            &[[300.0, 0.0], [5.0, 0.0], [-700.0, -700.0]],
            &[[0.0, 0.0]],
            0.5,
        );
        let a = rate_based_evaluation(&p);
        assert_eq!(a.uav_of(0), Some(1));
    }

    #[test]
    fn strategies_produce_valid_matchings() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..100 {
            let p = random_problem(seed, 3, 12, 6, 750.0);
            for kind in StrategyKind::ALL {
                let out = strategy_variant(kind, &p, &mut rng, 500);
                let v = out.association.violations(&p.layout, p.capacity);
                assert!(v.is_empty(), "{kind}: {v:?}");
            }
        }
    }

    #[test]
    fn swap_utility_strictly_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..30 {
            let p = random_problem(seed, 3, 12, 6, 500.0);
            let out = swap_matching(&p, random_association(&p, &mut rng), 500, EvalMode::Incremental);
            let mut prev = out.initial_utility;
            for u in &out.trace {
                assert!(*u > prev);
                prev = *u;
            }
            assert!((out.utility - prev).abs() <= 1e-6 * prev.max(1.0));
        }
    }

    #[test]
    fn incremental_matches_exhaustive() {
        for seed in 0..30 {
            let p = random_problem(seed, 3, 10, 6, 500.0);
            let init = distance_based_evaluation(&p);
            let a = swap_matching(&p, init.clone(), 500, EvalMode::Incremental);
            let b = swap_matching(&p, init, 500, EvalMode::Exhaustive);
            assert_eq!(a.association, b.association);
            assert!(b.evaluations >= a.evaluations);
        }
    }

    #[test]
    fn tma_is_stable_and_improves_rate_gs() {
        for seed in 0..40 {
            let p = random_problem(seed, 3, 12, 8, 600.0);
            let out = tma(&p, 500);
            assert!(!out.capped);
            let base = utility(&rate_based_evaluation(&p), &p);
            assert!(out.utility + 1e-6 >= base);
            for scope in [SwapScope::Mec, SwapScope::Dc] {
                assert!(find_swap_blocking_pair_with(&out.association, &p, scope, EvalMode::Exhaustive).is_none());
            }
        }
    }

    #[test]
    fn blocking_pair_found_on_crossed_fixture() {
        // Two MEC-UAVs, each user sits under the other UAV: exchanging them
        // removes both the weak links and the strong cross interference.
        let uavs = [[0.0, 0.0], [400.0, 0.0], [-700.0, -700.0]];
        let gus = [[400.0, 5.0], [0.0, 5.0]];
        let mut p = problem(layout(2, 2, 0), 4, &uavs, &gus, 0.5);
        p.radio.rate_threshold_mec = 0.0;
        let mut a = p.empty_association();
        a.assign(0, 0);
        a.assign(1, 1);
        let pair = find_swap_blocking_pair(&a, &p, SwapScope::Mec).unwrap();
        assert_eq!((pair.gu_a, pair.gu_b), (0, 1));
        assert!(pair.utility_delta > 0.0);
        let mut b = a.clone();
        b.swap_users(0, 1);
        assert!((utility(&b, &p) - utility(&a, &p) - pair.utility_delta).abs() < 1e-3);
        assert!(find_swap_blocking_pair(&b, &p, SwapScope::Mec).is_none());
    }

    #[test]
    fn dc_swap_uses_empty_slot() {
        // Capacity 1: the far DC user holds the slot, a nearer one waits.
        let uavs = [[-700.0, -700.0], [0.0, 0.0]];
        let gus = [[600.0, 600.0], [5.0, 0.0]];
        let mut p = problem(layout(1, 0, 2), 1, &uavs, &gus, 0.5);
        p.radio.rate_threshold_dc = 0.0;
        let mut a = p.empty_association();
        a.assign(0, 1);
        let pair = find_swap_blocking_pair(&a, &p, SwapScope::Dc).unwrap();
        assert_eq!((pair.gu_a, pair.gu_b), (0, 1));
        let out = swap_matching(&p, a, 10, EvalMode::Incremental);
        assert_eq!(out.association.served_by(1), &[1]);
    }

    #[test]
    fn cap_is_reported() {
        let uavs = [[0.0, 0.0], [400.0, 0.0], [-700.0, -700.0]];
        let gus = [[400.0, 5.0], [0.0, 5.0]];
        let mut p = problem(layout(2, 2, 0), 4, &uavs, &gus, 0.5);
        p.radio.rate_threshold_mec = 0.0;
        let mut a = p.empty_association();
        a.assign(0, 0);
        a.assign(1, 1);
        let capped = swap_matching(&p, a.clone(), 0, EvalMode::Incremental);
        assert!(capped.capped);
        assert_eq!(capped.swaps, 0);
        let free = swap_matching(&p, a, 500, EvalMode::Incremental);
        assert!(!free.capped);
        assert_eq!(free.swaps, 1);
    }

    #[test]
    fn dispatch_and_parse() {
        let p = random_problem(2, 3, 12, 6, 600.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(strategy_variant(StrategyKind::Tma, &p, &mut rng, 500), tma(&p, 500));
        let mut r1 = ChaCha8Rng::seed_from_u64(4);
        let mut r2 = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(
            strategy_variant(StrategyKind::Random, &p, &mut r1, 500).association,
            strategy_variant(StrategyKind::Random, &p, &mut r2, 500).association
        );
        let d = strategy_variant(StrategyKind::DistanceGs, &p, &mut rng, 500);
        let s = strategy_variant(StrategyKind::SwapDistanceInit, &p, &mut rng, 500);
        assert!(s.utility + 1e-6 >= d.utility);
        assert_eq!("swap_random_init".parse::<StrategyKind>().unwrap(), StrategyKind::SwapRandomInit);
        assert!(matches!("greedy".parse::<StrategyKind>(), Err(MatchingError::UnknownStrategy(_))));
    }

    #[test]
    fn association_bookkeeping() {
        let mut a = Association::new(2, 4);
        a.assign(3, 0);
        a.assign(1, 0);
        a.assign(2, 1);
        assert_eq!(a.served_by(0), &[1, 3]);
        a.assign(3, 1);
        assert_eq!(a.served_by(0), &[1]);
        assert_eq!(a.served_by(1), &[2, 3]);
        a.swap_users(1, 0);
        assert_eq!(a.uav_of(0), Some(0));
        assert_eq!(a.uav_of(1), None);
        let l = layout(1, 2, 2);
        a.assign(3, 0);
        assert!(a.violations(&l, 4).iter().any(|v| v.contains("incompatible")));
        let mut w = csv::Writer::from_writer(Vec::new());
        a.write_csv_rows(&mut w).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}
