//! The search loop behind [`on_failure`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use super::{
    EscalationLog, EscalationRecord, FixSource, FixTrial, HealError, HealResult, HealingConfig,
    HealingOutcome, Knowledge, Phase,
};
use crate::fault::{classify, Decision, FaultModelDb, MatchCategory, MatchParams};
use crate::model::{best_first, st_to_record, AttachedFix, FixId, SignatureTrace};
use crate::sim::{Checkpoint, SimApp};
use crate::store::{merge_equivalent, DstEntry, EntryId, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

/// Runs one recovery action and replays the failed run. When the run still
/// fails, the application goes back to `checkpoint`.
pub fn apply_fix(
    fix: &FixId,
    app: &mut SimApp,
    checkpoint: &Checkpoint,
) -> Result<Stability, HealError> {
    if app.is_stable() {
        return Err(HealError::AlreadyStable);
    }
    let report = app.apply_recovery(fix);
    if report.known && app.rerun_failed() {
        return Ok(Stability::Stable);
    }
    app.restore(checkpoint)?;
    Ok(Stability::Unstable)
}

/// Searches for a fix that brings `app` back to a stable state.
pub fn on_failure<K: Knowledge + ?Sized>(
    app: &mut SimApp,
    st_c: &SignatureTrace,
    knowledge: &mut K,
    models: &mut FaultModelDb,
    config: &HealingConfig,
    log: &mut EscalationLog,
) -> Result<HealingOutcome, HealError> {
    config.validate()?;
    if app.is_stable() {
        return Err(HealError::AlreadyStable);
    }
    if !st_c.outcome().is_fault() {
        return Err(HealError::NotAFault);
    }
    let checkpoint = app.checkpoint();
    let params = *models.params();
    let mut s = Search {
        app,
        st_c,
        knowledge,
        models,
        config,
        params,
        checkpoint,
        tried: BTreeSet::new(),
        trials: Vec::new(),
        elapsed: 0,
        distances: BTreeMap::new(),
        comparisons: 0,
        depth_reached: 0,
        refreshes: 0,
        partials: BTreeMap::new(),
    };
    match s.run()? {
        Ok(fix) => Ok(s.finish(HealResult::Healed {
            fix,
            attempts: s.trials.len(),
        })),
        Err(reason) => {
            let st = s.st_c;
            let record = EscalationRecord {
                node: s.app.node().clone(),
                run: st.meta().run,
                fault: st.outcome().fault_id().cloned().expect("checked on entry"),
                reason,
                st: st_to_record(st),
                tried: s.trials.clone(),
                state: s.app.checkpoint().as_str().to_string(),
                elapsed: s.elapsed,
            };
            log.append(record.clone())?;
            Ok(s.finish(HealResult::Escalated {
                record: Box::new(record),
            }))
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    fix: AttachedFix,
    source: FixSource,
}

struct Partial {
    entry: EntryId,
    st: SignatureTrace,
    distance: f64,
}

struct Search<'a, K: Knowledge + ?Sized> {
    app: &'a mut SimApp,
    st_c: &'a SignatureTrace,
    knowledge: &'a mut K,
    models: &'a mut FaultModelDb,
    config: &'a HealingConfig,
    params: MatchParams,
    checkpoint: Checkpoint,
    tried: BTreeSet<FixId>,
    trials: Vec<FixTrial>,
    elapsed: u64,
    /// Distances of store entries to the failure, valid until a refresh.
    distances: BTreeMap<EntryId, f64>,
    comparisons: u64,
    depth_reached: u32,
    refreshes: u32,
    /// Partially matching entries, by record text.
    partials: BTreeMap<String, Partial>,
}

/// `Ok(Ok(fix))` healed, `Ok(Err(reason))` escalate.
type Verdict = Result<Result<FixId, String>, HealError>;

impl<K: Knowledge + ?Sized> Search<'_, K> {
    fn finish(&self, result: HealResult) -> HealingOutcome {
        HealingOutcome {
            result,
            elapsed: self.elapsed,
            trials: self.trials.clone(),
            comparisons: self.comparisons,
            depth_reached: self.depth_reached,
            refreshes: self.refreshes,
        }
    }

    fn run(&mut self) -> Verdict {
        if let Some(c) = self.fast_path() {
            if self.trial(&c, Phase::Exact)? == Some(true) {
                return Ok(Ok(c.fix.fix));
            }
            if let Some(c) = self.parts(self.st_c, 1)? {
                return Ok(Ok(c.fix.fix));
            }
        }
        loop {
            let mut tried_now = 0;
            for c in self.fix_list()? {
                match self.trial(&c, Phase::List)? {
                    Some(true) => return Ok(Ok(c.fix.fix)),
                    Some(false) => {
                        tried_now += 1;
                        if let Some(c) = self.parts(self.st_c, 1)? {
                            return Ok(Ok(c.fix.fix));
                        }
                    }
                    None => {}
                }
            }
            if let Some(c) = self.pick_candidate() {
                match self.trial(&c, Phase::Candidate)? {
                    Some(true) => return Ok(Ok(c.fix.fix)),
                    Some(false) => tried_now += 1,
                    None => {}
                }
            }
            if self.elapsed >= self.config.time_limit {
                return Ok(Err(format!(
                    "time limit of {} ticks reached",
                    self.config.time_limit
                )));
            }
            if self.trials.len() >= self.config.fix_attempt_cap {
                return Ok(Err(format!(
                    "{} fix trials without success",
                    self.trials.len()
                )));
            }
            let changed = self.knowledge.refresh();
            self.refreshes += 1;
            self.elapsed += self.config.trial_ticks;
            if changed {
                self.distances.clear();
            } else if tried_now == 0 {
                return Ok(Err(if self.trials.is_empty() {
                    "no fix known for this failure".to_string()
                } else {
                    "no untried fix left".to_string()
                }));
            }
        }
    }

    fn exhausted(&self) -> bool {
        self.elapsed >= self.config.time_limit || self.trials.len() >= self.config.fix_attempt_cap
    }

    fn distance(&mut self, e: &DstEntry) -> f64 {
        if let Some(&d) = self.distances.get(&e.id()) {
            return d;
        }
        self.comparisons += 1;
        let d = self.params.distance(self.st_c, e.st());
        self.distances.insert(e.id(), d);
        d
    }

    fn entries(&self) -> Vec<DstEntry> {
        self.knowledge.dst().entries().to_vec()
    }

    fn fixes_of(e: &DstEntry) -> Vec<Candidate> {
        let mut fixes = e.st().fixes().to_vec();
        fixes.sort_by(best_first);
        fixes
            .into_iter()
            .map(|fix| Candidate {
                fix,
                source: FixSource::Store { entry: e.id() },
            })
            .collect()
    }

    /// Walks the store in rank order and stops at the first entry that
    /// matches exactly and carries a fix.
    fn fast_path(&mut self) -> Option<Candidate> {
        for e in self.entries() {
            let d = self.distance(&e);
            if e.st().outcome().is_fault() && d <= self.params.eps_exact {
                if let Some(c) = Self::fixes_of(&e).into_iter().next() {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Fixes of exactly matching store entries and of the models the
    /// classifier keeps, best rate first.
    fn fix_list(&mut self) -> Result<Vec<Candidate>, HealError> {
        let mut list: Vec<Candidate> = Vec::new();
        for e in self.entries() {
            let d = self.distance(&e);
            if !e.st().outcome().is_fault() || e.st().fixes().is_empty() {
                continue;
            }
            if d <= self.params.eps_exact {
                list.extend(Self::fixes_of(&e));
            } else if d <= self.config.eps {
                self.partials.insert(
                    e.record().to_string(),
                    Partial {
                        entry: e.id(),
                        st: e.st().clone(),
                        distance: d,
                    },
                );
            }
        }

        let c = classify(self.st_c, self.models, &self.params);
        self.comparisons += c.comparisons;
        // The winner's fixes (or the one borrowed from a sibling), then the
        // fixes of every other model the classifier kept as a positive match.
        if let Decision::Fix {
            fix,
            model,
            borrowed_from,
        } = &c.decision
        {
            let source = FixSource::Model {
                model: model.clone(),
            };
            let fixes: Vec<AttachedFix> = match borrowed_from {
                Some(owner) => self
                    .models
                    .model(owner)
                    .and_then(|m| m.fix(fix))
                    .cloned()
                    .into_iter()
                    .collect(),
                None => self
                    .models
                    .model(model)
                    .map(|m| m.fixes().to_vec())
                    .unwrap_or_default(),
            };
            list.extend(fixes.into_iter().map(|fix| Candidate {
                fix,
                source: source.clone(),
            }));
        }
        for id in c.ranked.iter().skip(1) {
            let positive = c.result(id).is_some_and(|r| {
                matches!(r.category, MatchCategory::Exact | MatchCategory::Positive)
            });
            let Some(m) = self.models.model(id).filter(|_| positive) else {
                continue;
            };
            list.extend(m.fixes().iter().map(|fix| Candidate {
                fix: fix.clone(),
                source: FixSource::Model { model: id.clone() },
            }));
        }

        // One entry per fix, keeping the better rate; earlier sources win ties.
        let mut best: BTreeMap<FixId, Candidate> = BTreeMap::new();
        for c in list {
            match best.get(&c.fix.fix) {
                Some(kept) if c.fix.rate_cmp(&kept.fix) != Ordering::Greater => {}
                _ => {
                    best.insert(c.fix.fix.clone(), c);
                }
            }
        }
        let mut out: Vec<Candidate> = best.into_values().collect();
        out.sort_by(|a, b| best_first(&a.fix, &b.fix));
        Ok(out)
    }

    /// Tries fixes of store entries that are exact parts of `target`, then
    /// of their parts, down to the depth bound.
    fn parts(
        &mut self,
        target: &SignatureTrace,
        depth: u32,
    ) -> Result<Option<Candidate>, HealError> {
        if depth > self.config.max_depth || self.exhausted() {
            return Ok(None);
        }
        self.depth_reached = self.depth_reached.max(depth);
        for e in self.entries() {
            if !e.st().outcome().is_fault() || e.st().fixes().is_empty() {
                continue;
            }
            self.comparisons += 1;
            if !is_part(e.st(), target) {
                continue;
            }
            for c in Self::fixes_of(&e) {
                if self.trial(&c, Phase::Part { depth })? == Some(true) {
                    return Ok(Some(c));
                }
            }
            if let Some(c) = self.parts(e.st(), depth + 1)? {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }

    /// Among partial matches with an untried fix, keeps the best `n` by
    /// success rate and returns the fix of the closest one.
    fn pick_candidate(&self) -> Option<Candidate> {
        let mut pool: Vec<(Candidate, f64)> = self
            .partials
            .values()
            .filter_map(|p| {
                let mut fixes: Vec<&AttachedFix> =
                    p.st.fixes()
                        .iter()
                        .filter(|f| !self.tried.contains(&f.fix))
                        .collect();
                fixes.sort_by(|a, b| best_first(a, b));
                fixes.first().map(|f| {
                    (
                        Candidate {
                            fix: (*f).clone(),
                            source: FixSource::Store { entry: p.entry },
                        },
                        p.distance,
                    )
                })
            })
            .collect();
        // Stable sort: equal rates stay in record order.
        pool.sort_by(|a, b| b.0.fix.rate_cmp(&a.0.fix));
        pool.truncate(self.config.candidates);
        pool.into_iter()
            .reduce(|best, x| if x.1 < best.1 { x } else { best })
            .map(|(c, _)| c)
    }

    /// Tries one fix. `None` when it was tried before or the budget is spent.
    fn trial(&mut self, c: &Candidate, phase: Phase) -> Result<Option<bool>, HealError> {
        if self.tried.contains(&c.fix.fix) || self.exhausted() {
            return Ok(None);
        }
        self.tried.insert(c.fix.fix.clone());
        let stable = apply_fix(&c.fix.fix, self.app, &self.checkpoint)? == Stability::Stable;
        self.elapsed += self.config.trial_ticks;
        self.trials.push(FixTrial {
            fix: c.fix.fix.clone(),
            source: c.source.clone(),
            phase,
            stable,
            tick: self.elapsed,
        });
        if stable {
            self.reward(c)?;
        } else {
            self.penalize(c)?;
        }
        Ok(Some(stable))
    }

    fn penalize(&mut self, c: &Candidate) -> Result<(), HealError> {
        let fix = &c.fix.fix;
        match &c.source {
            FixSource::Store { entry } => {
                match self
                    .knowledge
                    .dst_mut()
                    .record_fix_outcome(*entry, fix, false)
                {
                    // Pruned in the meantime: nothing left to update.
                    Err(StoreError::UnknownEntry(_)) => Ok(()),
                    r => Ok(r?),
                }
            }
            FixSource::Model { model } => {
                self.models.ensure_fix(model, fix)?;
                Ok(self.models.record_fix_outcome(model, fix, false)?)
            }
        }
    }

    /// Credits the fix where it came from and stores the failure with it.
    fn reward(&mut self, c: &Candidate) -> Result<(), HealError> {
        let fix = &c.fix.fix;
        let mut learned = self.st_c.clone();
        let mut stats = AttachedFix::with_stats(fix.clone(), 1, 1);
        match &c.source {
            FixSource::Store { entry } => {
                let dst = self.knowledge.dst_mut();
                if let Some(e) = dst.get(*entry) {
                    // When the failure folds into the same entry, its merge
                    // must not count the success a second time.
                    if merge_equivalent(e.st(), self.st_c, dst.policy()) {
                        stats = AttachedFix::new(fix.clone());
                    }
                    dst.record_fix_outcome(*entry, fix, true)?;
                }
            }
            FixSource::Model { model } => {
                self.models.ensure_fix(model, fix)?;
                self.models.record_fix_outcome(model, fix, true)?;
                self.models.tag(model, self.st_c.clone())?;
            }
        }
        learned.attach_fix_stats(stats)?;
        self.knowledge.dst_mut().merge_st(learned);
        Ok(())
    }
}

/// True when `part` is a proper part of `whole`: its calls occur
/// contiguously in `whole`, each of its entities is present in `whole` with
/// an overlapping value, and it is strictly smaller.
fn is_part(part: &SignatureTrace, whole: &SignatureTrace) -> bool {
    let smaller = part.trace().methods().count() < whole.trace().methods().count()
        || part.signature().len() < whole.signature().len();
    smaller
        && part.trace().is_contiguous_in(whole.trace())
        && part.signature().iter().all(|p| {
            whole
                .entity(&p.key)
                .is_some_and(|w| w.value.overlaps(&p.value))
        })
}
