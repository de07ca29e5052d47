//! Fault models: a named fault, its kind, the STs tagged with it and the
//! fixes known for it.

use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::FaultError;
use crate::model::{
    best_first, st_to_record, AttachedFix, FaultId, FixId, KindId, Outcome, SignatureTrace,
};
use crate::store::{merge_equivalent, MergePolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultModel {
    fault: FaultId,
    kind: KindId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    fixes: Vec<AttachedFix>,
    #[serde(default)]
    tagged: Vec<SignatureTrace>,
}

impl FaultModel {
    pub fn new(fault: impl Into<FaultId>, kind: impl Into<KindId>) -> Self {
        Self {
            fault: fault.into(),
            kind: kind.into(),
            fixes: Vec::new(),
            tagged: Vec::new(),
        }
    }

    /// Builder-style: attaches a fix with the given statistics.
    pub fn with_fix(mut self, fix: impl Into<FixId>, successes: u64, attempts: u64) -> Self {
        self.set_fix(AttachedFix::with_stats(fix, successes, attempts))
            .expect("fix statistics valid");
        self
    }

    /// Builder-style: tags an ST.
    pub fn with_tagged(mut self, st: SignatureTrace) -> Self {
        self.tag(st);
        self
    }

    pub fn fault(&self) -> &FaultId {
        &self.fault
    }

    pub fn kind(&self) -> &KindId {
        &self.kind
    }

    pub fn fixes(&self) -> &[AttachedFix] {
        &self.fixes
    }

    pub fn tagged(&self) -> &[SignatureTrace] {
        &self.tagged
    }

    pub fn fix(&self, id: &FixId) -> Option<&AttachedFix> {
        self.fixes.iter().find(|f| &f.fix == id)
    }

    /// The ST standing for the whole model: the most observed tagged one.
    pub fn representative(&self) -> Option<&SignatureTrace> {
        self.tagged.first()
    }

    pub fn set_fix(&mut self, fix: AttachedFix) -> Result<(), FaultError> {
        if fix.successes > fix.attempts {
            return Err(FaultError::InvalidFixStats(fix.fix));
        }
        match self.fixes.iter_mut().find(|f| f.fix == fix.fix) {
            Some(slot) => *slot = fix,
            None => self.fixes.push(fix),
        }
        self.fixes.sort_by(|a, b| a.fix.cmp(&b.fix));
        Ok(())
    }

    pub fn record_fix_outcome(&mut self, fix: &FixId, succeeded: bool) -> Result<(), FaultError> {
        let slot = self
            .fixes
            .iter_mut()
            .find(|f| &f.fix == fix)
            .ok_or_else(|| FaultError::UnattachedFix(fix.clone()))?;
        slot.record(succeeded);
        Ok(())
    }

    /// Tags an ST with this model's fault. An equivalent tagged ST absorbs it;
    /// otherwise it is added. Returns whether a new ST was added.
    pub fn tag(&mut self, st: SignatureTrace) -> bool {
        let mut st = st;
        if st.trace.terminal_stack.is_none() {
            st.trace.terminal_stack =
                Some(st.trace.methods().last().cloned().into_iter().collect());
        }
        st.fixes.clear();
        st.relabel(Outcome::Fault(self.fault.clone()));
        let policy = MergePolicy::default();
        let added = match self
            .tagged
            .iter_mut()
            .find(|t| merge_equivalent(t, &st, &policy))
        {
            Some(t) => {
                *t = crate::store::combine_observation(t, &st, policy);
                false
            }
            None => {
                self.tagged.push(st);
                true
            }
        };
        self.tagged
            .sort_by_cached_key(|t| (Reverse(t.occurrences().total()), st_to_record(t)));
        added
    }

    /// Checks the model invariants.
    pub fn validate(&self) -> Result<(), FaultError> {
        for st in &self.tagged {
            st.validate()?;
            if st.outcome().fault_id() != Some(&self.fault) {
                return Err(FaultError::Mislabeled(self.fault.clone()));
            }
        }
        if let Some(f) = self.fixes.iter().find(|f| f.successes > f.attempts) {
            return Err(FaultError::InvalidFixStats(f.fix.clone()));
        }
        Ok(())
    }
}

/// Best fix of the model: highest smoothed success rate, lowest id on ties.
pub fn find_fix(model: &FaultModel) -> Result<&AttachedFix, FaultError> {
    model
        .fixes
        .iter()
        .min_by(|a, b| best_first(a, b))
        .ok_or_else(|| FaultError::NoFixes(model.fault.clone()))
}
