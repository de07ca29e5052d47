//! The fault-model database and its text form.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::graph::{rebuild_graph, FaultModelGraph};
use super::kinds::{FaultKind, KindForest};
use super::matching::MatchParams;
use super::model::FaultModel;
use super::FaultError;
use crate::model::{decode, encode, AttachedFix, FaultId, FixId, SignatureTrace};

/// All fault models with their kind tree and the graph relating them. The
/// graph is rebuilt after every change.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultModelDb {
    forest: KindForest,
    params: MatchParams,
    models: BTreeMap<FaultId, FaultModel>,
    graph: FaultModelGraph,
}

impl FaultModelDb {
    pub fn new(forest: KindForest, params: MatchParams) -> Self {
        Self {
            forest,
            params,
            models: BTreeMap::new(),
            graph: FaultModelGraph::default(),
        }
    }

    pub fn forest(&self) -> &KindForest {
        &self.forest
    }

    pub fn params(&self) -> &MatchParams {
        &self.params
    }

    pub fn graph(&self) -> &FaultModelGraph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Models in fault-id order.
    pub fn models(&self) -> impl Iterator<Item = &FaultModel> {
        self.models.values()
    }

    pub fn model(&self, id: &FaultId) -> Option<&FaultModel> {
        self.models.get(id)
    }

    pub fn add_model(&mut self, model: FaultModel) -> Result<(), FaultError> {
        if !self.forest.contains(model.kind()) {
            return Err(FaultError::UnknownKind(model.kind().clone()));
        }
        if self.models.contains_key(model.fault()) {
            return Err(FaultError::DuplicateModel(model.fault().clone()));
        }
        model.validate()?;
        self.models.insert(model.fault().clone(), model);
        self.rebuild()
    }

    fn model_mut(&mut self, id: &FaultId) -> Result<&mut FaultModel, FaultError> {
        self.models
            .get_mut(id)
            .ok_or_else(|| FaultError::UnknownModel(id.clone()))
    }

    /// Tags an ST with a model's fault.
    pub fn tag(&mut self, fault: &FaultId, st: SignatureTrace) -> Result<bool, FaultError> {
        let added = self.model_mut(fault)?.tag(st);
        self.rebuild()?;
        Ok(added)
    }

    /// Attaches a fix with empty statistics unless already attached.
    pub fn ensure_fix(&mut self, fault: &FaultId, fix: &FixId) -> Result<(), FaultError> {
        let m = self.model_mut(fault)?;
        if m.fix(fix).is_none() {
            m.set_fix(AttachedFix::new(fix.clone()))?;
        }
        Ok(())
    }

    pub fn record_fix_outcome(
        &mut self,
        fault: &FaultId,
        fix: &FixId,
        succeeded: bool,
    ) -> Result<(), FaultError> {
        self.model_mut(fault)?.record_fix_outcome(fix, succeeded)
    }

    fn rebuild(&mut self) -> Result<(), FaultError> {
        self.graph = rebuild_graph(self.models.values(), &self.forest, &self.params)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    store: String,
    #[serde(flatten)]
    params: MatchParams,
    kinds: Vec<FaultKind>,
    models: usize,
}

const STORE_TAG: &str = "fault-models";

fn corrupt(line: usize, reason: impl ToString) -> FaultError {
    FaultError::Corrupt {
        line,
        reason: reason.to_string(),
    }
}

pub fn db_to_text(db: &FaultModelDb) -> String {
    let mut out = encode(&Header {
        store: STORE_TAG.to_string(),
        params: db.params,
        kinds: db.forest.kinds().collect(),
        models: db.len(),
    });
    out.push('\n');
    for m in db.models() {
        out.push_str(&encode(m));
        out.push('\n');
    }
    out
}

pub fn db_from_text(text: &str) -> Result<FaultModelDb, FaultError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (n, first) = lines.next().ok_or_else(|| corrupt(1, "missing header"))?;
    let header: Header = decode(first).map_err(|e| corrupt(n, e))?;
    if header.store != STORE_TAG {
        return Err(corrupt(n, "not a fault-model database"));
    }
    let forest = KindForest::new(header.kinds).map_err(|e| corrupt(n, e))?;
    let mut db = FaultModelDb::new(forest, header.params);
    let mut last = n;
    for (n, line) in lines {
        last = n;
        let m: FaultModel = decode(line).map_err(|e| corrupt(n, e))?;
        m.validate().map_err(|e| corrupt(n, e))?;
        if !db.forest.contains(m.kind()) {
            return Err(corrupt(n, format!("unknown kind `{}`", m.kind())));
        }
        if db.models.insert(m.fault().clone(), m).is_some() {
            return Err(corrupt(n, "duplicate fault model"));
        }
    }
    if db.len() != header.models {
        return Err(corrupt(
            last,
            format!(
                "header announces {} models, found {}",
                header.models,
                db.len()
            ),
        ));
    }
    db.rebuild()?;
    Ok(db)
}

pub fn save_db(path: impl AsRef<Path>, db: &FaultModelDb) -> Result<(), FaultError> {
    let path = path.as_ref();
    fs::write(path, db_to_text(db)).map_err(|source| FaultError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_db(path: impl AsRef<Path>) -> Result<FaultModelDb, FaultError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FaultError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    db_from_text(&text)
}
