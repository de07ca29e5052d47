//! Text form of the stores: a header record followed by one ST record per
//! line. Loading and saving again reproduces the input byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dk::DomainKnowledge;
use super::dst::{Dst, DstEntry, EntryId};
use super::equivalence::MergePolicy;
use super::StoreError;
use crate::model::{decode, encode, NodeId, SignatureTrace, WidenPolicy};

#[derive(Serialize, Deserialize)]
#[serde(tag = "store", rename_all = "kebab-case")]
enum Header {
    Dst {
        node: NodeId,
        version: u64,
        threshold: usize,
        next_id: u64,
        key_overlap: f64,
        set_cap: usize,
        entries: usize,
    },
    Dk {
        sources: usize,
        min_sources: usize,
        threshold: usize,
        key_overlap: f64,
        set_cap: usize,
        entries: usize,
    },
}

#[derive(Serialize)]
struct EntryOut<'a> {
    id: EntryId,
    #[serde(flatten)]
    st: &'a SignatureTrace,
}

#[derive(Deserialize)]
struct EntryIn {
    id: EntryId,
    #[serde(flatten)]
    st: SignatureTrace,
}

fn corrupt(line: usize, reason: impl ToString) -> StoreError {
    StoreError::Corrupt {
        line,
        reason: reason.to_string(),
    }
}

fn policy(key_overlap: f64, set_cap: usize) -> MergePolicy {
    MergePolicy {
        key_overlap,
        widen: WidenPolicy { set_cap },
    }
}

pub fn dst_to_text(dst: &Dst) -> String {
    let p = dst.policy();
    let mut out = encode(&Header::Dst {
        node: dst.node().clone(),
        version: dst.version(),
        threshold: dst.threshold(),
        next_id: dst.next_id(),
        key_overlap: p.key_overlap,
        set_cap: p.widen.set_cap,
        entries: dst.len(),
    });
    out.push('\n');
    for e in dst.entries() {
        out.push_str(&encode(&EntryOut {
            id: e.id(),
            st: e.st(),
        }));
        out.push('\n');
    }
    out
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn header(text: &str) -> Result<(Header, impl Iterator<Item = (usize, &str)>), StoreError> {
    let mut it = lines(text);
    let (n, first) = it.next().ok_or_else(|| corrupt(1, "missing header"))?;
    let header = decode(first).map_err(|e| corrupt(n, e))?;
    Ok((header, it))
}

fn read_st(n: usize, line: &str) -> Result<SignatureTrace, StoreError> {
    let st: SignatureTrace = decode(line).map_err(|e| corrupt(n, e))?;
    st.validate().map_err(|e| corrupt(n, e))?;
    Ok(st)
}

pub fn dst_from_text(text: &str) -> Result<Dst, StoreError> {
    let (h, rest) = header(text)?;
    let Header::Dst {
        node,
        version,
        threshold,
        next_id,
        key_overlap,
        set_cap,
        entries: count,
    } = h
    else {
        return Err(corrupt(1, "not a DST store"));
    };
    let mut entries = Vec::new();
    let mut last = 1;
    for (n, line) in rest {
        last = n;
        let rec: EntryIn = decode(line).map_err(|e| corrupt(n, e))?;
        rec.st.validate().map_err(|e| corrupt(n, e))?;
        if rec.id.0 >= next_id {
            return Err(corrupt(
                n,
                format!("entry id {} not below next id {next_id}", rec.id),
            ));
        }
        if entries.iter().any(|e: &DstEntry| e.id() == rec.id) {
            return Err(corrupt(n, format!("duplicate entry id {}", rec.id)));
        }
        entries.push(DstEntry::new(rec.id, rec.st));
    }
    if entries.len() != count {
        return Err(corrupt(
            last,
            format!("header announces {count} entries, found {}", entries.len()),
        ));
    }
    let dst = Dst::from_parts(
        node,
        threshold,
        version,
        next_id,
        policy(key_overlap, set_cap),
        entries,
    );
    if !dst.is_canonical() {
        return Err(corrupt(
            last,
            "entries out of rank order or above threshold",
        ));
    }
    Ok(dst)
}

pub fn dk_to_text(dk: &DomainKnowledge) -> String {
    let p = dk.policy();
    let mut out = encode(&Header::Dk {
        sources: dk.source_count(),
        min_sources: dk.min_sources(),
        threshold: dk.threshold(),
        key_overlap: p.key_overlap,
        set_cap: p.widen.set_cap,
        entries: dk.len(),
    });
    out.push('\n');
    for st in dk.entries() {
        out.push_str(&encode(st));
        out.push('\n');
    }
    out
}

pub fn dk_from_text(text: &str) -> Result<DomainKnowledge, StoreError> {
    let (h, rest) = header(text)?;
    let Header::Dk {
        sources,
        min_sources,
        threshold,
        key_overlap,
        set_cap,
        entries: count,
    } = h
    else {
        return Err(corrupt(1, "not a domain-knowledge store"));
    };
    let mut entries = Vec::new();
    let mut last = 1;
    for (n, line) in rest {
        last = n;
        entries.push(read_st(n, line)?);
    }
    if entries.len() != count {
        return Err(corrupt(
            last,
            format!("header announces {count} entries, found {}", entries.len()),
        ));
    }
    Ok(DomainKnowledge::from_parts(
        entries,
        sources,
        min_sources,
        threshold,
        policy(key_overlap, set_cap),
    ))
}

fn write(path: &Path, text: &str) -> Result<(), StoreError> {
    fs::write(path, text).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_dst(path: impl AsRef<Path>, dst: &Dst) -> Result<(), StoreError> {
    write(path.as_ref(), &dst_to_text(dst))
}

pub fn load_dst(path: impl AsRef<Path>) -> Result<Dst, StoreError> {
    dst_from_text(&read(path.as_ref())?)
}

pub fn save_dk(path: impl AsRef<Path>, dk: &DomainKnowledge) -> Result<(), StoreError> {
    write(path.as_ref(), &dk_to_text(dk))
}

pub fn load_dk(path: impl AsRef<Path>) -> Result<DomainKnowledge, StoreError> {
    dk_from_text(&read(path.as_ref())?)
}
