//! Directory-backed program store.
//!
//! Layout: `programs/<id>.json` holds one program with its document, revision
//! and last successful pipeline. `index.json` lists ids and revisions. The
//! program files are the source of truth; the index is rewritten after every
//! change and rebuilt from the files when it disagrees with them on open.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use zoea_core::compile::{verify_pipeline, Library, Pipeline};
use zoea_core::graph::{ColumnKind, Document, GraphError};
use zoea_core::synth::CATALOG_VERSION;

use crate::fs::{self as afs, FaultHook, NoFaults};
use crate::ServiceError;

/// One program as persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredProgram {
    pub id: String,
    pub revision: u64,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub document: Document,
    /// Last successful compile, with the revision it was compiled from.
    pub pipeline: Option<(Pipeline, u64)>,
}

impl StoredProgram {
    /// True when the pipeline was compiled from the current revision.
    pub fn is_compiled(&self) -> bool {
        matches!(&self.pipeline, Some((_, r)) if *r == self.revision)
    }

    fn to_file(&self) -> String {
        let file = ProgramFile {
            id: self.id.clone(),
            revision: self.revision,
            created_ms: self.created_ms,
            updated_ms: self.updated_ms,
            document: RawValue::from_string(self.document.to_json()).expect("document JSON"),
            pipeline: self.pipeline.as_ref().map(|(p, _)| p.clone()),
            pipeline_revision: self.pipeline.as_ref().map(|(_, r)| *r),
        };
        serde_json::to_string_pretty(&file).expect("program serializes")
    }

    fn from_file(text: &str) -> Result<StoredProgram, String> {
        let file: ProgramFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let document = Document::from_json(file.document.get()).map_err(|e| e.to_string())?;
        let pipeline = match (file.pipeline, file.pipeline_revision) {
            (Some(p), Some(r)) => Some((p, r)),
            _ => None,
        };
        Ok(StoredProgram {
            id: file.id,
            revision: file.revision,
            created_ms: file.created_ms,
            updated_ms: file.updated_ms,
            document,
            pipeline,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ProgramFile {
    id: String,
    revision: u64,
    created_ms: u64,
    updated_ms: u64,
    document: Box<RawValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pipeline: Option<Pipeline>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pipeline_revision: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub revision: u64,
}

#[derive(Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct IndexFile {
    programs: Vec<IndexEntry>,
}

/// What `open` found and repaired.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Recovery {
    pub temp_files_removed: bool,
    pub index_rebuilt: bool,
    /// Programs whose pipeline no longer replays their cases and was dropped.
    pub pipelines_dropped: Vec<String>,
    /// Program files that could not be read.
    pub unreadable: Vec<PathBuf>,
}

pub struct Store {
    dir: PathBuf,
    programs: RwLock<BTreeMap<String, StoredProgram>>,
    /// Serializes file writes so the index always follows the program files.
    write: Mutex<()>,
    compiling: Mutex<BTreeSet<String>>,
    hook: Arc<dyn FaultHook>,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> Result<(Store, Recovery), ServiceError> {
        Store::open_with(dir, Arc::new(NoFaults))
    }

    /// Opens a store whose writes consult `hook` for injected faults.
    pub fn open_with(dir: impl Into<PathBuf>, hook: Arc<dyn FaultHook>) -> Result<(Store, Recovery), ServiceError> {
        let dir = dir.into();
        let programs_dir = dir.join("programs");
        std::fs::create_dir_all(&programs_dir)?;
        let mut recovery = Recovery::default();
        let had_temp = |d: &Path| -> io::Result<bool> {
            let before = std::fs::read_dir(d)?.count();
            afs::remove_temp_files(d)?;
            Ok(std::fs::read_dir(d)?.count() != before)
        };
        recovery.temp_files_removed = had_temp(&dir)? | had_temp(&programs_dir)?;

        let mut programs = BTreeMap::new();
        for entry in std::fs::read_dir(&programs_dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            match std::fs::read_to_string(&path).map_err(|e| e.to_string()).and_then(|t| StoredProgram::from_file(&t)) {
                Ok(p) if p.id == stem => {
                    programs.insert(p.id.clone(), p);
                }
                Ok(_) | Err(_) => recovery.unreadable.push(path),
            }
        }
        recovery.pipelines_dropped = drop_bad_pipelines(&mut programs);

        let store = Store {
            dir,
            programs: RwLock::new(programs),
            write: Mutex::new(()),
            compiling: Mutex::new(BTreeSet::new()),
            hook,
        };
        let _w = store.write.lock().unwrap();
        for id in &recovery.pipelines_dropped {
            let p = store.programs.read().unwrap()[id].clone();
            store.write_program(&p)?;
        }
        let expected = store.index_file();
        let on_disk = std::fs::read_to_string(store.index_path())
            .ok()
            .and_then(|t| serde_json::from_str::<IndexFile>(&t).ok());
        if on_disk.as_ref() != Some(&expected) {
            recovery.index_rebuilt = true;
            store.write_index()?;
        }
        drop(_w);
        Ok((store, recovery))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn index_path(&self) -> PathBuf {
        self.dir.join("index.json")
    }

    fn program_path(&self, id: &str) -> PathBuf {
        self.dir.join("programs").join(format!("{id}.json"))
    }

    fn index_file(&self) -> IndexFile {
        IndexFile {
            programs: self
                .programs
                .read()
                .unwrap()
                .values()
                .map(|p| IndexEntry {
                    id: p.id.clone(),
                    revision: p.revision,
                })
                .collect(),
        }
    }

    fn write_index(&self) -> Result<(), ServiceError> {
        let text = serde_json::to_string_pretty(&self.index_file()).expect("index serializes");
        afs::write_atomic(&self.index_path(), text.as_bytes(), self.hook.as_ref())?;
        Ok(())
    }

    fn write_program(&self, p: &StoredProgram) -> Result<(), ServiceError> {
        afs::write_atomic(&self.program_path(&p.id), p.to_file().as_bytes(), self.hook.as_ref())?;
        Ok(())
    }

    /// Applies `change` to a copy of the stored program (or `None` for a new
    /// one), writes the result, then publishes it in memory and in the index.
    fn update(
        &self,
        id: &str,
        change: impl FnOnce(Option<&StoredProgram>) -> Result<Option<StoredProgram>, ServiceError>,
    ) -> Result<Option<StoredProgram>, ServiceError> {
        let _w = self.write.lock().unwrap();
        let current = self.programs.read().unwrap().get(id).cloned();
        let next = change(current.as_ref())?;
        let written = match &next {
            Some(p) => self.write_program(p),
            None => afs::remove(&self.program_path(id), self.hook.as_ref()).map_err(Into::into),
        };
        if let Err(e) = written {
            self.resync(id);
            return Err(e);
        }
        {
            let mut programs = self.programs.write().unwrap();
            match &next {
                Some(p) => programs.insert(id.to_string(), p.clone()),
                None => programs.remove(id),
            };
        }
        self.write_index()?;
        Ok(next)
    }

    /// Reloads one program from disk after a failed write, which may or may
    /// not have replaced the file.
    fn resync(&self, id: &str) {
        let on_disk = std::fs::read_to_string(self.program_path(id))
            .ok()
            .and_then(|t| StoredProgram::from_file(&t).ok());
        let mut programs = self.programs.write().unwrap();
        match on_disk {
            Some(p) => programs.insert(id.to_string(), p),
            None => programs.remove(id),
        };
    }

    pub fn list(&self) -> Vec<StoredProgram> {
        self.programs.read().unwrap().values().cloned().collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.programs.read().unwrap().keys().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Result<StoredProgram, ServiceError> {
        self.programs
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Stores a new program under the document's name.
    pub fn create(&self, document: Document) -> Result<StoredProgram, ServiceError> {
        let id = document.name.clone();
        if !valid_id(&id) {
            return Err(ServiceError::InvalidId(id));
        }
        self.check_uses(&id, &document.uses, false)?;
        let created = self.update(&id, |current| {
            if current.is_some() {
                return Err(ServiceError::AlreadyExists(id.clone()));
            }
            let now = now_ms();
            Ok(Some(StoredProgram {
                id: id.clone(),
                revision: 1,
                created_ms: now,
                updated_ms: now,
                document,
                pipeline: None,
            }))
        })?;
        Ok(created.expect("created"))
    }

    /// Replaces the document if `revision` is the current one.
    pub fn put(&self, id: &str, revision: u64, document: Document) -> Result<StoredProgram, ServiceError> {
        if document.name != id {
            return Err(ServiceError::NameMismatch {
                id: id.to_string(),
                name: document.name,
            });
        }
        self.check_uses(id, &document.uses, false)?;
        let updated = self.update(id, |current| {
            let current = current.ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
            if current.revision != revision {
                return Err(ServiceError::RevisionConflict {
                    current: current.revision,
                });
            }
            Ok(Some(StoredProgram {
                revision: current.revision + 1,
                updated_ms: now_ms(),
                document,
                ..current.clone()
            }))
        })?;
        Ok(updated.expect("updated"))
    }

    pub fn delete(&self, id: &str) -> Result<(), ServiceError> {
        if self.compiling.lock().unwrap().contains(id) {
            return Err(ServiceError::AlreadyCompiling(id.to_string()));
        }
        self.update(id, |current| {
            current.ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
            let users: Vec<String> = self
                .programs
                .read()
                .unwrap()
                .values()
                .filter(|p| p.id != id && p.document.uses.iter().any(|u| u == id))
                .map(|p| p.id.clone())
                .collect();
            if !users.is_empty() {
                return Err(ServiceError::InUse(users));
            }
            Ok(None)
        })?;
        Ok(())
    }

    /// Records a successful compile of `revision`. The pipeline is kept even
    /// if the document has moved on since; it is then stale.
    pub fn set_pipeline(&self, id: &str, revision: u64, pipeline: Pipeline) -> Result<StoredProgram, ServiceError> {
        let updated = self.update(id, |current| {
            let current = current.ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
            Ok(Some(StoredProgram {
                pipeline: Some((pipeline, revision)),
                ..current.clone()
            }))
        })?;
        Ok(updated.expect("updated"))
    }

    /// Checks that `uses` names stored programs, compiled ones if
    /// `require_compiled`, and adds no cycle.
    pub fn check_uses(&self, id: &str, uses: &[String], require_compiled: bool) -> Result<(), ServiceError> {
        let programs = self.programs.read().unwrap();
        for name in uses {
            if let Some(path) = cycle_path(&programs, id, name) {
                return Err(ServiceError::CycleDetected(path));
            }
            match programs.get(name) {
                None => return Err(ServiceError::NotFound(name.clone())),
                Some(p) if require_compiled && !p.is_compiled() => return Err(ServiceError::NotCompiled(name.clone())),
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Sets the imports of a program, bumping its revision.
    pub fn set_uses(&self, id: &str, names: Vec<String>) -> Result<StoredProgram, ServiceError> {
        let mut names = names;
        names.dedup();
        self.check_uses(id, &names, true)?;
        let updated = self.update(id, |current| {
            let current = current.ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
            let mut document = current.document.clone();
            document.set_uses(names).map_err(graph_error)?;
            Ok(Some(StoredProgram {
                revision: current.revision + 1,
                updated_ms: now_ms(),
                document,
                ..current.clone()
            }))
        })?;
        Ok(updated.expect("updated"))
    }

    /// Compiled programs reachable from `uses`, for compiling or running.
    pub fn library(&self, uses: &[String]) -> Library {
        let programs = self.programs.read().unwrap();
        library_of(&programs, uses)
    }

    /// Marks a program as compiling. The mark is released when the guard drops.
    pub fn begin_compile(self: &Arc<Self>, id: &str) -> Result<CompileGuard, ServiceError> {
        self.get(id)?;
        let mut compiling = self.compiling.lock().unwrap();
        if !compiling.insert(id.to_string()) {
            return Err(ServiceError::AlreadyCompiling(id.to_string()));
        }
        Ok(CompileGuard {
            store: self.clone(),
            id: id.to_string(),
        })
    }
}

/// Releases the compiling mark of a program on drop.
pub struct CompileGuard {
    store: Arc<Store>,
    id: String,
}

impl Drop for CompileGuard {
    fn drop(&mut self) {
        self.store.compiling.lock().unwrap().remove(&self.id);
    }
}

fn graph_error(e: GraphError) -> ServiceError {
    match e {
        GraphError::ValidationFailed(d) => ServiceError::ValidationFailed(d),
        other => ServiceError::BadDocument(other.to_string()),
    }
}

/// The runtime values of a document's data identities.
pub(crate) fn runtime_data(d: &Document) -> BTreeMap<zoea_core::graph::IdentityId, zoea_core::value::Value> {
    d.identities_of(ColumnKind::Data)
        .into_iter()
        .filter_map(|id| d.runtime_value(id).map(|v| (id, v.clone())))
        .collect()
}

fn library_of(programs: &BTreeMap<String, StoredProgram>, uses: &[String]) -> Library {
    let mut library = Library::new();
    let mut seen = BTreeSet::new();
    let mut todo: Vec<String> = uses.to_vec();
    while let Some(name) = todo.pop() {
        if !seen.insert(name.clone()) {
            continue;
        }
        let Some(p) = programs.get(&name) else { continue };
        let Some((pipeline, _)) = &p.pipeline else { continue };
        todo.extend(p.document.uses.iter().cloned());
        library = library.with(pipeline.clone(), runtime_data(&p.document));
    }
    library
}

/// The path `from -> to -> ... -> from` if adding the import `from -> to`
/// closes a cycle.
fn cycle_path(programs: &BTreeMap<String, StoredProgram>, from: &str, to: &str) -> Option<Vec<String>> {
    fn walk(
        programs: &BTreeMap<String, StoredProgram>,
        at: &str,
        goal: &str,
        path: &mut Vec<String>,
        seen: &mut BTreeSet<String>,
    ) -> bool {
        path.push(at.to_string());
        if at == goal {
            return true;
        }
        if seen.insert(at.to_string()) {
            if let Some(p) = programs.get(at) {
                for next in &p.document.uses {
                    if walk(programs, next, goal, path, seen) {
                        return true;
                    }
                }
            }
        }
        path.pop();
        false
    }
    let mut path = vec![from.to_string()];
    if walk(programs, to, from, &mut path, &mut BTreeSet::new()) {
        Some(path)
    } else {
        None
    }
}

/// Drops pipelines that fail to replay their document, repeating until no
/// more are dropped since an importer may depend on a dropped program.
fn drop_bad_pipelines(programs: &mut BTreeMap<String, StoredProgram>) -> Vec<String> {
    let mut dropped = Vec::new();
    loop {
        let bad: Vec<String> = programs
            .values()
            .filter(|p| p.is_compiled())
            .filter(|p| {
                let (pipeline, _) = p.pipeline.as_ref().expect("compiled");
                let library = library_of(programs, &p.document.uses);
                pipeline.catalog_version != CATALOG_VERSION
                    || verify_pipeline(&p.document, pipeline, &library).is_err()
            })
            .map(|p| p.id.clone())
            .collect();
        if bad.is_empty() {
            return dropped;
        }
        for id in bad {
            programs.get_mut(&id).expect("present").pipeline = None;
            dropped.push(id);
        }
    }
}
