//! Retrievability table files and the process-wide table cache.
//!
//! File layout, little endian:
//!
//! ```text
//! magic      4 bytes  "FLWT"
//! version    u32      1
//! topology   32 bytes connectivity fingerprint (SHA-256)
//! groups     u32
//! target     u32
//! words      u64      bitset length in 64-bit words
//! masks      groups x u32
//! retrievable words x u64
//! singleton   words x u64
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use crate::analysis::walk::{build_retrievability_table, CompiledTable, RetrievabilityTable};
use crate::{Error, NetworkTopology, Result};

const MAGIC: &[u8; 4] = b"FLWT";
const VERSION: u32 = 1;

/// Environment variable naming the on-disk table cache directory.
pub const CACHE_DIR_ENV: &str = "FRAMELESS_TABLE_CACHE";

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn table_file_name(fingerprint: &[u8; 32], target: usize) -> String {
    format!("{}-g{target}.flwt", hex(fingerprint))
}

pub fn write_table<W: Write>(out: &mut W, fingerprint: &[u8; 32], table: &RetrievabilityTable) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(fingerprint)?;
    out.write_all(&(table.masks().len() as u32).to_le_bytes())?;
    out.write_all(&(table.target() as u32).to_le_bytes())?;
    out.write_all(&(table.retrievable_words().len() as u64).to_le_bytes())?;
    for m in table.masks() {
        out.write_all(&m.to_le_bytes())?;
    }
    for w in table.retrievable_words().iter().chain(table.singleton_words()) {
        out.write_all(&w.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

/// Reads a table, checking it belongs to `fingerprint` and `target`.
pub fn read_table<R: Read>(input: &mut R, fingerprint: &[u8; 32], target: usize) -> Result<RetrievabilityTable> {
    if &read_array::<4, _>(input)? != MAGIC {
        return Err(Error::TableFile("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(input)?);
    if version != VERSION {
        return Err(Error::TableFile(format!("unsupported version {version}")));
    }
    if &read_array::<32, _>(input)? != fingerprint {
        return Err(Error::TableFile("topology fingerprint mismatch".into()));
    }
    let groups = u32::from_le_bytes(read_array(input)?) as usize;
    let stored_target = u32::from_le_bytes(read_array(input)?) as usize;
    if stored_target != target {
        return Err(Error::TableFile(format!("table is for group {stored_target}, wanted {target}")));
    }
    let words = u64::from_le_bytes(read_array(input)?) as usize;
    if groups == 0 || groups > super::walk::MAX_ENUM_GROUPS || words > (1 << 28) {
        return Err(Error::TableFile("implausible header".into()));
    }
    let masks = (0..groups)
        .map(|_| Ok(u32::from_le_bytes(read_array(input)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut read_words = || {
        (0..words)
            .map(|_| Ok(u64::from_le_bytes(read_array(input)?)))
            .collect::<Result<Vec<_>>>()
    };
    let retrievable = read_words()?;
    let singleton = read_words()?;
    RetrievabilityTable::from_parts(masks, target, retrievable, singleton)
}

/// Tables and compiled diagrams for every target of one topology.
#[derive(Debug)]
pub struct TableSet {
    pub tables: Vec<Arc<RetrievabilityTable>>,
    pub compiled: Vec<Arc<CompiledTable>>,
}

type CacheKey = ([u8; 32], usize);

fn memory_cache() -> &'static Mutex<HashMap<CacheKey, (Arc<RetrievabilityTable>, Arc<CompiledTable>)>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, (Arc<RetrievabilityTable>, Arc<CompiledTable>)>>> =
        OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Cache directory from [`CACHE_DIR_ENV`], if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn load_or_build(
    topology: &NetworkTopology,
    fingerprint: &[u8; 32],
    target: usize,
    dir: Option<&Path>,
) -> Result<RetrievabilityTable> {
    let masks: Vec<u32> = topology.groups().iter().map(|g| g.bs_set.mask()).collect();
    if let Some(dir) = dir {
        let path = dir.join(table_file_name(fingerprint, target));
        if let Ok(file) = fs::File::open(&path) {
            let mut reader = std::io::BufReader::new(file);
            match read_table(&mut reader, fingerprint, target) {
                Ok(t) if t.masks() == masks.as_slice() => return Ok(t),
                // Stale or foreign file: rebuild and overwrite.
                _ => {}
            }
        }
        let table = build_retrievability_table(&masks, target)?;
        fs::create_dir_all(dir)?;
        let tmp = path.with_extension("tmp");
        {
            let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
            write_table(&mut w, fingerprint, &table)?;
            w.flush()?;
        }
        fs::rename(&tmp, &path)?;
        return Ok(table);
    }
    build_retrievability_table(&masks, target)
}

/// Builds (or fetches from memory or disk) the tables of all groups.
pub fn table_set(topology: &NetworkTopology, dir: Option<&Path>) -> Result<TableSet> {
    let fingerprint = topology.connectivity_fingerprint();
    let mut tables = Vec::with_capacity(topology.num_groups());
    let mut compiled = Vec::with_capacity(topology.num_groups());
    for target in 0..topology.num_groups() {
        let key = (fingerprint, target);
        let hit = memory_cache().lock().expect("table cache").get(&key).cloned();
        let (t, c) = match hit {
            Some(entry) => entry,
            None => {
                let table = load_or_build(topology, &fingerprint, target, dir)?;
                let c = Arc::new(table.compile());
                let entry = (Arc::new(table), c);
                memory_cache()
                    .lock()
                    .expect("table cache")
                    .insert(key, entry.clone());
                entry
            }
        };
        tables.push(t);
        compiled.push(c);
    }
    Ok(TableSet { tables, compiled })
}
