use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// One cached translation, also the line format of the cache file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub src: String,
    pub from: String,
    pub to: String,
    pub out: String,
}

type Key = (String, String, String);

struct Inner {
    map: HashMap<Key, String>,
    journal: Option<BufWriter<File>>,
}

/// Translation memo keyed by exact source text and language pair.
///
/// When backed by a file, every insert is appended and flushed before it
/// returns, so an interrupted run keeps everything translated so far.
pub struct TranslationCache {
    inner: Mutex<Inner>,
    path: Option<PathBuf>,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self {
            inner: Mutex::new(Inner {
                map: HashMap::new(),
                journal: None,
            }),
            path: None,
        }
    }

    /// Opens (creating if needed) a JSONL cache file and loads its entries.
    /// Later lines win over earlier ones for the same key.
    pub fn open(path: &Path) -> io::Result<Self> {
        let mut map = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let e: CacheEntry = serde_json::from_str(&line).map_err(|err| {
                    io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("{} line {}: {err}", path.display(), i + 1),
                    )
                })?;
                map.insert((e.src, e.from, e.to), e.out);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner: Mutex::new(Inner {
                map,
                journal: Some(BufWriter::new(file)),
            }),
            path: Some(path.to_owned()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, src: &str, from: &str, to: &str) -> Option<String> {
        let inner = self.inner.lock().expect("cache lock poisoned");
        inner
            .map
            .get(&(src.to_owned(), from.to_owned(), to.to_owned()))
            .cloned()
    }

    pub fn insert_many(&self, entries: impl IntoIterator<Item = CacheEntry>) -> io::Result<()> {
        let mut inner = self.inner.lock().expect("cache lock poisoned");
        let Inner { map, journal } = &mut *inner;
        for e in entries {
            if let Some(w) = journal.as_mut() {
                serde_json::to_writer(&mut *w, &e)?;
                w.write_all(b"\n")?;
            }
            map.insert((e.src, e.from, e.to), e.out);
        }
        if let Some(w) = journal.as_mut() {
            w.flush()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock poisoned").map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
