use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

/// Topic ids already handled. Ids are only ever added; with a path, each
/// id is appended to a line file before `insert` returns.
#[derive(Debug, Default)]
pub struct ProcessedSet {
    ids: BTreeSet<u64>,
    file: Option<(PathBuf, File)>,
}

impl ProcessedSet {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Lines that do not parse (such as a torn last line) are skipped.
    pub fn open(path: &Path) -> io::Result<Self> {
        let mut ids = BTreeSet::new();
        if let Ok(f) = File::open(path) {
            for line in BufReader::new(f).lines() {
                if let Ok(id) = line?.trim().parse() {
                    ids.insert(id);
                }
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        // a torn tail would otherwise glue onto the next id
        if std::fs::metadata(path)?.len() > 0 && !ends_with_newline(path)? {
            file.write_all(b"\n")?;
        }
        Ok(ProcessedSet {
            ids,
            file: Some((path.to_path_buf(), file)),
        })
    }

    pub fn contains(&self, id: u64) -> bool {
        self.ids.contains(&id)
    }

    /// Returns false if the id was already present.
    pub fn insert(&mut self, id: u64) -> io::Result<bool> {
        if self.ids.contains(&id) {
            return Ok(false);
        }
        if let Some((_, f)) = &mut self.file {
            writeln!(f, "{id}")?;
            f.sync_data()?;
        }
        self.ids.insert(id);
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.ids.iter().copied()
    }
}

fn ends_with_newline(path: &Path) -> io::Result<bool> {
    let bytes = std::fs::read(path)?;
    Ok(bytes.last() == Some(&b'\n'))
}
