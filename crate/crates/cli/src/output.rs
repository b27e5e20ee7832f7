//! Output directory with atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hte_core::Error;

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, Error> {
        fs::create_dir_all(root)
            .map_err(|e| Error::Data(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
        })
    }

    /// Writes `name` through a temporary sibling and a rename, so readers
    /// never see a half-written file.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), Error> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        let io_err = |p: &Path, e: std::io::Error| Error::Data(format!("cannot write {}: {e}", p.display()));
        let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(contents.as_bytes()).map_err(|e| io_err(&tmp, e))?;
        f.sync_all().map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| io_err(&target, e))
    }
}
