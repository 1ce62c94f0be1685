use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::spec::Provenance;

/// Writes artifacts into one directory, each tagged with the run provenance.
pub struct Sink {
    dir: PathBuf,
    prov: Provenance,
    pub written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    provenance: &'a Provenance,
    result: &'a T,
}

impl Sink {
    pub fn new(dir: &Path, prov: Provenance) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Sink { dir: dir.to_path_buf(), prov, written: Vec::new() })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.prov
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<()> {
        let prov = self.prov.clone();
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &Tagged { provenance: &prov, result })?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// CSV preceded by `#` lines carrying the provenance.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let prov = self.prov.clone();
        let mut w = self.create(name)?;
        writeln!(w, "# {} {}", prov.tool, prov.version)?;
        writeln!(w, "# spec_hash {}", prov.spec_hash)?;
        writeln!(w, "# spec {}", prov.spec)?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(header)?;
        for r in rows {
            c.write_record(&r)?;
        }
        c.flush()?;
        Ok(())
    }

    pub fn raw(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = self.create(name)?;
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
