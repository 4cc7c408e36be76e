//! Output directory handling and provenance headers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::config::{default_provenance, ResolvedConfig, Source};

pub struct OutputDir {
    pub root: PathBuf,
    header: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, command: &str, config: &ResolvedConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        let mut header = vec![
            format!("thermoreg {} {command}", env!("CARGO_PKG_VERSION")),
            format!("config-sha256 {}", config.hash()),
            format!("kind {}", config.file.objective.kind.name()),
        ];
        for (section, origin) in default_provenance(config.file.objective.kind) {
            header.push(format!("default {section}: {origin}"));
        }
        for (label, source) in [("from file", Source::File), ("from overrides", Source::Override)] {
            let keys = config.keys_from(source);
            if !keys.is_empty() {
                header.push(format!("{label}: {}", keys.join(" ")));
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            header,
        })
    }

    fn open(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    /// Writes `name` through `body`, preceded by the header as `#` lines.
    pub fn write(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> anyhow::Result<()> {
        let header = self.header.clone();
        self.write_raw(name, move |w| {
            for line in &header {
                writeln!(w, "# {line}")?;
            }
            body(w)
        })
    }

    /// Writes `name` without the comment header, for formats that carry
    /// it elsewhere (see [`OutputDir::title`]).
    pub fn write_raw(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> anyhow::Result<()> {
        let mut w = self.open(name)?;
        body(&mut w).with_context(|| format!("writing {name}"))?;
        w.flush().with_context(|| format!("writing {name}"))?;
        Ok(())
    }

    /// One-line title for formats without comment syntax (VTK).
    pub fn title(&self) -> String {
        self.header[..2].join(" | ")
    }
}
