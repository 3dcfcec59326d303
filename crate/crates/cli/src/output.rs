//! Output directory handling and gnuplot script emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Writes files under one directory and remembers their paths.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn open(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.root.join(name);
        let file = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    /// Writes `name` with a library CSV writer.
    pub fn csv<F>(&mut self, name: &str, write: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> lockdown::Result<()>,
    {
        let mut w = self.open(name)?;
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
        self.text(name, &(text + "\n"))
    }

    pub fn text(&mut self, name: &str, body: &str) -> CliResult<()> {
        let mut w = self.open(name)?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

/// One curve of a gnuplot panel: 1-based columns of a CSV file.
#[derive(Debug, Clone)]
pub struct Curve {
    pub file: String,
    pub x: usize,
    pub y: usize,
    pub title: String,
}

impl Curve {
    pub fn new(file: &str, x: usize, y: usize, title: &str) -> Self {
        Self { file: file.into(), x, y, title: title.into() }
    }
}

/// A single gnuplot panel rendered to `<name>.png`.
#[derive(Debug, Clone)]
pub struct Panel {
    pub name: String,
    pub xlabel: String,
    pub ylabel: String,
    pub curves: Vec<Curve>,
    pub points: bool,
}

impl Panel {
    pub fn lines(name: &str, xlabel: &str, ylabel: &str, curves: Vec<Curve>) -> Self {
        Self { name: name.into(), xlabel: xlabel.into(), ylabel: ylabel.into(), curves, points: false }
    }

    pub fn with_points(self) -> Self {
        Self { points: true, ..self }
    }
}

/// A gnuplot script drawing every panel to its own PNG.
pub fn gnuplot_script(panels: &[Panel]) -> String {
    let mut s = String::from("set datafile separator ','\nset terminal pngcairo size 900,560\nset grid\n");
    for panel in panels {
        s += &format!(
            "\nset output '{}.png'\nset xlabel '{}'\nset ylabel '{}'\n",
            panel.name, panel.xlabel, panel.ylabel
        );
        let style = if panel.points { "linespoints" } else { "lines" };
        let plots: Vec<String> = panel
            .curves
            .iter()
            .map(|c| format!("'{}' using {}:{} with {style} title '{}'", c.file, c.x, c.y, c.title))
            .collect();
        s += &format!("plot {}\n", plots.join(", \\\n     "));
    }
    s
}
