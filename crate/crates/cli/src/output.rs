//! Deterministic file output.
//!
//! Every file is built in memory, written to a temporary sibling, then
//! renamed into place, so readers never observe a half-written file. Every
//! file begins with a comment header carrying the configuration hash and
//! the seed, which is what makes reruns byte-checkable.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::config::Config;

/// `# config=<16 hex digits> seed=<u64>` — the provenance line at the top
/// of every output file.
pub fn header(cfg: &Config) -> String {
    format!("# config={:016x} seed={}\n", cfg.hash(), cfg.seed)
}

/// Write `content` to `path` atomically (temp file + rename). Creates the
/// parent directory when missing.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        std::fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Incremental CSV builder that starts with the provenance header.
pub struct CsvBuilder {
    text: String,
}

impl CsvBuilder {
    pub fn new(cfg: &Config) -> Self {
        CsvBuilder { text: header(cfg) }
    }

    /// Add an extra `# key=value ...` comment line.
    pub fn comment(&mut self, line: &str) -> &mut Self {
        let _ = writeln!(self.text, "# {line}");
        self
    }

    /// Add the column-name row.
    pub fn columns(&mut self, names: &[&str]) -> &mut Self {
        let _ = writeln!(self.text, "{}", names.join(","));
        self
    }

    /// Add one data row; cells must already be rendered.
    pub fn row(&mut self, cells: &[String]) -> &mut Self {
        let _ = writeln!(self.text, "{}", cells.join(","));
        self
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Render an `f64` for CSV output: shortest string that round-trips, so
/// equal values always render identically and reruns stay byte-identical.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Overrides, RawConfig};

    fn test_config() -> Config {
        toml::from_str::<RawConfig>("groups = [[10, 2, 2]]\nseed = 5\n")
            .unwrap()
            .resolve(&Overrides::default())
            .unwrap()
    }

    #[test]
    fn header_carries_hash_and_seed() {
        let cfg = test_config();
        let h = header(&cfg);
        assert!(h.starts_with("# config="));
        assert!(h.contains(&format!("{:016x}", cfg.hash())));
        assert!(h.trim_end().ends_with("seed=5"));
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("table.csv");
        write_atomic(&path, "first\n").unwrap();
        write_atomic(&path, "second\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
        let names: Vec<_> = std::fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("table.csv")]);
    }

    #[test]
    fn builder_layout_is_header_comments_columns_rows() {
        let cfg = test_config();
        let mut b = CsvBuilder::new(&cfg);
        b.comment("kind=demo");
        b.columns(&["t", "value"]);
        b.row(&["0".into(), num(0.5)]);
        let text = b.finish();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[0].starts_with("# config="));
        assert_eq!(lines[1], "# kind=demo");
        assert_eq!(lines[2], "t,value");
        assert_eq!(lines[3], "0,0.5");
    }

    #[test]
    fn float_rendering_round_trips() {
        for &x in &[0.0, 1.0, 0.1, 1.0 / 3.0, 2.0_f64.powi(-40), 123456.789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
