//! INI configuration. Sections:
//!
//! ```ini
//! [selection]
//! w_min = 32
//! w_max = 85
//! tau = 0.4
//! kde_bandwidth = 5
//! candidate_dedup = false
//! histogram_space = rgb
//!
//! [encode]
//! prior = luma
//! edge_threshold = 128
//! kf_codec = internal:q4
//! prior_codec = internal:q4
//! target_rate = 500
//! luma_fraction = 0.9
//!
//! [codec.external]
//! encode_cmd = ...
//! decode_cmd = ...
//! qp = 32
//!
//! [generator]
//! command = my-generator --dir {workdir}
//! ```
//!
//! Command-line flags take precedence over every key here.

use std::path::Path;
use std::str::FromStr;

use ini::Ini;

#[derive(Debug, Default)]
pub struct FileConfig {
    ini: Option<Ini>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let ini = Ini::load_from_file(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(FileConfig { ini: Some(ini) })
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.ini.as_ref()?.section(Some(section))?.get(key)
    }

    /// Parsed value of `section.key`, `None` when absent.
    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|e| format!("config [{section}] {key} = {v:?}: {e}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn typed_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ini");
        std::fs::write(&p, "[selection]\nw_max = 60\ntau=0.5\n[codec.external]\nencode_cmd = enc {input} {output}\n").unwrap();
        let c = FileConfig::load(Some(&p)).unwrap();
        assert_eq!(c.get::<usize>("selection", "w_max").unwrap(), Some(60));
        assert_eq!(c.get::<f64>("selection", "tau").unwrap(), Some(0.5));
        assert_eq!(c.get::<usize>("selection", "w_min").unwrap(), None);
        assert_eq!(c.raw("codec.external", "encode_cmd"), Some("enc {input} {output}"));
        assert!(c.get::<usize>("selection", "tau").is_err());
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(FileConfig::load(Some(Path::new("/nonexistent/c.ini"))).is_err());
        assert_eq!(FileConfig::load(None).unwrap().raw("a", "b"), None);
    }
}
