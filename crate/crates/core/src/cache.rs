//! Process-wide series cache with an optional on-disk mirror.
//!
//! Entries are keyed by a constructor descriptor; a stored series of order
//! `T'` answers every request with `T <= T'` by truncation.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{OnceLock, RwLock};

use crate::error::Result;
use crate::qseries::QSeries;

#[derive(Default)]
pub struct SeriesCache {
    mem: RwLock<HashMap<String, QSeries>>,
    dir: RwLock<Option<PathBuf>>,
    enabled: RwLock<bool>,
}

pub fn global() -> &'static SeriesCache {
    static CACHE: OnceLock<SeriesCache> = OnceLock::new();
    CACHE.get_or_init(|| SeriesCache {
        enabled: RwLock::new(true),
        ..Default::default()
    })
}

fn covers(s: &QSeries, order: i64) -> bool {
    s.order().is_none_or(|t| t >= order)
}

fn file_name(key: &str) -> String {
    let mut name: String = key
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    name.push_str(".qs");
    name
}

impl SeriesCache {
    pub fn set_dir(&self, dir: Option<PathBuf>) {
        *self.dir.write().expect("cache lock") = dir;
    }

    pub fn dir(&self) -> Option<PathBuf> {
        self.dir.read().expect("cache lock").clone()
    }

    /// Disable both layers (every request recomputes).
    pub fn set_enabled(&self, on: bool) {
        *self.enabled.write().expect("cache lock") = on;
    }

    pub fn clear_memory(&self) {
        self.mem.write().expect("cache lock").clear();
    }

    pub fn get_or_compute(
        &self,
        key: &str,
        order: i64,
        compute: impl FnOnce(i64) -> Result<QSeries>,
    ) -> Result<QSeries> {
        if !*self.enabled.read().expect("cache lock") {
            return compute(order);
        }
        if let Some(s) = self.mem.read().expect("cache lock").get(key) {
            if covers(s, order) {
                return Ok(s.truncate(order));
            }
        }
        let dir = self.dir();
        if let Some(d) = &dir {
            if let Some(s) = read_entry(d, key) {
                if covers(&s, order) {
                    let out = s.truncate(order);
                    self.insert(key, s);
                    return Ok(out);
                }
            }
        }
        let s = compute(order)?;
        if let Some(d) = &dir {
            // a failed write only costs a recomputation later
            let _ = write_entry(d, key, &s);
        }
        self.insert(key, s.clone());
        Ok(s)
    }

    fn insert(&self, key: &str, s: QSeries) {
        let mut mem = self.mem.write().expect("cache lock");
        match mem.get(key) {
            Some(old)
                if old
                    .order()
                    .is_none_or(|t| s.order().is_some_and(|u| u <= t)) => {}
            _ => {
                mem.insert(key.to_string(), s);
            }
        }
    }
}

fn read_entry(dir: &Path, key: &str) -> Option<QSeries> {
    let text = fs::read_to_string(dir.join(file_name(key))).ok()?;
    QSeries::from_text(&text).ok()
}

fn write_entry(dir: &Path, key: &str, s: &QSeries) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(file_name(key));
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, s.to_text())?;
    fs::rename(tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn larger_entry_serves_smaller_request() {
        let cache = SeriesCache {
            enabled: RwLock::new(true),
            ..Default::default()
        };
        let calls = Cell::new(0);
        let make = |t: i64| {
            calls.set(calls.get() + 1);
            Ok(QSeries::from_ints(0, &vec![1; (t + 1) as usize], Some(t)))
        };
        let a = cache.get_or_compute("ones", 20, make).unwrap();
        let b = cache.get_or_compute("ones", 10, make).unwrap();
        assert_eq!(calls.get(), 1);
        assert_eq!(b, a.truncate(10));
        cache.get_or_compute("ones", 30, make).unwrap();
        assert_eq!(calls.get(), 2);
    }

    #[test]
    fn disk_round_trip() {
        let dir = std::env::temp_dir().join(format!("padiclab-cache-test-{}", std::process::id()));
        let cache = SeriesCache {
            enabled: RwLock::new(true),
            ..Default::default()
        };
        cache.set_dir(Some(dir.clone()));
        let s = QSeries::from_ints(-1, &[1, 0, -3, 7], Some(2));
        cache.get_or_compute("k:1", 2, |_| Ok(s.clone())).unwrap();
        cache.clear_memory();
        let back = cache
            .get_or_compute("k:1", 2, |_| panic!("should come from disk"))
            .unwrap();
        assert_eq!(back, s);
        let _ = fs::remove_dir_all(dir);
    }
}
