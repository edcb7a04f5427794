//! The guest framework sources, vendored into generated projects so that
//! they build without this workspace being present.

use std::fs;
use std::io;
use std::path::Path;

pub const PACKAGE_NAME: &str = "hostbridge-core";

const CARGO_TOML: &str = r#"[package]
name = "hostbridge-core"
version = "0.1.0"
edition = "2021"
publish = false

[lib]
name = "hostbridge_core"

[features]
default = ["std"]
std = []
"#;

const SOURCES: [(&str, &str); 10] = [
    ("src/lib.rs", include_str!("../../core/src/lib.rs")),
    ("src/catch.rs", include_str!("../../core/src/catch.rs")),
    ("src/console.rs", include_str!("../../core/src/console.rs")),
    ("src/error.rs", include_str!("../../core/src/error.rs")),
    ("src/export.rs", include_str!("../../core/src/export.rs")),
    ("src/na.rs", include_str!("../../core/src/na.rs")),
    ("src/protect.rs", include_str!("../../core/src/protect.rs")),
    ("src/raw.rs", include_str!("../../core/src/raw.rs")),
    ("src/rng.rs", include_str!("../../core/src/rng.rs")),
    ("src/value.rs", include_str!("../../core/src/value.rs")),
];

/// Relative path and contents of every file of the vendored crate.
pub fn files() -> impl Iterator<Item = (&'static str, &'static str)> {
    std::iter::once(("Cargo.toml", CARGO_TOML)).chain(SOURCES)
}

/// Writes the vendored crate into `dir`. Files whose contents already
/// match are left untouched so their timestamps do not trigger rebuilds.
pub fn materialize(dir: &Path) -> io::Result<()> {
    for (rel, text) in files() {
        write_if_changed(&dir.join(rel), text.as_bytes())?;
    }
    Ok(())
}

pub(crate) fn write_if_changed(path: &Path, contents: &[u8]) -> io::Result<bool> {
    if fs::read(path).map(|old| old == contents).unwrap_or(false) {
        return Ok(false);
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(true)
}
