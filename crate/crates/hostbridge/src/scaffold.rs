//! New-project scaffolding and package builds.
//!
//! ```text
//! <root>/
//!   R/myrnorm.R, R/convolve2.R, R/zero.R   host scripts calling the guest
//!   src/rustlib/Cargo.toml                 guest crate (cdylib)
//!   src/rustlib/src/lib.rs                 the example functions
//!   src/rustlib/src/registration.rs        generated by `hostbridge register`
//!   src/rustlib/hostbridge-core/           vendored framework
//!   tools/build.sh                         policy-honoring build script
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::embed::{run_cargo_build, BuildInvocation, BuildPolicy, EmbedError};
use crate::framework;
use crate::registration::{self, RegistrationError};

const EXAMPLES: &str = include_str!("examples.rs");

const MYRNORM_R: &str = r#"# Normal deviates drawn with the host random number generator.
myrnorm <- function(n, mean = 0, sd = 1) {
  .Call(.myrnorm, n, mean, sd)
}
"#;

const CONVOLVE2_R: &str = r#"# Full discrete convolution of two numeric vectors.
convolve2 <- function(a, b) {
  .Call(.convolve2, a, b)
}
"#;

const ZERO_R: &str = r#"# Root of f between guesses[1] and guesses[2] by bisection.
zero <- function(f, guesses, tol = 1e-7) {
  f.check <- function(x) {
    x <- f(x)
    if (!is.numeric(x)) stop("f(x) must be numeric")
    x
  }
  .Call(.zero, body(f.check), as.double(guesses), as.double(tol), new.env())
}
"#;

const BUILD_SH: &str = r#"#!/bin/sh
# Builds src/rustlib and copies the library to lib/.
#
# HOSTBRIDGE_BUILD_JOBS  parallel jobs (default: at most 2; 0 means all cores)
# HOSTBRIDGE_SAVE_CACHE  TRUE keeps build products in the per-user cache;
#                        otherwise everything goes to a temporary directory
set -eu

root=$(cd "$(dirname "$0")/.." && pwd)
cores=$(getconf _NPROCESSORS_ONLN 2>/dev/null || echo 1)

jobs=${HOSTBRIDGE_BUILD_JOBS:-}
case "$jobs" in
  "") jobs=$(( cores < 2 ? cores : 2 )) ;;
  0) jobs=$cores ;;
  *[!0-9]*) echo "invalid value for HOSTBRIDGE_BUILD_JOBS: $jobs" >&2; exit 1 ;;
esac

case "${HOSTBRIDGE_SAVE_CACHE:-}" in
  TRUE|true|1|yes)
    cache=${HOSTBRIDGE_CACHE_DIR:-${XDG_CACHE_HOME:-$HOME/.cache}/hostbridge}
    ;;
  *)
    cache=$(mktemp -d "${TMPDIR:-/tmp}/hostbridge-XXXXXX")
    trap 'rm -rf "$cache"' EXIT
    mkdir -p "$cache/cargo-home"
    user_home=${CARGO_HOME:-$HOME/.cargo}
    [ -f "$user_home/config.toml" ] && cp "$user_home/config.toml" "$cache/cargo-home/"
    CARGO_HOME=$cache/cargo-home
    export CARGO_HOME
    ;;
esac

CARGO_TARGET_DIR=$cache/target
export CARGO_TARGET_DIR
cd "$root/src/rustlib"
cargo rustc --release --lib -j "$jobs" -- -C link-arg=-Wl,-Bsymbolic
mkdir -p "$root/lib"
cp "$CARGO_TARGET_DIR/release/lib@NAME@.so" "$root/lib/"
"#;

#[derive(Debug)]
pub enum ScaffoldError {
    Exists(PathBuf),
    InvalidName(String),
    Io(PathBuf, io::Error),
    Registration(RegistrationError),
    Build(EmbedError),
}

impl std::fmt::Display for ScaffoldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScaffoldError::Exists(p) => write!(f, "{} already exists", p.display()),
            ScaffoldError::InvalidName(n) => write!(f, "cannot derive a crate name from {n:?}"),
            ScaffoldError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            ScaffoldError::Registration(e) => e.fmt(f),
            ScaffoldError::Build(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for ScaffoldError {}

/// Crate name for a project directory: its file name, lowercased, with
/// anything but letters, digits and `_` replaced by `_`.
pub fn crate_name(root: &Path) -> Result<String, ScaffoldError> {
    let base = root
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut name: String = base
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if name.is_empty() || name.chars().all(|c| c == '_') {
        return Err(ScaffoldError::InvalidName(base));
    }
    if name.starts_with(|c: char| c.is_ascii_digit()) {
        name.insert(0, '_');
    }
    Ok(name)
}

fn guest_manifest(name: &str) -> String {
    format!(
        "[package]\nname = \"{name}\"\nversion = \"0.1.0\"\nedition = \"2021\"\npublish = false\n\n\
         [lib]\ncrate-type = [\"cdylib\"]\n\n\
         [dependencies]\n{fw} = {{ path = \"{fw}\" }}\n\n\
         # Not part of any enclosing workspace.\n[workspace]\n",
        fw = framework::PACKAGE_NAME,
    )
}

/// Guest `lib.rs` of a new project.
pub fn guest_lib_source() -> String {
    format!("mod registration;\n\n{EXAMPLES}")
}

fn write(path: &Path, text: &str) -> Result<(), ScaffoldError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ScaffoldError::Io(parent.to_path_buf(), e))?;
    }
    fs::write(path, text).map_err(|e| ScaffoldError::Io(path.to_path_buf(), e))
}

/// Creates a new project at `root`, which must not exist.
pub fn new_project(root: &Path) -> Result<(), ScaffoldError> {
    if root.exists() {
        return Err(ScaffoldError::Exists(root.to_path_buf()));
    }
    let name = crate_name(root)?;
    fs::create_dir_all(root).map_err(|e| ScaffoldError::Io(root.to_path_buf(), e))?;
    write(&root.join("R/myrnorm.R"), MYRNORM_R)?;
    write(&root.join("R/convolve2.R"), CONVOLVE2_R)?;
    write(&root.join("R/zero.R"), ZERO_R)?;
    let rustlib = root.join("src/rustlib");
    write(&rustlib.join("Cargo.toml"), &guest_manifest(&name))?;
    write(&registration::guest_lib(root), &guest_lib_source())?;
    let vendored = rustlib.join(framework::PACKAGE_NAME);
    framework::materialize(&vendored).map_err(|e| ScaffoldError::Io(vendored.clone(), e))?;
    let script = root.join("tools/build.sh");
    write(&script, &BUILD_SH.replace("@NAME@", &name))?;
    set_executable(&script)?;
    write(&root.join(".gitignore"), "/lib/\n/src/rustlib/target/\n")?;
    registration::register_project(root).map_err(ScaffoldError::Registration)?;
    Ok(())
}

#[cfg(unix)]
fn set_executable(path: &Path) -> Result<(), ScaffoldError> {
    use std::os::unix::fs::PermissionsExt;
    let mut perms = fs::metadata(path)
        .map_err(|e| ScaffoldError::Io(path.to_path_buf(), e))?
        .permissions();
    perms.set_mode(0o755);
    fs::set_permissions(path, perms).map_err(|e| ScaffoldError::Io(path.to_path_buf(), e))
}

#[cfg(not(unix))]
fn set_executable(_: &Path) -> Result<(), ScaffoldError> {
    Ok(())
}

/// Result of [`build_package`].
#[derive(Debug, Clone)]
pub struct PackageBuild {
    /// The built library, copied to `<root>/lib/`.
    pub library: PathBuf,
    pub invocation: BuildInvocation,
}

/// Regenerates the registration source, then builds the guest crate under
/// `policy` and copies the library to `<root>/lib/`.
pub fn build_package(root: &Path, policy: &BuildPolicy) -> Result<PackageBuild, ScaffoldError> {
    registration::register_project(root).map_err(ScaffoldError::Registration)?;
    let name = crate_name(root)?;
    let project = root.join("src/rustlib");
    let target = policy.cache_dir.join("target");
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".to_string());
    let mut log = Vec::new();
    run_cargo_build(&cargo, &project, &target, policy, &mut log).map_err(ScaffoldError::Build)?;
    let file = format!("{}{name}{}", std::env::consts::DLL_PREFIX, std::env::consts::DLL_SUFFIX);
    let lib_dir = root.join("lib");
    fs::create_dir_all(&lib_dir).map_err(|e| ScaffoldError::Io(lib_dir.clone(), e))?;
    let library = lib_dir.join(&file);
    let built = target.join("release").join(&file);
    fs::copy(&built, &library).map_err(|e| ScaffoldError::Io(built.clone(), e))?;
    Ok(PackageBuild {
        library,
        invocation: log.pop().expect("one build was issued"),
    })
}
