//! Compile, cache, load, call and unload embedded guest snippets.
//!
//! A snippet is a function body over named [`ValueHandle`] parameters. The
//! embedder wraps it in an exported function, builds it as a shared library
//! in a cache directory keyed by a content hash, loads it into the host and
//! hands back a [`SnippetHandle`]. Dropping the last handle unloads the
//! library.
//!
//! Builds follow a [`BuildPolicy`]:
//! * `HOSTBRIDGE_BUILD_JOBS` caps parallel compile jobs (default
//!   `min(2, cores)`, `0` for all cores);
//! * `HOSTBRIDGE_SAVE_CACHE=TRUE` keeps builds in a persistent per-user
//!   cache; otherwise everything, including cargo's own downloads, goes to
//!   a temporary directory removed when the policy is dropped;
//! * `HOSTBRIDGE_CACHE_DIR` overrides the persistent cache location.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{CStr, CString};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::rc::{Rc, Weak};
use std::sync::Arc;

use sha2::{Digest, Sha256};
use tempfile::TempDir;

use hostbridge_core::raw;
use hostbridge_core::ValueHandle;

use crate::framework;
use crate::session;

pub const JOBS_VAR: &str = "HOSTBRIDGE_BUILD_JOBS";
pub const SAVE_CACHE_VAR: &str = "HOSTBRIDGE_SAVE_CACHE";
pub const CACHE_DIR_VAR: &str = "HOSTBRIDGE_CACHE_DIR";

/// Oldest cargo able to build the generated projects.
pub const MIN_TOOLCHAIN_VERSION: &str = "1.70.0";

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("invalid value {value:?} for {var}: {reason}")]
    Env {
        var: &'static str,
        value: String,
        reason: &'static str,
    },
    #[error("invalid snippet: {0}")]
    InvalidSpec(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("no usable toolchain ({0}) and no offline fallback configured")]
    NoToolchain(String),
    #[error("snippet failed to compile:\n{0}")]
    Compile(String),
    #[error("cannot load {path}: {message}")]
    Load { path: PathBuf, message: String },
    #[error("{0}")]
    Call(String),
}

fn io_err(context: impl fmt::Display) -> impl FnOnce(io::Error) -> EmbedError {
    let context = context.to_string();
    move |source| EmbedError::Io { context, source }
}

/// Where and how snippet builds run.
#[derive(Debug, Clone)]
pub struct BuildPolicy {
    pub max_jobs: usize,
    pub cache_dir: PathBuf,
    pub persistent_cache: bool,
    /// Prebuilt library to load when no suitable toolchain is found.
    pub offline_fallback: Option<PathBuf>,
    pub min_toolchain_version: String,
    temp: Option<Arc<TempDir>>,
}

fn parse_flag(var: &'static str, value: &str) -> Result<bool, EmbedError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" | "" => Ok(false),
        _ => Err(EmbedError::Env {
            var,
            value: value.to_string(),
            reason: "expected TRUE or FALSE",
        }),
    }
}

impl BuildPolicy {
    /// Policy from the process environment.
    pub fn from_env() -> Result<Self, EmbedError> {
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        Self::from_env_with(|k| std::env::var(k).ok(), cores)
    }

    /// Policy from an arbitrary variable lookup and core count.
    pub fn from_env_with(
        lookup: impl Fn(&str) -> Option<String>,
        cores: usize,
    ) -> Result<Self, EmbedError> {
        let cores = cores.max(1);
        let max_jobs = match lookup(JOBS_VAR) {
            None => cores.min(2),
            Some(v) => match v.trim().parse::<usize>() {
                Ok(0) => cores,
                Ok(n) => n,
                Err(_) => {
                    return Err(EmbedError::Env {
                        var: JOBS_VAR,
                        value: v,
                        reason: "expected a nonnegative integer",
                    })
                }
            },
        };
        let persistent = match lookup(SAVE_CACHE_VAR) {
            None => false,
            Some(v) => parse_flag(SAVE_CACHE_VAR, &v)?,
        };
        let mut policy = BuildPolicy {
            max_jobs,
            cache_dir: PathBuf::new(),
            persistent_cache: persistent,
            offline_fallback: None,
            min_toolchain_version: MIN_TOOLCHAIN_VERSION.to_string(),
            temp: None,
        };
        if persistent {
            policy.cache_dir = match lookup(CACHE_DIR_VAR).filter(|v| !v.is_empty()) {
                Some(dir) => PathBuf::from(dir),
                None => dirs::cache_dir()
                    .ok_or_else(|| EmbedError::InvalidSpec("no per-user cache directory".into()))?
                    .join("hostbridge"),
            };
        } else {
            let temp = tempfile::Builder::new()
                .prefix("hostbridge-")
                .tempdir()
                .map_err(io_err("cannot create temporary cache"))?;
            policy.cache_dir = temp.path().to_path_buf();
            policy.temp = Some(Arc::new(temp));
        }
        Ok(policy)
    }

    /// Persistent policy rooted at `dir`, independent of the environment.
    pub fn persistent_at(dir: impl Into<PathBuf>, max_jobs: usize) -> Self {
        BuildPolicy {
            max_jobs: max_jobs.max(1),
            cache_dir: dir.into(),
            persistent_cache: true,
            offline_fallback: None,
            min_toolchain_version: MIN_TOOLCHAIN_VERSION.to_string(),
            temp: None,
        }
    }

    pub fn with_offline_fallback(mut self, path: impl Into<PathBuf>) -> Self {
        self.offline_fallback = Some(path.into());
        self
    }

    /// True when the cache is a temporary directory owned by this policy.
    pub fn is_temporary(&self) -> bool {
        self.temp.is_some()
    }

    fn target_dir(&self) -> PathBuf {
        self.cache_dir.join("target")
    }

    fn framework_dir(&self) -> PathBuf {
        self.cache_dir.join("framework").join(framework::PACKAGE_NAME)
    }

    fn cargo_home(&self) -> Option<PathBuf> {
        (!self.persistent_cache).then(|| self.cache_dir.join("cargo-home"))
    }
}

/// Source of an embedded function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnippetBuildSpec {
    pub parameter_names: Vec<String>,
    /// Function body; its final expression is the returned [`ValueHandle`].
    /// A protect guard named `pc` is in scope.
    pub body: String,
    /// Extra `[dependencies]` lines, e.g. `itertools = "0.13"`.
    pub dependencies: String,
}

const RUST_KEYWORDS: &[&str] = &[
    "as", "async", "await", "break", "const", "continue", "crate", "dyn", "else", "enum", "extern",
    "false", "fn", "for", "if", "impl", "in", "let", "loop", "match", "mod", "move", "mut", "pub",
    "ref", "return", "self", "Self", "static", "struct", "super", "trait", "true", "type",
    "unsafe", "use", "where", "while", "abstract", "become", "box", "do", "final", "gen", "macro",
    "override", "priv", "try", "typeof", "unsized", "virtual", "yield",
];

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && s != "_"
        && !RUST_KEYWORDS.contains(&s)
}

impl SnippetBuildSpec {
    pub fn new(params: &[&str], body: impl Into<String>) -> Self {
        SnippetBuildSpec {
            parameter_names: params.iter().map(|p| p.to_string()).collect(),
            body: body.into(),
            dependencies: String::new(),
        }
    }

    pub fn with_dependencies(mut self, deps: impl Into<String>) -> Self {
        self.dependencies = deps.into();
        self
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.body.trim().is_empty() {
            return Err(EmbedError::InvalidSpec("empty body".into()));
        }
        if self.parameter_names.len() > raw::MH_MAX_ARITY as usize {
            return Err(EmbedError::InvalidSpec(format!(
                "at most {} parameters are supported",
                raw::MH_MAX_ARITY
            )));
        }
        for (i, p) in self.parameter_names.iter().enumerate() {
            if !is_identifier(p) || p == "pc" {
                return Err(EmbedError::InvalidSpec(format!("invalid parameter name {p:?}")));
            }
            if self.parameter_names[..i].contains(p) {
                return Err(EmbedError::InvalidSpec(format!("duplicate parameter {p:?}")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 over the parameters, body and dependencies, each
    /// length-prefixed.
    pub fn source_digest(&self) -> String {
        let mut h = Sha256::new();
        self.hash_source(&mut h);
        hex(&h.finalize())
    }

    /// Hex SHA-256 over the source, the toolchain version and the
    /// framework sources.
    pub fn cache_key(&self, toolchain_version: &str) -> String {
        let mut h = Sha256::new();
        self.hash_source(&mut h);
        update_field(&mut h, toolchain_version.as_bytes());
        for (path, text) in framework::files() {
            update_field(&mut h, path.as_bytes());
            update_field(&mut h, text.as_bytes());
        }
        hex(&h.finalize())
    }

    /// Symbol the snippet is exported and registered under.
    pub fn exported_name(&self) -> String {
        format!("snippet_{}", &self.source_digest()[..16])
    }

    fn hash_source(&self, h: &mut Sha256) {
        update_field(h, b"hostbridge-snippet-v1");
        update_field(h, &(self.parameter_names.len() as u64).to_le_bytes());
        for p in &self.parameter_names {
            update_field(h, p.as_bytes());
        }
        update_field(h, self.body.as_bytes());
        update_field(h, self.dependencies.as_bytes());
    }
}

fn update_field(h: &mut Sha256, bytes: &[u8]) {
    h.update((bytes.len() as u64).to_le_bytes());
    h.update(bytes);
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn library_file(stem: &str) -> String {
    format!("{}{stem}{}", std::env::consts::DLL_PREFIX, std::env::consts::DLL_SUFFIX)
}

/// Source of the generated `lib.rs`.
pub fn render_source(spec: &SnippetBuildSpec, name: &str) -> String {
    let params: String = spec
        .parameter_names
        .iter()
        .map(|p| format!(", {p}: ValueHandle"))
        .collect();
    format!(
        "// generated, do not edit: built by the hostbridge snippet embedder\n\
         #![allow(unused_imports)]\n\
         \n\
         use hostbridge_core::prelude::*;\n\
         use hostbridge_core::raw;\n\
         \n\
         export! {{\n    fn {name}(pc: &mut ProtectGuard{params}) -> ValueHandle {{\n{body}\n    }}\n}}\n\
         \n\
         #[no_mangle]\n\
         pub extern \"C\" fn hostbridge_register() {{\n    \
         unsafe {{ raw::mh_register(b\"{name}\\0\".as_ptr().cast(), {name} as raw::MhFnPtr, {arity}) }}\n\
         }}\n",
        body = spec.body.trim_end(),
        arity = spec.parameter_names.len(),
    )
}

fn render_manifest(spec: &SnippetBuildSpec, name: &str, framework_dir: &Path) -> String {
    format!(
        "# generated, do not edit: built by the hostbridge snippet embedder\n\
         [package]\nname = \"{name}\"\nversion = \"0.0.0\"\nedition = \"2021\"\npublish = false\n\n\
         [lib]\npath = \"src/lib.rs\"\ncrate-type = [\"cdylib\"]\n\n\
         [dependencies]\n{fw} = {{ path = {path:?} }}\n{deps}\n\n\
         [workspace]\n",
        fw = framework::PACKAGE_NAME,
        path = framework_dir.to_string_lossy(),
        deps = spec.dependencies.trim(),
    )
}

/// One compiler run, as issued.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildInvocation {
    pub program: String,
    pub args: Vec<String>,
    /// Variables set explicitly for the build.
    pub env: Vec<(String, String)>,
    pub cwd: PathBuf,
}

impl BuildInvocation {
    pub fn env_value(&self, key: &str) -> Option<&str> {
        self.env.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Value of `-j`.
    pub fn jobs(&self) -> Option<usize> {
        let i = self.args.iter().position(|a| a == "-j")?;
        self.args.get(i + 1)?.parse().ok()
    }
}

/// Runs `cargo rustc --release --lib` for the crate in `project` under
/// `policy`, recording the command in `log`.
pub(crate) fn run_cargo_build(
    cargo: &str,
    project: &Path,
    target_dir: &Path,
    policy: &BuildPolicy,
    log: &mut Vec<BuildInvocation>,
) -> Result<(), EmbedError> {
    let args: Vec<String> = [
        "rustc",
        "--release",
        "--lib",
        "--quiet",
        "-j",
        &policy.max_jobs.to_string(),
        "--",
        "-C",
        "link-arg=-Wl,-Bsymbolic",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut env = vec![
        ("CARGO_TARGET_DIR".to_string(), target_dir.to_string_lossy().into_owned()),
        ("CARGO_BUILD_JOBS".to_string(), policy.max_jobs.to_string()),
        ("CARGO_TERM_COLOR".to_string(), "never".to_string()),
    ];
    if let Some(home) = policy.cargo_home() {
        prepare_cargo_home(&home)?;
        env.push(("CARGO_HOME".to_string(), home.to_string_lossy().into_owned()));
    }
    let invocation = BuildInvocation {
        program: cargo.to_string(),
        args,
        env,
        cwd: project.to_path_buf(),
    };
    let mut cmd = Command::new(&invocation.program);
    cmd.args(&invocation.args).current_dir(&invocation.cwd);
    for (k, v) in &invocation.env {
        cmd.env(k, v);
    }
    log.push(invocation);
    let out = cmd.output().map_err(io_err(format!("cannot run {cargo}")))?;
    if !out.status.success() {
        let mut text = String::from_utf8_lossy(&out.stderr).into_owned();
        text.push_str(&String::from_utf8_lossy(&out.stdout));
        return Err(EmbedError::Compile(text));
    }
    Ok(())
}

/// A private cargo home still needs the user's registry configuration.
fn prepare_cargo_home(home: &Path) -> Result<(), EmbedError> {
    fs::create_dir_all(home).map_err(io_err("cannot create cargo home"))?;
    let user_home = std::env::var_os("CARGO_HOME")
        .map(PathBuf::from)
        .or_else(|| dirs::home_dir().map(|h| h.join(".cargo")));
    if let Some(user_home) = user_home {
        for name in ["config.toml", "config"] {
            let src = user_home.join(name);
            let dst = home.join(name);
            if src.is_file() && !dst.exists() {
                fs::copy(&src, &dst).map_err(io_err("cannot copy cargo configuration"))?;
            }
        }
    }
    Ok(())
}

/// `cargo --version` output of `cargo`, if it is at least `min`.
pub fn check_toolchain(cargo: &str, min: &str) -> Result<String, String> {
    let out = Command::new(cargo)
        .arg("--version")
        .output()
        .map_err(|e| format!("cannot run {cargo}: {e}"))?;
    if !out.status.success() {
        return Err(format!("{cargo} --version failed"));
    }
    let line = String::from_utf8_lossy(&out.stdout).trim().to_string();
    let version = line
        .split_whitespace()
        .nth(1)
        .and_then(parse_version)
        .ok_or_else(|| format!("unrecognized version line {line:?}"))?;
    let min = parse_version(min).ok_or_else(|| format!("bad minimum version {min:?}"))?;
    if version < min {
        return Err(format!("{line} is older than the required {}.{}.{}", min.0, min.1, min.2));
    }
    Ok(line)
}

fn parse_version(s: &str) -> Option<(u64, u64, u64)> {
    let core = s.split(['-', '+']).next()?;
    let mut parts = core.split('.').map(|p| p.parse::<u64>().ok());
    Some((parts.next()??, parts.next().unwrap_or(Some(0))?, parts.next().unwrap_or(Some(0))?))
}

/// A library loaded into the host. Unloads itself when dropped.
struct LoadedLibrary {
    lib: raw::MhLibrary,
    path: PathBuf,
}

impl LoadedLibrary {
    fn load(path: &Path) -> Result<Self, EmbedError> {
        let c = CString::new(path.to_string_lossy().as_bytes()).map_err(|_| EmbedError::Load {
            path: path.to_path_buf(),
            message: "path contains a NUL byte".into(),
        })?;
        let mut err = std::ptr::null();
        let lib = unsafe { raw::mh_load_library(c.as_ptr(), &mut err) };
        if lib.is_null() {
            let message = if err.is_null() {
                "unknown error".to_string()
            } else {
                unsafe { CStr::from_ptr(err) }.to_string_lossy().into_owned()
            };
            return Err(EmbedError::Load {
                path: path.to_path_buf(),
                message,
            });
        }
        Ok(LoadedLibrary {
            lib,
            path: path.to_path_buf(),
        })
    }
}

impl Drop for LoadedLibrary {
    fn drop(&mut self) {
        unsafe { raw::mh_unload_library(self.lib) };
    }
}

/// A loaded snippet. Host thread only.
pub struct SnippetHandle {
    key: String,
    exported_name: String,
    arity: usize,
    library: Rc<LoadedLibrary>,
}

impl fmt::Debug for SnippetHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SnippetHandle")
            .field("exported_name", &self.exported_name)
            .field("library", &self.library.path)
            .finish()
    }
}

impl SnippetHandle {
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn exported_name(&self) -> &str {
        &self.exported_name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn library_path(&self) -> &Path {
        &self.library.path
    }

    /// Calls the snippet through the host boundary. The result is not
    /// protected.
    pub fn call(&self, args: &[ValueHandle]) -> Result<ValueHandle, EmbedError> {
        if args.len() != self.arity {
            return Err(EmbedError::Call(format!(
                "{} expects {} argument(s), got {}",
                self.exported_name,
                self.arity,
                args.len()
            )));
        }
        session::call(&self.exported_name, args).map_err(EmbedError::Call)
    }

    /// Drops this handle; the library is unloaded once no handle to it is
    /// left.
    pub fn release(self) -> Result<(), EmbedError> {
        let Self { library, .. } = self;
        if let Ok(lib) = Rc::try_unwrap(library) {
            let rc = unsafe { raw::mh_unload_library(lib.lib) };
            std::mem::forget(lib);
            if rc != 0 {
                return Err(EmbedError::Call("library is in use by a running call".into()));
            }
        }
        Ok(())
    }
}

/// Builds and loads snippets under one policy. Host thread only.
pub struct SnippetEmbedder {
    policy: BuildPolicy,
    cargo: String,
    toolchain: Option<Result<String, String>>,
    builds: Vec<BuildInvocation>,
    loaded: RefCell<HashMap<String, Weak<LoadedLibrary>>>,
}

/// How a snippet library was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildOutcome {
    Compiled,
    Cached,
    AlreadyLoaded,
    Fallback,
}

impl SnippetEmbedder {
    pub fn new(policy: BuildPolicy) -> Self {
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".to_string());
        SnippetEmbedder {
            policy,
            cargo,
            toolchain: None,
            builds: Vec::new(),
            loaded: RefCell::new(HashMap::new()),
        }
    }

    /// Uses `program` instead of `cargo` (or `$CARGO`).
    pub fn with_cargo(mut self, program: impl Into<String>) -> Self {
        self.cargo = program.into();
        self.toolchain = None;
        self
    }

    pub fn policy(&self) -> &BuildPolicy {
        &self.policy
    }

    /// Every compiler invocation issued so far.
    pub fn build_log(&self) -> &[BuildInvocation] {
        &self.builds
    }

    fn toolchain(&mut self) -> Result<String, String> {
        let (cargo, min) = (&self.cargo, &self.policy.min_toolchain_version);
        self.toolchain
            .get_or_insert_with(|| check_toolchain(cargo, min))
            .clone()
    }

    pub fn build(&mut self, spec: &SnippetBuildSpec) -> Result<SnippetHandle, EmbedError> {
        self.build_with_outcome(spec).map(|(h, _)| h)
    }

    pub fn build_with_outcome(
        &mut self,
        spec: &SnippetBuildSpec,
    ) -> Result<(SnippetHandle, BuildOutcome), EmbedError> {
        spec.validate()?;
        let toolchain = match self.toolchain() {
            Ok(v) => v,
            Err(reason) => return self.load_fallback(spec, reason),
        };
        let key = spec.cache_key(&toolchain);
        let name = spec.exported_name();
        let handle = |library| SnippetHandle {
            key: key.clone(),
            exported_name: name.clone(),
            arity: spec.parameter_names.len(),
            library,
        };
        if let Some(lib) = self.loaded.borrow().get(&key).and_then(Weak::upgrade) {
            return Ok((handle(lib), BuildOutcome::AlreadyLoaded));
        }

        let artifact = self.policy.cache_dir.join("artifacts").join(&key).join(library_file(&name));
        let outcome = if artifact.is_file() {
            BuildOutcome::Cached
        } else {
            self.compile(spec, &name, &artifact)?;
            BuildOutcome::Compiled
        };
        let lib = Rc::new(LoadedLibrary::load(&artifact)?);
        self.loaded.borrow_mut().insert(key.clone(), Rc::downgrade(&lib));
        Ok((handle(lib), outcome))
    }

    fn compile(
        &mut self,
        spec: &SnippetBuildSpec,
        name: &str,
        artifact: &Path,
    ) -> Result<(), EmbedError> {
        let policy = &self.policy;
        let framework_dir = policy.framework_dir();
        framework::materialize(&framework_dir).map_err(io_err("cannot write framework sources"))?;
        let project = policy.cache_dir.join("projects").join(name);
        framework::write_if_changed(
            &project.join("Cargo.toml"),
            render_manifest(spec, name, &framework_dir).as_bytes(),
        )
        .map_err(io_err("cannot write snippet manifest"))?;
        framework::write_if_changed(
            &project.join("src").join("lib.rs"),
            render_source(spec, name).as_bytes(),
        )
        .map_err(io_err("cannot write snippet source"))?;

        // Reuse the resolution of earlier snippets with the same dependencies.
        let deps_hash = hex(&Sha256::digest(spec.dependencies.trim().as_bytes()));
        let shared_lock = policy.cache_dir.join("locks").join(format!("{deps_hash}.lock"));
        let lock = project.join("Cargo.lock");
        if shared_lock.is_file() && !lock.exists() {
            fs::copy(&shared_lock, &lock).map_err(io_err("cannot copy lock file"))?;
        }

        let target = policy.target_dir();
        run_cargo_build(&self.cargo, &project, &target, policy, &mut self.builds)?;

        if lock.is_file() && !shared_lock.exists() {
            fs::create_dir_all(shared_lock.parent().unwrap()).map_err(io_err("cannot store lock file"))?;
            fs::copy(&lock, &shared_lock).map_err(io_err("cannot store lock file"))?;
        }
        let built = target.join("release").join(library_file(name));
        fs::create_dir_all(artifact.parent().unwrap()).map_err(io_err("cannot create artifact directory"))?;
        // Copy then rename, so a partial file never looks like a cache hit.
        let partial = artifact.with_extension("partial");
        fs::copy(&built, &partial).map_err(io_err(format!("cannot copy {}", built.display())))?;
        fs::rename(&partial, artifact).map_err(io_err("cannot install artifact"))?;
        Ok(())
    }

    fn load_fallback(
        &mut self,
        spec: &SnippetBuildSpec,
        reason: String,
    ) -> Result<(SnippetHandle, BuildOutcome), EmbedError> {
        let Some(path) = self.policy.offline_fallback.clone() else {
            return Err(EmbedError::NoToolchain(reason));
        };
        let name = spec.exported_name();
        let lib = Rc::new(LoadedLibrary::load(&path)?);
        let c = CString::new(name.as_str()).expect("generated names have no NUL");
        if unsafe { raw::mh_lookup(c.as_ptr()) }.is_null() {
            return Err(EmbedError::Load {
                path,
                message: format!("fallback library does not provide {name}"),
            });
        }
        Ok((
            SnippetHandle {
                key: spec.cache_key(""),
                exported_name: name,
                arity: spec.parameter_names.len(),
                library: lib,
            },
            BuildOutcome::Fallback,
        ))
    }
}
