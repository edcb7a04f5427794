//! Registration code generation.
//!
//! Host scripts under `R/` call guest functions as `.Call(.name, a, b)`.
//! [`scan_scripts`] collects every such call site; [`generate_registration`]
//! turns the resulting table into `src/rustlib/src/registration.rs`, whose
//! `hostbridge_register` entry point registers each function with the host
//! when the library is loaded. Functions the guest source does not define
//! yet also get a commented-out skeleton to copy into `lib.rs`.
//!
//! The scanner is token based: it understands strings, comments and
//! bracket nesting, not the full host language.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::embed::is_identifier;
use crate::framework::write_if_changed;

pub const HEADER: &str = "// generated, do not edit: `hostbridge register` rewrites this file";

/// One `.Call` target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrationEntry {
    pub name: String,
    pub arity: usize,
    /// Script of the first call site.
    pub source_script: PathBuf,
    pub line: usize,
    /// Parameter names for a generated skeleton.
    pub params: Vec<String>,
    /// Whether the guest source already defines the function.
    pub implemented: bool,
}

/// One `.Call(.name, ...)` occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSite {
    pub name: String,
    pub args: Vec<String>,
    pub line: usize,
}

#[derive(Debug)]
pub enum RegistrationError {
    Io { path: PathBuf, source: io::Error },
    ArityConflict {
        name: String,
        first: (PathBuf, usize, usize),
        second: (PathBuf, usize, usize),
    },
    ImplementationMismatch {
        name: String,
        script: (PathBuf, usize, usize),
        implemented: usize,
    },
}

impl fmt::Display for RegistrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegistrationError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            RegistrationError::ArityConflict {
                name,
                first,
                second,
            } => write!(
                f,
                ".Call target '{name}' is used with {} argument(s) at {}:{} and with {} at {}:{}",
                first.2,
                first.0.display(),
                first.1,
                second.2,
                second.0.display(),
                second.1
            ),
            RegistrationError::ImplementationMismatch {
                name,
                script,
                implemented,
            } => write!(
                f,
                ".Call target '{name}' is used with {} argument(s) at {}:{} but lib.rs defines it with {implemented}",
                script.2,
                script.0.display(),
                script.1
            ),
        }
    }
}

impl std::error::Error for RegistrationError {}

impl RegistrationError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            RegistrationError::Io { .. } => 1,
            _ => 2,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> RegistrationError + '_ {
    move |source| RegistrationError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_name_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'.' || c == b'_'
}

/// Skips a quoted string starting at `i` (the quote); returns the index
/// after the closing quote.
fn skip_quoted(b: &[u8], mut i: usize) -> usize {
    let quote = b[i];
    i += 1;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            c if c == quote => return i + 1,
            _ => i += 1,
        }
    }
    b.len()
}

fn skip_comment(b: &[u8], mut i: usize) -> usize {
    while i < b.len() && b[i] != b'\n' {
        i += 1;
    }
    i
}

fn skip_space(b: &[u8], mut i: usize) -> usize {
    loop {
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < b.len() && b[i] == b'#' {
            i = skip_comment(b, i);
        } else {
            return i;
        }
    }
}

/// Splits the arguments of a call whose opening bracket is just before `i`.
/// Returns the top-level argument texts and the index after the closing
/// bracket, or `None` if the call is unterminated.
fn split_args(b: &[u8], mut i: usize) -> Option<(Vec<String>, usize)> {
    let mut args = Vec::new();
    let mut depth = 0usize;
    let mut start = i;
    let mut any = false;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' | b'`' => {
                i = skip_quoted(b, i);
                any = true;
                continue;
            }
            b'#' => {
                let end = skip_comment(b, i);
                i = end;
                continue;
            }
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' if depth > 0 => depth -= 1,
            b')' if depth == 0 => {
                let last = strip_comments(&b[start..i]);
                if any || !last.trim().is_empty() || !args.is_empty() {
                    args.push(last.trim().to_string());
                }
                return Some((args, i + 1));
            }
            b']' | b'}' => return None,
            b',' if depth == 0 => {
                args.push(strip_comments(&b[start..i]).trim().to_string());
                start = i + 1;
                any = false;
                i += 1;
                continue;
            }
            c if !c.is_ascii_whitespace() => any = true,
            _ => {}
        }
        i += 1;
    }
    None
}

fn strip_comments(b: &[u8]) -> String {
    let mut out = Vec::with_capacity(b.len());
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' | b'`' => {
                let end = skip_quoted(b, i);
                out.extend_from_slice(&b[i..end]);
                i = end;
            }
            b'#' => i = skip_comment(b, i),
            c => {
                out.push(c);
                i += 1;
            }
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Every `.Call(.name, ...)` in one script.
pub fn scan_source(text: &str) -> Vec<CallSite> {
    let b = text.as_bytes();
    let mut sites = Vec::new();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' | b'`' => {
                i = skip_quoted(b, i);
                continue;
            }
            b'#' => {
                i = skip_comment(b, i);
                continue;
            }
            b'.' if b[i..].starts_with(b".Call") && (i == 0 || !is_name_char(b[i - 1])) => {
                let after = i + ".Call".len();
                if after < b.len() && is_name_char(b[after]) {
                    i = after;
                    continue;
                }
                let open = skip_space(b, after);
                if open < b.len() && b[open] == b'(' {
                    let line = 1 + b[..i].iter().filter(|&&c| c == b'\n').count();
                    if let Some((args, end)) = split_args(b, open + 1) {
                        if let Some(site) = call_site(&args, line) {
                            sites.push(site);
                        }
                        i = end;
                        continue;
                    }
                }
                i = after;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    sites
}

fn call_site(args: &[String], line: usize) -> Option<CallSite> {
    let target = args.first()?.strip_prefix('.')?;
    if !is_identifier(target) {
        return None;
    }
    Some(CallSite {
        name: target.to_string(),
        args: args[1..].to_vec(),
        line,
    })
}

/// Parameter names for a skeleton: plain identifiers (or the name of a
/// `name = value` argument) where possible, `argN` otherwise.
fn param_names(args: &[String]) -> Vec<String> {
    let mut names: Vec<String> = Vec::with_capacity(args.len());
    for (k, arg) in args.iter().enumerate() {
        let candidate = match arg.split_once('=') {
            Some((lhs, rhs)) if !rhs.starts_with('=') && !lhs.ends_with(['<', '>', '!']) => lhs.trim(),
            _ => arg.as_str(),
        };
        let candidate = candidate.replace('.', "_");
        let name = if is_identifier(&candidate) && candidate != "pc" && !names.contains(&candidate) {
            candidate
        } else {
            format!("arg{}", k + 1)
        };
        names.push(name);
    }
    // A generated argN may collide with an identifier chosen earlier.
    for k in 0..names.len() {
        if names[..k].contains(&names[k]) {
            names[k] = format!("arg{}_{}", k + 1, k + 1);
        }
    }
    names
}

/// Scripts (`*.R`, `*.r`) directly inside `dir`, sorted by file name.
fn script_files(dir: &Path) -> Result<Vec<PathBuf>, RegistrationError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_error(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("R" | "r")))
        .collect();
    files.sort();
    Ok(files)
}

/// `.Call` targets of every script in `dir`, deduplicated and sorted by
/// name. `implemented` is left false.
pub fn scan_scripts(dir: &Path) -> Result<Vec<RegistrationEntry>, RegistrationError> {
    let mut table: BTreeMap<String, RegistrationEntry> = BTreeMap::new();
    for file in script_files(dir)? {
        let text = fs::read_to_string(&file).map_err(io_error(&file))?;
        let rel = file.strip_prefix(dir.parent().unwrap_or(dir)).unwrap_or(&file).to_path_buf();
        for site in scan_source(&text) {
            let arity = site.args.len();
            if let Some(existing) = table.get(&site.name) {
                if existing.arity != arity {
                    return Err(RegistrationError::ArityConflict {
                        name: site.name,
                        first: (existing.source_script.clone(), existing.line, existing.arity),
                        second: (rel, site.line, arity),
                    });
                }
                continue;
            }
            table.insert(
                site.name.clone(),
                RegistrationEntry {
                    name: site.name,
                    arity,
                    source_script: rel.clone(),
                    line: site.line,
                    params: param_names(&site.args),
                    implemented: false,
                },
            );
        }
    }
    Ok(table.into_values().collect())
}

/// Skips Rust comments, strings and character literals starting at `i`;
/// returns the next index to look at, or `None` if `b[i]` starts none of
/// them.
fn skip_rust_trivia(b: &[u8], i: usize) -> Option<usize> {
    if b[i..].starts_with(b"//") {
        return Some(skip_comment(b, i));
    }
    if b[i..].starts_with(b"/*") {
        let mut depth = 0;
        let mut j = i;
        while j < b.len() {
            if b[j..].starts_with(b"/*") {
                depth += 1;
                j += 2;
            } else if b[j..].starts_with(b"*/") {
                depth -= 1;
                j += 2;
                if depth == 0 {
                    return Some(j);
                }
            } else {
                j += 1;
            }
        }
        return Some(b.len());
    }
    if b[i] == b'r' && (i == 0 || !is_name_char(b[i - 1])) {
        let hashes = b[i + 1..].iter().take_while(|&&c| c == b'#').count();
        if b.get(i + 1 + hashes) == Some(&b'"') {
            let mut close = vec![b'"'];
            close.extend(std::iter::repeat(b'#').take(hashes));
            let body = i + 2 + hashes;
            let end = b[body..]
                .windows(close.len())
                .position(|w| w == close.as_slice())
                .map_or(b.len(), |p| body + p + close.len());
            return Some(end);
        }
    }
    if b[i] == b'"' {
        return Some(skip_quoted(b, i));
    }
    if b[i] == b'\'' {
        // Character literal, or a lifetime (left alone).
        if b.get(i + 1) == Some(&b'\\') {
            return Some(skip_quoted(b, i));
        }
        let ch_len = std::str::from_utf8(&b[i + 1..])
            .ok()
            .or_else(|| std::str::from_utf8(&b[i + 1..(i + 5).min(b.len())]).ok())
            .and_then(|s| s.chars().next())
            .map_or(1, char::len_utf8);
        if b.get(i + 1 + ch_len) == Some(&b'\'') {
            return Some(i + 2 + ch_len);
        }
        return Some(i + 1);
    }
    None
}

/// Functions defined through `export!` in guest source, with their
/// host-visible arity (parameters other than the protect guard).
pub fn implemented_functions(source: &str) -> BTreeMap<String, usize> {
    let b = source.as_bytes();
    let mut found = BTreeMap::new();
    let mut i = 0;
    while i < b.len() {
        if let Some(next) = skip_rust_trivia(b, i) {
            i = next;
            continue;
        }
        if b[i..].starts_with(b"export!") && (i == 0 || !is_name_char(b[i - 1])) {
            let mut j = skip_space(b, i + "export!".len());
            if j < b.len() && matches!(b[j], b'{' | b'(' | b'[') {
                j += 1;
                if let Some((name, arity, end)) = exported_fn(b, j) {
                    found.insert(name, arity);
                    i = end;
                    continue;
                }
            }
        }
        i += 1;
    }
    found
}

/// Finds `fn name(...)` from `i`, skipping attributes and doc comments.
fn exported_fn(b: &[u8], mut i: usize) -> Option<(String, usize, usize)> {
    while i < b.len() {
        if let Some(next) = skip_rust_trivia(b, i) {
            i = next;
            continue;
        }
        if b[i..].starts_with(b"fn") && !is_name_char(*b.get(i + 2)?) && (i == 0 || !is_name_char(b[i - 1])) {
            let start = skip_space(b, i + 2);
            let end = start + b[start..].iter().take_while(|&&c| is_name_char(c)).count();
            let name = std::str::from_utf8(&b[start..end]).ok()?.to_string();
            let open = skip_space(b, end);
            if b.get(open) != Some(&b'(') {
                return None;
            }
            let (args, close) = split_rust_args(b, open + 1)?;
            return Some((name, args.saturating_sub(1), close));
        }
        if b[i] == b'}' {
            return None;
        }
        i += 1;
    }
    None
}

fn split_rust_args(b: &[u8], mut i: usize) -> Option<(usize, usize)> {
    let mut depth = 0usize;
    let mut count = 0;
    let mut pending = false;
    while i < b.len() {
        if let Some(next) = skip_rust_trivia(b, i) {
            i = next;
            continue;
        }
        match b[i] {
            b'(' | b'[' | b'{' | b'<' => depth += 1,
            b')' if depth == 0 => return Some((count + pending as usize, i + 1)),
            b')' | b']' | b'}' | b'>' => depth = depth.saturating_sub(1),
            b',' if depth == 0 => {
                if pending {
                    count += 1;
                }
                pending = false;
            }
            c if !c.is_ascii_whitespace() => pending = true,
            _ => {}
        }
        i += 1;
    }
    None
}

/// Generated registration source and the skeletons of unimplemented
/// functions (already part of the source, as a comment block).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub registration: String,
    pub stubs: String,
}

fn skeleton(entry: &RegistrationEntry) -> String {
    let params: String = entry.params.iter().map(|p| format!(", {p}: ValueHandle")).collect();
    format!(
        "export! {{\n    fn {}(pc: &mut ProtectGuard{params}) -> ValueHandle {{\n        unimplemented!()\n    }}\n}}\n",
        entry.name
    )
}

/// Marks implemented entries and renders `registration.rs`.
///
/// Every entry is registered; until a skeleton is copied into the guest
/// source, the build fails on the missing function.
pub fn generate_registration(
    entries: &mut [RegistrationEntry],
    guest_source: &str,
) -> Result<Generated, RegistrationError> {
    let implemented = implemented_functions(guest_source);
    for e in entries.iter_mut() {
        match implemented.get(&e.name) {
            Some(&n) if n != e.arity => {
                return Err(RegistrationError::ImplementationMismatch {
                    name: e.name.clone(),
                    script: (e.source_script.clone(), e.line, e.arity),
                    implemented: n,
                })
            }
            Some(_) => e.implemented = true,
            None => e.implemented = false,
        }
    }

    let mut out = String::new();
    out.push_str(HEADER);
    out.push_str("\n//\n// Registers every `.Call` target of the scripts in R/ when the host loads\n// this library.\n\n");
    out.push_str("use hostbridge_core::raw;\n\n");
    out.push_str("#[no_mangle]\npub extern \"C\" fn hostbridge_register() {\n");
    if !entries.is_empty() {
        out.push_str("    unsafe {\n");
        for e in entries.iter() {
            let _ = writeln!(
                out,
                "        raw::mh_register(b\"{0}\\0\".as_ptr().cast(), crate::{0} as raw::MhFnPtr, {1});",
                e.name, e.arity
            );
        }
        out.push_str("    }\n");
    }
    out.push_str("}\n");

    let mut stubs = String::new();
    for e in entries.iter().filter(|e| !e.implemented) {
        let _ = writeln!(stubs, "// {}:{}", e.source_script.display(), e.line);
        stubs.push_str(&skeleton(e));
    }
    if !stubs.is_empty() {
        out.push_str("\n// Not yet defined in lib.rs. Copy, uncomment and fill in:\n//\n");
        for line in stubs.lines() {
            if line.starts_with("// ") {
                out.push_str(line);
            } else if line.is_empty() {
                out.push_str("//");
            } else {
                out.push_str("// ");
                out.push_str(line);
            }
            out.push('\n');
        }
    }
    Ok(Generated {
        registration: out,
        stubs,
    })
}

/// Paths of a project tree.
pub fn scripts_dir(root: &Path) -> PathBuf {
    root.join("R")
}

pub fn guest_lib(root: &Path) -> PathBuf {
    root.join("src").join("rustlib").join("src").join("lib.rs")
}

pub fn registration_file(root: &Path) -> PathBuf {
    root.join("src").join("rustlib").join("src").join("registration.rs")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterOutcome {
    pub entries: Vec<RegistrationEntry>,
    pub generated: Generated,
    /// False when the file already had the generated contents.
    pub changed: bool,
}

/// Scans `root/R`, regenerates `root/src/rustlib/src/registration.rs` and
/// writes it if its contents changed.
pub fn register_project(root: &Path) -> Result<RegisterOutcome, RegistrationError> {
    let mut entries = scan_scripts(&scripts_dir(root))?;
    let lib = guest_lib(root);
    let guest = match fs::read_to_string(&lib) {
        Ok(s) => s,
        Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(io_error(&lib)(e)),
    };
    let generated = generate_registration(&mut entries, &guest)?;
    let path = registration_file(root);
    let changed = write_if_changed(&path, generated.registration.as_bytes()).map_err(io_error(&path))?;
    Ok(RegisterOutcome {
        entries,
        generated,
        changed,
    })
}
