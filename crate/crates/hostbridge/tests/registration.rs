use std::fs;
use std::path::Path;
use std::process::Command;

use hostbridge::registration::{
    generate_registration, register_project, registration_file, scan_scripts, RegistrationError,
};
use proptest::prelude::*;

fn tree(files: &[(&str, &str)]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (rel, text) in files {
        let path = dir.path().join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }
    dir
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn bar_gets_a_two_parameter_stub() {
    let dir = tree(&[("R/bar.R", "bar <- function(x, y) .Call(.bar, x, y)\n")]);
    let out = register_project(dir.path()).unwrap();
    assert!(out.changed);
    assert_eq!(out.entries.len(), 1);
    assert_eq!((out.entries[0].name.as_str(), out.entries[0].arity), ("bar", 2));
    assert!(!out.entries[0].implemented);
    let text = read(&registration_file(dir.path()));
    assert!(text.starts_with("// generated, do not edit"));
    assert!(text.contains("raw::mh_register(b\"bar\\0\".as_ptr().cast(), crate::bar as raw::MhFnPtr, 2);"));
    assert!(text.contains("//     fn bar(pc: &mut ProtectGuard, x: ValueHandle, y: ValueHandle) -> ValueHandle {"));
    assert!(out.generated.stubs.contains("fn bar(pc: &mut ProtectGuard, x: ValueHandle, y: ValueHandle)"));

    let again = register_project(dir.path()).unwrap();
    assert!(!again.changed);
    assert_eq!(read(&registration_file(dir.path())), text);
}

#[test]
fn empty_tree_registers_nothing() {
    let dir = tree(&[]);
    assert!(scan_scripts(&dir.path().join("R")).unwrap().is_empty());
    let out = register_project(dir.path()).unwrap();
    assert!(out.generated.stubs.is_empty());
    let text = read(&registration_file(dir.path()));
    assert!(text.contains("pub extern \"C\" fn hostbridge_register() {\n}\n"));
}

#[test]
fn duplicate_sites_collapse() {
    let dir = tree(&[
        ("R/a.R", "f1 <- function(a) .Call(.f, a)\n"),
        ("R/b.R", "# another caller\nf2 <- function(b) .Call(.f, b + 1)\n"),
        ("R/notes.txt", ".Call(.ignored, 1)"),
    ]);
    let entries = scan_scripts(&dir.path().join("R")).unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!((entries[0].name.as_str(), entries[0].arity), ("f", 1));
    assert_eq!(entries[0].source_script, Path::new("R/a.R"));
}

#[test]
fn conflicting_arities_name_both_sites() {
    let dir = tree(&[
        ("R/a.R", "\n.Call(.g, 1)\n"),
        ("R/b.R", ".Call(.g, 1, 2)\n"),
    ]);
    let err = register_project(dir.path()).unwrap_err();
    assert!(matches!(err, RegistrationError::ArityConflict { .. }));
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains("R/a.R:2") && msg.contains("R/b.R:1"), "{msg}");
    assert!(!registration_file(dir.path()).exists());
}

const LIB_WITH_F: &str = "mod registration;\nuse hostbridge_core::prelude::*;\n\
    export! {\n    fn f(pc: &mut ProtectGuard, a: ValueHandle) -> ValueHandle { a }\n}\n";

#[test]
fn implemented_functions_get_no_stub() {
    let dir = tree(&[
        ("R/a.R", ".Call(.f, x)\n.Call(.h, x, y, z)\n"),
        ("src/rustlib/src/lib.rs", LIB_WITH_F),
    ]);
    let out = register_project(dir.path()).unwrap();
    let f = out.entries.iter().find(|e| e.name == "f").unwrap();
    assert!(f.implemented);
    assert!(!out.generated.stubs.contains("fn f("));
    assert!(out.generated.stubs.contains("fn h(pc: &mut ProtectGuard, x: ValueHandle, y: ValueHandle, z: ValueHandle)"));
    assert!(out.generated.registration.contains("crate::f as raw::MhFnPtr, 1);"));
}

#[test]
fn implementation_with_other_arity_is_an_error() {
    let dir = tree(&[
        ("R/a.R", ".Call(.f, x, y)\n"),
        ("src/rustlib/src/lib.rs", LIB_WITH_F),
    ]);
    let err = register_project(dir.path()).unwrap_err();
    assert!(matches!(err, RegistrationError::ImplementationMismatch { implemented: 1, .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hostbridge");
    let ok = tree(&[("R/a.R", ".Call(.bar, x, y)\n")]);
    let out = Command::new(bin).arg("register").arg(ok.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fn bar("));

    let bad = tree(&[("R/a.R", ".Call(.g, 1)\n.Call(.g)\n")]);
    let out = Command::new(bin).arg("register").arg(bad.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'g'"));
}

fn render_tree(sites: &[(u8, u8, u8)], reverse: bool) -> (Vec<(String, usize)>, String) {
    let mut files: Vec<(String, String)> = Vec::new();
    for (k, (file, name, _)) in sites.iter().enumerate() {
        let arity = sites.iter().find(|s| s.1 == *name).unwrap().2 as usize;
        let args: Vec<String> = (0..arity).map(|i| format!("a{i}")).collect();
        let call = if args.is_empty() {
            format!(".Call(.fn_{name})\n")
        } else {
            format!(".Call(.fn_{name}, {})\n", args.join(", "))
        };
        let fname = format!("R/s{file}.R");
        match files.iter_mut().find(|(f, _)| *f == fname) {
            Some((_, text)) => text.push_str(&call),
            None => files.push((fname, format!("# script {k}\n{call}"))),
        }
    }
    if reverse {
        files.reverse();
    }
    let dir = tempfile::tempdir().unwrap();
    for (rel, text) in &files {
        let path = dir.path().join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }
    let mut entries = scan_scripts(&dir.path().join("R")).unwrap();
    let text = generate_registration(&mut entries, "").unwrap().registration;
    (entries.into_iter().map(|e| (e.name, e.arity)).collect(), text)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn scan_is_sorted_deduplicated_and_order_independent(
        sites in prop::collection::vec((0u8..4, 0u8..6, 0u8..5), 0..20)
    ) {
        let (entries, forward) = render_tree(&sites, false);
        let (_, backward) = render_tree(&sites, true);
        prop_assert_eq!(&forward, &backward);
        let mut expected: Vec<(String, usize)> = sites
            .iter()
            .map(|s| (format!("fn_{}", s.1), sites.iter().find(|t| t.1 == s.1).unwrap().2 as usize))
            .collect();
        expected.sort();
        expected.dedup();
        prop_assert_eq!(entries, expected);
    }
}
