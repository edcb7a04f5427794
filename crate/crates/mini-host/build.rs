fn main() {
    println!("cargo:rerun-if-changed=csrc");
    println!("cargo:rerun-if-changed=include");
    cc::Build::new()
        .file("csrc/runtime.c")
        .file("csrc/native.c")
        .include("include")
        .std("c11")
        .flag_if_supported("-ffp-contract=off")
        .warnings(true)
        .compile("minihost");
    println!("cargo:rustc-link-lib=dylib=dl");
    println!("cargo:rustc-link-lib=dylib=m");
    println!("cargo:rustc-link-lib=dylib=pthread");
    println!("cargo:include={}/include", std::env::var("CARGO_MANIFEST_DIR").unwrap());
    // Guest libraries resolve mh_* against the executable.
    println!("cargo:rustc-link-arg=-Wl,--export-dynamic");
}
