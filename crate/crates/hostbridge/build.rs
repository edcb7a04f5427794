fn main() {
    // Loaded guest libraries resolve mh_* against the executable, and the
    // uncached benchmark variant looks guest symbols up at run time.
    println!("cargo:rustc-link-arg=-Wl,--export-dynamic");
}
