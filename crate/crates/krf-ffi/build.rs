fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let out = std::path::Path::new(&crate_dir).join("include/krf.h");
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(out);
        }
        // tolerate parse hiccups during incremental builds; the committed
        // header stays as-is
        Err(cbindgen::Error::ParseSyntaxError { .. }) => {}
        Err(e) => panic!("unable to generate bindings: {e}"),
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
