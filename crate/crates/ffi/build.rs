use std::env;
use std::fs;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config =
        cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("cbindgen.toml");
    let bindings = match cbindgen::generate_with_config(&crate_dir, config) {
        Ok(b) => b,
        Err(e) => {
            println!("cargo:warning=header not regenerated: {e}");
            return;
        }
    };
    let header = crate_dir.join("include").join("logdag.h");
    let mut rendered = Vec::new();
    bindings.write(&mut rendered);
    // Only touch the file when it changes, so downstream C builds stay incremental.
    if fs::read(&header).ok().as_deref() != Some(rendered.as_slice()) {
        fs::create_dir_all(header.parent().unwrap()).expect("include dir");
        fs::write(&header, rendered).expect("write logdag.h");
    }
}
