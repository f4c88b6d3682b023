use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").unwrap();

    let mut config = cbindgen::Config::default();
    config.language = cbindgen::Language::C;
    config.documentation = true;
    config.documentation_style = cbindgen::DocumentationStyle::C;
    config.include_guard = Some("NEUROHAPTIC_H".to_string());
    config.sys_includes = vec!["stdint.h".to_string(), "stddef.h".to_string()];
    config.no_includes = true;
    config.cpp_compat = true;
    config.enumeration.prefix_with_name = true;
    config.usize_is_size_t = true;

    let bindings = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("unable to generate bindings");

    let out = PathBuf::from(&crate_dir).join("include");
    std::fs::create_dir_all(&out).expect("create include directory");
    bindings.write_to_file(out.join("neurohaptic.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=build.rs");
}
