use std::process::Command;

fn main() {
    let hash = Command::new("git")
        .args(["rev-parse", "--short=12", "HEAD"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_default();
    if !hash.is_empty() {
        println!("cargo:rustc-env=DIRAC_SPLIT_GIT_HASH={hash}");
    }
    println!("cargo:rerun-if-changed=build.rs");
}
