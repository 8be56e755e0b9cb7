// The acceptance runner includes the core test files, whose checks must be
// plain functions there rather than harness tests.
fn main() {
    println!("cargo::rustc-check-cfg=cfg(advsum_acceptance)");
    println!("cargo::rustc-cfg=advsum_acceptance");
}
