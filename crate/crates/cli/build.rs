fn main() {
    println!("cargo:rustc-env=SPINFORGE_PROFILE={}", std::env::var("PROFILE").unwrap_or_default());
    println!("cargo:rustc-env=SPINFORGE_TARGET={}", std::env::var("TARGET").unwrap_or_default());
}
