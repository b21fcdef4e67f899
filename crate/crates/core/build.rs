fn main() {
    // ndarray-linalg is built without a bundled backend; the system OpenBLAS
    // provides BLAS, CBLAS, and LAPACK symbols in a single shared library.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
