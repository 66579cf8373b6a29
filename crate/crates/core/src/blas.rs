//! Process setup for the OpenBLAS backend (feature `openblas`).
//!
//! OpenBLAS chooses its kernels once, when the library is loaded, from the
//! CPU model or from `OPENBLAS_CORETYPE`. Releases that predate the host CPU
//! fall back to a generic SSE3 kernel, which runs the network's matrix
//! products about 5x slower than the AVX-512 one.

/// Call first thing in `main`. With the `openblas` feature on an x86-64 CPU
/// that has AVX-512 and no `OPENBLAS_CORETYPE` set, re-executes the current
/// process with `OPENBLAS_CORETYPE=SkylakeX` and does not return. Otherwise
/// it limits OpenBLAS to one thread, since parallelism comes from the
/// training workers.
pub fn init() {
    #[cfg(feature = "openblas")]
    {
        #[cfg(all(unix, target_arch = "x86_64"))]
        if std::env::var_os("OPENBLAS_CORETYPE").is_none()
            && std::is_x86_feature_detected!("avx512f")
            && std::is_x86_feature_detected!("avx512dq")
            && std::is_x86_feature_detected!("avx512bw")
            && std::is_x86_feature_detected!("avx512vl")
        {
            use std::os::unix::process::CommandExt;
            if let Ok(exe) = std::env::current_exe() {
                let err = std::process::Command::new(exe)
                    .args(std::env::args_os().skip(1))
                    .env("OPENBLAS_CORETYPE", "SkylakeX")
                    .exec();
                eprintln!("warning: could not re-execute with OPENBLAS_CORETYPE set: {err}");
            }
        }
        extern "C" {
            fn openblas_set_num_threads(n: std::os::raw::c_int);
        }
        // SAFETY: plain setter exported by the linked OpenBLAS
        unsafe { openblas_set_num_threads(1) };
    }
}
