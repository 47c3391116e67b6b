use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use semianon_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(semianon_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn congestion(n3: u32, beta: f64) -> *mut SemianonGame {
    let mut g = ptr::null_mut();
    let s = unsafe { semianon_game_congestion3(7, 7, n3, 1.0 / 3.0, beta, &mut g) };
    assert_eq!(s, SemianonStatus::Ok);
    assert!(!g.is_null());
    g
}

#[test]
fn kernel_round_trip() {
    unsafe {
        let base = congestion(1, 0.0);
        let mut beta = 0.0;
        assert_eq!(
            semianon_calibrate_beta(base, SemianonDynamic::Modified as i32, 0.98, &mut beta),
            SemianonStatus::Ok
        );
        assert!((beta - 1.28).abs() <= 0.02, "{beta}");
        let mut game = ptr::null_mut();
        assert_eq!(
            semianon_game_with_beta(base, beta, &mut game),
            SemianonStatus::Ok
        );
        let (mut n, mut m, mut b) = (0u32, 0usize, 0.0);
        assert_eq!(
            semianon_game_info(game, &mut n, &mut m, &mut b),
            SemianonStatus::Ok
        );
        assert_eq!((n, m, b), (15, 3, beta));

        let mut k = ptr::null_mut();
        assert_eq!(
            semianon_kernel_build(game, SemianonDynamic::Standard as i32, &mut k),
            SemianonStatus::Ok
        );
        let (mut states, mut rate) = (0usize, 0.0);
        assert_eq!(
            semianon_kernel_info(k, &mut states, &mut rate),
            SemianonStatus::Ok
        );
        assert_eq!((states, rate), (64, 15.0));

        let mut row = 0.0;
        for j in 0..states {
            let mut v = 0.0;
            assert_eq!(semianon_kernel_entry(k, 5, j, &mut v), SemianonStatus::Ok);
            row += v;
        }
        assert!((row - 1.0).abs() <= 1e-12);

        let mut phi = vec![0.0; states];
        assert_eq!(
            semianon_kernel_potentials(k, phi.as_mut_ptr(), states),
            SemianonStatus::Ok
        );
        assert_eq!(phi.iter().cloned().fold(f64::MIN, f64::max), 35.0);

        let mut counts = [0u32; 8];
        let mut needed = 0usize;
        assert_eq!(
            semianon_kernel_state(k, 0, counts.as_mut_ptr(), counts.len(), &mut needed),
            SemianonStatus::Ok
        );
        assert_eq!(needed, 5);
        assert_eq!(counts[..5].iter().sum::<u32>(), 15);

        let mut pi = vec![0.0; states];
        assert_eq!(
            semianon_kernel_stationary(k, pi.as_mut_ptr(), states),
            SemianonStatus::Ok
        );
        assert!((pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let mut mu = vec![0.0; states];
        mu[0] = 1.0;
        let mut out = vec![0.0; states];
        assert_eq!(
            semianon_kernel_evolve(k, mu.as_ptr(), 0.0, out.as_mut_ptr(), states),
            SemianonStatus::Ok
        );
        assert_eq!(out, mu);

        semianon_kernel_free(k);
        semianon_game_free(game);
        semianon_game_free(base);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let g = congestion(1, 1.0);
        let mut k = ptr::null_mut();
        assert_eq!(
            semianon_kernel_build(g, 9, &mut k),
            SemianonStatus::InvalidArgument
        );
        assert!(k.is_null());
        assert!(last_error().contains("unknown dynamic 9"));

        assert_eq!(
            semianon_kernel_build(g, 0, ptr::null_mut()),
            SemianonStatus::NullPointer
        );
        assert_eq!(
            semianon_kernel_build(ptr::null(), 0, &mut k),
            SemianonStatus::NullPointer
        );
        assert!(last_error().contains("game is null"));

        assert_eq!(semianon_kernel_build(g, 0, &mut k), SemianonStatus::Ok);
        let mut small = [0.0; 3];
        assert_eq!(
            semianon_kernel_stationary(k, small.as_mut_ptr(), 3),
            SemianonStatus::BufferTooSmall
        );
        let mut v = 0.0;
        assert_eq!(
            semianon_kernel_entry(k, 64, 0, &mut v),
            SemianonStatus::InvalidArgument
        );
        let mu = [0.5; 64];
        let mut outv = [0.0; 64];
        assert_eq!(
            semianon_kernel_evolve(k, mu.as_ptr(), 1.0, outv.as_mut_ptr(), 64),
            SemianonStatus::InvalidArgument
        );
        assert!(last_error().contains("distribution"), "{}", last_error());

        let mut beta = 0.0;
        assert_eq!(
            semianon_beta_lower_bound(2, 1, 1.0, 0.1, &mut beta),
            SemianonStatus::InvalidArgument
        );
        assert_eq!(
            semianon_beta_lower_bound(2, 3, 0.0, 0.1, &mut beta),
            SemianonStatus::Ok
        );
        assert!((beta - 160.0 * 12f64.ln()).abs() <= 1e-9);

        let mut big = ptr::null_mut();
        assert_eq!(
            semianon_game_congestion3(7, 7, 1, -1.0, 1.0, &mut big),
            SemianonStatus::InvalidArgument
        );
        assert!(big.is_null());

        semianon_kernel_free(k);
        semianon_game_free(g);
        semianon_game_free(ptr::null_mut());
        semianon_kernel_free(ptr::null_mut());
    }
}

#[test]
fn scenarios_build_games_and_report_bad_keys() {
    let good = CString::new(
        "schema_version = 1\nbeta = 2.0\n\n[[population]]\nsize = 3\nactions = [0, 1]\n\n[[population]]\nsize = 3\nactions = [1, 2]\n\n[welfare]\ncatalog = \"example2\"\n",
    )
    .unwrap();
    let bad = CString::new("schema_version = 1\n\n[[population]]\nactions = [0, 1]\n").unwrap();
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(
            semianon_game_from_scenario(good.as_ptr(), &mut g),
            SemianonStatus::Ok
        );
        let mut n = 0u32;
        let mut b = 0.0;
        assert_eq!(
            semianon_game_info(g, &mut n, ptr::null_mut(), &mut b),
            SemianonStatus::Ok
        );
        assert_eq!((n, b), (6, 2.0));
        semianon_game_free(g);

        let mut h = ptr::null_mut();
        assert_eq!(
            semianon_game_from_scenario(bad.as_ptr(), &mut h),
            SemianonStatus::Config
        );
        assert!(h.is_null());
        assert!(
            last_error().contains("population[0].size"),
            "{}",
            last_error()
        );
        assert_eq!(
            semianon_game_from_scenario(ptr::null(), &mut h),
            SemianonStatus::NullPointer
        );
    }
}

#[test]
fn version_matches_the_package() {
    let v = unsafe { CStr::from_ptr(semianon_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/semianon.h")).unwrap();
    let source = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .split("pub unsafe extern \"C\" fn ")
        .chain(source.split("pub extern \"C\" fn "))
        .skip(1)
        .filter_map(|s| s.split('(').next())
        .filter(|name| name.starts_with("semianon_"))
        .collect();
    assert!(exports.len() >= 15, "{exports:?}");
    for name in exports {
        assert!(
            header.contains(&format!(" {name}(")) || header.contains(&format!("*{name}(")),
            "{name}"
        );
    }
    assert!(header.contains("typedef struct SemianonGame SemianonGame;"));
    assert!(header.contains("SEMIANON_STATUS_BUFFER_TOO_SMALL = 6"));
}

/// Directory holding the library artifacts of this build (`target/<profile>`).
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = artifact_dir().join("libsemianon_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler is installed");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("beta 1.27"), "{text}");
    assert!(text.contains("states 64"));
}
