use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use synth_eval_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn write_csv(dir: &Path, name: &str, rows: &[(f64, f64, &str)]) -> CString {
    let path = dir.join(name);
    let mut text = String::from("x,y,Label\n");
    for (x, y, l) in rows {
        text.push_str(&format!("{x},{y},{l}\n"));
    }
    std::fs::write(&path, text).unwrap();
    c(path.to_str().unwrap())
}

fn grid(n: usize, shift: f64) -> Vec<(f64, f64, &'static str)> {
    (0..n)
        .map(|i| {
            let l = if i % 3 == 0 { "a" } else { "b" };
            ((i % 17) as f64 + shift, (i % 11) as f64 * 0.5, l)
        })
        .collect()
}

unsafe fn read(path: &CString) -> *mut SeTable {
    let mut t = ptr::null_mut();
    let label = c("Label");
    assert_eq!(
        se_table_read_csv(path.as_ptr(), label.as_ptr(), ptr::null(), &mut t),
        SeStatus::Ok
    );
    assert!(!t.is_null());
    t
}

#[test]
fn table_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let real_path = write_csv(dir.path(), "real.csv", &grid(120, 0.0));
    unsafe {
        let real = read(&real_path);
        let (mut rows, mut cols) = (0, 0);
        assert_eq!(se_table_shape(real, &mut rows, &mut cols), SeStatus::Ok);
        assert_eq!((rows, cols), (120, 3));

        let mut copy = ptr::null_mut();
        assert_eq!(
            se_table_read_csv_like(real_path.as_ptr(), real, &mut copy),
            SeStatus::Ok
        );
        let mut q = 0.0;
        let mut d = 0.0;
        assert_eq!(se_quality_overall(real, copy, &mut q), SeStatus::Ok);
        assert_eq!(se_diagnostic_overall(real, copy, &mut d), SeStatus::Ok);
        assert_eq!((q, d), (1.0, 1.0));
        let mut pass = false;
        assert_eq!(se_gate(q, d, 0.65, 0.95, &mut pass), SeStatus::Ok);
        assert!(pass);

        let mut score = -1.0;
        assert_eq!(se_nndr(copy, real, &mut score), SeStatus::Ok);
        assert_eq!(score, 0.0);

        let (mut auc, mut f1) = (0.0, 0.0);
        let shifted_path = write_csv(dir.path(), "far.csv", &grid(120, 1000.0));
        let mut far = ptr::null_mut();
        assert_eq!(
            se_table_read_csv_like(shifted_path.as_ptr(), real, &mut far),
            SeStatus::Ok
        );
        assert_eq!(
            se_distinguishability(real, far, SeClassifier::RandomForest, 3, &mut auc, &mut f1),
            SeStatus::Ok
        );
        assert!(auc >= 0.99, "{auc}");

        let out = c(dir.path().join("out.csv").to_str().unwrap());
        assert_eq!(se_table_write_csv(far, out.as_ptr()), SeStatus::Ok);

        se_table_free(real);
        se_table_free(copy);
        se_table_free(far);
    }
}

#[test]
fn generator_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_csv(dir.path(), "real.csv", &grid(90, 0.0));
    unsafe {
        let real = read(&path);
        let mut gen = ptr::null_mut();
        assert_eq!(se_gmm_fit(real, 1, 1e-6, 5, &mut gen), SeStatus::Ok);
        let model = c(dir.path().join("m.json").to_str().unwrap());
        assert_eq!(se_generator_save(gen, model.as_ptr()), SeStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(se_generator_load(model.as_ptr(), &mut loaded), SeStatus::Ok);
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(se_generator_sample(gen, 40, true, 9, &mut a), SeStatus::Ok);
        assert_eq!(
            se_generator_sample(loaded, 40, true, 9, &mut b),
            SeStatus::Ok
        );
        let mut q = 0.0;
        assert_eq!(se_quality_overall(a, b, &mut q), SeStatus::Ok);
        assert_eq!(q, 1.0);
        se_table_free(a);
        se_table_free(b);
        se_generator_free(gen);
        se_generator_free(loaded);
        se_table_free(real);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut t = ptr::null_mut();
        let missing = c("/nonexistent/file.csv");
        assert_eq!(
            se_table_read_csv(missing.as_ptr(), ptr::null(), ptr::null(), &mut t),
            SeStatus::Io
        );
        assert!(t.is_null());
        let msg = CStr::from_ptr(se_last_error()).to_str().unwrap();
        assert!(msg.contains("/nonexistent/file.csv"), "{msg}");

        assert_eq!(
            se_table_read_csv(ptr::null(), ptr::null(), ptr::null(), &mut t),
            SeStatus::NullPointer
        );
        let mut rows = 0;
        assert_eq!(
            se_table_shape(ptr::null(), &mut rows, &mut rows),
            SeStatus::NullPointer
        );

        let mut risk = 0.0;
        assert_eq!(
            se_vanilla_gan_risk(ptr::null(), 0, ptr::null(), 0, &mut risk),
            SeStatus::Schema
        );
        let half = [0.5; 3];
        assert_eq!(
            se_vanilla_gan_risk(half.as_ptr(), 3, half.as_ptr(), 3, &mut risk),
            SeStatus::Ok
        );
        assert!((risk - 2.0 * 0.5f64.ln()).abs() < 1e-12);

        se_table_free(ptr::null_mut());
        se_generator_free(ptr::null_mut());
        assert_eq!(
            CStr::from_ptr(se_version()).to_str().unwrap(),
            env!("CARGO_PKG_VERSION")
        );
    }
}

#[test]
fn permutation_test_through_the_abi() {
    let x: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
    let mut r = SePermutationResult::default();
    unsafe {
        let st = se_permutation_test(
            SeTest::Hotelling,
            x.as_ptr(),
            20,
            x.as_ptr(),
            20,
            2,
            99,
            0.05,
            1,
            &mut r,
        );
        assert_eq!(st, SeStatus::Ok);
        assert_eq!(r.permutations, 99);
        assert!(r.observed.abs() < 1e-12);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.reject);
        let st = se_permutation_test(
            SeTest::Mmd,
            x.as_ptr(),
            20,
            ptr::null(),
            20,
            2,
            99,
            0.05,
            1,
            &mut r,
        );
        assert_eq!(st, SeStatus::NullPointer);
    }
}

#[test]
fn cli_entry_point() {
    let args = [c("synth-eval"), c("--no-such-flag")];
    let ptrs: Vec<*const std::ffi::c_char> = args.iter().map(|a| a.as_ptr()).collect();
    unsafe {
        assert_eq!(se_cli_run(ptrs.len() as i32, ptrs.as_ptr()), 64);
        assert_eq!(se_cli_run(1, ptr::null()), 64);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/synth_eval.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "se_last_error",
        "se_version",
        "se_table_read_csv",
        "se_table_read_csv_like",
        "se_table_write_csv",
        "se_table_shape",
        "se_table_free",
        "se_quality_overall",
        "se_diagnostic_overall",
        "se_gate",
        "se_distinguishability",
        "se_permutation_test",
        "se_nndr",
        "se_vanilla_gan_risk",
        "se_gmm_fit",
        "se_generator_load",
        "se_generator_save",
        "se_generator_sample",
        "se_generator_free",
        "se_cli_run",
        "typedef struct SeTable SeTable;",
        "SE_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Ok(cc) = which("cc") else {
        eprintln!("no C compiler; skipped");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"synth_eval.h\"\nint main(void) { double r; const double p[2] = {0.5, 0.5};\n\
         return se_vanilla_gan_risk(p, 2, p, 2, &r) == SE_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let include = header().parent().unwrap().to_path_buf();
    for lang in ["c", "c++"] {
        let status = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(&include)
            .arg(&src)
            .status()
            .unwrap();
        assert!(status.success(), "header rejected as {lang}");
    }
}

fn which(name: &str) -> Result<PathBuf, ()> {
    std::env::var_os("PATH")
        .and_then(|paths| {
            std::env::split_paths(&paths)
                .map(|p| p.join(name))
                .find(|p| p.is_file())
        })
        .ok_or(())
}
