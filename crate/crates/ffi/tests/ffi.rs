use std::ffi::{CStr, CString};
use std::ptr;

use glycopipe::model::{save_model, FusionModel, TrainConfig};
use glycopipe_ffi::*;

fn last_error() -> String {
    let p = glyco_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(glyco_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_round_trip_matches_library() {
    let cfg = TrainConfig { hidden_size: 4, lstm_layers: 1, mlp_hidden: vec![3], seed: 2, ..Default::default() };
    let model = FusionModel::new(&cfg, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_model(&model, &path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();

    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { glyco_model_load(cpath.as_ptr(), &mut handle) }, GlycoStatus::Ok);
    assert_eq!(unsafe { glyco_model_static_dim(handle) }, 3);
    let statics = [0.1, -0.4, 1.2];
    let series = [0.3, 0.2, -0.1, 0.0];
    let mut p = f64::NAN;
    let st = unsafe { glyco_model_predict(handle, statics.as_ptr(), 3, series.as_ptr(), 4, &mut p) };
    assert_eq!(st, GlycoStatus::Ok);
    assert_eq!(p, model.predict(&statics, &series).unwrap());

    let st = unsafe { glyco_model_predict(handle, statics.as_ptr(), 2, series.as_ptr(), 4, &mut p) };
    assert_eq!(st, GlycoStatus::Shape);
    assert!(last_error().contains("static"));
    unsafe { glyco_model_free(handle) };
}

#[test]
fn null_and_missing_inputs() {
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { glyco_model_load(ptr::null(), &mut handle) }, GlycoStatus::NullPointer);
    let missing = CString::new("/nonexistent/model.ckpt").unwrap();
    assert_eq!(unsafe { glyco_model_load(missing.as_ptr(), &mut handle) }, GlycoStatus::Io);
    assert!(handle.is_null());
    unsafe {
        glyco_model_free(ptr::null_mut());
        glyco_keypair_free(ptr::null_mut());
        glyco_ciphertext_free(ptr::null_mut());
    }
    assert_eq!(unsafe { glyco_model_static_dim(ptr::null()) }, 0);
}

#[test]
fn encrypted_sum() {
    let mut kp = ptr::null_mut();
    assert_eq!(unsafe { glyco_keypair_generate(128, 5, &mut kp) }, GlycoStatus::Ok);
    assert_eq!(unsafe { glyco_keypair_bits(kp) }, 128);
    let (mut a, mut b, mut s) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(glyco_encrypt(kp, 1.25, 1, &mut a), GlycoStatus::Ok);
        assert_eq!(glyco_encrypt(kp, -3.5, 2, &mut b), GlycoStatus::Ok);
        assert_eq!(glyco_ciphertext_add(kp, a, b, &mut s), GlycoStatus::Ok);
        let mut out = 0.0;
        assert_eq!(glyco_decrypt(kp, s, &mut out), GlycoStatus::Ok);
        assert_eq!(out, -2.25);
        let mut c = ptr::null_mut();
        assert_eq!(glyco_encrypt(kp, 5000.0, 3, &mut c), GlycoStatus::Crypto);
        assert!(c.is_null());

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("k.ckpt").to_str().unwrap()).unwrap();
        assert_eq!(glyco_keypair_save(kp, path.as_ptr()), GlycoStatus::Ok);
        let mut kp2 = ptr::null_mut();
        assert_eq!(glyco_keypair_load(path.as_ptr(), &mut kp2), GlycoStatus::Ok);
        assert_eq!(glyco_decrypt(kp2, s, &mut out), GlycoStatus::Ok);
        assert_eq!(out, -2.25);
        for h in [a, b, s] {
            glyco_ciphertext_free(h);
        }
        glyco_keypair_free(kp);
        glyco_keypair_free(kp2);
    }
    let mut small = ptr::null_mut();
    assert_eq!(unsafe { glyco_keypair_generate(32, 0, &mut small) }, GlycoStatus::Crypto);
}

#[test]
fn allreduce_sums_rows() {
    let data = [1.0, 2.0, 3.0, 10.0, 20.0, 30.0];
    let mut out = [0.0; 3];
    assert_eq!(unsafe { glyco_ring_allreduce(data.as_ptr(), 2, 3, out.as_mut_ptr()) }, GlycoStatus::Ok);
    assert_eq!(out, [11.0, 22.0, 33.0]);
    assert_eq!(unsafe { glyco_ring_allreduce(data.as_ptr(), 0, 3, out.as_mut_ptr()) }, GlycoStatus::InvalidArgument);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/glycopipe.h")).unwrap();
    for name in [
        "glyco_last_error",
        "glyco_version",
        "glyco_model_load",
        "glyco_model_predict",
        "glyco_model_free",
        "glyco_keypair_generate",
        "glyco_keypair_load",
        "glyco_keypair_save",
        "glyco_encrypt",
        "glyco_ciphertext_add",
        "glyco_decrypt",
        "glyco_ring_allreduce",
        "GLYCO_STATUS_OK",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("t.c");
    std::fs::write(
        &src,
        "#include \"glycopipe.h\"\nint main(void) { GlycoModel *m = 0; return glyco_model_static_dim(m) == 0 ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
