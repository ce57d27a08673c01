//! Exercises the C entry points from Rust, the way a binding would.

use std::ffi::{CStr, CString};
use std::ptr;

use msa_ffi::*;

fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { msa_string_free(p) };
    s
}

#[test]
fn generate_parse_check_construct() {
    assert_eq!(msa_schema_version(), 1);
    unsafe {

    let config = MsaGenConfig {
        seed: 12,
        max_sorts: 2,
        max_carrier: 2,
        max_ops: 2,
        max_index: 3,
        force_constant_support: true,
        force_surjective_transitions: false,
        inject_support_violation: false,
    };
    let mut text_ptr = ptr::null_mut();
    assert_eq!(msa_generate(&config, &mut text_ptr), MsaStatus::Ok);
    let text = take_string(text_ptr);
    let ctext = CString::new(text.clone()).unwrap();

    // deterministic bytes
    let mut again = ptr::null_mut();
    assert_eq!(msa_generate(&config, &mut again), MsaStatus::Ok);
    assert_eq!(take_string(again), text);

    let mut report = ptr::null_mut();
    assert_eq!(msa_validate(ctext.as_ptr(), &mut report), MsaStatus::Ok);
    let report = take_string(report);
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["schema"], 1);

    let mut handle = ptr::null_mut();
    assert_eq!(
        msa_instance_parse(ctext.as_ptr(), &mut handle),
        MsaStatus::Ok
    );
    let which = CString::new("all").unwrap();
    let mut check = ptr::null_mut();
    assert_eq!(
        msa_instance_check(handle, which.as_ptr(), 1_000_000, &mut check),
        MsaStatus::Ok
    );
    let check: serde_json::Value = serde_json::from_str(&take_string(check)).unwrap();
    assert!(check["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));

    let what = CString::new("projlim").unwrap();
    let name = CString::new("PS").unwrap();
    let mut emitted = ptr::null_mut();
    assert_eq!(
        msa_instance_construct(handle, what.as_ptr(), name.as_ptr(), &mut emitted),
        MsaStatus::Ok
    );
    let emitted_text = take_string(emitted);
    let cemitted = CString::new(emitted_text).unwrap();
    let mut handle2 = ptr::null_mut();
    assert_eq!(
        msa_instance_parse(cemitted.as_ptr(), &mut handle2),
        MsaStatus::Ok
    );
    msa_instance_free(handle2);
    msa_instance_free(handle);
    }
}

#[test]
fn error_paths_set_messages() {
    unsafe {
    // null argument
    let mut out = ptr::null_mut();
    assert_eq!(
        msa_instance_parse(ptr::null(), &mut out),
        MsaStatus::NullArgument
    );

    // parse failure carries located diagnostics
    let bad = CString::new("sorts s;\nalgebra X over NOPE { }").unwrap();
    assert_eq!(
        msa_instance_parse(bad.as_ptr(), &mut out),
        MsaStatus::ParseError
    );
    let msg = CStr::from_ptr(msa_last_error())
        .to_string_lossy()
        .into_owned();
    assert!(msg.contains("2:"), "{msg}");

    // failing checks still return the report
    let config = MsaGenConfig {
        seed: 5,
        max_sorts: 2,
        max_carrier: 2,
        max_ops: 2,
        max_index: 3,
        force_constant_support: false,
        force_surjective_transitions: false,
        inject_support_violation: true,
    };
    let mut text_ptr = ptr::null_mut();
    assert_eq!(msa_generate(&config, &mut text_ptr), MsaStatus::Ok);
    let ctext = CString::new(take_string(text_ptr)).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(
        msa_instance_parse(ctext.as_ptr(), &mut handle),
        MsaStatus::Ok
    );
    let which = CString::new("retraction").unwrap();
    let mut report = ptr::null_mut();
    assert_eq!(
        msa_instance_check(handle, which.as_ptr(), 1_000_000, &mut report),
        MsaStatus::CheckFailed
    );
    let report: serde_json::Value = serde_json::from_str(&take_string(report)).unwrap();
    assert!(report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["pass"] == false));
    msa_instance_free(handle);

    // unknown check name
    let nope = CString::new("nope").unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(
        msa_instance_parse(ctext.as_ptr(), &mut handle),
        MsaStatus::Ok
    );
    let mut report2 = ptr::null_mut();
    assert_eq!(
        msa_instance_check(handle, nope.as_ptr(), 1_000_000, &mut report2),
        MsaStatus::InvalidArgument
    );
    msa_instance_free(handle);
    }
}
