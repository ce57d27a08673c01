//! Compiles and runs a small C program against the generated header and
//! the static library, proving the ABI from the consumer side.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "msa.h"

int main(void) {
    MsaGenConfig config = {
        .seed = 4,
        .max_sorts = 2,
        .max_carrier = 2,
        .max_ops = 2,
        .max_index = 3,
        .force_constant_support = true,
        .force_surjective_transitions = false,
        .inject_support_violation = false,
    };
    char *text = NULL;
    if (msa_generate(&config, &text) != MSA_STATUS_OK) return 1;

    MsaInstance *inst = NULL;
    if (msa_instance_parse(text, &inst) != MSA_STATUS_OK) return 2;

    char *report = NULL;
    if (msa_instance_check(inst, "retraction", 1000000, &report) != MSA_STATUS_OK)
        return 3;
    if (strstr(report, "\"pass\": true") == NULL) return 4;

    char *emitted = NULL;
    if (msa_instance_construct(inst, "projlim", "PS", &emitted) != MSA_STATUS_OK)
        return 5;

    msa_string_free(emitted);
    msa_string_free(report);
    msa_instance_free(inst);
    msa_string_free(text);
    printf("ok\n");
    return 0;
}
"#;

#[test]
fn c_consumer_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    // the static library lands next to the test binary's deps directory
    let mut lib_dir = std::env::current_exe().unwrap();
    lib_dir.pop(); // the test binary
    lib_dir.pop(); // deps/
    let lib = lib_dir.join("libmsa_ffi.a");
    if !lib.exists() {
        // `cargo test` alone only builds the rlib; produce the staticlib
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
        let built = Command::new(cargo)
            .args(["build", "-p", "msa-ffi"])
            .current_dir(manifest.parent().unwrap().parent().unwrap())
            .status()
            .map(|s| s.success())
            .unwrap_or(false);
        if !built || !lib.exists() {
            eprintln!("skipping: {} not found", lib.display());
            return;
        }
    }
    let dir = std::env::temp_dir().join(format!("msa-c-smoke-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("smoke.c");
    let bin = dir.join("smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let compile = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        compile.status.success(),
        "cc failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit: {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
    std::fs::remove_dir_all(&dir).ok();
}
