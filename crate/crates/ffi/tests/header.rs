//! Compiles a small C program against the generated header.

use std::path::PathBuf;
use std::process::Command;

#[test]
fn header_compiles_as_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/seaobs.h");
    assert!(header.exists(), "header not generated");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "seaobs_run",
        "seaobs_run_free",
        "seaobs_scenario_from_json",
        "SEAOBS_STATUS_NUMERICAL",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }

    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"seaobs.h\"\n\
         int probe(void) {\n\
           SeaobsScenario *s = 0;\n\
           SeaobsRecord r;\n\
           size_t n = 0;\n\
           SeaobsStatus st = seaobs_scenario_default(&s);\n\
           (void)r; (void)n;\n\
           return st == SEAOBS_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .status()
        .expect("C compiler available");
    assert!(status.success());
}
