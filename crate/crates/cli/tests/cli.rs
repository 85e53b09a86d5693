use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vortexlab"))
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn profile_run_writes_files_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "R = 1, 2\nn = 128\ntol = 1e-10\n").unwrap();
    let out = tmp.path().join("out");
    let status = bin()
        .args(["profile", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&out, "manifest.json")).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let name = f["name"].as_str().unwrap();
        let body = read(&out, name);
        let digest = format!("{:x}", <sha2::Sha256 as sha2::Digest>::digest(&body));
        assert_eq!(digest, f["sha256"].as_str().unwrap(), "digest of {name}");
    }
    assert!(manifest["config"].as_str().unwrap().contains("R = 1, 2"));
    assert!(manifest["jobs"].as_array().unwrap().iter().all(|j| j["ok"].as_bool().unwrap()));

    // repeat run is byte-identical
    let out2 = tmp.path().join("out2");
    let status = bin()
        .args(["profile", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out2)
        .arg("--jobs")
        .arg("2")
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["profile_R1.csv", "profile_R2.csv"] {
        assert_eq!(read(&out, name), read(&out2, name), "{name} differs");
    }
    // manifests agree up to wall-clock timings
    let strip = |dir: &Path| -> serde_json::Value {
        let mut m: serde_json::Value =
            serde_json::from_slice(&read(dir, "manifest.json")).unwrap();
        for j in m["jobs"].as_array_mut().unwrap() {
            j["wall_ms"] = 0.into();
        }
        m
    };
    assert_eq!(strip(&out), strip(&out2));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "R = 1\nbogus = 3\n").unwrap();
    let output = bin()
        .args(["profile", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&output.stderr);
    assert!(msg.contains("bogus"), "stderr: {msg}");
    assert!(msg.contains("line 2"), "stderr: {msg}");
}

#[test]
fn nonpositive_beta_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "beta = 0\n").unwrap();
    let output = bin()
        .args(["lambda-beta", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&output.stderr);
    assert!(msg.contains("beta > 0 required"), "stderr: {msg}");
}

#[test]
fn qbreve_defaults_produce_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = bin().arg("qbreve").arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let table = String::from_utf8(read(&out, "qbreve.csv")).unwrap();
    assert!(table.starts_with("beta,form,closed\n"));
    assert_eq!(table.lines().count(), 4);
}
