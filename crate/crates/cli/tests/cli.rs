use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use hcie::bench::{parse_csv, Scheme};
use hcie::rsa::{KeyProfile, RsaPrivateKey, RsaPublicKey};

fn hcie(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcie"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn hcie")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Generates `<dir>/<name>.key` and `<dir>/<name>.pub`.
fn keygen(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    let base = dir.join(name);
    let out = hcie(&["keygen", "--bits", "1024", "--out", p(&base)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (
        dir.join(format!("{name}.key")),
        dir.join(format!("{name}.pub")),
    )
}

#[test]
fn keygen_writes_a_matched_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (key, public) = keygen(dir.path(), "alice");
    let private =
        RsaPrivateKey::from_key_file(&fs::read_to_string(&key).unwrap(), KeyProfile::Standard)
            .unwrap();
    let public = RsaPublicKey::from_key_file(&fs::read_to_string(&public).unwrap()).unwrap();
    assert_eq!(private.public_key(), public);
    assert_eq!(public.modulus().bits(), 1024);

    // existing files are left alone
    let again = hcie(&[
        "keygen",
        "--bits",
        "1024",
        "--out",
        p(&dir.path().join("alice")),
    ]);
    assert_eq!(code(&again), 2);
    let reread =
        RsaPrivateKey::from_key_file(&fs::read_to_string(&key).unwrap(), KeyProfile::Standard)
            .unwrap();
    assert_eq!(reread, private);
}

#[test]
fn small_keys_need_insecure() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("toy");
    let refused = hcie(&["keygen", "--bits", "512", "--out", p(&base)]);
    assert_eq!(code(&refused), 1);
    assert!(stderr(&refused).contains("--insecure"));
    assert!(!dir.path().join("toy.key").exists());

    let ok = hcie(&["--insecure", "keygen", "--bits", "512", "--out", p(&base)]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));

    // loading the small key also needs the flag
    let msg = dir.path().join("m");
    fs::write(&msg, b"hi").unwrap();
    let (key, sig) = (dir.path().join("toy.key"), dir.path().join("m.sig"));
    let args = ["sign", "--in", p(&msg), "--key", p(&key), "--out", p(&sig)];
    assert_ne!(code(&hcie(&args)), 0);
    let mut insecure = vec!["--insecure"];
    insecure.extend(args);
    assert_eq!(code(&hcie(&insecure)), 0);
}

#[test]
fn seal_then_open_reproduces_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (alice_key, alice_pub) = keygen(d, "alice");
    let (bob_key, bob_pub) = keygen(d, "bob");
    let (_, mallory_pub) = keygen(d, "mallory");

    let data: Vec<u8> = (0..100_000u32).map(|i| (i * 7 + i / 251) as u8).collect();
    let (plain, sealed, opened) = (d.join("plain"), d.join("sealed"), d.join("opened"));
    fs::write(&plain, &data).unwrap();

    let out = hcie(&[
        "seal",
        "--in",
        p(&plain),
        "--out",
        p(&sealed),
        "--to",
        p(&bob_pub),
        "--from",
        p(&alice_key),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_ne!(fs::read(&sealed).unwrap(), data);

    let out = hcie(&[
        "open",
        "--in",
        p(&sealed),
        "--out",
        p(&opened),
        "--to",
        p(&bob_key),
        "--from",
        p(&alice_pub),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(&opened).unwrap(), data);

    let wrong = d.join("wrong");
    let out = hcie(&[
        "open",
        "--in",
        p(&sealed),
        "--out",
        p(&wrong),
        "--to",
        p(&bob_key),
        "--from",
        p(&mallory_pub),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("signature"), "{}", stderr(&out));
    assert!(!wrong.exists());

    // envelope sealed for bob cannot be opened by alice
    let out = hcie(&[
        "open",
        "--in",
        p(&sealed),
        "--out",
        p(&wrong),
        "--to",
        p(&alice_key),
        "--from",
        p(&alice_pub),
    ]);
    assert_eq!(code(&out), 2);
    assert!(!wrong.exists());
}

#[test]
fn sign_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (key, public) = keygen(d, "alice");
    let (msg, sig) = (d.join("msg"), d.join("msg.sig"));
    fs::write(&msg, b"quarterly numbers").unwrap();

    let out = hcie(&["sign", "--in", p(&msg), "--key", p(&key), "--out", p(&sig)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&sig).unwrap();
    assert_eq!(text.trim_end().len(), 256);

    let verify = || {
        hcie(&[
            "verify",
            "--in",
            p(&msg),
            "--key",
            p(&public),
            "--sig",
            p(&sig),
        ])
    };
    let out = verify();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "signature ok");

    fs::write(&msg, b"quarterly numbers!").unwrap();
    let out = verify();
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("signature verification failed"));

    fs::write(&sig, "zz\n").unwrap();
    assert_eq!(code(&verify()), 2);
}

#[test]
fn send_to_recv_once() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (alice_key, alice_pub) = keygen(d, "alice");
    let (bob_key, bob_pub) = keygen(d, "bob");
    let (trust, inbox) = (d.join("trust"), d.join("inbox"));
    fs::create_dir(&trust).unwrap();
    fs::copy(&alice_pub, trust.join("alice.pub")).unwrap();

    let mut recv = Command::new(env!("CARGO_BIN_EXE_hcie"))
        .args([
            "recv",
            "--host",
            "127.0.0.1",
            "--port",
            "0",
            "--out-dir",
            p(&inbox),
            "--key",
            p(&bob_key),
            "--trust",
            p(&trust),
            "--once",
            "--timeout",
            "10",
        ])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(recv.stdout.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    let addr = first
        .strip_prefix("listening on ")
        .expect(&first)
        .to_string();
    let port = addr.rsplit(':').next().unwrap();

    let file = d.join("report.csv");
    let data = b"a,b,c\n1,2,3\n".repeat(5000);
    fs::write(&file, &data).unwrap();
    let out = hcie(&[
        "send",
        "--port",
        port,
        "--file",
        p(&file),
        "--to",
        p(&bob_pub),
        "--from",
        p(&alice_key),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("delivered "));

    let stored = lines.next().unwrap().unwrap();
    assert!(stored.starts_with("stored "), "{stored}");
    assert!(recv.wait().unwrap().success());
    assert_eq!(fs::read(inbox.join("report.csv")).unwrap(), data);
}

#[test]
fn send_from_an_untrusted_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (_, alice_pub) = keygen(d, "alice");
    let (bob_key, bob_pub) = keygen(d, "bob");
    let (eve_key, _) = keygen(d, "eve");
    let (trust, inbox) = (d.join("trust"), d.join("inbox"));
    fs::create_dir(&trust).unwrap();
    fs::copy(&alice_pub, trust.join("alice.pub")).unwrap();

    let mut recv = Command::new(env!("CARGO_BIN_EXE_hcie"))
        .args([
            "recv",
            "--host",
            "127.0.0.1",
            "--port",
            "0",
            "--out-dir",
            p(&inbox),
            "--key",
            p(&bob_key),
            "--trust",
            p(&trust),
            "--once",
            "--timeout",
            "10",
        ])
        .env("RUST_LOG", "off")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(recv.stdout.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    let port = first.rsplit(':').next().unwrap().to_string();

    let file = d.join("x");
    fs::write(&file, b"payload").unwrap();
    let out = hcie(&[
        "send",
        "--port",
        &port,
        "--file",
        p(&file),
        "--to",
        p(&bob_pub),
        "--from",
        p(&eve_key),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown sender"), "{}", stderr(&out));
    assert_eq!(recv.wait().unwrap().code(), Some(2));
    assert_eq!(fs::read_dir(&inbox).unwrap().count(), 0);
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = hcie(&[
        "bench",
        "--sizes",
        "1k,8k",
        "--out",
        p(&csv),
        "--repetitions",
        "1",
        "--rsa-bits",
        "1024",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let records = parse_csv(&fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(records.len(), 6);
    let schemes: Vec<Scheme> = records.iter().map(|r| r.scheme).collect();
    assert_eq!(schemes, [Scheme::ALL, Scheme::ALL].concat());
    assert_eq!(records[3].payload_bytes, 8192);

    let out = hcie(&["bench", "--sizes", "512", "--out", "-"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_errors_exit_one() {
    let out = hcie(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("keygen"));

    for args in [
        &["seal", "--bogus"][..],
        &["frobnicate"],
        &[],
        &["keygen", "--bits", "many", "--out", "x"],
        &["keygen"],
    ] {
        let out = hcie(args);
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn missing_files_are_not_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let nope = dir.path().join("nope");
    let out = hcie(&[
        "sign",
        "--in",
        p(&nope),
        "--key",
        p(&nope),
        "--out",
        p(&nope),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("hcie: "));
}
