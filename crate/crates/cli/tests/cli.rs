use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn libnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_libnet"))
        .args(args)
        .output()
        .expect("run libnet")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// A HAP1 file of `dim` one-hot patterns, each answered and labelled `i % 3`.
fn one_hot_haps(path: &Path, dim: usize) {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(b"HAP1");
    bytes.extend_from_slice(&1u16.to_le_bytes());
    bytes.extend_from_slice(&3u16.to_le_bytes());
    bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    bytes.extend_from_slice(&(dim as u64).to_le_bytes());
    for i in 0..dim {
        bytes.extend_from_slice(&(i as u64).to_le_bytes());
        bytes.extend_from_slice(&((i % 3) as i16).to_le_bytes());
        bytes.extend_from_slice(&((i % 3) as i16).to_le_bytes());
        for j in 0..dim {
            bytes.extend_from_slice(&f32::from(u8::from(i == j)).to_le_bytes());
        }
    }
    fs::write(path, bytes).unwrap();
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&libnet(&[])), 1);
    assert_eq!(code(&libnet(&["build", "--haps"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let haps = dir.path().join("p.hap");
    one_hot_haps(&haps, 4);
    let haps = haps.to_str().unwrap();
    let out = dir.path().join("x.lib");
    let out = out.to_str().unwrap();
    assert_eq!(
        code(&libnet(&[
            "build", "--haps", haps, "--theta", "1.5", "--out", out
        ])),
        1
    );
    assert_eq!(
        code(&libnet(&["build", "--haps", haps, "--preset", "nope"])),
        1
    );
    assert_eq!(code(&libnet(&["build", "--haps", haps])), 1);
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_libnet"))
        .args(["presets"])
        .env("LIBNET_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&bad_threads), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.hap");
    fs::write(&bogus, b"HAPX\x01\x00").unwrap();
    let out = dir.path().join("x.lib");
    let run = libnet(&[
        "build",
        "--haps",
        bogus.to_str().unwrap(),
        "--theta",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 2);
    let missing = libnet(&[
        "roc",
        "--normal",
        "/nonexistent/a.csv",
        "--adv",
        "/nonexistent/b.csv",
    ]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn orthogonal_stream_is_stored_whole() {
    let dir = tempfile::tempdir().unwrap();
    let haps = dir.path().join("p.hap");
    one_hot_haps(&haps, 6);
    let lib = dir.path().join("p.lib");
    let out = libnet(&[
        "build",
        "--haps",
        haps.to_str().unwrap(),
        "--theta",
        "1",
        "--out",
        lib.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "6");
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"subcommand\":\"build\""));

    let sweep = libnet(&[
        "build",
        "--haps",
        haps.to_str().unwrap(),
        "--theta-grid",
        "0.5,1",
    ]);
    assert_eq!(stdout(&sweep), "theta,size\n0.5,6\n1,6\n");

    let head = dir.path().join("p.hed");
    let trained = libnet(&[
        "train-head",
        "--lib",
        lib.to_str().unwrap(),
        "--haps",
        haps.to_str().unwrap(),
        "--out",
        head.to_str().unwrap(),
    ]);
    assert_eq!(code(&trained), 0);
    let predicted = libnet(&[
        "predict",
        "--lib",
        lib.to_str().unwrap(),
        "--head",
        head.to_str().unwrap(),
        "--haps",
        haps.to_str().unwrap(),
        "--k",
        "1",
    ]);
    assert_eq!(stdout(&predicted).trim(), "top-1 accuracy 1 (6/6)");
    let confusion = libnet(&[
        "confusion",
        "--lib",
        lib.to_str().unwrap(),
        "--head",
        head.to_str().unwrap(),
        "--haps",
        haps.to_str().unwrap(),
    ]);
    let text = stdout(&confusion);
    assert!(text.starts_with("d1,d2,ci,trials\n0,0,1,2\n"), "{text}");
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn demo_is_deterministic_and_equals_its_stages() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let run = libnet(&[
            "demo",
            "--scenario",
            "synthetic",
            "--seed",
            "7",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    }
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (name, bytes) in &ta {
        assert!(bytes == &tb[name], "{name} differs between runs");
    }

    let demo = a.path();
    let stages = tempfile::tempdir().unwrap();
    let p = |rel: &str| demo.join(rel).to_string_lossy().into_owned();
    let s = |rel: &str| stages.path().join(rel).to_string_lossy().into_owned();

    let built = libnet(&[
        "build",
        "--haps",
        &p("haps/train_layer2.hap"),
        "--theta",
        "0.5",
        "--out",
        &s("l2.lib"),
        "--skip-degenerate",
    ]);
    assert_eq!(code(&built), 0);
    assert_eq!(
        fs::read(s("l2.lib")).unwrap(),
        ta["libs/layer2_theta0.5.lib"]
    );
    let trained = libnet(&[
        "train-head",
        "--lib",
        &s("l2.lib"),
        "--haps",
        &p("haps/train_layer2.hap"),
        "--top-a",
        "3",
        "--out",
        &s("l2.hed"),
        "--skip-degenerate",
    ]);
    assert_eq!(code(&trained), 0);
    assert_eq!(
        fs::read(s("l2.hed")).unwrap(),
        ta["libs/layer2_theta0.5.hed"]
    );

    let sizes = libnet(&[
        "build",
        "--haps",
        &p("haps/train_layer0.hap"),
        "--preset",
        "unit-grid",
        "--skip-degenerate",
    ]);
    assert_eq!(stdout(&sizes).as_bytes(), ta["sizes_layer0.csv"].as_slice());

    let cpl_libs: Vec<String> = ["0", "1", "2"]
        .iter()
        .map(|l| {
            let stem = ta
                .keys()
                .find(|k| k.starts_with(&format!("libs/cpl_layer{l}_")) && k.ends_with(".lib"))
                .unwrap()
                .trim_end_matches(".lib")
                .to_string();
            format!(
                "{},{}",
                p(&format!("{stem}.lib")),
                p(&format!("{stem}.hed"))
            )
        })
        .collect();
    let adv: Vec<String> = (0..3)
        .map(|l| p(&format!("haps/adv_eps0.3_layer{l}.hap")))
        .collect();
    let scored = libnet(&[
        "cpl",
        "--layers",
        &cpl_libs.join(";"),
        "--haps-per-layer",
        &adv.join(";"),
        "--out",
        &s("adv.csv"),
    ]);
    assert_eq!(
        code(&scored),
        0,
        "{}",
        String::from_utf8_lossy(&scored.stderr)
    );
    assert_eq!(fs::read(s("adv.csv")).unwrap(), ta["cpl_eps0.3.csv"]);

    let auc = libnet(&[
        "roc",
        "--normal",
        &p("cpl_normal.csv"),
        "--adv",
        &s("adv.csv"),
    ]);
    let auc: f64 = stdout(&auc).trim().parse().unwrap();
    let roc = String::from_utf8(ta["roc.csv"].clone()).unwrap();
    let listed: f64 = roc
        .lines()
        .find_map(|l| l.strip_prefix("0.3,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((auc - listed).abs() < 1e-8);

    let misaligned = libnet(&[
        "cpl",
        "--layers",
        &cpl_libs.join(";"),
        "--haps-per-layer",
        &format!("{};{};{}", adv[0], p("haps/test_layer1.hap"), adv[2]),
    ]);
    assert_eq!(code(&misaligned), 2);
}
