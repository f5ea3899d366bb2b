use std::path::Path;
use std::process::{Command, Output};

fn cplift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cplift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn gen(dir: &Path, name: &str, widths: &str, seed: &str) -> String {
    let path = dir.join(name);
    let p = path.to_str().unwrap().to_owned();
    let out = cplift(&[
        "gen", "--widths", widths, "--n", "4", "--seed", seed, "-o", &p,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    p
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", "2,1,2", "9");
    let b = gen(dir.path(), "b.json", "2,1,2", "9");
    let c = gen(dir.path(), "c.json", "2,1,2", "10");
    let read = |p: &str| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn subcommands_exit_zero_on_valid_input() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", "2,1,2", "1");
    let sdpa = dir.path().join("relax.dat-s");
    let sdpa = sdpa.to_str().unwrap();
    for args in [
        vec!["eval", &inst],
        vec!["oracle", &inst],
        vec!["train", &inst],
        vec!["lift", &inst],
        vec!["relax", &inst],
        vec!["export", &inst, "-o", sdpa],
        vec!["verify", &inst, "--samples", "10"],
    ] {
        let out = cplift(&args);
        assert_eq!(
            code(&out),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert!(std::fs::read_to_string(sdpa)
        .unwrap()
        .contains("{49, 4, 4, 4, 1}"));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let bad = bad.to_str().unwrap();
    assert_eq!(code(&cplift(&["oracle", bad])), 2);
    assert_eq!(code(&cplift(&["verify", "/nonexistent.json"])), 2);
    assert_eq!(
        code(&cplift(&[
            "gen",
            "--generator",
            "uniform",
            "--widths",
            "1,1",
            "--n",
            "2"
        ])),
        2
    );
    assert_eq!(code(&cplift(&["gen", "--widths", "1,1"])), 2);
}

#[test]
fn verify_is_byte_identical_when_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", "3,2,2", "4");
    let run = |name: &str| {
        let json = dir.path().join(name);
        let out = cplift(&[
            "verify",
            &inst,
            "--deterministic",
            "--samples",
            "20",
            "--json",
            json.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        (out.stdout, std::fs::read(json).unwrap())
    };
    let (a, ja) = run("a.json");
    let (b, jb) = run("b.json");
    assert_eq!(a, b);
    assert_eq!(ja, jb);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", "2,1,2", "2");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"relax": {"max_iters": 3}}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&cplift(&["relax", &inst, "--config", cfg])), 3);
    assert_eq!(
        code(&cplift(&[
            "relax",
            &inst,
            "--config",
            cfg,
            "--max-iters",
            "20000"
        ])),
        0
    );
}

#[test]
fn tampered_witness_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "inst.json", "2,1,2", "3");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"tamper_w_prime": 0.9}"#).unwrap();
    let out = cplift(&[
        "verify",
        &inst,
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "5",
    ]);
    assert_eq!(code(&out), 1);
}
