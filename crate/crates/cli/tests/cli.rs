use std::path::Path;
use std::process::{Command, Output};

fn intrinsic(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intrinsic"))
        .current_dir(dir)
        .env_remove("INTRINSIC_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_SWEEP: [&str; 2] = ["-s", "call.lambdas={min=1.0,max=4.0,points=7}"];

#[test]
fn call_sweep_writes_header_provenance_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["call-sweep", "--out", "res"];
    args.extend(SMALL_SWEEP);
    let o = intrinsic(tmp.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("res/call_sweep.csv")).unwrap();
    let comments: Vec<&str> = csv.lines().take_while(|l| l.starts_with('#')).collect();
    for key in ["command: call-sweep", "config_sha256:", "seed:", "version:"] {
        assert!(
            comments.iter().any(|l| l.contains(key)),
            "missing {key} in {comments:?}"
        );
    }
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "lambda,M,rstar,utility");
    assert_eq!(body.len(), 8);
    let manifest: toml::Table = std::fs::read_to_string(tmp.path().join("res/call-sweep.manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(manifest["manifest"]["command"].as_str(), Some("call-sweep"));
    assert_eq!(manifest["config"]["call"]["lambdas"]["points"].as_integer(), Some(7));
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let o = intrinsic(
            tmp.path(),
            &[
                "onetouch-ce-k",
                "--out",
                out,
                "-s",
                "onetouch.strikes={min=0.8,max=1.2,points=5}",
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(tmp.path().join(out).join("onetouch_ce_k.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn sequential_and_parallel_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let mut a = vec!["call-sweep", "--out", "p"];
    a.extend(SMALL_SWEEP);
    let mut b = vec!["call-sweep", "--out", "s", "--sequential"];
    b.extend(SMALL_SWEEP);
    assert!(intrinsic(tmp.path(), &a).status.success());
    assert!(intrinsic(tmp.path(), &b).status.success());
    let body = |d: &str| {
        std::fs::read_to_string(tmp.path().join(d).join("call_sweep.csv"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(body("p"), body("s"));
}

#[test]
fn bad_input_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[market]\nsigmaa = 0.4\n").unwrap();
    let o = intrinsic(tmp.path(), &["call-sweep", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigmaa"));
    assert_eq!(intrinsic(tmp.path(), &["no-such-command"]).status.code(), Some(3));
    assert_eq!(intrinsic(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn out_of_domain_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    // the call strike sits exactly at the discounted spot
    let o = intrinsic(
        tmp.path(),
        &[
            "densities",
            "--out",
            "o",
            "-s",
            "densities.y=0.0",
            "-s",
            "densities.x=0.0",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let o = intrinsic(tmp.path(), &["call-sweep", "--out", "o", "-s", "market.sigma=-1"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn arb_check_reports_clean_and_broken_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = "# model curve\nstrike,price\n0,1.2\n0.5,0.7548\n1,0.4235\n1.5,0.2404\n2,0.1393\n";
    std::fs::write(tmp.path().join("clean.csv"), clean).unwrap();
    let o = intrinsic(tmp.path(), &["arb-check", "--curve", "clean.csv", "--out", "o"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("no violations"), "{}", stdout(&o));

    let broken = "strike,price\n0,1.2\n0.5,0.75\n1,0.5\n1.5,0.1\n2,0.2\n";
    std::fs::write(tmp.path().join("broken.csv"), broken).unwrap();
    let o = intrinsic(tmp.path(), &["arb-check", "--curve", "broken.csv", "--out", "o"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("convexity") && text.contains("monotonicity"), "{text}");
    let legs = std::fs::read_to_string(tmp.path().join("o/arb_legs.csv")).unwrap();
    assert!(legs.lines().any(|l| l == "0,call,1,-1"), "{legs}");

    std::fs::write(tmp.path().join("garbled.csv"), "strike,price\n0.5,abc\n").unwrap();
    let o = intrinsic(tmp.path(), &["arb-check", "--curve", "garbled.csv", "--out", "o"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("garbled.csv:2"));
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_intrinsic"))
        .current_dir(tmp.path())
        .env("INTRINSIC_OUT_DIR", "from_env")
        .args([
            "densities",
            "-s",
            "densities.times={min=0.1,max=1.0,points=10}",
            "-s",
            "densities.v_points=10",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["gamma1.csv", "gamma2.csv", "densities.manifest.toml"] {
        assert!(tmp.path().join("from_env").join(f).exists(), "{f}");
    }
    let g1 = std::fs::read_to_string(tmp.path().join("from_env/gamma1.csv")).unwrap();
    assert!(g1.lines().any(|l| l == "u,gamma1"));
}

#[test]
fn call_cdf_files_per_quantity() {
    let tmp = tempfile::tempdir().unwrap();
    let o = intrinsic(
        tmp.path(),
        &[
            "call-cdf",
            "--measure",
            "Q",
            "--out",
            "o",
            "-s",
            "call.cdf_lambdas=[2.0]",
            "-s",
            "call.cdf_levels.points=11",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("o/cdf_lambda_2_Q.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 12);
}

#[test]
fn verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = intrinsic(tmp.path(), &["verify", "--out", "o", "-s", "verify.mc_paths=4000"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}\n{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 10, "{text}");
}
