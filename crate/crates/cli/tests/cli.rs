use std::path::Path;
use std::process::{Command, Output};

fn imbcs(args: &[&str]) -> Output {
    imbcs_env(args, &[])
}

fn imbcs_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_imbcs"));
    c.args(args);
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("spawn imbcs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const CHAIN: &str = r#"
name = "chain"
bands = 1
basis = [[1.0]]

[[terms]]
displacement = [1]
block = [[-1.0, 0.0]]

[[terms]]
displacement = [-1]
block = [[-1.0, 0.0]]
"#;

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn hubbard_stratonovich_suite() {
    let o = imbcs(&["verify-identities", "--suite", "hubbard-stratonovich", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("suite,check,value,kind,threshold,pass"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(r.starts_with("hubbard-stratonovich,") && r.ends_with(",true"), "{r}");
        let value: f64 = r.split(',').nth_back(3).unwrap().parse().unwrap();
        assert!(value < 1e-8);
    }
}

#[test]
fn identical_bytes_across_runs_and_threads() {
    let args = ["gap", "--model", "cubic3", "-U", "8", "--beta", "0.5:4:6", "--theta", "0:3:4", "--grid-n", "16"];
    let a = imbcs_env(&args, &[("IMBCS_THREADS", "1")]);
    let b = imbcs_env(&args, &[("IMBCS_THREADS", "1")]);
    let c = imbcs_env(&args, &[("IMBCS_THREADS", "3")]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert_eq!(stdout(&a).lines().count(), 1 + 6 * 4);

    let v1 = imbcs_env(&["verify-identities", "--seed", "11"], &[("IMBCS_THREADS", "1")]);
    let v2 = imbcs_env(&["verify-identities", "--seed", "11"], &[("IMBCS_THREADS", "2")]);
    assert_eq!(code(&v1), 0);
    assert_eq!(v1.stdout, v2.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&imbcs(&["--help"])), 0);
    assert_eq!(code(&imbcs(&["--version"])), 0);
    assert_eq!(code(&imbcs(&[])), 1);
    assert_eq!(code(&imbcs(&["gap", "--no-such-flag"])), 1);
    // U is required
    assert_eq!(code(&imbcs(&["gap", "--beta", "1"])), 1);
    assert_eq!(code(&imbcs(&["gap", "-U", "0"])), 1);
    assert_eq!(code(&imbcs(&["gap", "-U", "1", "--beta", "1:2:0"])), 1);
    assert_eq!(code(&imbcs(&["gap", "--model", "nope", "-U", "1"])), 1);
    assert_eq!(code(&imbcs(&["covariance", "--format", "json"])), 1);
    assert_eq!(code(&imbcs(&["verify-model", "--model", "cubic3"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let chain = write(dir.path(), "chain.toml", CHAIN);
    let o = imbcs(&["verify-model", "--model-file", &chain]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("chain,measure,false"));
    assert_eq!(code(&imbcs(&["gap", "--model-file", &chain, "-U", "3", "--grid-n", "64"])), 0);
}

#[test]
fn toml_and_json_configs_match_flags() {
    let dir = tempfile::tempdir().unwrap();
    let toml = write(
        dir.path(),
        "run.toml",
        "model = \"honeycomb\"\nbeta = \"1:2:3\"\ntheta = 0.4\nU = -3.0\ngamma = 0.1\n[grid]\nn = 24\n",
    );
    let json = write(
        dir.path(),
        "run.json",
        r#"{"model": "honeycomb", "beta": "1:2:3", "theta": 0.4, "U": -3.0, "gamma": 0.1, "grid": {"n": 24}}"#,
    );
    let flags = imbcs(&[
        "gap", "--model", "honeycomb", "--beta", "1:2:3", "--theta", "0.4", "-U", "-3", "--gamma", "0.1", "--grid-n", "24",
    ]);
    let t = imbcs(&["--config", &toml, "gap"]);
    let j = imbcs(&["--config", &json, "gap"]);
    assert_eq!(code(&flags), 0, "{}", String::from_utf8_lossy(&flags.stderr));
    assert_eq!(flags.stdout, t.stdout);
    assert_eq!(flags.stdout, j.stdout);

    // flags override the file; output goes to the requested path
    let out = dir.path().join("out.json");
    let o = imbcs(&["--config", &toml, "--format", "json", "-o", out.to_str().unwrap(), "gap", "--beta", "2"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["beta"], 2.0);
    assert_eq!(rows[0]["U"], -3.0);
    assert!(rows[0]["delta"].as_f64().unwrap() > 0.0);
    assert!(rows[0]["a_gamma"].as_f64().unwrap() > 0.0);

    let bad = write(dir.path(), "bad.toml", "modle = \"cubic3\"\n");
    assert_eq!(code(&imbcs(&["--config", &bad, "gap", "-U", "1"])), 1);
}

#[test]
fn phase_diagram_curves() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("points.csv");
    let o = imbcs(&[
        "phase-diagram", "--model", "honeycomb", "-U", "0.05", "--beta", "0.25:8:64", "--mmax", "3", "--theta", "0:30:7",
        "--points", pts.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 64 * 4 * 2);
    let resolved: Vec<&Vec<&str>> = rows.iter().filter(|r| r[4] == "true").collect();
    assert!(!resolved.is_empty());
    // θ_{c,1,m} < θ_{c,2,m} < θ_{c,1,m+1} at each resolved beta
    for pair in resolved.chunks(2) {
        let (t1, t2): (f64, f64) = (pair[0][1].parse().unwrap(), pair[1][1].parse().unwrap());
        assert_eq!((pair[0][2], pair[1][2]), ("1", "2"));
        assert!(t1 < t2);
    }
    for w in resolved.windows(3).filter(|w| w[0][0] == w[2][0] && w[0][2] == "2") {
        let (t2, next): (f64, f64) = (w[0][1].parse().unwrap(), w[1][1].parse().unwrap());
        assert!(t2 < next);
    }
    let points = std::fs::read_to_string(&pts).unwrap();
    assert!(points.starts_with("beta,theta,delta,in_phase,m_index\n"));
}

#[test]
fn other_subcommands_run() {
    let base = ["--model", "honeycomb", "-U", "3", "--beta", "2", "--theta", "0.5", "--grid-n", "24"];
    for cmd in ["free-energy", "observables"] {
        let mut args = vec![cmd];
        args.extend(base);
        let o = imbcs(&args);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o).lines().count(), 2);
    }
    let o = imbcs(&["observables", "--model", "honeycomb", "-U", "3", "--beta", "2", "--grid-n", "24"]);
    assert!(stdout(&o).starts_with("beta,theta,U,delta,free_energy,cooper_pair_density,ssb_0,ssb_1,odlro_0_0"));

    let o = imbcs(&["finite-volume", "--model", "cubic3", "-U", "10", "--beta", "2", "-L", "4,6", "--quantity", "cpd"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);

    let o = imbcs(&["covariance", "--model", "cubic3", "-L", "2", "--h", "4", "--phi-re", "0.3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("ph_x,band_x,ph_y,band_y,dx,ds,re,im\n"));
    let o = imbcs(&["covariance", "--model", "cubic3", "-L", "2", "--h", "4", "--scale", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
