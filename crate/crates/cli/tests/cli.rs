use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rulevote::rules::parse_rules;

const WEATHER: &str = "\
outlook,temp,humidity,windy,play
sunny,hot,high,false,no
sunny,hot,high,true,no
overcast,hot,high,false,yes
rainy,mild,high,false,yes
rainy,cool,normal,false,yes
rainy,cool,normal,true,no
overcast,cool,normal,true,yes
sunny,mild,high,false,no
sunny,cool,normal,false,yes
rainy,mild,normal,false,yes
sunny,mild,normal,true,yes
overcast,mild,high,true,yes
overcast,hot,normal,false,yes
rainy,mild,high,true,no
";

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn rulevote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rulevote"))
        .args(args)
        .env_remove("RULEVOTE_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rulevote(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_foil_writes_parsable_rules() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("weather.csv");
    fs::write(&csv, WEATHER).unwrap();
    for learner in ["foil", "ripper", "tree"] {
        let out = dir.path().join(format!("{learner}.rules"));
        ok(&["train", "--data", s(&csv), "--label-col", "play", "--learner", learner, "--out", s(&out)]);
        let model = parse_rules(&fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(model.labels(), vec!["no".to_string(), "yes".to_string()]);
    }
}

#[test]
fn vote_with_oracle_and_gbt() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("weather.csv");
    fs::write(&csv, WEATHER).unwrap();
    let mut models = Vec::new();
    for learner in ["foil", "ripper", "gbt"] {
        let out = dir.path().join(format!("{learner}.out"));
        ok(&["train", "--data", s(&csv), "--label-col", "play", "--learner", learner, "--out", s(&out), "--rounds", "10"]);
        models.push(out);
    }
    let rules = format!("{},{}", s(&models[0]), s(&models[1]));
    let results = dir.path().join("votes.csv");
    let report = dir.path().join("report.txt");
    let out = ok(&[
        "vote", "--models", &rules, "--decider", "oracle", "--test", s(&csv), "--label-col", "play",
        "--out", s(&results), "--report", s(&report),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("accuracy"), "{stdout}");
    assert_eq!(fs::read_to_string(&report).unwrap(), stdout);
    let rows = fs::read_to_string(&results).unwrap();
    assert!(rows.starts_with("id,true_label,voted_label,step,level,learner,fraction,rule_text"));
    assert_eq!(rows.lines().count(), 15);

    let gbt = format!("gbt:{}", s(&models[2]));
    ok(&["vote", "--models", &rules, "--decider", &gbt, "--test", s(&csv), "--label-col", "play", "--out", s(&results)]);
}

#[test]
fn prep_applies_a_builtin_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("diabetes.csv");
    ok(&[
        "prep", "--data", "diabetes.csv", "--data-dir", s(&data_dir()), "--label-col", "Diabetes",
        "--recipe", "diabetes", "--out", s(&out),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 769);
    assert!(text.lines().next().unwrap().ends_with("Diabetes"));
}

#[test]
fn bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["bench", "--suite", "diabetes", "--reps", "2", "--seed", "3", "--data-dir", s(&data_dir()), "--out-dir", s(&out)]);
        (fs::read(out.join("bench.txt")).unwrap(), fs::read(out.join("bench.csv")).unwrap())
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let csv = String::from_utf8(a.1).unwrap();
    assert!(csv.starts_with("suite,report,column,mean,std,reps"));
    assert!(csv.contains("diabetes"));
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("weather.csv");
    fs::write(&csv, WEATHER).unwrap();
    let rules = dir.path().join("foil.rules");
    ok(&["train", "--data", s(&csv), "--label-col", "play", "--learner", "foil", "--out", s(&rules)]);
    let cfg = dir.path().join("rulevote.toml");
    fs::write(&cfg, "[voting]\nthreshold = \"9/10\"\ntolerance = 0.05\n").unwrap();
    let out = ok(&[
        "--config", s(&cfg), "vote", "--models", &format!("{0},{0}", s(&rules)), "--decider", "oracle",
        "--test", s(&csv), "--label-col", "play", "--out", s(&dir.path().join("v.csv")),
    ]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("threshold 0.9, tolerance 0.05"));

    fs::write(&cfg, "[voting]\nthresh = 0.9\n").unwrap();
    assert!(!rulevote(&["--config", s(&cfg), "bench", "--suite", "diabetes"]).status.success());
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("weather.csv");
    fs::write(&csv, WEATHER).unwrap();
    let out_path = dir.path().join("x");
    let out = s(&out_path);
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--data", "missing.csv", "--label-col", "play", "--learner", "foil", "--out", out],
        vec!["train", "--data", s(&csv), "--label-col", "nope", "--learner", "foil", "--out", out],
        vec!["train", "--data", s(&csv), "--label-col", "play", "--learner", "svm", "--out", out],
        vec!["bench", "--suite", "unknown"],
        vec!["vote", "--models", s(&csv), "--decider", "oracle", "--test", s(&csv), "--label-col", "play", "--out", out],
        vec!["vote", "--models", s(&csv), "--decider", "magic", "--test", s(&csv), "--label-col", "play", "--out", out],
    ];
    for args in cases {
        let o = rulevote(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!o.stderr.is_empty());
    }
}
