use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridsleuth_core::matrix::adjacency_from_incidence;
use gridsleuth_core::metering::{MeterSpec, Scenario, TamperMode, TamperSpec};
use gridsleuth_core::networks::{ct8, ct8_spec};
use gridsleuth_core::synth::chain_feeders;
use gridsleuth_core::topology::{build_topology, Label, TopologySpec};
use gridsleuth_core::SwitchVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn gridsleuth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridsleuth"))
        .args(args)
        .env_remove("GRIDSLEUTH_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ct8_file() -> String {
    scenarios().join("ct8.json").to_str().unwrap().to_string()
}

fn read_dense(path: &Path) -> Vec<Vec<u8>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            rec.unwrap()
                .iter()
                .skip(1)
                .map(|v| v.parse().unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn shipped_ct8_matches_builtin() {
    let text = std::fs::read_to_string(ct8_file()).unwrap();
    assert_eq!(TopologySpec::from_json(&text).unwrap(), ct8_spec());
}

#[test]
fn matrices_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridsleuth(&[
        "topo",
        "matrices",
        &ct8_file(),
        "--out",
        path_str(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let t = ct8();
    let inc = read_dense(&dir.path().join("incidence.csv"));
    assert_eq!((inc.len(), inc[0].len()), (8, 7));
    assert_eq!(inc.iter().flatten().map(|&v| v as usize).sum::<usize>(), 14);
    for (i, row) in inc.iter().enumerate() {
        assert_eq!(row.as_slice(), t.incidence_matrix().matrix().row(i));
    }

    let adj = read_dense(&dir.path().join("adjacency.csv"));
    let expected = adjacency_from_incidence(&t.incidence_matrix(), &SwitchVector::ones(7)).unwrap();
    assert_eq!(adj.iter().flatten().map(|&v| v as usize).sum::<usize>(), 14);
    for (i, row) in adj.iter().enumerate() {
        assert_eq!(row.as_slice(), expected.matrix().row(i));
    }

    let mut sparse = csv::Reader::from_path(dir.path().join("adjacency_sparse.csv")).unwrap();
    let mut count = 0;
    for rec in sparse.records() {
        let rec = rec.unwrap();
        let (r, c): (usize, usize) = (rec[0].parse().unwrap(), rec[1].parse().unwrap());
        assert_eq!(adj[r - 1][c - 1], 1);
        count += 1;
    }
    assert_eq!(count, 14);
}

#[test]
fn matrices_respect_switch_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridsleuth(&[
        "topo",
        "matrices",
        &ct8_file(),
        "--vr",
        "1110111",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(o.status.success());
    let adj = read_dense(&dir.path().join("adjacency.csv"));
    assert_eq!(adj.iter().flatten().map(|&v| v as usize).sum::<usize>(), 12);
    assert_eq!((adj[2][4], adj[4][2]), (0, 0));
}

#[test]
fn energize_prints_the_vector() {
    let o = gridsleuth(&["topo", "energize", &ct8_file(), "--vr", "1110111"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "11111111");
    let o = gridsleuth(&["topo", "energize", &ct8_file(), "--vr", "1111001"]);
    assert_eq!(stdout(&o).trim(), "11111011");
    let o = gridsleuth(&["topo", "energize", &ct8_file(), "--vr", "11"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ct8_spec();
    spec.edges[1].to = Label::Num(2);
    let looped = dir.path().join("self-loop.json");
    std::fs::write(&looped, serde_json::to_string(&spec).unwrap()).unwrap();
    let o = gridsleuth(&["topo", "validate", path_str(&looped)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("self-loop"), "{}", stderr(&o));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"nodes\": [").unwrap();
    assert_eq!(
        gridsleuth(&["topo", "validate", path_str(&broken)])
            .status
            .code(),
        Some(1)
    );

    let o = gridsleuth(&["topo", "validate", &ct8_file()]);
    assert!(o.status.success());
    let o = gridsleuth(&["topo", "validate", &ct8_file(), "--vr", "1111001"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let o = gridsleuth(&["topo", "validate", &ct8_file(), "--vr", "1111111"]);
    assert_eq!(o.status.code(), Some(2));
}

fn localize_ct8(scenario: &str, out: &Path) -> Output {
    let sc = scenarios().join(scenario);
    gridsleuth(&[
        "localize",
        "run",
        &ct8_file(),
        path_str(&sc),
        "--check",
        "--out",
        path_str(out),
    ])
}

#[test]
fn tamper_at_five_step_log() {
    let dir = tempfile::tempdir().unwrap();
    let o = localize_ct8("ct8-tamper-5.json", dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read_to_string(dir.path().join("steps.log")).unwrap();
    let mut at = 0;
    for needle in [
        "close e4 (tie)",
        "open e5",
        "open e6",
        "check FRTU_2 (clear)",
        "check FRTU_1 (alarm)",
        "verdict: node 5",
    ] {
        let found = log[at..]
            .find(needle)
            .unwrap_or_else(|| panic!("{needle} missing in\n{log}"));
        at += found + needle.len();
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["final_suspects"], serde_json::json!([5]));
    assert_eq!(report["suspect_history"][0], serde_json::json!([5, 6, 7]));
    assert_eq!(report["actions"].as_array().unwrap().len(), 3);
}

#[test]
fn case_study_scenarios_pass_check() {
    for (file, expected) in [
        ("ct8-tamper-6.json", "verdict: node 6"),
        ("ct8-tamper-7.json", "verdict: node 7"),
        ("ct8-tamper-5-7.json", "verdict: nodes 5, 7"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let o = localize_ct8(file, dir.path());
        assert!(o.status.success(), "{file}: {}", stderr(&o));
        assert!(stdout(&o).contains(expected), "{file}: {}", stdout(&o));
    }
}

#[test]
fn clean_scenario_has_nothing_to_do() {
    let dir = tempfile::tempdir().unwrap();
    let o = localize_ct8("ct8-clean.json", dir.path());
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["actions"], serde_json::json!([]));
    assert_eq!(report["final_suspects"], serde_json::json!([]));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(localize_ct8("ct8-tamper-5-7.json", a.path())
        .status
        .success());
    assert!(localize_ct8("ct8-tamper-5-7.json", b.path())
        .status
        .success());
    for f in ["report.json", "steps.log"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

fn meter(id: &str, node: u64, base_load: f64, mode: TamperMode) -> MeterSpec {
    MeterSpec {
        id: id.into(),
        node: Label::Num(node),
        base_load,
        tamper: TamperSpec {
            mode,
            duty: 1.0,
            start: 0,
        },
    }
}

fn scenario(meters: Vec<MeterSpec>) -> Scenario {
    Scenario {
        meters,
        noise: 0.0,
        loss_factor: 0.0,
        seed: 1,
        threshold: 0.2,
        switches: None,
        ground_truth: None,
    }
}

#[test]
fn check_mismatch_exits_five() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = scenario(
        (2..=7)
            .map(|n| {
                let mode = if n == 5 {
                    TamperMode::Scale { alpha: 0.1 }
                } else {
                    TamperMode::None
                };
                meter(&format!("m{n}"), n, 10.0, mode)
            })
            .collect(),
    );
    sc.ground_truth = Some(vec![Label::Num(7)]);
    let path = dir.path().join("wrong.json");
    write_json(&path, &sc);
    let o = gridsleuth(&[
        "localize",
        "run",
        &ct8_file(),
        path_str(&path),
        "--check",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn meshed_start_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = scenario(vec![meter("m5", 5, 10.0, TamperMode::Scale { alpha: 0.1 })]);
    sc.switches = Some("1111111".parse().unwrap());
    let path = dir.path().join("meshed.json");
    write_json(&path, &sc);
    let o = gridsleuth(&[
        "localize",
        "run",
        &ct8_file(),
        path_str(&path),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn contradictory_readings_exit_four() {
    // without the DG, bisection moves node 5 alone onto feeder 1 where its
    // deficit is diluted below the threshold: every node then reads clean
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ct8_spec();
    spec.nodes[5].dg = false;
    let topo = dir.path().join("no-dg.json");
    write_json(&topo, &spec);
    let mut meters: Vec<_> = (2..=4)
        .map(|n| meter(&format!("m{n}"), n, 100.0, TamperMode::None))
        .collect();
    meters.push(meter("m5", 5, 10.0, TamperMode::Scale { alpha: 0.0 }));
    meters.push(meter("m6", 6, 1.0, TamperMode::None));
    meters.push(meter("m7", 7, 1.0, TamperMode::None));
    let path = dir.path().join("diluted.json");
    write_json(&path, &scenario(meters));
    let o = gridsleuth(&[
        "localize",
        "run",
        path_str(&topo),
        path_str(&path),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(4), "{}\n{}", stdout(&o), stderr(&o));
}

#[test]
fn random_batch_passes_check() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for k in 0..100 {
        let feeders = rng.gen_range(2..=3);
        let spec = chain_feeders(&mut rng, feeders, 6, 0.2);
        let t = build_topology(&spec).unwrap();
        let loads: Vec<_> = t
            .nodes()
            .iter()
            .filter(|n| n.is_load())
            .map(|n| n.id)
            .collect();
        let target = *loads.choose(&mut rng).unwrap();
        let meters = loads
            .iter()
            .map(|&n| {
                if n == target {
                    meter(
                        &format!("m{n}"),
                        n.get() as u64,
                        100.0,
                        TamperMode::Scale { alpha: 0.1 },
                    )
                } else {
                    meter(
                        &format!("m{n}"),
                        n.get() as u64,
                        rng.gen_range(1.0..5.0),
                        TamperMode::None,
                    )
                }
            })
            .collect();
        let mut sc = scenario(meters);
        sc.noise = 0.02;
        sc.seed = k;
        let topo = dir.path().join(format!("topo-{k}.json"));
        let scen = dir.path().join(format!("scenario-{k}.json"));
        write_json(&topo, &spec);
        write_json(&scen, &sc);
        let out = dir.path().join(format!("out-{k}"));
        let o = gridsleuth(&[
            "localize",
            "run",
            path_str(&topo),
            path_str(&scen),
            "--check",
            "--out",
            path_str(&out),
        ]);
        assert!(
            o.status.success(),
            "scenario {k}: {}\n{}",
            stdout(&o),
            stderr(&o)
        );
    }
}

#[test]
fn score_ranks_the_tampered_meter_first() {
    let dir = tempfile::tempdir().unwrap();
    let history = dir.path().join("history.csv");
    let sc = scenarios().join("ct8-score.json");
    let o = gridsleuth(&[
        "sim",
        "run",
        &ct8_file(),
        path_str(&sc),
        "--intervals",
        "40",
        "--out",
        path_str(&history),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = gridsleuth(&[
        "score",
        "--history",
        path_str(&history),
        "--node",
        "5",
        "--baseline",
        "16",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("meter_id,node,s_a,p_a,index,rank"));
    let first = lines.next().unwrap();
    assert!(
        first.starts_with("m5-c,5,") && first.ends_with(",1"),
        "{out}"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn score_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(
        &empty,
        "interval,meter_id,node,true_kwh,reported_kwh,frtu,frtu_kwh\n",
    )
    .unwrap();
    let o = gridsleuth(&["score", "--history", path_str(&empty), "--node", "5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "meter_id,node,s_a,p_a,index,rank\n");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "interval,meter_id\nnot-a-number,m1\n").unwrap();
    assert_eq!(
        gridsleuth(&["score", "--history", path_str(&bad), "--node", "5"])
            .status
            .code(),
        Some(1)
    );

    let missing = dir.path().join("missing.csv");
    assert_eq!(
        gridsleuth(&["score", "--history", path_str(&missing), "--node", "5"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn seed_env_overrides_scenario() {
    let sc = scenarios().join("ct8-score.json");
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gridsleuth"));
        cmd.args(["sim", "run", &ct8_file(), path_str(&sc)]);
        match seed {
            Some(s) => cmd.env("GRIDSLEUTH_SEED", s),
            None => cmd.env_remove("GRIDSLEUTH_SEED"),
        };
        stdout(&cmd.output().unwrap())
    };
    assert_eq!(run(None), run(Some("7")));
    assert_ne!(run(None), run(Some("8")));
}
