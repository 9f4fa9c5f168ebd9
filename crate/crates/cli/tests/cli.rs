use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn poolstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poolstat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Three runs from two teams over two topics.
fn fixture(dir: &Path) {
    let runs = dir.join("runs");
    fs::create_dir_all(&runs).unwrap();
    let write_run = |tag: &str, lists: &[(&str, &[&str])]| {
        let mut text = String::new();
        for (topic, docs) in lists {
            for (i, d) in docs.iter().enumerate() {
                text.push_str(&format!("{topic} Q0 {d} {} {} {tag}\n", i + 1, 10 - i));
            }
        }
        fs::write(runs.join(format!("{tag}.run")), text).unwrap();
    };
    write_run("teamA-1", &[("0001", &["a", "b", "c", "d"]), ("0002", &["p", "q", "r"])]);
    write_run("teamA-2", &[("0001", &["b", "a", "e", "c"]), ("0002", &["q", "p", "s"])]);
    write_run("teamB-1", &[("0001", &["c", "f", "a", "b"]), ("0002", &["r", "t", "p"])]);
    fs::write(dir.join("teams.tsv"), "teamA-1 A\nteamA-2 A\nteamB-1 B\n").unwrap();
    fs::write(
        dir.join("PRI1.qrels"),
        "0001 0 a 2\n0001 0 b 1\n0001 0 c 0\n0001 0 e 0\n0001 0 f 1\n0002 0 p 0\n0002 0 q 2\n0002 0 r 1\n0002 0 s 0\n0002 0 t 0\n",
    )
    .unwrap();
    fs::write(
        dir.join("RND1.qrels"),
        "0001 0 a 1\n0001 0 b 1\n0001 0 c 2\n0001 0 e 0\n0001 0 f 0\n0002 0 p 1\n0002 0 q 1\n0002 0 r 0\n0002 0 s 0\n0002 0 t 2\n",
    )
    .unwrap();
}

#[test]
fn power_matches_published_example() {
    let o = poolstat(&["power", "--t", "4.21", "--n", "32", "--target", "0.70"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "achieved=0.983 required_n=14");
}

#[test]
fn usage_errors_exit_2_and_data_errors_exit_1() {
    assert_eq!(poolstat(&["power", "--t", "abc", "--n", "3"]).status.code(), Some(2));
    assert_eq!(poolstat(&["nonsense"]).status.code(), Some(2));
    let o = poolstat(&["power", "--t", "2", "--n", "10", "--target", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("target power"));

    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    fs::create_dir_all(&runs).unwrap();
    fs::write(runs.join("bad.run"), "0001 Q0 a 1 1.0 bad\n0001 Q0 b 3 0.5 bad\n").unwrap();
    let o = poolstat(&["pool", "--runs", p(&runs), "--strategy", "pri", "--out", p(&dir.path().join("pools"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("bad.run") && err.contains("0001"), "{err}");
}

#[test]
fn pool_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let runs = dir.path().join("runs");
    let mut outputs = Vec::new();
    for (strategy, seed, out) in [("pri", "0", "pri1"), ("pri", "9", "pri2"), ("rnd", "5", "rnd1"), ("rnd", "5", "rnd2")] {
        let out = dir.path().join(out);
        let o = poolstat(&["pool", "--runs", p(&runs), "--depth", "3", "--strategy", strategy, "--seed", seed, "--out", p(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o).trim(), "topics=2 topicdocs=10 mean_pool=5.0");
        outputs.push(fs::read_to_string(out.join("0001.pool")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[2], outputs[3]);
    // Depth 3: a in all three runs (1+2+3), b and c in two (2+1, 3+1), f and e in one (2, 3).
    assert_eq!(outputs[0], "0001 a 3 6 1\n0001 b 2 3 2\n0001 c 2 4 3\n0001 f 1 2 4\n0001 e 1 3 5\n");
    let mut rnd: Vec<&str> = outputs[2].lines().collect();
    rnd.sort();
    let mut pri: Vec<&str> = outputs[0].lines().map(|l| l.rsplit_once(' ').unwrap().0).collect();
    pri.sort();
    let rnd_docs: Vec<&str> = rnd.iter().map(|l| l.rsplit_once(' ').unwrap().0).collect();
    assert_eq!(pri, rnd_docs);
}

#[test]
fn eval_rankcmp_and_tukey() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let d = dir.path();
    let out = d.join("scores");
    let o = poolstat(&[
        "eval", "--runs", p(&d.join("runs")), "--qrels", p(&d.join("PRI1.qrels")), p(&d.join("RND1.qrels")),
        "--measure", "ndcg", "--out", p(&out), "--topics-out", p(&d.join("topics.txt")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pri = fs::read_to_string(out.join("PRI1.tsv")).unwrap();
    assert!(pri.starts_with("topic\tteamA-1\tteamA-2\tteamB-1\n"));
    assert!(pri.lines().last().unwrap().starts_with("mean\t"));
    assert_eq!(fs::read_to_string(d.join("topics.txt")).unwrap(), "0001\n0002\n");

    let a = out.join("PRI1.tsv");
    let o = poolstat(&["rankcmp", "--a", p(&a), "--b", p(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "tau=1.000 n=3 tied_pairs=0");
    let o = poolstat(&["rankcmp", "--a", p(&a), "--b", p(&a), "--ci"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n ≥ 5"));

    let o = poolstat(&["rankcmp", "--dir", p(&out)]);
    assert!(stdout(&o).starts_with("version,PRI1,RND1\n"), "{}", stdout(&o));

    let table = d.join("table.tsv");
    fs::write(&table, "topic\tX\tY\tZ\n1\t1.0\t2.0\t3.5\n2\t2.0\t2.5\t4.0\n3\tNA\t1.0\t1.0\n4\t1.5\t2.0\t3.0\n").unwrap();
    let o = poolstat(&["tukey", "--paired", p(&table)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("pair\tdiff\tq\tp\tES"));
    assert_eq!(text.lines().filter(|l| l.starts_with('X') || l.starts_with('Y')).count(), 3);

    let groups = d.join("groups.txt");
    fs::write(&groups, "g1 0.90\ng1 0.88\ng1 0.91\ng2 0.80\ng2 0.83\ng2 0.79\n").unwrap();
    let o = poolstat(&["tukey", "--unpaired", p(&groups)]);
    assert!(stdout(&o).contains("g1-g2"));
}

#[test]
fn robustness_commands() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let d = dir.path();
    let o = poolstat(&[
        "loto", "--runs", p(&d.join("runs")), "--qrels", p(&d.join("PRI1.qrels")), "--teams", p(&d.join("teams.tsv")),
        "--depth", "3", "--vdip", p(&d.join("vdip.csv")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report.starts_with("team\tunique\tloto_size\ttau\n"));
    assert!(report.lines().any(|l| l.starts_with("A\t")) && report.lines().any(|l| l.starts_with("mean\t")));
    let vdip = fs::read_to_string(d.join("vdip.csv")).unwrap();
    assert_eq!(vdip.lines().count(), 1 + 3 * 2);

    let out = d.join("rr.qrels");
    let o = poolstat(&[
        "rrfilter", "--qrels", p(&d.join("PRI1.qrels")), "--runs", p(&d.join("runs")), "--lo", "1", "--hi", "1",
        "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let q = fs::read_to_string(&out).unwrap();
    assert!(q.starts_with("# rr1-1 filter of PRI1"));
    let docs: Vec<&str> = q.lines().filter(|l| !l.starts_with('#')).map(|l| l.split(' ').nth(2).unwrap()).collect();
    assert_eq!(docs, ["a", "b", "c", "p", "q", "r"]);
}

#[test]
fn agreement_efficiency_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("labels.tsv"),
        "topic\tdoc\tA1\tA2\tA3\tA4\n0001\ta\t2\t2\t1\t2\n0001\tb\t0\t0\t0\t1\n0001\tc\t1\t2\t1\t1\n0002\tx\t0\t1\tNA\t0\n0002\ty\t2\t2\t2\t1\n",
    )
    .unwrap();
    fs::write(
        d.join("versions.tsv"),
        "0001 A1 RND1\n0001 A2 RND2\n0001 A3 PRI1\n0001 A4 PRI2\n0002 A1 PRI1\n0002 A2 PRI2\n0002 A3 RND1\n0002 A4 RND2\n",
    )
    .unwrap();
    let (labels, versions) = (d.join("labels.tsv"), d.join("versions.tsv"));
    let (m, v) = (p(&labels), p(&versions));
    let o = poolstat(&["agree", "--matrix", m, "--leave-one-out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("scope\tprojection\talpha\tD_o\tD_e\tn_units\nall\tALL\t"), "{text}");
    assert_eq!(text.lines().count(), 6);
    let o = poolstat(&["agree", "--matrix", m, "--versions", v, "--per-topic", "--projection", "rnd"]);
    assert!(stdout(&o).lines().last().unwrap().starts_with("mean\t"));
    let o = poolstat(&["kappa", "--matrix", m, "--versions", v, "--a", "RND1", "--b", "PRI1"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let log = d.join("log.jsonl");
    fs::write(
        &log,
        concat!(
            r#"{"seq":1,"ts":0,"assessor":"A1","topic":"0001","action":"open_topic"}"#, "\n",
            r#"{"seq":2,"ts":10000,"assessor":"A1","topic":"0001","doc":"a","action":"judge","label":"NONREL"}"#, "\n",
            r#"{"seq":3,"ts":30000,"assessor":"A1","topic":"0001","doc":"b","action":"judge","label":"H.REL"}"#, "\n",
        ),
    )
    .unwrap();
    let o = poolstat(&["efficiency", "--log", p(&log)]);
    assert_eq!(stdout(&o), "topic\tassessor\tTJ1D\tTF1RH\tTF1H\tATBJ\tNREJ\n0001\tA1\t10.000\t30.000\t30.000\t20.000\t0\n");

    for (version, order) in [("PRI1", ["a", "b", "c"]), ("PRI2", ["a", "c", "b"])] {
        let dir = d.join("pools").join(version);
        fs::create_dir_all(&dir).unwrap();
        let text: String = order.iter().enumerate().map(|(i, doc)| format!("0001 {doc} 1 1 {}\n", i + 1)).collect();
        fs::write(dir.join("0001.pool"), text).unwrap();
    }
    let o = poolstat(&[
        "histogram", "--matrix", m, "--versions", v, "--pools", p(&d.join("pools")), "--strategy", "pri",
        "--max-rank", "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    // PRI1 (A3): a=1, b=0, c=1. PRI2 (A4): a=2, c=1, b=1.
    assert_eq!(stdout(&o), "rank,relevant\n1,2\n2,1\n3,2\n");
}
