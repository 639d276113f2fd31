use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drawrate")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) {
    std::fs::write(dir.path().join(name), text).unwrap();
}

fn read(dir: &TempDir, name: &str) -> String {
    std::fs::read_to_string(dir.path().join(name)).unwrap()
}

/// Rows of a comma-separated report keyed by player (second column).
fn elo_change(report: &str, player: &str) -> f64 {
    let row = report.lines().find(|l| l.split(',').nth(1) == Some(player)).unwrap();
    row.split(',').nth(5).unwrap().parse().unwrap()
}

const SNAPSHOT_HEAD: &str = "drawrate-snapshot\t1\nperiod\t1\nhyperparameters\t0.0\t0.0\t1.09861\t0.17037\t0.14391\nconfig\t0.691\ttrue\t1800.0\t250.0\t100.0\n";

#[test]
fn empty_games_only_advance_time() {
    let d = tempfile::tempdir().unwrap();
    write(&d, "snap.txt", &format!("{SNAPSHOT_HEAD}player\ta\t1.0\t0.5\t3\nplayer\tb\t2.0\t0.8\t7\n"));
    write(&d, "games.csv", "period,white,black,result\n");
    let report = ok(d.path(), &["rate", "--snapshot", "snap.txt", "--games", "games.csv", "--out", "next.txt"]);
    assert_eq!(report.lines().count(), 1, "header only");
    let next = read(&d, "next.txt");
    assert!(next.contains("period\t2\n"));
    let hyp = (0.5f64 * 0.5 + 0.14391 * 0.14391).sqrt();
    assert!(next.contains(&format!("player\ta\t1.0\t{hyp:?}\t3")), "{next}");
    // capped deviation carried forward
    assert!(next.contains("player\tb\t2.0\t0.8\t7"), "{next}");
}

#[test]
fn equal_draw_at_1500_leaves_elo_unchanged() {
    let d = tempfile::tempdir().unwrap();
    write(&d, "r.csv", "player,elo\na,1500\nb,1500\n");
    write(&d, "g.csv", "1,a,b,D\n");
    let report = ok(d.path(), &["rate", "--ratings", "r.csv", "--games", "g.csv"]);
    for p in ["a", "b"] {
        let row = report.lines().find(|l| l.split(',').nth(1) == Some(p)).unwrap();
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!((f[3], f[4], f[5]), ("1500.0", "1500.0", "0.0"), "{row}");
    }
}

#[test]
fn strong_draw_moves_less_than_mismatched_draw() {
    let d = tempfile::tempdir().unwrap();
    write(&d, "r.csv", "player,elo\nhi1,2500\nhi2,2500\nlo,1500\nmid,1700\n");
    write(&d, "g.csv", "1,hi1,hi2,D\n1,lo,mid,D\n");
    let report = ok(d.path(), &["rate", "--ratings", "r.csv", "--games", "g.csv"]);
    let strong = elo_change(&report, "hi1").abs();
    let mismatched = elo_change(&report, "lo").abs();
    assert!(mismatched > 1.0);
    assert!(strong < mismatched, "{report}");
}

#[test]
fn predict_point_masses_and_symmetry() {
    let d = tempfile::tempdir().unwrap();
    write(&d, "snap.txt", &format!("{SNAPSHOT_HEAD}player\ta\t0.0\t1e-9\t0\nplayer\tb\t0.0\t1e-9\t0\nplayer\tc\t0.7\t0.6\t0\n"));
    write(&d, "f.csv", "white,black\na,b\na,c\nc,a\n");
    let out = ok(d.path(), &["predict", "--snapshot", "snap.txt", "--fixtures", "f.csv"]);
    let rows: Vec<Vec<f64>> =
        out.lines().skip(1).map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect()).collect();
    assert!((rows[0][1] - 0.600).abs() < 0.001, "{out}");
    for r in &rows {
        assert!((r[0] + r[1] + r[2] - 1.0).abs() < 2e-6);
        assert!((r[3] - r[0] / (r[0] + r[2])).abs() < 1e-5);
    }
    assert_eq!((rows[1][0], rows[1][2]), (rows[2][2], rows[2][0]));
    assert_eq!(rows[1][1], rows[2][1]);
}

#[test]
fn predict_warns_about_unknown_players() {
    let d = tempfile::tempdir().unwrap();
    write(&d, "snap.txt", SNAPSHOT_HEAD);
    write(&d, "f.csv", "x,y\n");
    let out = run(d.path(), &["predict", "--snapshot", "snap.txt", "--fixtures", "f.csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not in the snapshot"));
}

#[test]
fn validate_emits_summary_columns() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["validate", "--synthetic", "1000", "--seed", "2", "--out", "v.csv"]);
    let text = read(&d, "v.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "subset,n,delta_approx,delta_gh,r2_mean,abs_diff,r2_log_sd");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 7);
    assert_eq!(row[1], "1000");
    assert!(row[5].parse::<f64>().unwrap() < 0.02);
}

#[test]
fn simulate_is_byte_identical() {
    let args = ["simulate", "--players", "30", "--periods", "3", "--games-per-period", "4", "--seed", "5", "--games-out", "g.csv", "--truth-out", "t.csv"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(a.path(), &args);
    ok(b.path(), &args);
    for f in ["g.csv", "t.csv"] {
        assert_eq!(read(&a, f), read(&b, f));
    }
    assert_eq!(read(&a, "g.csv").lines().count(), 1 + 3 * 30 * 4 / 2);
}

#[test]
fn rate_is_idempotent() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["simulate", "--players", "20", "--periods", "1", "--games-per-period", "6", "--games-out", "g.csv"]);
    ok(d.path(), &["rate", "--games", "g.csv", "--out", "s1.txt", "--report", "r1.csv"]);
    ok(d.path(), &["rate", "--games", "g.csv", "--out", "s2.txt", "--report", "r2.csv"]);
    assert_eq!(read(&d, "s1.txt"), read(&d, "s2.txt"));
    assert_eq!(read(&d, "r1.csv"), read(&d, "r2.csv"));
    // and a snapshot round trip reproduces the same state
    ok(d.path(), &["rate", "--snapshot", "s1.txt", "--games", "g.csv", "--out", "s3.txt"]);
    assert!(read(&d, "s3.txt").contains("period\t3\n"));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(d.path(), &["rate"]).status.code(), Some(1));
    assert_eq!(run(d.path(), &["rate", "--games", "missing.csv"]).status.code(), Some(1));
    write(&d, "bad.txt", "drawrate-snapshot\t99\n");
    write(&d, "g.csv", "");
    assert_eq!(run(d.path(), &["rate", "--snapshot", "bad.txt", "--games", "g.csv"]).status.code(), Some(1));
    assert_eq!(run(d.path(), &["predict", "--fixtures", "g.csv", "--order", "0"]).status.code(), Some(1));

    // many draws against a very diffuse opponent with a negative draw slope
    // drive the focal precision negative
    let snap = "drawrate-snapshot\t1\nperiod\t1\nhyperparameters\t0.0\t0.0\t-0.4657\t-0.1486\t0.1\nconfig\t0.691\ttrue\t1800.0\t250.0\t100.0\nplayer\tf\t8.833\t0.458\t0\nplayer\to\t8.6008\t2.9969\t0\n";
    write(&d, "deg.txt", snap);
    write(&d, "draws.csv", &"1,f,o,D\n".repeat(80));
    let out = run(d.path(), &["rate", "--snapshot", "deg.txt", "--games", "draws.csv"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_rows_are_reported_and_skipped() {
    let d = tempfile::tempdir().unwrap();
    write(&d, "g.csv", "period,white,black,result\n1,a,b,D\n1,a,a,1\n1,a,b,maybe\n");
    let out = run(d.path(), &["rate", "--games", "g.csv"]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.matches("warning").count(), 2, "{err}");
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}
