// Copyright 2026 DSVC Contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Scripted sessions replayed through the command surface and compared
//! byte for byte with files under `tests/golden`. Set `DSVC_BLESS=1` to
//! rewrite them.

use std::fs;
use std::path::{Path, PathBuf};

struct Session {
    dir: tempfile::TempDir,
    transcript: String,
}

impl Session {
    fn new() -> Self {
        Session {
            dir: tempfile::tempdir().unwrap(),
            transcript: String::new(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn expand(&self, arg: &str) -> String {
        arg.replace("$TMP", self.dir.path().to_str().unwrap())
    }

    /// Runs `dsvc -C $TMP/repo <args>` and records the exchange.
    fn run(&mut self, args: &[&str]) -> (i32, String) {
        let mut argv = vec!["dsvc".to_string(), "-C".into(), self.expand("$TMP/repo")];
        argv.extend(args.iter().map(|a| self.expand(a)));
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = dsvc_cli::run(argv, &mut out, &mut err);
        let out = String::from_utf8(out).unwrap();
        let err = String::from_utf8(err).unwrap();
        self.transcript.push_str(&format!("$ dsvc {}\n", args.join(" ")));
        self.transcript.push_str(&out.replace(self.dir.path().to_str().unwrap(), "$TMP"));
        if !err.is_empty() {
            self.transcript.push_str(&format!("stderr: {}", err.replace(self.dir.path().to_str().unwrap(), "$TMP")));
        }
        self.transcript.push_str(&format!("[exit {code}]\n"));
        (code, out)
    }

    fn check(&self, golden: &str) {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(golden);
        if std::env::var_os("DSVC_BLESS").is_some() {
            fs::write(&path, &self.transcript).unwrap();
        }
        let expected = fs::read_to_string(&path).unwrap_or_default();
        assert_eq!(self.transcript, expected, "transcript differs from {golden}");
    }
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn names(csv: &Path) -> Vec<String> {
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let at = header.iter().position(|h| *h == "name").unwrap();
    let mut out: Vec<String> = lines.map(|l| l.split(',').nth(at).unwrap().to_string()).collect();
    out.sort();
    out
}

fn people_history(s: &mut Session) {
    write(&s.path("in/R.csv"), "id,name\n1,Sam\n2,Amol\n");
    assert_eq!(s.run(&["init", "$TMP/repo"]).0, 0);
    assert_eq!(s.run(&["create", "people", "--from-csv", "$TMP/in"]).0, 0);
    s.run(&["add-record", "--table", "R", "--key", "3", "--set", "id=3", "--set", "name=Mike"]);
    s.run(&["status"]);
    assert_eq!(s.run(&["commit", "-m", "add Mike"]).0, 0);
    s.run(&["branch", "v1.1", "--from", "v1"]);
    s.run(&["checkout", "v1.1"]);
    s.run(&["add-record", "--table", "R", "--key", "4", "--set", "id=4", "--set", "name=Aditya"]);
    s.run(&["commit", "-m", "add Aditya"]);
    s.run(&["del-record", "--table", "R", "--key", "2"]);
    s.run(&["commit", "-m", "drop Amol"]);
}

#[test]
fn people_session() {
    let mut s = Session::new();
    people_history(&mut s);
    s.run(&["export", "master", "--format", "csv", "--out", "$TMP/out/master"]);
    s.run(&["export", "v1.1", "--format", "csv", "--out", "$TMP/out/side"]);
    assert_eq!(names(&s.path("out/master/R.csv")), ["Amol", "Mike", "Sam"]);
    assert_eq!(names(&s.path("out/side/R.csv")), ["Aditya", "Sam"]);
    let (code, out) = s.run(&["diff", "master", "v1.1", "--summary"]);
    assert_eq!((code, out.as_str()), (0, "3 records differ\n"));
    s.run(&["diff", "master", "v1.1"]);
    s.run(&["log", "v1.1"]);
    s.run(&["checkout", "master"]);
    assert_eq!(s.run(&["merge", "v1.1", "--strategy", "cell"]).0, 0);
    s.run(&["query", "SELECT name FROM R"]);
    s.run(&["query", "--format", "json", "SELECT VNUM FROM VERSIONS(R) WHERE EXISTS (SELECT * FROM R(VNUM) WHERE name = 'Amol')"]);
    s.run(&["query", "--explain", "SELECT VNUM FROM VERSIONS(R) WHERE EXISTS (SELECT * FROM R(VNUM) WHERE name = 'Amol')"]);
    s.run(&["query", "SELECT * FROM R(v2), R(v4) WHERE R(v2).id = R(v4).id"]);
    let (code, out) = s.run(&["verify"]);
    assert_eq!(code, 0, "{out}");
    s.check("people.txt");
}

#[test]
fn conflicts_and_errors() {
    let mut s = Session::new();
    people_history(&mut s);
    s.run(&["checkout", "master"]);
    s.run(&["set", "--table", "R", "--key", "1", "--set", "name=Samuel"]);
    s.run(&["commit", "-m", "rename on master"]);
    s.run(&["checkout", "v1.1"]);
    s.run(&["set", "--table", "R", "--key", "1", "--set", "name=Sammy"]);
    s.run(&["commit", "-m", "rename on side"]);
    s.run(&["checkout", "master"]);
    let (code, out) = s.run(&["merge", "v1.1"]);
    assert_eq!(code, 2);
    let report: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(report["kind"], "cell");
    assert_eq!(report["key"], "1");
    write(
        &s.path("res.json"),
        r#"[{"table":"R","key":"1","take":"b"}]"#,
    );
    assert_eq!(s.run(&["merge", "v1.1", "--resolutions", "$TMP/res.json"]).0, 0);
    s.run(&["query", "SELECT name FROM R WHERE _key = '1'"]);
    assert_eq!(s.run(&["commit", "-m", "nothing"]).0, 1);
    assert_eq!(s.run(&["query", "SELECT FROM"]).0, 1);
    assert_eq!(s.run(&["checkout", "v99"]).0, 1);
    assert_eq!(s.run(&["reset", "--hard", "v99"]).0, 1);
    assert_eq!(s.run(&["branch", "master"]).0, 1);
    assert_eq!(s.run(&["reset", "--hard", "v2"]).0, 0);
    s.run(&["status"]);
    s.check("conflicts.txt");
}

#[test]
fn sampled_checkout_and_update_where() {
    let mut s = Session::new();
    let mut csv = String::from("id,score\n");
    for i in 0..100 {
        csv.push_str(&format!("{i},{}\n", i % 10));
    }
    write(&s.path("in/T.csv"), &csv);
    s.run(&["init", "$TMP/repo", "--max-chain", "2"]);
    s.run(&["create", "scores", "--from-csv", "$TMP/in"]);
    s.run(&["checkout", "master", "--sample", "0.2", "--seed", "9"]);
    s.run(&["update-where", "--table", "T", "--where", "score >= 5", "--set", "high=1"]);
    s.run(&["status"]);
    s.run(&["commit", "-m", "flag high"]);
    let (_, out) = s.run(&["query", "SELECT COUNT(high) FROM R"]);
    assert!(out.is_empty());
    let (_, out) = s.run(&["query", "SELECT COUNT(high) FROM T"]);
    assert_eq!(out, "COUNT(high)\n50\n");
    s.run(&["rollback"]);
    s.run(&["replan", "--max-chain", "1"]);
    s.run(&["verify"]);
    s.check("sampled.txt");
}

#[test]
fn rejecting_hook_exit_code() {
    let mut s = Session::new();
    people_history(&mut s);
    let hook = s.path("reject.sh");
    write(&hook, "#!/bin/sh\necho no >&2\nexit 1\n");
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&hook, fs::Permissions::from_mode(0o755)).unwrap();
    }
    assert_eq!(s.run(&["hooks", "install", "pre-commit", "$TMP/reject.sh", "--order", "5"]).0, 0);
    s.run(&["hooks", "list"]);
    s.run(&["add-record", "--table", "R", "--key", "9", "--set", "name=Zed"]);
    assert_eq!(s.run(&["commit", "-m", "blocked"]).0, 3);
    assert_eq!(s.run(&["hooks", "install", "bogus", "$TMP/reject.sh"]).0, 1);
}

#[test]
fn jsonl_round_trip() {
    let mut s = Session::new();
    write(
        &s.path("in/P.jsonl"),
        "{\"id\": 1, \"name\": \"Sam\", \"w\": 1.5}\n{\"id\": 2, \"name\": \"Amol\", \"ok\": true}\n",
    );
    s.run(&["init", "$TMP/repo"]);
    s.run(&["create", "p", "--from-jsonl", "$TMP/in"]);
    s.run(&["export", "master", "--format", "jsonl", "--out", "$TMP/x"]);
    s.run(&["checkout", "master"]);
    fs::remove_file(s.path("in/P.jsonl")).unwrap();
    let exported = fs::read_to_string(s.path("x/P.jsonl")).unwrap();
    assert_eq!(
        exported,
        "{\"id\":1,\"name\":\"Sam\",\"w\":1.5}\n{\"id\":2,\"name\":\"Amol\",\"ok\":true}\n"
    );
    write(&s.path("in/P.csv"), "id,name\n1,x\n");
    assert_eq!(s.run(&["create", "again", "--from-csv", "$TMP/in"]).0, 1);
    write(&s.path("bad/Q.jsonl"), "{\"id\": 1, \"n\": [1]}\n");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let mut s = Session::new();
    assert_eq!(s.run(&["init", "$TMP/repo", "--max-chain", "3", "--planner", "exhaustive"]).0, 0);
    let path = s.path("repo/config.json");
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(config["max_chain"], 3);
    assert_eq!(config["planner"], "exhaustive");
    let mut edited = config.clone();
    edited["colour"] = serde_json::json!("blue");
    fs::write(&path, edited.to_string()).unwrap();
    let (code, _) = s.run(&["status"]);
    assert_eq!(code, 1);
    assert!(s.transcript.contains("colour"), "{}", s.transcript);
    assert_eq!(s.run(&["init", "$TMP/other", "--planner", "nope"]).0, 1);
}
