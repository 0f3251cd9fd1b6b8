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

//! External executables run around repository events.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VersionId;
use crate::store::write_atomic;

pub const HOOK_TIMEOUT: Duration = Duration::from_secs(30);
pub const HOOKS_DIR: &str = "hooks";
pub const HOOKS_MANIFEST: &str = "hooks.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HookEvent {
    #[serde(rename = "pre-commit")]
    PreCommit,
    #[serde(rename = "post-commit")]
    PostCommit,
    #[serde(rename = "post-merge")]
    PostMerge,
    #[serde(rename = "post-compact")]
    PostCompact,
}

impl HookEvent {
    pub const ALL: [HookEvent; 4] = [
        HookEvent::PreCommit,
        HookEvent::PostCommit,
        HookEvent::PostMerge,
        HookEvent::PostCompact,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            HookEvent::PreCommit => "pre-commit",
            HookEvent::PostCommit => "post-commit",
            HookEvent::PostMerge => "post-merge",
            HookEvent::PostCompact => "post-compact",
        }
    }

    pub fn aborts(&self) -> bool {
        matches!(self, HookEvent::PreCommit)
    }
}

impl fmt::Display for HookEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HookEvent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        HookEvent::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownHookEvent(s.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HookContext {
    pub repo: PathBuf,
    pub dataset: String,
    pub version: Option<VersionId>,
    pub parents: Vec<VersionId>,
    pub branch: Option<String>,
    pub changed_tables: Vec<String>,
}

impl HookContext {
    fn env(&self, event: HookEvent) -> Vec<(&'static str, String)> {
        let join = |items: Vec<String>| items.join(",");
        vec![
            ("DSVC_REPO", self.repo.display().to_string()),
            ("DSVC_DATASET", self.dataset.clone()),
            ("DSVC_EVENT", event.as_str().to_string()),
            (
                "DSVC_VERSION_ID",
                self.version.map(|v| v.to_string()).unwrap_or_default(),
            ),
            (
                "DSVC_PARENTS",
                join(self.parents.iter().map(|p| p.to_string()).collect()),
            ),
            ("DSVC_BRANCH", self.branch.clone().unwrap_or_default()),
            ("DSVC_CHANGED_TABLES", join(self.changed_tables.clone())),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HookEntry {
    /// `<event>/<order>-<name>`, also the path below the hooks directory.
    pub id: String,
    pub event: HookEvent,
    pub order: i64,
    pub name: String,
    /// Install sequence number; breaks ties between equal orders.
    pub seq: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct HookManifest {
    next_seq: u64,
    hooks: Vec<HookEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HookRun {
    pub hook: String,
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    pub stderr: String,
}

impl HookRun {
    pub fn succeeded(&self) -> bool {
        self.exit_code == Some(0) && !self.timed_out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HookOutcome {
    pub runs: Vec<HookRun>,
}

impl HookOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &HookRun> {
        self.runs.iter().filter(|r| !r.succeeded())
    }
}

/// Hooks installed in one repository.
pub struct Hooks {
    repo: PathBuf,
    timeout: Duration,
}

#[cfg(unix)]
fn is_executable(path: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    fs::metadata(path)
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}

#[cfg(not(unix))]
fn is_executable(path: &Path) -> bool {
    path.is_file()
}

impl Hooks {
    pub fn new(repo: impl Into<PathBuf>) -> Self {
        Hooks {
            repo: repo.into(),
            timeout: HOOK_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn manifest_path(&self) -> PathBuf {
        self.repo.join(HOOKS_MANIFEST)
    }

    fn load(&self) -> Result<HookManifest> {
        let path = self.manifest_path();
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| Error::json(&path, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(HookManifest::default()),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    fn save(&self, m: &HookManifest) -> Result<()> {
        let text = serde_json::to_string_pretty(m).expect("manifest serializes");
        write_atomic(&self.manifest_path(), text.as_bytes())
    }

    /// Copies `executable` into the repository and registers it for `event`.
    pub fn install(&self, event: HookEvent, executable: &Path, order: i64) -> Result<String> {
        if !is_executable(executable) {
            return Err(Error::NotExecutable(executable.to_path_buf()));
        }
        let mut manifest = self.load()?;
        let base = executable
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("hook")
            .to_string();
        let mut name = base.clone();
        let mut n = 1;
        while manifest
            .hooks
            .iter()
            .any(|h| h.event == event && h.order == order && h.name == name)
        {
            n += 1;
            name = format!("{base}.{n}");
        }
        let id = format!("{}/{}-{}", event.as_str(), order, name);
        let dest = self.repo.join(HOOKS_DIR).join(&id);
        let dir = dest.parent().expect("hook path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        fs::copy(executable, &dest).map_err(|e| Error::io(&dest, e))?;
        let seq = manifest.next_seq;
        manifest.next_seq += 1;
        manifest.hooks.push(HookEntry {
            id: id.clone(),
            event,
            order,
            name,
            seq,
        });
        self.save(&manifest)?;
        Ok(id)
    }

    /// Hooks for `event` in execution order.
    pub fn list(&self, event: Option<HookEvent>) -> Result<Vec<HookEntry>> {
        let mut hooks: Vec<HookEntry> = self
            .load()?
            .hooks
            .into_iter()
            .filter(|h| event.is_none_or(|e| h.event == e))
            .collect();
        hooks.sort_by_key(|h| (h.event, h.order, h.seq));
        Ok(hooks)
    }

    /// Runs every hook for `event`. A failing pre-commit hook stops the run
    /// and is returned as `HookRejected`; other failures are logged.
    pub fn fire(&self, event: HookEvent, ctx: &HookContext) -> Result<HookOutcome> {
        let mut outcome = HookOutcome::default();
        for hook in self.list(Some(event))? {
            let run = self.run_one(&hook, event, ctx)?;
            if !run.succeeded() {
                if event.aborts() {
                    return Err(Error::HookRejected {
                        hook: run.hook,
                        exit_code: run.exit_code,
                        stderr: run.stderr,
                    });
                }
                log::warn!(
                    "{} hook {} failed (exit {:?}): {}",
                    event,
                    run.hook,
                    run.exit_code,
                    run.stderr.trim_end()
                );
            }
            outcome.runs.push(run);
        }
        Ok(outcome)
    }

    fn run_one(&self, hook: &HookEntry, event: HookEvent, ctx: &HookContext) -> Result<HookRun> {
        let path = self.repo.join(HOOKS_DIR).join(&hook.id);
        let mut cmd = Command::new(&path);
        cmd.current_dir(&self.repo)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped());
        for (k, v) in ctx.env(event) {
            cmd.env(k, v);
        }
        let mut child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) => {
                return Ok(HookRun {
                    hook: hook.id.clone(),
                    exit_code: None,
                    timed_out: false,
                    stderr: format!("cannot run {}: {e}", path.display()),
                })
            }
        };
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });
        let start = Instant::now();
        let mut timed_out = false;
        let status = loop {
            match child.try_wait().map_err(|e| Error::io(&path, e))? {
                Some(status) => break Some(status),
                None if start.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    timed_out = true;
                    break None;
                }
                None => std::thread::sleep(Duration::from_millis(5)),
            }
        };
        let stderr = if timed_out {
            // grandchildren may keep the pipe open; do not wait on them
            format!("timed out after {:?}", self.timeout)
        } else {
            String::from_utf8_lossy(&reader.join().unwrap_or_default()).into_owned()
        };
        Ok(HookRun {
            hook: hook.id.clone(),
            exit_code: status.and_then(|s| s.code()),
            timed_out,
            stderr,
        })
    }
}

/// Installed hooks grouped by event, for display.
pub fn hooks_by_event(hooks: &[HookEntry]) -> BTreeMap<HookEvent, Vec<&HookEntry>> {
    let mut out: BTreeMap<HookEvent, Vec<&HookEntry>> = BTreeMap::new();
    for h in hooks {
        out.entry(h.event).or_default().push(h);
    }
    out
}
