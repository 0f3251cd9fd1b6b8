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

//! Command-line front end. [`run`] is the whole program minus process exit.

pub mod args;
pub mod commands;
pub mod data;

use std::io::Write;

use clap::Parser;

pub use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_CONFLICT: i32 = 2;
pub const EXIT_HOOK: i32 = 3;
pub const EXIT_CORRUPT: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USER,
            message: message.into(),
        }
    }
}

impl From<dsvc_core::Error> for CliError {
    fn from(e: dsvc_core::Error) -> Self {
        use dsvc_core::Error as E;
        let code = match &e {
            E::HookRejected { .. } => EXIT_HOOK,
            E::UnresolvedConflicts(_) => EXIT_CONFLICT,
            E::Corrupt(_)
            | E::CorruptObject(_)
            | E::BrokenChain(_)
            | E::DeltaMismatch(_)
            | E::Decode(_)
            | E::SketchMismatch(..)
            | E::UnknownBaseVersion(_) => EXIT_CORRUPT,
            _ => EXIT_USER,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<dsvc_vql::VqlError> for CliError {
    fn from(e: dsvc_vql::VqlError) -> Self {
        match e {
            dsvc_vql::VqlError::Core(inner) => inner.into(),
            other => CliError::usage(other.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match commands::dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
