//! Config files and the resolved-configuration echo.
//!
//! A config file is flat `key=value` text. Keys before the first `[section]`
//! are global options; a `[certify]` section holds options of `certify`, and
//! so on. Keys are option names without the leading dashes. The file is
//! spliced into the argument vector ahead of the command-line flags, so the
//! latter win.

use std::ffi::OsString;

use clap::{ArgMatches, Command};

use crate::artifact::RunHeader;
use crate::CliError;

const GLOBALS: [&str; 2] = ["seed", "workers"];
/// Options that are never echoed: they steer the process, not the result.
const NOT_ECHOED: [&str; 3] = ["help", "version", "config"];

#[derive(Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub globals: Vec<(String, String)>,
    pub sections: Vec<(String, Vec<(String, String)>)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = ConfigFile::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let err = |msg: String| CliError::usage("config", format!("line {}: {msg}", i + 1));
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if name.is_empty() {
                    return Err(err("empty section name".into()));
                }
                cfg.sections.push((name.to_string(), Vec::new()));
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(err(format!("expected `key=value`, got `{line}`")));
            };
            let entry = (k.trim().to_string(), v.trim().to_string());
            if entry.0.is_empty() {
                return Err(err("empty key".into()));
            }
            match cfg.sections.last_mut() {
                Some((_, entries)) => entries.push(entry),
                None => cfg.globals.push(entry),
            }
        }
        Ok(cfg)
    }

    /// Rejects unknown sections and keys.
    pub fn check(&self, cmd: &Command) -> Result<(), CliError> {
        for (k, _) in &self.globals {
            if !GLOBALS.contains(&k.as_str()) {
                return Err(CliError::usage("config", format!("unknown global key `{k}`")));
            }
        }
        for (name, entries) in &self.sections {
            let sub = cmd
                .find_subcommand(name)
                .ok_or_else(|| CliError::usage("config", format!("unknown section `[{name}]`")))?;
            let known = option_names(sub);
            for (k, _) in entries {
                if !known.contains(&k.as_str()) && !GLOBALS.contains(&k.as_str()) {
                    return Err(CliError::usage("config", format!("unknown key `{k}` in section `[{name}]`")));
                }
            }
        }
        Ok(())
    }
}

fn option_names(cmd: &Command) -> Vec<&str> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long())
        .filter(|l| !NOT_ECHOED.contains(l) && !GLOBALS.contains(l))
        .collect()
}

fn flag_value(args: &[OsString], i: usize, name: &str) -> Option<(OsString, usize)> {
    let a = args[i].to_str()?;
    if a == format!("--{name}") {
        return args.get(i + 1).map(|v| (v.clone(), 2));
    }
    a.strip_prefix(&format!("--{name}=")).map(|v| (OsString::from(v), 1))
}

/// Splices the file named by `--config`, if any, into `argv`.
pub fn expand_args(argv: Vec<OsString>, cmd: &Command) -> Result<Vec<OsString>, CliError> {
    let mut config_path = None;
    let mut command_at = None;
    let mut i = 1;
    while i < argv.len() {
        if let Some((path, used)) = flag_value(&argv, i, "config") {
            config_path = Some(path);
            i += used;
            continue;
        }
        let token = argv[i].to_string_lossy();
        if command_at.is_none() {
            if GLOBALS.iter().any(|g| token == format!("--{g}")) {
                i += 2;
                continue;
            }
            if !token.starts_with('-') {
                command_at = Some(i);
            }
        }
        i += 1;
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::usage("config", format!("{}: {e}", path.to_string_lossy())))?;
    let file = ConfigFile::parse(&text)?;
    file.check(cmd)?;

    let as_flags = |entries: &[(String, String)]| -> Vec<OsString> {
        entries.iter().flat_map(|(k, v)| [OsString::from(format!("--{k}")), OsString::from(v)]).collect()
    };
    let mut out = vec![argv[0].clone()];
    out.extend(as_flags(&file.globals));
    match command_at {
        Some(at) => {
            let name = argv[at].to_string_lossy().into_owned();
            out.extend(argv[1..=at].iter().cloned());
            for (section, entries) in &file.sections {
                if *section == name {
                    out.extend(as_flags(entries));
                }
            }
            out.extend(argv[at + 1..].iter().cloned());
        }
        None => out.extend(argv[1..].iter().cloned()),
    }
    Ok(out)
}

/// Resolved configuration of a parsed run: command, globals, then every
/// option of the command that has a value (defaults included).
pub fn resolved_header(matches: &ArgMatches, cmd: &Command) -> RunHeader {
    let mut header = RunHeader::default();
    let Some((name, sub_matches)) = matches.subcommand() else {
        return header;
    };
    header.push("command", name);
    for g in GLOBALS {
        if let Some(v) = raw_value(matches, g) {
            header.push(g, v);
        }
    }
    if let Some(sub) = cmd.find_subcommand(name) {
        for arg in sub.get_arguments() {
            let Some(long) = arg.get_long() else { continue };
            if NOT_ECHOED.contains(&long) || GLOBALS.contains(&long) {
                continue;
            }
            if let Some(v) = raw_value(sub_matches, arg.get_id().as_str()) {
                header.push(long, v);
            }
        }
    }
    header
}

fn raw_value(m: &ArgMatches, id: &str) -> Option<String> {
    let values: Vec<String> = m.get_raw(id)?.map(|v| v.to_string_lossy().into_owned()).collect();
    Some(values.join(","))
}
