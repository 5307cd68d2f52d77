use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgMatches, Command};

use ple_lab::commands::manifest_path;
use ple_lab::{execute, rerun, LabError, Settings, Subcommand};

fn cli() -> Command {
    let mut cmd = Command::new("ple-lab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Penalized likelihood estimation experiments")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .value_name("DIR")
                .help("output directory [out/<subcommand>]"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("key = value settings; flags override them"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .value_parser(value_parser!(usize))
                .help("worker thread cap"),
        );
    for sub in Subcommand::ALL {
        let mut c = Command::new(sub.name()).about(sub.about());
        for (key, help) in sub.keys() {
            c = c.arg(Arg::new(key).long(key).value_name("VALUE").help(help));
        }
        cmd = cmd.subcommand(c);
    }
    cmd.subcommand(
        Command::new("rerun")
            .about("Re-run a recorded manifest")
            .arg(Arg::new("manifest").required(true).value_name("MANIFEST")),
    )
}

fn settings(sub: Subcommand, m: &ArgMatches) -> Result<Settings, LabError> {
    let mut s = Settings::new();
    if let Ok(seed) = std::env::var("PLE_LAB_SEED") {
        s.set("seed", seed);
    }
    if let Some(path) = m.get_one::<String>("config") {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        s.merge(&Settings::parse(&text)?);
    }
    for (key, _) in sub.keys() {
        if let Some(v) = m.get_one::<String>(key) {
            s.set(key, v.clone());
        }
    }
    Ok(s)
}

fn main() -> ExitCode {
    let mut cmd = cli();
    let matches = match cmd.try_get_matches_from_mut(std::env::args_os()) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let (name, m) = matches.subcommand().expect("a subcommand is required");
    let out = m.get_one::<String>("out").map(PathBuf::from);
    let threads = m.get_one::<usize>("threads").copied();

    let result = match Subcommand::from_name(name) {
        Some(sub) => {
            let dir = out.unwrap_or_else(|| Path::new("out").join(name));
            settings(sub, m).and_then(|s| execute(sub, s, &dir, threads).map(|r| (r, dir)))
        }
        None => {
            let manifest = PathBuf::from(m.get_one::<String>("manifest").expect("required"));
            let dir = out
                .clone()
                .unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default());
            rerun(&manifest, Some(&dir), threads).map(|r| (r, dir))
        }
    };
    match result {
        Ok(((manifest, report), dir)) => {
            print!("{report}");
            println!(
                "wrote {} and {} in {:.2}s",
                manifest.outputs.join(", "),
                manifest_path(&dir).display(),
                manifest.duration_secs
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, LabError::Usage(_)) {
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                    eprintln!("Run `ple-lab {name} --help` for every setting.");
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
