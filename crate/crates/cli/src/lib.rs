//! Command-line front end for the `xyzca` library.

pub mod config;
pub mod run;

pub use config::{parse_config, RunConfig, UsageError};
pub use run::{dispatch, RunError};

/// Parses, runs and returns the process exit code.
pub fn main_with<I, S>(argv: I, env: &[(String, String)]) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cfg = match parse_config(argv, env) {
        Ok(cfg) => cfg,
        Err(e) if e.help => {
            print!("{}", e.message);
            return run::EXIT_OK;
        }
        Err(e) => {
            let msg = e.message.trim_end();
            eprintln!("usage error: {}", msg.strip_prefix("error: ").unwrap_or(msg));
            return run::EXIT_USAGE;
        }
    };
    match dispatch(&cfg) {
        Ok(()) => run::EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
