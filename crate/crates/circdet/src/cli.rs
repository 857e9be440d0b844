use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

use crate::commands::{self, DecodeArgs, DisplaceArgs, EvalArgs, LossArgs, RotateArgs, SynthArgs};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "circdet", version, about = "Circle-representation detection toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene set as CircleAnn (and optionally target maps).
    Synth(SynthArgs),
    /// COCO-style AP of detections against ground truth.
    Eval(EvalArgs),
    /// Fraction of detections that survive a quarter-turn of the input.
    RotateCheck(RotateArgs),
    /// Mean IOU and cIOU of shifted copies as a function of displacement.
    Displace(DisplaceArgs),
    /// Loss values, focal gradient check or a gradient-descent fit.
    LossCheck(LossArgs),
    /// Turn prediction maps into circle detections.
    Decode(DecodeArgs),
}

fn execute(cmd: &Command) -> Result<String> {
    Ok(match cmd {
        Command::Synth(a) => commands::synth(a)?.summary,
        Command::Eval(a) => commands::eval(a)?.summary,
        Command::RotateCheck(a) => commands::rotate_check(a)?.summary,
        Command::Displace(a) => commands::displace(a)?.summary,
        Command::LossCheck(a) => commands::loss_check(a)?.summary,
        Command::Decode(a) => commands::decode(a)?.summary,
    })
}

/// Parses `args` (program name first), runs the command and returns the exit code:
/// 0 on success, 1 for usage errors, 2 for data, format and IO errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(summary) => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
