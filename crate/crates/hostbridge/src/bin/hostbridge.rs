use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hostbridge::bench;
use hostbridge::embed::{BuildInvocation, BuildPolicy, SnippetBuildSpec, SnippetEmbedder};
use hostbridge::registration;
use hostbridge::scaffold;
use hostbridge_core::{ProtectGuard, ValueHandle};

#[derive(Parser)]
#[command(name = "hostbridge", version, about = "Guest framework tooling for the hostbridge host")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a new project with the example functions.
    New { path: PathBuf },
    /// Regenerate src/rustlib/src/registration.rs from the .Call sites in R/.
    Register { path: PathBuf },
    /// Regenerate the registration source and build the guest library.
    Build { path: PathBuf },
    /// Build a snippet and run it on numeric input.
    Embed {
        /// Parameter name; repeat for several parameters.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        /// Dependency line, e.g. 'itertools = "0.13"'; repeatable.
        #[arg(long = "dep")]
        deps: Vec<String>,
        /// One-value-per-line numeric file per parameter, in order.
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
        /// Print each compiler invocation to stderr.
        #[arg(long)]
        verbose: bool,
        /// File holding the function body.
        body: PathBuf,
    },
    /// Time host-native and bridged calls of a Euclidean norm.
    Bench {
        #[arg(long, default_value_t = 1_000_000)]
        iters: usize,
        #[arg(long, default_value_t = 10)]
        len: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("hostbridge: {msg}");
            ExitCode::from(code)
        }
    }
}

type CliResult = Result<(), (u8, String)>;

fn fail(e: impl std::fmt::Display) -> (u8, String) {
    (1, e.to_string())
}

fn run(cmd: Cmd) -> CliResult {
    match cmd {
        Cmd::New { path } => {
            scaffold::new_project(&path).map_err(fail)?;
            println!("created {}", path.display());
            Ok(())
        }
        Cmd::Register { path } => {
            let outcome = registration::register_project(&path)
                .map_err(|e| (e.exit_code() as u8, e.to_string()))?;
            let file = registration::registration_file(&path);
            println!(
                "{} {} ({} function(s))",
                if outcome.changed { "wrote" } else { "unchanged" },
                file.display(),
                outcome.entries.len()
            );
            if !outcome.generated.stubs.is_empty() {
                println!("\nnot yet defined in lib.rs:\n\n{}", outcome.generated.stubs);
            }
            Ok(())
        }
        Cmd::Build { path } => {
            let policy = BuildPolicy::from_env().map_err(fail)?;
            let built = scaffold::build_package(&path, &policy).map_err(|e| match e {
                scaffold::ScaffoldError::Registration(r) => (r.exit_code() as u8, r.to_string()),
                other => fail(other),
            })?;
            println!("built {}", built.library.display());
            Ok(())
        }
        Cmd::Embed {
            params,
            deps,
            inputs,
            verbose,
            body,
        } => embed(params, deps, inputs, body, verbose),
        Cmd::Bench { iters, len } => {
            let report = bench::run_benchmark(iters, len);
            print!("{}", report.to_text());
            println!();
            print!("{}", report.to_csv());
            Ok(())
        }
    }
}

fn read_numbers(path: &PathBuf) -> Result<Vec<f64>, (u8, String)> {
    let text = fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| fail(format!("{}:{}: not a number: {l:?}", path.display(), i + 1)))
        })
        .collect()
}

fn embed(
    params: Vec<String>,
    deps: Vec<String>,
    inputs: Vec<PathBuf>,
    body: PathBuf,
    verbose: bool,
) -> CliResult {
    if inputs.len() != params.len() {
        return Err(fail(format!(
            "{} parameter(s) but {} input file(s)",
            params.len(),
            inputs.len()
        )));
    }
    let body = fs::read_to_string(&body).map_err(|e| fail(format!("{}: {e}", body.display())))?;
    let values = inputs.iter().map(read_numbers).collect::<Result<Vec<_>, _>>()?;
    let spec = SnippetBuildSpec {
        parameter_names: params,
        body,
        dependencies: deps.join("\n"),
    };
    let policy = BuildPolicy::from_env().map_err(fail)?;
    let output = mini_host::run(move || -> Result<Vec<String>, String> {
        let mut embedder = SnippetEmbedder::new(policy);
        let handle = embedder.build(&spec).map_err(|e| e.to_string())?;
        if verbose {
            for inv in embedder.build_log() {
                eprintln!("{}", describe(inv));
            }
        }
        let mut pc = ProtectGuard::new();
        let args: Vec<ValueHandle> = values.iter().map(|v| ValueHandle::new(v.as_slice(), &mut pc)).collect();
        let result = handle.call(&args).map_err(|e| e.to_string())?;
        let lines = render(result);
        handle.release().map_err(|e| e.to_string())?;
        Ok(lines)
    })
    .map_err(fail)?;
    for line in output {
        println!("{line}");
    }
    Ok(())
}

fn describe(inv: &BuildInvocation) -> String {
    let env: Vec<String> = inv.env.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!(
        "build: cd {} && {} {} {}",
        inv.cwd.display(),
        env.join(" "),
        inv.program,
        inv.args.join(" ")
    )
}

fn render(v: ValueHandle) -> Vec<String> {
    if let Ok(xs) = v.slice_double() {
        return xs.iter().map(|x| x.to_string()).collect();
    }
    if let Ok(xs) = v.slice_integer() {
        return xs.iter().map(|x| x.to_string()).collect();
    }
    if let Ok(xs) = v.slice_logical() {
        return xs.iter().map(|x| x.to_string()).collect();
    }
    if v.kind() == hostbridge_core::CellKind::String {
        return (0..v.len()).filter_map(|i| v.get_string(i).ok()).collect();
    }
    vec![format!("<{}>", v.kind())]
}
