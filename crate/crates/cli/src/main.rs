use clap::{Parser, Subcommand, ValueEnum};
use qgraph_core::bcspace::Tolerances;
use qgraph_core::secular::SecularSystem;
use qgraph_core::spectrum::SolverOptions;
use std::path::PathBuf;
use std::process::ExitCode;

mod emit;
mod problem;
mod run;

const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "qgraph", version, about = "Spectra of Laplacians on metric graphs with general vertex conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a problem file and write the report.
    Run {
        problem: PathBuf,
        #[arg(long, default_value = "qgraph-out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Search region `RE_MAX,IM_MAX` in the k-plane for every task.
        #[arg(long, value_parser = parse_region)]
        region: Option<[f64; 2]>,
        /// Relative tolerance for matrix identities.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Plotdata,
}

fn parse_region(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [re, im] = parts.as_slice() else {
        return Err("expected RE_MAX,IM_MAX".into());
    };
    let r = [
        re.trim().parse::<f64>().map_err(|e| e.to_string())?,
        im.trim().parse::<f64>().map_err(|e| e.to_string())?,
    ];
    problem::check_region(r).map_err(|e| e.to_string())?;
    Ok(r)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let Command::Run {
        problem,
        out,
        format,
        region,
        tol,
        threads,
    } = cli.command;

    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("qgraph: cannot set thread count: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    let mut tolerances = Tolerances::default();
    if let Some(t) = tol {
        if !(t > 0.0 && t < 1.0) {
            eprintln!("qgraph: --tol must lie in (0, 1)");
            return ExitCode::from(EXIT_INPUT);
        }
        tolerances.rel = t;
    }
    let p = match problem::Problem::load(&problem.to_string_lossy()) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("qgraph: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let cfg = run::Config {
        region,
        tol: tolerances,
        opts: SolverOptions::default(),
    };
    let report = run::run(&p, &cfg);

    let written = std::fs::create_dir_all(&out).and_then(|_| {
        let mut files = vec![emit::write_json(&report, &out)?];
        match format {
            Format::Json => {}
            Format::Csv => files.push(emit::write_csv(&report, &out)?),
            Format::Plotdata => {
                let sys = SecularSystem::new(p.graph.clone(), p.bc.clone()).expect("checked");
                let r = report
                    .outcomes
                    .iter()
                    .find_map(|o| o.region)
                    .unwrap_or_else(|| region.unwrap_or(run::DEFAULT_REGION));
                files.extend(emit::write_plotdata(&report, &sys, r, &cfg.opts, &out)?);
            }
        }
        Ok(files)
    });
    match written {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("qgraph: cannot write output: {e}");
            return ExitCode::from(1);
        }
    }
    for o in &report.outcomes {
        if let Some(m) = &o.message {
            eprintln!("qgraph: {}: {m}", o.task);
        }
    }
    ExitCode::from(report.exit_code() as u8)
}
