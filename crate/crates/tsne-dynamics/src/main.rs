use tsne_dynamics::experiment::{
    cmd_compare, cmd_early_stop_study, cmd_run, exit_code, parse_args, Command, USAGE,
};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") || args.is_empty() {
        print!("{USAGE}");
        std::process::exit(if args.is_empty() { 1 } else { 0 });
    }
    let (cmd, config) = match parse_args(&args) {
        Ok(parsed) => parsed,
        Err(e) => {
            eprintln!("error: {e}");
            eprint!("{USAGE}");
            std::process::exit(1);
        }
    };
    let result = match cmd {
        Command::Run => cmd_run(&config).map(|artifacts| {
            println!(
                "wrote {}, {}, {}, {}",
                artifacts.embedding_csv.display(),
                artifacts.trajectory_jsonl.display(),
                artifacts.report_json.display(),
                artifacts.final_svg.display()
            );
        }),
        Command::Compare => cmd_compare(&config).map(|result| {
            println!(
                "surrogate deviation at K0: {:.6} ({} checkpoints, artifacts in {})",
                result.final_deviation,
                result.ks.len(),
                config.out_dir.display()
            );
        }),
        Command::EarlyStopStudy => cmd_early_stop_study(&config).map(|entries| {
            for e in &entries {
                let sep = match e.separation_end_ee {
                    tsne_dynamics::diagnostics::Flagged::Finite(v) => format!("{v:.4}"),
                    tsne_dynamics::diagnostics::Flagged::Inf => "inf".to_string(),
                };
                println!("K0 = {:>4}: separation ratio at end of EE = {sep}", e.k0);
            }
        }),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
