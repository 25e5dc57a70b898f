// The experiment runner driven from code: two partial runs, merged into one
// trajectory file and summarized.

use mipt::cli::{merge, run, summarize, Command, ExperimentSpec, TRAJECTORY_FILE};

pub fn run_example() -> mipt::Result<()> {
    let root = std::env::temp_dir().join(format!("mipt-pipeline-{}", std::process::id()));
    let spec = |name: &str, offset: u64| ExperimentSpec {
        sizes: vec![4, 6],
        rates: vec![0.28],
        model: "spmm".into(),
        softening: 0.45,
        trajectories: 50,
        seed_offset: offset,
        output: root.join(name),
        ..ExperimentSpec::default()
    };
    run(Command::FreeEnergy, &spec("first", 0), &[])?;
    run(Command::FreeEnergy, &spec("second", 50), &[])?;
    let inputs = [root.join("first").join(TRAJECTORY_FILE), root.join("second").join(TRAJECTORY_FILE)];
    let merged = spec("merged", 0);
    let (command, records) = merge(&inputs, &merged.output.join(TRAJECTORY_FILE))?;
    summarize(command, &merged, &records, &merged.output)?;
    let table = std::fs::read_to_string(merged.output.join("free_energy.csv")).map_err(|e| mipt::Error::Io {
        path: merged.output.clone(),
        source: e,
    })?;
    println!("{} merged trajectories\n{table}", records.len());
    let _ = std::fs::remove_dir_all(&root);
    Ok(())
}

#[allow(dead_code)]
fn main() -> mipt::Result<()> {
    run_example()
}
