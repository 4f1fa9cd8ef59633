//! Loads a config from TOML, runs a few shared-network episodes and writes
//! the per-episode CSV, per-step JSONL and manifest.

use codesign::harness::{emit_results, run_episode, EpisodeRow, ExperimentConfig, RunManifest};
use codesign::policies::{CoDesignPolicy, Controller, Estimator, PdGains, QosPolicy};

const CONFIG: &str = r#"
seed = 7
plants = 3

[plant]
horizon = 60

[network]
snr_std_db = 2.0
"#;

fn main() -> codesign::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    println!("config sha256 {}", cfg.sha256());
    let policy = CoDesignPolicy {
        controller: Controller::Pd(PdGains::default()),
        estimator: Estimator::Oracle,
        qos: QosPolicy::Constant { q: 0.5, tau: 1 },
    };
    let mut rows = vec![];
    for episode in 0..4 {
        let ep = run_episode(&cfg, &policy, cfg.seed + episode as u64)?;
        rows.extend(ep.plants.into_iter().map(|metrics| EpisodeRow {
            label: "q0.5".into(),
            episode,
            metrics,
        }));
    }
    let dir = std::env::temp_dir().join("codesign-artifacts");
    let files = emit_results(&rows, &dir, &RunManifest::new("example", cfg.sha256(), cfg.seed))?;
    println!("{}", std::fs::read_to_string(&files.episodes_csv).unwrap_or_default());
    println!("steps in {}", files.steps_jsonl.display());
    Ok(())
}
