//! Runs a seeded campaign and prints budget and coverage statistics.

use envyfree::harness::{run_trials, ProtocolKind, TrialConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let trials = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let protocol = match args.next().as_deref() {
        Some("3") => ProtocolKind::ThreeAgent,
        _ => ProtocolKind::FourAgent,
    };
    let config = TrialConfig { trials, seed, protocol, adversarial_suite: true, ..TrialConfig::default() };
    let report = run_trials(&config).expect("valid config");
    println!("trials: {}", report.trials.len());
    println!("max queries: {}  max cuts: {}", report.max_queries, report.max_cuts);
    println!("failures: {}", report.failures.len());
    for t in report.trials.iter().filter(|t| !t.passed()).take(10) {
        println!("  {}: envy_free={} complete={} error={:?}", t.label, t.envy_free, t.complete, t.error);
    }
    println!("coverage: {}", serde_json::to_string_pretty(&report.coverage).expect("serializable"));
    println!("missing: {:?}", report.coverage.missing(protocol));
}
