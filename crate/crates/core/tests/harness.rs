use wfr_smc::harness::{
    compare_flows, parse_config, run_experiment, ExperimentConfig, SamplerKind, Timing, DEFAULT_REPLICATES,
};
use wfr_smc::metrics::MmdForm;
use wfr_smc::targets::TargetPreset;

fn shipped(name: &str) -> ExperimentConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/");
    parse_config(&std::fs::read_to_string(format!("{path}{name}.toml")).unwrap()).unwrap()
}

#[test]
fn four_mode_configs_match_the_reference_settings() {
    for (name, sampler) in [
        ("four_mode_smc_wfr", "smc_wfr"),
        ("four_mode_bdl_pde", "bdl_pde"),
        ("four_mode_bdl_kl", "bdl_kl"),
    ] {
        let c = shipped(name);
        assert_eq!(c.sampler, sampler.parse::<SamplerKind>().unwrap());
        assert_eq!(c.target, TargetPreset::FourMode);
        assert_eq!(c.mu0, TargetPreset::FourModeInit);
        assert_eq!((c.n_particles, c.n_iterations, c.gamma), (500, 1000, 0.05));
        assert_eq!(c.bandwidth(), 0.05);
        assert_eq!(c.mmd_form, MmdForm::Squared);
        assert_eq!(c.replicates, DEFAULT_REPLICATES);
        assert!(c.validate().is_ok());
    }
}

#[test]
fn bimodal_configs_are_comparable() {
    let names = ["smc_wfr", "tempered_smc_wfr", "ula", "tempered_ula"];
    let configs: Vec<_> = names.iter().map(|n| shipped(&format!("bimodal4_{n}"))).collect();
    for c in &configs {
        assert_eq!(c.target, TargetPreset::Bimodal { separation: 4.0 });
        assert_eq!(c.n_particles, 500);
    }
}

fn small(sampler: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(sampler.parse().unwrap(), TargetPreset::Bimodal { separation: 2.0 });
    c.n_particles = 80;
    c.n_iterations = 30;
    c.gamma = 0.1;
    c.cadence = 3;
    c.reference_size = 300;
    c.timing = Timing::Off;
    c
}

#[test]
fn replicate_r_is_the_run_seeded_with_seed_plus_r() {
    let mut c = small("tempered_smc_wfr");
    c.schedule = "optimal_one_over".parse().unwrap();
    c.seed = 11;
    c.replicates = 4;
    let all = run_experiment(&c).unwrap();
    c.seed = 13;
    c.replicates = 1;
    let one = run_experiment(&c).unwrap();
    assert_eq!(all.replicates[2].seed, 13);
    assert_eq!(all.replicates[2].outcome, one.replicates[0].outcome);
    assert_ne!(all.replicates[1].outcome, all.replicates[2].outcome);
}

#[test]
fn failed_replicates_are_recorded_not_fatal() {
    let mut c = ExperimentConfig::new(SamplerKind::Bdl(wfr_smc::bdl::RateVariant::Kl), TargetPreset::FourMode);
    c.mu0 = TargetPreset::FourModeInit;
    c.n_particles = 40;
    c.n_iterations = 400;
    c.reference_size = 200;
    c.replicates = 2;
    let s = run_experiment(&c).unwrap();
    assert_eq!(s.failures(), 2);
    assert!(s.all_failed());
    assert!(s.aggregate(|r| r.mmd).mean.is_nan());
}

#[test]
fn compare_single_config() {
    let mut c = small("smc_wfr");
    c.replicates = 2;
    c.threshold = 10.0;
    let report = compare_flows(&[c]).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert!(report.orderings.is_empty());
    assert_eq!(report.rows[0].reached, 2);
    assert_eq!(report.rows[0].iterations.mean, 0.0);
    assert!(compare_flows(&[]).is_err());
}

#[test]
fn untempered_flows_are_no_slower_on_an_easy_mixture() {
    let mut configs = Vec::new();
    for (s, sched) in [("smc_wfr", None), ("tempered_smc_wfr", Some("optimal_one_over")), ("ula", None)] {
        let mut c = small(s);
        c.replicates = 4;
        c.n_iterations = 200;
        c.cadence = 1;
        c.threshold = 0.01;
        if let Some(v) = sched {
            c.schedule = v.parse().unwrap();
        }
        configs.push(c);
    }
    let report = compare_flows(&configs).unwrap();
    assert_eq!(report.orderings.len(), 2);
    assert!(report.all_hold(), "{}", report.render());
}
