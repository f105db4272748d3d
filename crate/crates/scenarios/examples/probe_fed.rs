// Scratch probe for fed-evt tuning. Not shipped.
use tailsim_scenarios::fed_evt::{run, FedConfig, FedScheme};

fn main() {
    for seed in [1u64, 2, 3, 4, 5] {
        let config = FedConfig { horizon: 20_000, seed, ..FedConfig::default() };
        let fl = run(&config, FedScheme::ExtFl).unwrap();
        let cen = run(&config, FedScheme::Cen).unwrap();
        println!(
            "seed {seed}: rel fl {:.4} cen {:.4} (diff {:.4}) | fl params ({:.1}, {:.3}) cen ({:.1}, {:.3}) | uplink fl {} cen {}",
            fl.overall_reliability, cen.overall_reliability,
            (fl.overall_reliability - cen.overall_reliability).abs(),
            fl.final_model.params.scale, fl.final_model.params.shape,
            cen.final_model.params.scale, cen.final_model.params.shape,
            fl.ledger.uplink_units, cen.ledger.uplink_units,
        );
    }
}
