// Scratch probe for vr-arcade tuning. Not shipped.
use tailsim_scenarios::vr_arcade::{run_scheme, VrConfig, VrScheme};

fn main() {
    let mut fails = 0;
    for seed in [1u64, 2, 3, 4, 5] {
        for players in [4usize, 8, 12, 16] {
            let config = VrConfig { seed, ..VrConfig::default() };
            let b1 = run_scheme(&config, VrScheme::Baseline1, players).unwrap();
            let b2 = run_scheme(&config, VrScheme::Baseline2, players).unwrap();
            let pr = run_scheme(&config, VrScheme::Proposed, players).unwrap();
            let cp_ok = b2.mean_cp_delay <= b1.mean_cp_delay && pr.mean_cp_delay <= b1.mean_cp_delay;
            let cm_b2_ok = b2.mean_cm_delay >= b1.mean_cm_delay;
            let cm_pr_ok = pr.mean_cm_delay <= b2.mean_cm_delay;
            if !(cp_ok && cm_b2_ok && cm_pr_ok) { fails += 1; }
            println!("seed {seed} players {players:2}: cp b1 {:.3} b2 {:.3} pr {:.3} | cm b1 {:.3} b2 {:.3} pr {:.3} | hd b1 {:.3} b2 {:.3} pr {:.3} {}{}{}",
                b1.mean_cp_delay, b2.mean_cp_delay, pr.mean_cp_delay,
                b1.mean_cm_delay, b2.mean_cm_delay, pr.mean_cm_delay,
                b1.hd_rate, b2.hd_rate, pr.hd_rate,
                if cp_ok {""} else {" CP-FAIL"},
                if cm_b2_ok {""} else {" CM-B2-FAIL"},
                if cm_pr_ok {""} else {" CM-PR-FAIL"});
        }
        // monotone load per scheme
        for scheme in [VrScheme::Baseline1, VrScheme::Baseline2, VrScheme::Proposed] {
            let config = VrConfig { seed, ..VrConfig::default() };
            let delays: Vec<(f64, f64)> = [4usize, 8, 12, 16].iter()
                .map(|&p| { let s = run_scheme(&config, scheme, p).unwrap(); (s.mean_cm_delay, s.mean_cp_delay) })
                .collect();
            let mono = delays.windows(2).all(|w| w[1].0 >= w[0].0 - 1e-9 && w[1].1 >= w[0].1 - 1e-9);
            if !mono { fails += 1; println!("seed {seed} {:?} NOT MONOTONE: {delays:?}", scheme); }
        }
    }
    println!("total fails: {fails}");
}
