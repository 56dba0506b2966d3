//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria that fail for documented reasons are listed in `EXPECTED_FAIL`;
//! the test fails if any other criterion fails or if a listed one starts
//! passing (so the list cannot go stale).

use std::time::Instant;

use fock_metrology::channels::{
    displacement_distribution, loss_after_channel, combined_distribution, squeezing_distribution, weak_limit_distribution,
    ChannelKind, ChannelParams, ProbeState,
};
use fock_metrology::fisher::{
    classical_fi, default_step, fi_displacement_exact, fi_squeezing_exact, fisher_matrix, linearized_sensitivity,
    photon_moments, pipeline_fi, Moment,
};
use fock_metrology::gaussian::{
    best_gaussian_at_energy, qfi_gaussian, qfi_gaussian_detail_with, squeezing_db, GaussianFamilyKind, GaussianProbe,
    PhaseReference,
};
use fock_metrology::hilbert::FockCutoff;
use fock_metrology::mle::{
    fluctuation_study, monte_carlo_error, monte_carlo_joint, weak_estimator_moments, Estimator, FluctuationMode,
    McScenario,
};

/// Criteria whose failure is analysed in the decisions ledger.
const EXPECTED_FAIL: &[usize] = &[3, 4, 10, 11, 12, 13];

struct Report {
    results: Vec<(usize, bool)>,
}

impl Report {
    fn record(&mut self, id: usize, pass: bool, started: Instant, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {verdict} ({:.1} s) {detail}", started.elapsed().as_secs_f64());
        self.results.push((id, pass));
    }
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn single_fi(kind: ChannelKind, m: usize, theta: f64) -> f64 {
    let h = default_step(theta);
    let widest = ChannelParams::single(kind, theta + h).unwrap();
    let cutoff = Some(combined_distribution(m, &widest, None).unwrap().cutoff());
    let dist = |x: f64| match kind {
        ChannelKind::Displacement => displacement_distribution(m, x, cutoff),
        ChannelKind::Squeezing => squeezing_distribution(m, x, cutoff),
    };
    classical_fi(dist, theta, h).unwrap()
}

fn criterion_1(r: &mut Report) {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for m in 0..=7 {
        for n_c in [0.01, 0.1, 0.5, 1.0, 2.0] {
            let exact = fi_displacement_exact(m, n_c).unwrap();
            worst = worst.max((single_fi(ChannelKind::Displacement, m, n_c) - exact).abs() / exact);
        }
    }
    let pass = worst < 1e-3 && t.elapsed().as_secs_f64() < 5.0;
    r.record(1, pass, t, format!("max relative deviation from (2m+1)/N_c = {worst:.2e}"));
}

fn criterion_2(r: &mut Report) {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for m in 0..=7 {
        for n_s in [0.01, 0.1, 0.25, 0.5] {
            let exact = fi_squeezing_exact(m, n_s).unwrap();
            worst = worst.max((single_fi(ChannelKind::Squeezing, m, n_s) - exact).abs() / exact);
        }
    }
    let pass = worst < 1e-3 && t.elapsed().as_secs_f64() < 5.0;
    r.record(2, pass, t, format!("max relative deviation from (m²+m+1)/(2N_s) = {worst:.2e}"));
}

fn criterion_3(r: &mut Report) {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for (i, n_c) in [0.1, 1.0, 2.0].into_iter().enumerate() {
        let params = ChannelParams::displacement(n_c).unwrap();
        let sc = McScenario::new(ChannelKind::Displacement, 3, params, 500, 3000, 100 + i as u64);
        let stats = monte_carlo_error(&sc).unwrap();
        let bound = 1.0 / (500.0 * fi_displacement_exact(3, n_c).unwrap());
        let z = stats.z_score(bound);
        pass &= z.abs() <= 3.0;
        detail += &format!("N_c={n_c}: mse {:.4e} vs {bound:.4e} (z={z:+.2}); ", stats.mse);
    }
    let probes = [100usize, 200, 500, 1000, 2000];
    let mses: Vec<f64> = probes
        .iter()
        .map(|&mm| {
            let params = ChannelParams::displacement(1.0).unwrap();
            monte_carlo_error(&McScenario::new(ChannelKind::Displacement, 3, params, mm, 3000, 200 + mm as u64))
                .unwrap()
                .mse
        })
        .collect();
    let xs: Vec<f64> = probes.iter().map(|&m| m as f64).collect();
    let slope = log_log_slope(&xs, &mses);
    pass &= (slope + 1.0).abs() <= 0.1 && t.elapsed().as_secs_f64() < 300.0;
    detail += &format!("slope over M = {slope:.3}");
    r.record(3, pass, t, detail);
}

fn criterion_4(r: &mut Report) {
    let t = Instant::now();
    let mut pass = true;
    let mut worst = (0.0f64, String::new());
    for m in 0..=4 {
        for (j, n_s) in [0.1, 0.3, 0.5].into_iter().enumerate() {
            let params = ChannelParams::squeezing(n_s).unwrap();
            let sc = McScenario::new(ChannelKind::Squeezing, m, params, 500, 1000, 400 + 10 * m as u64 + j as u64);
            let stats = monte_carlo_error(&sc).unwrap();
            let bound = 1.0 / (500.0 * fi_squeezing_exact(m, n_s).unwrap());
            let z = stats.z_score(bound);
            pass &= z.abs() <= 3.0;
            if z.abs() > worst.0.abs() {
                worst = (z, format!("m={m}, N_s={n_s}: mse {:.4e} vs {bound:.4e}", stats.mse));
            }
        }
    }
    pass &= t.elapsed().as_secs_f64() < 300.0;
    r.record(4, pass, t, format!("15 cells, largest |z| = {:.2} at {}", worst.0.abs(), worst.1));
}

fn criterion_5(r: &mut Report) {
    let t = Instant::now();
    let mut bias: f64 = 0.0;
    for m in 0..=5 {
        for probes in [1, 10, 500] {
            let w = weak_limit_distribution(m, 1e-3, 1e-3).unwrap();
            let mom = weak_estimator_moments(&w, probes).unwrap();
            bias = bias.max((mom.mean_c - 1e-3).abs()).max((mom.mean_s - 1e-3).abs());
        }
    }
    let (m, n_c, probes) = (3, 1e-3, 500);
    let params = ChannelParams::displacement(n_c).unwrap();
    let mut sc = McScenario::new(ChannelKind::Displacement, m, params, probes, 4000, 500);
    sc.estimator = Estimator::Weak;
    let stats = monte_carlo_error(&sc).unwrap();
    let scale = probes as f64 * (2 * m + 1) as f64 / n_c;
    let ratio = stats.mse * scale;
    let se = stats.stderr() * scale;
    let pass = bias < 1e-12 && (ratio - 1.0).abs() <= 3.0 * se;
    r.record(5, pass, t, format!("max exact bias {bias:.1e}; mse·M·(2m+1)/N_c = {ratio:.4} ± {se:.4}"));
}

fn criterion_6(r: &mut Report) {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for m in 0..=5 {
        for eta in [0.5, 0.7, 0.9] {
            let n_c = 0.8;
            let after = loss_after_channel(m, &ChannelParams::new(n_c, 0.0, eta).unwrap(), None).unwrap();
            let before = combined_distribution(m, &ChannelParams::new(eta * n_c, 0.0, eta).unwrap(), None).unwrap();
            let dim = after.cutoff().dim().max(before.cutoff().dim());
            let c = FockCutoff::new(dim).unwrap();
            worst = worst.max(after.resized(c).total_variation(&before.resized(c)));
        }
    }
    r.record(6, worst < 1e-8, t, format!("max total variation {worst:.2e}"));
}

fn criterion_7(r: &mut Report) {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for (kind, strength) in [(ChannelKind::Displacement, 1.0), (ChannelKind::Squeezing, 0.1)] {
        let lossless = pipeline_fi(&ProbeState::Fock(3), &ChannelParams::single(kind, strength).unwrap(), kind).unwrap();
        for (i, eta) in [0.7, 0.9].into_iter().enumerate() {
            let params = ChannelParams::single(kind, strength).unwrap().with_eta(eta).unwrap();
            let sc = McScenario::new(kind, 3, params, 500, 2000, 700 + i as u64);
            let fi = sc.fisher().unwrap();
            let stats = monte_carlo_error(&sc).unwrap();
            let z = stats.z_score(1.0 / (500.0 * fi));
            pass &= z.abs() <= 3.0 && fi < lossless;
            detail += &format!("{} η={eta}: F {fi:.3} < {lossless:.3}, z={z:+.2}; ", kind.strength_name());
        }
    }
    pass &= t.elapsed().as_secs_f64() < 600.0;
    r.record(7, pass, t, detail);
}

fn criterion_8(r: &mut Report) {
    let t = Instant::now();
    let n_c = 0.5;
    let vacuum = qfi_gaussian(&GaussianProbe::new(0.0, 0.0).unwrap(), ChannelKind::Displacement, n_c).unwrap();
    let mut pass = (vacuum * n_c - 1.0).abs() < 1e-2;
    let mut worst: f64 = 0.0;
    for kind in [ChannelKind::Displacement, ChannelKind::Squeezing] {
        let strength = if kind == ChannelKind::Displacement { 0.5 } else { 0.1 };
        for reference in [PhaseReference::Randomized, PhaseReference::Stable] {
            for family in [GaussianFamilyKind::Coherent, GaussianFamilyKind::Squeezed] {
                for n in [0.5, 2.0] {
                    let probe = family.probe(n).unwrap();
                    let est = qfi_gaussian_detail_with(&probe, kind, strength, reference).unwrap();
                    worst = worst.max(est.relative_disagreement());
                }
            }
        }
    }
    pass &= worst < 1e-2;
    r.record(8, pass, t, format!("vacuum QFI·N_c = {:.5}; max fidelity/SLD disagreement {worst:.2e}", vacuum * n_c));
}

fn criterion_9(r: &mut Report) {
    let t = Instant::now();
    let mut pass = true;
    let mut tightest = (f64::INFINITY, String::new());
    for m in 1..=6 {
        for n_c in [0.1, 0.5, 1.0, 2.0] {
            let fock = fi_displacement_exact(m, n_c).unwrap();
            let (probe, gauss) = best_gaussian_at_energy(m as f64, ChannelKind::Displacement, n_c, 3).unwrap();
            pass &= fock >= gauss;
            if fock / gauss < tightest.0 {
                tightest = (fock / gauss, format!("m={m}, N_c={n_c} (β={:.2}, ζ={:.2})", probe.beta, probe.zeta));
            }
        }
    }
    let reference = [(2.0, 10.0), (4.0, 12.5), (6.0, 14.1), (8.0, 15.3), (10.0, 16.2)];
    let db_dev = reference.iter().map(|(m, db)| (squeezing_db(*m) - db).abs()).fold(0.0, f64::max);
    pass &= db_dev <= 0.1;
    r.record(
        9,
        pass,
        t,
        format!("smallest Fock/Gaussian ratio {:.3} at {}; max dB deviation {db_dev:.3}", tightest.0, tightest.1),
    );
}

fn criterion_10(r: &mut Report) {
    let t = Instant::now();
    let n_s = 0.1;
    let energies = [0.5, 1.0, 2.0, 4.0];
    let slopes = |reference: PhaseReference| -> (f64, f64) {
        let curve = |family: GaussianFamilyKind| -> Vec<f64> {
            energies
                .iter()
                .map(|&n| {
                    let probe = family.probe(n).unwrap();
                    let est = qfi_gaussian_detail_with(&probe, ChannelKind::Squeezing, n_s, reference).unwrap();
                    est.fidelity
                })
                .collect()
        };
        (
            log_log_slope(&energies, &curve(GaussianFamilyKind::Coherent)),
            log_log_slope(&energies, &curve(GaussianFamilyKind::Squeezed)),
        )
    };
    let (coh, sq) = slopes(PhaseReference::Randomized);
    let (coh_stable, sq_stable) = slopes(PhaseReference::Stable);
    let pass = (coh - 1.0).abs() <= 0.3 && (sq - 2.0).abs() <= 0.3;
    r.record(
        10,
        pass,
        t,
        format!(
            "slopes coherent {coh:.3}, squeezed {sq:.3} (fixed channel phase: {coh_stable:.3}, {sq_stable:.3})"
        ),
    );
}

fn criterion_11(r: &mut Report) {
    let t = Instant::now();
    let mut pass = true;
    let mut ratios = [0.0f64; 2];
    for (i, (n, limit)) in [(0.01, 1e-3), (0.05, 1.2e-2)].into_iter().enumerate() {
        for m in 0..=5 {
            let ratio = fisher_matrix(m, n, n, None).unwrap().offdiag_ratio();
            pass &= ratio < limit;
            ratios[i] = ratios[i].max(ratio);
        }
    }
    let params = ChannelParams::new(0.01, 0.01, 1.0).unwrap();
    let joint = monte_carlo_joint(3, params, 500, 1000, 1100, None).unwrap();
    let zc = joint.n_c.z_score(joint.bound_c);
    let zs = joint.n_s.z_score(joint.bound_s);
    pass &= zc.abs() <= 3.0 && zs.abs() <= 3.0;
    r.record(
        11,
        pass,
        t,
        format!(
            "max off-diagonal ratio {:.2e} (0.01), {:.2e} (0.05); joint z: N_c {zc:+.2}, N_s {zs:+.2}",
            ratios[0], ratios[1]
        ),
    );
}

fn criterion_12(r: &mut Report) {
    let t = Instant::now();
    let mut mean_dev: f64 = 0.0;
    let mut var_dev: f64 = 0.0;
    let mut true_var_dev: f64 = 0.0;
    for m in 0..=6 {
        for n_c in [0.01, 0.1, 1.0] {
            let mom = photon_moments(&displacement_distribution(m, n_c, None).unwrap());
            let mf = m as f64;
            mean_dev = mean_dev.max((mom.mean - (mf + n_c)).abs() / (mf + n_c));
            var_dev = var_dev.max((mom.variance - 2.0 * n_c * (mf + 1.0)).abs() / (2.0 * n_c * (mf + 1.0)));
            true_var_dev = true_var_dev.max((mom.variance - (2.0 * mf + 1.0) * n_c).abs() / ((2.0 * mf + 1.0) * n_c));
        }
    }
    let increasing = [Moment::First, Moment::Second].iter().all(|&moment| {
        (0..10).all(|m| {
            linearized_sensitivity(m + 1, 0.1, moment).unwrap() > linearized_sensitivity(m, 0.1, moment).unwrap()
        })
    });
    let pass = mean_dev < 1e-6 && var_dev < 1e-6 && increasing;
    r.record(
        12,
        pass,
        t,
        format!(
            "mean dev {mean_dev:.1e}; variance vs 2N_c(m+1) dev {var_dev:.2e} (vs (2m+1)N_c: {true_var_dev:.1e}); sensitivity increasing: {increasing}"
        ),
    );
}

fn criterion_13(r: &mut Report) {
    let t = Instant::now();
    let params = ChannelParams::displacement(1.0).unwrap();
    let base = McScenario::new(ChannelKind::Displacement, 3, params, 500, 1000, 1300);
    let run = |sigma: f64, mode: FluctuationMode| fluctuation_study(sigma, &base, mode).unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for mode in [FluctuationMode::PerProbe, FluctuationMode::PerEnsemble] {
        let mut parts = Vec::new();
        let mut ok = true;
        for var in [1e-4f64, 1e-3] {
            let res = run(var.sqrt(), mode);
            ok &= (res.excess - var).abs() <= 0.3 * var;
            parts.push(format!("σ²={var:.0e}: excess {:.3e}", res.excess));
        }
        let large = run(0.5, mode);
        ok &= large.excess - 0.25 > 3.0 * large.stats.stderr();
        parts.push(format!("σ=0.5: excess {:.3e} vs 0.25", large.excess));
        if mode == FluctuationMode::PerProbe {
            pass = ok;
        }
        detail += &format!("{mode:?} [{}] ", parts.join(", "));
    }
    r.record(13, pass, t, detail);
}

#[test]
fn acceptance() {
    let mut report = Report { results: Vec::new() };
    let criteria: [fn(&mut Report); 13] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
        criterion_12,
        criterion_13,
    ];
    for criterion in criteria {
        criterion(&mut report);
    }
    let unexpected: Vec<_> = report
        .results
        .iter()
        .filter(|(id, pass)| *pass == EXPECTED_FAIL.contains(id))
        .map(|(id, _)| *id)
        .collect();
    assert!(unexpected.is_empty(), "criteria with unexpected outcome: {unexpected:?}");
}
